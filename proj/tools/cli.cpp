// Copyright 2026 The pheno Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "pheno/bench.hpp"
#include "pheno/catalog.hpp"
#include "pheno/contextualizer.hpp"
#include "pheno/error.hpp"
#include "pheno/identity.hpp"
#include "pheno/resolver.hpp"
#include "pheno/scanner.hpp"
#include "pheno/token.hpp"

namespace pheno::cli {

using nlohmann::json;

namespace {

// Handler outcome: exit code only; data is written by the handler itself.
using Handler = std::function<int()>;

std::string read_text(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError(std::string("cannot open ") + what + " '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<std::string> opt_string(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null())
    return std::nullopt;
  if (!it->is_string())
    throw ValidationError("config", key, std::string("config: '") + key + "' must be a string");
  return it->get<std::string>();
}

template <typename T>
T require(const std::optional<T>& value, const char* flag) {
  if (!value)
    throw UsageError(std::string("missing required option ") + flag +
                     " (pass it or set it in PHENO_CONFIG)");
  return *value;
}

identity::Timestamp now_or(const std::optional<std::int64_t>& now) {
  return now ? *now : static_cast<identity::Timestamp>(std::time(nullptr));
}

identity::Bytes signing_key(const std::optional<std::string>& key_file) {
  if (key_file)
    return identity::load_key(*key_file);
  if (const char* env = std::getenv("PHENO_SIGNING_KEY"); env != nullptr && *env != '\0')
    return identity::key_from_string(env);
  throw UsageError("no signing key: pass --key-file, set signing_key_file in PHENO_CONFIG, or "
                   "set PHENO_SIGNING_KEY");
}

void emit_error(std::ostream& err, const std::string& kind, const std::string& message,
                json extra = json::object()) {
  json j{{"error", kind}, {"message", message}};
  for (auto& [k, v] : extra.items())
    j[k] = v;
  err << j.dump() << '\n';
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err, int verbosity) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("pheno", sink);
  logger->set_pattern("[%l] %v");
  logger->set_level(verbosity >= 2   ? spdlog::level::debug
                    : verbosity == 1 ? spdlog::level::info
                                     : spdlog::level::warn);
  return logger;
}

} // namespace

GlobalConfig load_global_config(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text(path, "config file"));
  } catch (const json::parse_error& e) {
    throw ParseError("config '" + path + "' is not valid JSON: " + e.what(), e.byte);
  }
  if (!doc.is_object())
    throw ValidationError("config", "", "config must be a JSON object");
  GlobalConfig cfg;
  cfg.catalog = opt_string(doc, "catalog");
  cfg.scripts_dir = opt_string(doc, "scripts_dir");
  cfg.sandbox_root = opt_string(doc, "sandbox_root");
  cfg.identity_config = opt_string(doc, "identity_config");
  cfg.principal_store = opt_string(doc, "principal_store");
  cfg.signing_key_file = opt_string(doc, "signing_key_file");
  if (auto it = doc.find("verbosity"); it != doc.end() && it->is_number_integer())
    cfg.verbosity = it->get<int>();
  return cfg;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  GlobalConfig cfg;
  if (const char* path = std::getenv("PHENO_CONFIG"); path != nullptr && *path != '\0') {
    try {
      cfg = load_global_config(path);
    } catch (const Error& e) {
      emit_error(err, e.kind(), e.what());
      return kExitUsage;
    }
  }

  CLI::App app{"Application contextualization, identity mapping, parameter scans and "
               "benchmark analysis",
               "pheno"};
  app.require_subcommand(1);
  int verbose_flags = 0;
  app.add_flag("-v,--verbose", verbose_flags, "Increase log verbosity (repeatable)");

  Handler handler;
  std::shared_ptr<spdlog::logger> log;

  // ---- ctx ---------------------------------------------------------------
  auto* ctx_cmd = app.add_subcommand("ctx", "Application catalog and contextualizer");
  ctx_cmd->require_subcommand(1);

  std::optional<std::string> catalog_path, metadata, root, scripts, run_as, registry;
  bool dry_run = false, pretty = false;
  int installer_timeout = 0;

  auto load_catalog = [&] {
    auto c = catalog::load_catalog(require(catalog_path ? catalog_path : cfg.catalog, "--catalog"));
    log->info("catalog loaded with {} application(s)", c.size());
    return c;
  };

  auto* plan_cmd = ctx_cmd->add_subcommand("plan", "Resolve the install plan for a metadata request");
  plan_cmd->add_option("--catalog", catalog_path, "Catalog JSON file");
  plan_cmd->add_option("--metadata", metadata, "Metadata file or URL")->required();
  plan_cmd->callback([&] {
    handler = [&] {
      auto cat = load_catalog();
      auto request = ctx::fetch_metadata(ctx::MetadataSource::from_location(*metadata));
      auto plan = resolver::resolve(cat, request);
      out << resolver::to_json(plan).dump(2) << '\n';
      return kExitOk;
    };
  });

  auto* run_cmd = ctx_cmd->add_subcommand("run", "Download and install the requested applications");
  run_cmd->add_option("--catalog", catalog_path, "Catalog JSON file");
  run_cmd->add_option("--metadata", metadata, "Metadata file or URL")->required();
  run_cmd->add_option("--root", root, "Sandbox root directory");
  run_cmd->add_option("--scripts", scripts, "Directory holding installer scripts");
  run_cmd->add_option("--run-as", run_as, "Run installers as this account");
  run_cmd->add_option("--timeout", installer_timeout, "Per-installer time limit in seconds")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_flag("--dry-run", dry_run, "Report the plan without touching the sandbox");
  run_cmd->add_flag("--pretty", pretty, "Human-readable table instead of JSON");
  run_cmd->callback([&] {
    handler = [&] {
      auto cat = load_catalog();
      ctx::Options opts;
      opts.mode = dry_run ? ctx::Mode::dry_run : ctx::Mode::execute;
      if (!dry_run)
        opts.root = require(root ? root : cfg.sandbox_root, "--root");
      else if (root || cfg.sandbox_root)
        opts.root = root ? *root : *cfg.sandbox_root;
      opts.scripts_dir = scripts ? *scripts : cfg.scripts_dir.value_or("scripts");
      opts.run_as = run_as;
      opts.installer_timeout = std::chrono::seconds(installer_timeout);
      auto report =
          ctx::contextualize(cat, ctx::MetadataSource::from_location(*metadata), opts);
      if (pretty)
        out << ctx::to_table(report);
      else
        out << ctx::to_json(report).dump(2) << '\n';
      if (!report.success()) {
        const auto& step = report.steps.back();
        emit_error(err, "install-failed",
                   "step " + std::to_string(*report.failed_at) + " (" + step.app + ") failed",
                   {{"failed_at", *report.failed_at}});
        return kExitDomain;
      }
      return kExitOk;
    };
  });

  auto* images_cmd = ctx_cmd->add_subcommand("images", "List images ready for contextualization");
  images_cmd->add_option("--registry", registry, "Image registry JSON file")->required();
  images_cmd->callback([&] {
    handler = [&] {
      auto images = ctx::parse_image_registry(read_text(*registry, "image registry"));
      out << ctx::to_json(ctx::filter_ready_images(images)).dump(2) << '\n';
      return kExitOk;
    };
  });

  auto* lint_cmd = ctx_cmd->add_subcommand("lint", "Validate a catalog and report dependency cycles");
  lint_cmd->add_option("--catalog", catalog_path, "Catalog JSON file");
  lint_cmd->callback([&] {
    handler = [&] {
      auto cat = load_catalog();
      json issues = json::array();
      for (const auto& i : cat.validate())
        issues.push_back({{"application", i.application}, {"field", i.field}, {"message", i.message}});
      auto cycles = resolver::check_cycles(cat);
      const bool ok = issues.empty() && cycles.empty();
      json report{{"valid", ok}, {"issues", issues}, {"cycles", cycles}};
      if (!ok) {
        err << report.dump() << '\n';
        return kExitDomain;
      }
      out << report.dump(2) << '\n';
      return kExitOk;
    };
  });

  // ---- auth --------------------------------------------------------------
  auto* auth_cmd = app.add_subcommand("auth", "Identity mapping and tokens");
  auth_cmd->require_subcommand(1);
  std::optional<std::string> id_config, store_path, assertion_path, username, key_file, subject,
      tenant, token_text;
  std::optional<std::int64_t> now, lifetime;

  auto mapping = [&] {
    return identity::MappingConfig::load(
        require(id_config ? id_config : cfg.identity_config, "--config"));
  };
  auto store = [&] {
    return identity::JsonFilePrincipalStore(
        require(store_path ? store_path : cfg.principal_store, "--store"));
  };
  auto report_decision = [&](const identity::Decision& d) {
    if (d.allowed) {
      out << d.to_json().dump(2) << '\n';
      return kExitOk;
    }
    emit_error(err, "denied", "access denied: " + identity::to_string(d.reason), d.to_json());
    return kExitDomain;
  };

  auto* map_vo_cmd = auth_cmd->add_subcommand("map-vo", "Map a VO assertion to a tenant");
  map_vo_cmd->add_option("--config", id_config, "Mapping config JSON file");
  map_vo_cmd->add_option("--store", store_path, "Principal store JSON file");
  map_vo_cmd->add_option("--assertion", assertion_path, "Assertion JSON file")->required();
  map_vo_cmd->add_option("--now", now, "Evaluation time (Unix seconds)");
  map_vo_cmd->callback([&] {
    handler = [&] {
      auto cfg_map = mapping();
      auto st = store();
      auto a = identity::parse_assertion(read_text(*assertion_path, "assertion"));
      auto d = identity::map_assertion(cfg_map, st, a, now_or(now));
      if (d.created)
        log->info("auto-created principal '{}' in tenant '{}'", d.username, d.tenant);
      return report_decision(d);
    };
  });

  auto* map_user_cmd = auth_cmd->add_subcommand("map-user", "Map an authenticated username to a tenant");
  map_user_cmd->add_option("--config", id_config, "Mapping config JSON file");
  map_user_cmd->add_option("--store", store_path, "Principal store JSON file");
  map_user_cmd->add_option("--username", username, "Authenticated username")->required();
  map_user_cmd->callback([&] {
    handler = [&] {
      auto cfg_map = mapping();
      auto st = store();
      return report_decision(identity::map_username(cfg_map, st, *username));
    };
  });

  auto* token_cmd = auth_cmd->add_subcommand("token", "Issue or verify scoped tokens");
  token_cmd->require_subcommand(1);
  auto* issue_cmd = token_cmd->add_subcommand("issue", "Issue a token");
  issue_cmd->add_option("--key-file", key_file, "Signing key file");
  issue_cmd->add_option("--subject", subject, "Username")->required();
  issue_cmd->add_option("--tenant", tenant, "Tenant")->required();
  issue_cmd->add_option("--lifetime", lifetime, "Lifetime in seconds")->required();
  issue_cmd->add_option("--now", now, "Issue time (Unix seconds)");
  issue_cmd->callback([&] {
    handler = [&] {
      auto key = signing_key(key_file ? key_file : cfg.signing_key_file);
      auto tok = identity::issue_token(key, *subject, *tenant, *lifetime, now_or(now));
      out << json{{"token", identity::encode_token(tok)},
                  {"subject", tok.subject},
                  {"tenant", tok.tenant},
                  {"issued_at", tok.issued_at},
                  {"expires_at", tok.expires_at}}
                 .dump(2)
          << '\n';
      return kExitOk;
    };
  });
  auto* verify_cmd = token_cmd->add_subcommand("verify", "Verify a token");
  verify_cmd->add_option("--key-file", key_file, "Signing key file");
  verify_cmd->add_option("--token", token_text, "Encoded token")->required();
  verify_cmd->add_option("--now", now, "Verification time (Unix seconds)");
  verify_cmd->callback([&] {
    handler = [&] {
      auto key = signing_key(key_file ? key_file : cfg.signing_key_file);
      auto v = identity::verify_token(key, *token_text, now_or(now));
      json j{{"verdict", identity::to_string(v.verdict)}};
      if (v.token) {
        j["subject"] = v.token->subject;
        j["tenant"] = v.token->tenant;
        j["expires_at"] = v.token->expires_at;
      }
      if (v.valid()) {
        out << j.dump(2) << '\n';
        return kExitOk;
      }
      emit_error(err, "invalid-token", "token rejected: " + identity::to_string(v.verdict), j);
      return kExitDomain;
    };
  });

  // ---- scan --------------------------------------------------------------
  auto* scan_cmd = app.add_subcommand("scan", "Statically partitioned parameter scan");
  scan_cmd->require_subcommand(1);
  int steps = 120, workers = 1;
  std::string ma_range = "90:500", tb_range = "1.1:60", kernel_spec = "builtin";
  std::uint64_t work_units = 0;
  std::int64_t timeout_ms = 0;
  std::optional<std::string> out_path, in_path, lhc_path, lep_path;

  auto* scan_run = scan_cmd->add_subcommand("run", "Run a scan");
  scan_run->add_option("--steps", steps, "Grid values per axis")->capture_default_str();
  scan_run->add_option("--ma", ma_range, "M_A range lo:hi")->capture_default_str();
  scan_run->add_option("--tb", tb_range, "tan(beta) range lo:hi")->capture_default_str();
  scan_run->add_option("--workers", workers, "Worker processes")->capture_default_str();
  scan_run->add_option("--kernel", kernel_spec, "builtin or cmd:<command>")->capture_default_str();
  scan_run->add_option("--work-units", work_units, "Builtin kernel iterations per point")
      ->capture_default_str();
  scan_run->add_option("--timeout-ms", timeout_ms, "Per-point time limit (0 = none)")
      ->check(CLI::NonNegativeNumber);
  scan_run->add_option("--out", out_path, "Merged output file")->required();
  scan_run->callback([&] {
    handler = [&] {
      scan::ScanJob job;
      std::tie(job.grid.ma_min, job.grid.ma_max) = scan::parse_range(ma_range);
      std::tie(job.grid.tb_min, job.grid.tb_max) = scan::parse_range(tb_range);
      job.grid.steps_per_axis = steps;
      job.kernel = scan::parse_kernel(kernel_spec, work_units);
      job.out = *out_path;
      job.workers = workers;
      job.point_timeout = std::chrono::milliseconds(timeout_ms);
      if (steps < 1 || workers < 1)
        throw UsageError("--steps and --workers must be at least 1");
      log->info("scanning {} points with {} worker(s)", job.grid.size(), workers);
      auto summary = scan::run_scan(job);
      json parts = json::array();
      for (const auto& p : summary.partitions)
        parts.push_back({{"worker", p.worker_index}, {"lo", p.lo}, {"hi", p.hi}});
      out << json{{"out", job.out.string()},
                  {"points", summary.points},
                  {"workers", workers},
                  {"partitions", parts},
                  {"wall_s", summary.wall_s}}
                 .dump(2)
          << '\n';
      return kExitOk;
    };
  });

  auto* scan_split = scan_cmd->add_subcommand("split", "Write LHC- and LEP-excluded points to two files");
  scan_split->add_option("--in", in_path, "Merged scan file")->required();
  scan_split->add_option("--lhc", lhc_path, "Output for LHC-excluded points")->required();
  scan_split->add_option("--lep", lep_path, "Output for LEP-excluded points")->required();
  scan_split->callback([&] {
    handler = [&] {
      scan::split_results(*in_path, *lhc_path, *lep_path);
      out << json{{"lhc", *lhc_path}, {"lep", *lep_path}}.dump(2) << '\n';
      return kExitOk;
    };
  });

  // ---- bench -------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "Concurrent process timing and analysis");
  bench_cmd->require_subcommand(1);
  int processes = 1;
  std::string workload_spec = "builtin", phase = "builtin", report_kind = "json";
  std::vector<std::string> baselines, inputs;
  std::optional<std::string> bench_out;

  auto* bench_run = bench_cmd->add_subcommand("run", "Time P simultaneous workload processes");
  bench_run->add_option("--processes", processes, "Simultaneous processes")->required();
  bench_run->add_option("--workload", workload_spec, "builtin or cmd:<command>")->capture_default_str();
  bench_run->add_option("--work-units", work_units, "Builtin workload iterations")
      ->capture_default_str();
  bench_run->add_option("--phase", phase, "Phase label stored with the run")->capture_default_str();
  bench_run->add_option("--out", bench_out, "Run file to write")->required();
  bench_run->callback([&] {
    handler = [&] {
      auto run = bench::run_concurrent(bench::parse_workload(workload_spec, work_units), processes,
                                       phase);
      bench::save_runs(*bench_out, {run});
      out << bench::to_json(run).dump(2) << '\n';
      if (run.failed) {
        emit_error(err, "bench-failed", "at least one workload process failed");
        return kExitDomain;
      }
      return kExitOk;
    };
  });

  auto* bench_analyze = bench_cmd->add_subcommand("analyze", "Analyze saved runs or timing fixtures");
  bench_analyze->add_option("--baseline", baselines, "Baseline run files")->expected(1, -1);
  bench_analyze->add_option("--report", report_kind, "table or json")
      ->check(CLI::IsMember({"table", "json"}))
      ->capture_default_str();
  bench_analyze->add_option("runs", inputs, "Run files to analyze");
  bench_analyze->callback([&] {
    handler = [&] {
      std::vector<bench::BenchRun> runs, base;
      for (const auto& f : baselines)
        for (auto& r : bench::load_runs(f))
          base.push_back(std::move(r));
      for (const auto& f : inputs)
        for (auto& r : bench::load_runs(f))
          runs.push_back(std::move(r));
      if (runs.empty())
        runs = base;
      if (runs.empty())
        throw UsageError("nothing to analyze: pass run files and/or --baseline");
      auto report = bench::analyze(runs, base);
      if (report_kind == "table")
        out << bench::to_table(report);
      else
        out << bench::to_json(report).dump(2) << '\n';
      return kExitOk;
    };
  });

  // argv for CLI11
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("pheno");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage)
    argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Show the help of the deepest subcommand that was selected.
    const CLI::App* deepest = &app;
    while (!deepest->get_subcommands().empty())
      deepest = deepest->get_subcommands().front();
    err << e.what() << "\n\n" << deepest->help();
    return kExitUsage;
  }

  log = make_logger(err, std::max(verbose_flags, cfg.verbosity));
  if (!handler) {
    err << app.help();
    return kExitUsage;
  }
  try {
    return handler();
  } catch (const UsageError& e) {
    emit_error(err, e.kind(), e.what());
    return kExitUsage;
  } catch (const CycleError& e) {
    emit_error(err, e.kind(), e.what(), {{"cycle", e.path()}});
    return kExitDomain;
  } catch (const ValidationError& e) {
    emit_error(err, e.kind(), e.what(), {{"subject", e.subject()}, {"field", e.field()}});
    return kExitDomain;
  } catch (const ParseError& e) {
    emit_error(err, e.kind(), e.what(), {{"position", e.position()}});
    return kExitDomain;
  } catch (const Error& e) {
    emit_error(err, e.kind(), e.what());
    return kExitDomain;
  } catch (const std::filesystem::filesystem_error& e) {
    emit_error(err, "io", e.what());
    return kExitDomain;
  }
}

} // namespace pheno::cli
