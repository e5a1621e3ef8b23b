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

#include "pheno/contextualizer.hpp"

#include <curl/curl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>

#include <fmt/format.h>

#include "pheno/error.hpp"
#include "pheno/process.hpp"

namespace pheno::ctx {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_curl() {
  static std::once_flag once;
  std::call_once(once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

struct CurlDeleter {
  void operator()(CURL* c) const { curl_easy_cleanup(c); }
};
using CurlHandle = std::unique_ptr<CURL, CurlDeleter>;

CurlHandle make_handle(const std::string& url) {
  ensure_curl();
  CurlHandle h(curl_easy_init());
  if (!h)
    throw FetchError("cannot initialise libcurl");
  curl_easy_setopt(h.get(), CURLOPT_URL, url.c_str());
  curl_easy_setopt(h.get(), CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(h.get(), CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(h.get(), CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(h.get(), CURLOPT_CONNECTTIMEOUT, 30L);
  return h;
}

size_t append_to_string(char* data, size_t size, size_t n, void* user) {
  static_cast<std::string*>(user)->append(data, size * n);
  return size * n;
}

size_t append_to_file(char* data, size_t size, size_t n, void* user) {
  return std::fwrite(data, size, n, static_cast<std::FILE*>(user)) * size;
}

void perform(CURL* h, const std::string& url) {
  char err[CURL_ERROR_SIZE] = {0};
  curl_easy_setopt(h, CURLOPT_ERRORBUFFER, err);
  CURLcode rc = curl_easy_perform(h);
  if (rc != CURLE_OK)
    throw FetchError(fmt::format("fetching '{}' failed: {}", url,
                                 err[0] != '\0' ? err : curl_easy_strerror(rc)));
}

// Size reported by the server, or -1 when unknown.
std::int64_t remote_size(const std::string& url) {
  auto h = make_handle(url);
  curl_easy_setopt(h.get(), CURLOPT_NOBODY, 1L);
  perform(h.get(), url);
  curl_off_t len = -1;
  curl_easy_getinfo(h.get(), CURLINFO_CONTENT_LENGTH_DOWNLOAD_T, &len);
  return static_cast<std::int64_t>(len);
}

void download_to(const std::string& url, const fs::path& dest) {
  const fs::path tmp = dest.string() + ".partial";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (f == nullptr)
    throw IoError("cannot write '" + tmp.string() + "'");
  try {
    auto h = make_handle(url);
    curl_easy_setopt(h.get(), CURLOPT_WRITEFUNCTION, append_to_file);
    curl_easy_setopt(h.get(), CURLOPT_WRITEDATA, f);
    perform(h.get(), url);
  } catch (...) {
    std::fclose(f);
    fs::remove(tmp);
    throw;
  }
  std::fclose(f);
  fs::rename(tmp, dest);
}

std::string url_basename(const std::string& url) {
  std::string path = url.substr(0, url.find_first_of("?#"));
  while (!path.empty() && path.back() == '/')
    path.pop_back();
  auto slash = path.find_last_of('/');
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  if (base.empty() || base.find(':') != std::string::npos)
    return "archive";
  return base;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FetchError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Download cache index: URL -> {file, size}. Lives next to the archives.
class DownloadCache {
public:
  explicit DownloadCache(fs::path dir) : dir_(std::move(dir)), index_path_(dir_ / "index.json") {
    if (fs::exists(index_path_)) {
      try {
        index_ = json::parse(read_file(index_path_));
      } catch (const std::exception&) {
        index_ = json::object();
      }
    }
    if (!index_.is_object())
      index_ = json::object();
  }

  bool hit(const std::string& url, const fs::path& archive, std::int64_t size) const {
    if (size < 0 || !fs::exists(archive))
      return false;
    auto it = index_.find(url);
    if (it == index_.end() || !it->is_object())
      return false;
    std::error_code ec;
    auto on_disk = fs::file_size(archive, ec);
    return !ec && it->value("file", "") == archive.filename().string() &&
           it->value("size", std::int64_t{-1}) == size && static_cast<std::int64_t>(on_disk) == size;
  }

  void record(const std::string& url, const fs::path& archive) {
    index_[url] = {{"file", archive.filename().string()},
                   {"size", static_cast<std::int64_t>(fs::file_size(archive))}};
    const fs::path tmp = index_path_.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << index_.dump(2) << '\n';
    }
    fs::rename(tmp, index_path_);
  }

private:
  fs::path dir_;
  fs::path index_path_;
  json index_ = json::object();
};

StepReport planned_step(const catalog::ResolvedApp& app) {
  StepReport s;
  s.app = app.name;
  s.version_key = app.version_key;
  s.installer = app.installer;
  s.download_url = app.download_url;
  s.download = app.download_url.empty() ? DownloadOutcome::none : DownloadOutcome::planned;
  return s;
}

void check_root(const fs::path& root) {
  if (root.empty())
    throw UsageError("a sandbox root directory is required in execute mode");
  if (!fs::is_directory(root))
    throw IoError("sandbox root '" + root.string() + "' does not exist");
  if (::access(root.c_str(), W_OK) != 0)
    throw IoError("sandbox root '" + root.string() + "' is not writable");
}

void run_step(StepReport& step, const fs::path& root, const Options& opts,
              const std::optional<process::Credentials>& creds, DownloadCache& cache) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  if (!step.download_url.empty()) {
    const fs::path archive =
        root / "downloads" / fmt::format("{}-{}-{}", step.app, step.version_key,
                                         url_basename(step.download_url));
    step.archive = archive.string();
    try {
      const std::int64_t size = remote_size(step.download_url);
      if (cache.hit(step.download_url, archive, size)) {
        step.download = DownloadOutcome::cached;
      } else {
        download_to(step.download_url, archive);
        cache.record(step.download_url, archive);
        step.download = DownloadOutcome::downloaded;
      }
    } catch (const Error& e) {
      step.download = DownloadOutcome::failed;
      step.output = e.what();
      step.duration_s = elapsed();
      return;
    }
  } else {
    step.download = DownloadOutcome::none;
  }

  const fs::path script = opts.scripts_dir / step.installer;
  if (!fs::is_regular_file(script)) {
    step.output = "installer script '" + script.string() + "' not found";
    step.duration_s = elapsed();
    return;
  }

  const fs::path prefix = root / "apps" / step.app / step.version_key;
  fs::create_directories(prefix);
  if (creds) {
    if (::chown(prefix.c_str(), creds->uid, creds->gid) != 0) {
      step.output = "cannot hand install prefix to the installer account";
      step.duration_s = elapsed();
      return;
    }
  }

  process::SpawnOptions spawn;
  spawn.argv = {"/bin/sh", fs::absolute(script).string()};
  spawn.env = std::map<std::string, std::string>{
      {"PATH", "/usr/local/bin:/usr/bin:/bin"},
      {"HOME", prefix.string()},
      {"APP_NAME", step.app},
      {"APP_VERSION", step.version_key},
      {"APP_ARCHIVE", step.archive},
      {"INSTALL_PREFIX", prefix.string()},
  };
  spawn.cwd = prefix;
  spawn.run_as = creds;
  spawn.timeout = opts.installer_timeout;
  try {
    auto result = process::run(spawn);
    step.output = std::move(result.output);
    if (result.status.exited)
      step.exit_status = result.status.code;
    else
      step.exit_status = 128 + result.status.signal;
    if (result.status.timed_out)
      step.output += "\n[installer timed out]";
  } catch (const Error& e) {
    step.output = e.what();
  }
  step.duration_s = elapsed();
}

} // namespace

MetadataSource MetadataSource::from_location(std::string location) {
  MetadataSource src;
  src.kind = location.find("://") != std::string::npos ? Kind::fixed_url : Kind::local_file;
  src.location = std::move(location);
  return src;
}

std::string fetch_url(const std::string& url) {
  std::string body;
  auto h = make_handle(url);
  curl_easy_setopt(h.get(), CURLOPT_WRITEFUNCTION, append_to_string);
  curl_easy_setopt(h.get(), CURLOPT_WRITEDATA, &body);
  perform(h.get(), url);
  return body;
}

resolver::InstallRequest fetch_metadata(const MetadataSource& source) {
  if (source.location.empty())
    throw UsageError("metadata location must not be empty");
  const std::string payload = source.kind == MetadataSource::Kind::fixed_url
                                  ? fetch_url(source.location)
                                  : read_file(source.location);
  return resolver::parse_request(payload);
}

std::string to_string(DownloadOutcome outcome) {
  switch (outcome) {
  case DownloadOutcome::planned:
    return "planned";
  case DownloadOutcome::downloaded:
    return "downloaded";
  case DownloadOutcome::cached:
    return "cached";
  case DownloadOutcome::none:
    return "none";
  case DownloadOutcome::failed:
    return "failed";
  }
  return "unknown";
}

std::size_t ExecutionReport::download_count() const {
  std::size_t n = 0;
  for (const auto& s : steps)
    if (s.download == DownloadOutcome::downloaded)
      ++n;
  return n;
}

ExecutionReport contextualize(const catalog::Catalog& catalog,
                              const resolver::InstallRequest& request, const Options& options) {
  const auto plan = resolver::resolve(catalog, request);

  ExecutionReport report;
  report.mode = options.mode;
  if (options.mode == Mode::dry_run) {
    for (const auto& app : plan.steps)
      report.steps.push_back(planned_step(app));
    return report;
  }

  check_root(options.root);
  std::optional<process::Credentials> creds;
  if (options.run_as) {
    creds = process::lookup_user(*options.run_as);
    if (!creds)
      throw UsageError("unknown installer account '" + *options.run_as + "'");
  }
  if (!plan.empty())
    fs::create_directories(options.root / "downloads");
  DownloadCache cache(options.root / "downloads");

  for (const auto& app : plan.steps) {
    report.steps.push_back(planned_step(app));
    StepReport& step = report.steps.back();
    run_step(step, options.root, options, creds, cache);
    if (step.download == DownloadOutcome::failed || step.exit_status.value_or(-1) != 0) {
      report.failed_at = report.steps.size();
      break;
    }
  }
  return report;
}

ExecutionReport contextualize(const catalog::Catalog& catalog, const MetadataSource& source,
                              const Options& options) {
  return contextualize(catalog, fetch_metadata(source), options);
}

json to_json(const ExecutionReport& report) {
  json steps = json::array();
  for (const auto& s : report.steps) {
    steps.push_back({
        {"app", s.app},
        {"version", s.version_key},
        {"installer", s.installer},
        {"download_url", s.download_url},
        {"download", to_string(s.download)},
        {"archive", s.archive.empty() ? json(nullptr) : json(s.archive)},
        {"exit_status", s.exit_status ? json(*s.exit_status) : json(nullptr)},
        {"duration_s", s.duration_s},
        {"output", s.output},
    });
  }
  json j{{"mode", report.mode == Mode::dry_run ? "dry-run" : "execute"}, {"steps", steps}};
  if (report.success())
    j["overall"] = "success";
  else
    j["overall"] = {{"failed_at", *report.failed_at}};
  return j;
}

std::string to_table(const ExecutionReport& report) {
  std::string out = fmt::format("{:>3}  {:<20} {:<10} {:<10} {:>6} {:>9}  {}\n", "#", "APP",
                                "VERSION", "DOWNLOAD", "EXIT", "SECONDS", "URL");
  std::size_t i = 0;
  for (const auto& s : report.steps) {
    ++i;
    out += fmt::format("{:>3}  {:<20} {:<10} {:<10} {:>6} {:>9.2f}  {}\n", i, s.app,
                       s.version_key, to_string(s.download),
                       s.exit_status ? std::to_string(*s.exit_status) : "-", s.duration_s,
                       s.download_url);
  }
  if (report.success())
    out += "overall: success\n";
  else
    out += fmt::format("overall: failed at step {}\n", *report.failed_at);
  return out;
}

std::vector<ImageRecord> filter_ready_images(const std::vector<ImageRecord>& images) {
  std::vector<ImageRecord> ready;
  for (const auto& img : images) {
    auto it = img.properties.find("feynapps");
    if (it != img.properties.end() && it->second == "true")
      ready.push_back(img);
  }
  return ready;
}

std::vector<ImageRecord> parse_image_registry(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("image registry is not valid JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_array())
    throw FormatError("image registry must be a JSON list");
  std::vector<ImageRecord> images;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("id") || !item["id"].is_string() ||
        item["id"].get<std::string>().empty())
      throw FormatError("image record needs a non-empty string 'id'");
    ImageRecord rec;
    rec.id = item["id"].get<std::string>();
    if (auto it = item.find("properties"); it != item.end()) {
      if (!it->is_object())
        throw FormatError("image '" + rec.id + "': 'properties' must be an object");
      for (const auto& [k, v] : it->items())
        rec.properties[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    images.push_back(std::move(rec));
  }
  return images;
}

json to_json(const std::vector<ImageRecord>& images) {
  json arr = json::array();
  for (const auto& img : images)
    arr.push_back({{"id", img.id}, {"properties", img.properties}});
  return arr;
}

} // namespace pheno::ctx
