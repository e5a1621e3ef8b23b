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

#include "pheno/process.hpp"

#include <fcntl.h>
#include <grp.h>
#include <poll.h>
#include <pwd.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <thread>
#include <utility>

#include "pheno/error.hpp"

namespace pheno::process {

namespace {

using Clock = std::chrono::steady_clock;

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

[[noreturn]] void child_fail(int fd, const char* what) {
  std::string msg = errno_text(what) + "\n";
  [[maybe_unused]] auto n = ::write(fd, msg.data(), msg.size());
  ::_exit(127);
}

} // namespace

std::string ExitStatus::describe() const {
  if (timed_out)
    return "timed out";
  if (exited)
    return "exit " + std::to_string(code);
  return std::string("killed by signal ") + std::to_string(signal);
}

double seconds(const struct timeval& tv) {
  return static_cast<double>(tv.tv_sec) + static_cast<double>(tv.tv_usec) * 1e-6;
}

std::optional<Credentials> lookup_user(const std::string& name) {
  struct passwd pw{};
  struct passwd* result = nullptr;
  std::vector<char> buf(16384);
  if (::getpwnam_r(name.c_str(), &pw, buf.data(), buf.size(), &result) != 0 || result == nullptr)
    return std::nullopt;
  return Credentials{pw.pw_uid, pw.pw_gid};
}

RunResult run(const SpawnOptions& options) {
  if (options.argv.empty())
    throw UsageError("cannot spawn a process without argv");

  int out_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0)
    throw IoError(errno_text("pipe"));

  // Prepare everything the child needs before fork.
  std::vector<std::string> env_storage;
  std::vector<char*> envp;
  if (options.env) {
    for (const auto& [k, v] : *options.env)
      env_storage.push_back(k + "=" + v);
    for (auto& s : env_storage)
      envp.push_back(s.data());
    envp.push_back(nullptr);
  }
  std::vector<std::string> argv_storage = options.argv;
  std::vector<char*> argv;
  for (auto& s : argv_storage)
    argv.push_back(s.data());
  argv.push_back(nullptr);
  const std::string stdin_path = options.stdin_path ? options.stdin_path->string() : "/dev/null";
  const std::string cwd = options.cwd ? options.cwd->string() : std::string{};

  const auto start = Clock::now();
  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw IoError(errno_text("fork"));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    int err_fd = options.capture_stderr ? out_pipe[1] : STDERR_FILENO;
    int in_fd = ::open(stdin_path.c_str(), O_RDONLY);
    if (in_fd < 0)
      child_fail(err_fd, "open stdin");
    ::dup2(in_fd, STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    if (options.capture_stderr)
      ::dup2(out_pipe[1], STDERR_FILENO);
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0)
      child_fail(STDERR_FILENO, "chdir");
    if (options.run_as) {
      if (::setgroups(0, nullptr) != 0 || ::setgid(options.run_as->gid) != 0 ||
          ::setuid(options.run_as->uid) != 0)
        child_fail(STDERR_FILENO, "drop privileges");
    }
    if (options.env)
      ::execve(argv[0], argv.data(), envp.data());
    else
      ::execv(argv[0], argv.data());
    child_fail(STDERR_FILENO, "exec");
  }
  ::setpgid(pid, pid);
  ::close(out_pipe[1]);

  RunResult result;
  bool timed_out = false;
  const bool limited = options.timeout.count() > 0;
  const auto deadline = start + options.timeout;
  char buf[4096];
  for (;;) {
    int wait_ms = -1;
    if (limited) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0) {
        timed_out = true;
        ::kill(-pid, SIGKILL);
        break;
      }
      wait_ms = static_cast<int>(left.count());
    }
    struct pollfd pfd{out_pipe[0], POLLIN, 0};
    int rc = ::poll(&pfd, 1, wait_ms);
    if (rc < 0) {
      if (errno == EINTR)
        continue;
      break;
    }
    if (rc == 0)
      continue;
    ssize_t n = ::read(out_pipe[0], buf, sizeof buf);
    if (n < 0 && errno == EINTR)
      continue;
    if (n <= 0)
      break;
    result.output.append(buf, static_cast<std::size_t>(n));
  }
  ::close(out_pipe[0]);

  int status = 0;
  struct rusage usage{};
  if (limited && !timed_out) {
    // Output closed but the child may still be running.
    for (;;) {
      pid_t r = ::wait4(pid, &status, WNOHANG, &usage);
      if (r == pid) {
        pid = -1;  // reaped
        break;
      }
      if (r < 0 && errno != EINTR)
        break;
      if (Clock::now() >= deadline) {
        timed_out = true;
        ::kill(-pid, SIGKILL);
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }
  while (pid > 0 && ::wait4(pid, &status, 0, &usage) < 0 && errno == EINTR) {
  }
  const auto end = Clock::now();

  ExitStatus& st = result.status;
  st.timed_out = timed_out;
  st.exited = WIFEXITED(status);
  st.code = st.exited ? WEXITSTATUS(status) : -1;
  st.signal = WIFSIGNALED(status) ? WTERMSIG(status) : 0;
  st.real_s = std::chrono::duration<double>(end - start).count();
  st.user_s = seconds(usage.ru_utime);
  st.sys_s = seconds(usage.ru_stime);
  st.max_rss_kb = usage.ru_maxrss;
  return result;
}

unsigned logical_cpu_count() {
  long n = ::sysconf(_SC_NPROCESSORS_ONLN);
  return n > 0 ? static_cast<unsigned>(n) : 1u;
}

unsigned physical_core_count() {
  std::set<std::pair<std::string, std::string>> cores;
  const unsigned logical = logical_cpu_count();
  for (unsigned cpu = 0; cpu < logical * 4 + 64; ++cpu) {
    const std::string base = "/sys/devices/system/cpu/cpu" + std::to_string(cpu) + "/topology/";
    std::ifstream core(base + "core_id");
    std::ifstream pkg(base + "physical_package_id");
    if (!core || !pkg)
      continue;
    std::string c, p;
    core >> c;
    pkg >> p;
    cores.emplace(p, c);
  }
  if (cores.empty())
    return logical;
  return static_cast<unsigned>(cores.size());
}

} // namespace pheno::process
