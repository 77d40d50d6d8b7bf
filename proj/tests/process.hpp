#pragma once

#include <fcntl.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace bitext::testing {

inline std::filesystem::path cli_path() { return BITEXT_CLI_PATH; }

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
  double seconds = 0.0;
  long max_rss_kb = 0;
};

// Starts the CLI with stdout/stderr redirected to files. Returns the pid.
inline pid_t spawn_cli(const std::vector<std::string>& args, const std::filesystem::path& out,
                       const std::filesystem::path& err,
                       const std::filesystem::path& cwd = {},
                       const std::vector<std::string>& env = {}) {
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    const int o = open(out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int e = open(err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (o < 0 || e < 0) _exit(127);
    dup2(o, STDOUT_FILENO);
    dup2(e, STDERR_FILENO);
    if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(127);
    for (const auto& kv : env) putenv(const_cast<char*>(kv.c_str()));
    const std::string exe = cli_path().string();
    std::vector<char*> argv;
    argv.push_back(const_cast<char*>(exe.c_str()));
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    execv(exe.c_str(), argv.data());
    _exit(127);
  }
  return pid;
}

// Runs the CLI to completion, capturing output, wall time and peak RSS.
inline ProcessResult run_cli(const std::vector<std::string>& args,
                             const std::filesystem::path& cwd = {},
                             const std::vector<std::string>& env = {}) {
  TempDir io;
  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = spawn_cli(args, io / "out", io / "err", cwd, env);
  int status = 0;
  rusage usage{};
  if (wait4(pid, &status, 0, &usage) != pid) throw std::runtime_error("wait4 failed");
  ProcessResult r;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  r.max_rss_kb = usage.ru_maxrss;
  r.out = read_file(io / "out");
  r.err = read_file(io / "err");
  return r;
}

}  // namespace bitext::testing
