#pragma once

// Spawns the corvet binary and captures exit code, stdout and stderr.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace support {

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline CmdResult run_cli(const std::string& args) {
  namespace fs = std::filesystem;
  static int counter = 0;
  auto dir = fs::temp_directory_path() / "corvet_cli_io";
  fs::create_directories(dir);
  auto out_file = dir / ("out" + std::to_string(counter));
  auto err_file = dir / ("err" + std::to_string(counter));
  ++counter;

  std::string cmd = std::string(CORVET_CLI_PATH) + " " + args + " >" +
                    out_file.string() + " 2>" + err_file.string();
  int rc = std::system(cmd.c_str());

  CmdResult res;
  res.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  res.out = slurp(out_file);
  res.err = slurp(err_file);
  return res;
}

}  // namespace support
