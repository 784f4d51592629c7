// Copyright 2026 The incrca Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the command-line tool and captures its exit code and stdout.
#ifndef INCRCA_TESTS_CLI_RUNNER_HPP_
#define INCRCA_TESTS_CLI_RUNNER_HPP_

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace cli_runner {

struct Result {
  int code;
  std::string out;
};

inline Result run(const std::string& args) {
  const auto capture = std::filesystem::temp_directory_path() /
                       ("incrca_cli_" + std::to_string(::getpid()) + ".out");
  const std::string cmd = std::string(INCRCA_CLI) + " " + args + " > " +
                          capture.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  std::ifstream in(capture);
  std::stringstream ss;
  ss << in.rdbuf();
  in.close();
  std::filesystem::remove(capture);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory removed on destruction.
struct Workspace {
  std::filesystem::path dir;
  explicit Workspace(const std::string& name) {
    dir = std::filesystem::temp_directory_path() /
          (name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
  }
  ~Workspace() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& leaf) const { return (dir / leaf).string(); }
};

}  // namespace cli_runner

#endif  // INCRCA_TESTS_CLI_RUNNER_HPP_
