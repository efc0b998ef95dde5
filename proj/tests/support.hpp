#pragma once

#include <stdlib.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vitalcast/vitalcast.hpp"

namespace testsupport {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    auto pattern = (fs::temp_directory_path() / "vitalcast-test-XXXXXX").string();
    if (!::mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::optional<std::string> media_tool() {
  if (const char* env = std::getenv(vitalcast::kMediaToolEnv); env && *env) return std::string(env);
  std::string built = VITALCAST_TEST_MEDIA_TOOL;
  if (!built.empty() && fs::exists(built)) return built;
  return std::nullopt;
}

inline fs::path data_dir() { return VITALCAST_TEST_DATA; }
inline fs::path cli_path() { return VITALCAST_CLI; }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Relative path -> contents for every regular file under root.
inline std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

inline vitalcast::ProcessResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), cli_path().string());
  return vitalcast::run_process(args);
}

/// Renders a fixture (frames + emotion + pipeline.json) into root/name with the given overrides.
inline vitalcast::FixtureOutput make_fixture(const fs::path& root, const std::vector<std::string>& overrides) {
  return vitalcast::write_fixture(vitalcast::load_fixture_config(nlohmann::json::object(), overrides), root);
}

}  // namespace testsupport
