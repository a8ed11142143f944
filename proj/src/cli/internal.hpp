#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibasis/calibration.hpp"
#include "calibasis/cli.hpp"

namespace calibasis::cli {

namespace fs = std::filesystem;
using nlohmann::json;

struct Invocation {
  std::string command;
  fs::path config_path;
  json config;
  std::uint64_t seed = 1;
  fs::path out;
};

// Loads the config and resolves the seed: --seed wins over the config's "seed".
Invocation make_invocation(const std::string& command, const std::string& config_path,
                           std::optional<std::uint64_t> seed_flag, const std::string& out);

// 64-bit FNV-1a of the canonical (key-sorted) config dump and the seed.
std::string config_hash(const json& config, std::uint64_t seed);

// Exclusive use of an output directory for the lifetime of the object.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir);
  ~OutputDir();
  OutputDir(const OutputDir&) = delete;
  OutputDir& operator=(const OutputDir&) = delete;

  const fs::path& path() const { return dir_; }
  fs::path file(const std::string& name);
  void input(const fs::path& p) { inputs_.push_back(p.string()); }
  void write_manifest(const Invocation& inv, int exit_code, double wall_seconds,
                      const json& extra = json::object());

 private:
  fs::path dir_;
  fs::path lock_;
  std::vector<std::string> outputs_;
  std::vector<std::string> inputs_;
};

// Config accessors; paths resolve relative to the config file's directory.
fs::path config_path(const Invocation& inv, const std::string& key);
std::optional<fs::path> optional_path(const Invocation& inv, const std::string& key);
double threshold_from(const json& cfg, Index length);
RotationConfig rotation_config_from(const json& cfg);

int cmd_toy_gen(const Invocation& inv, std::ostream& out);
int cmd_basis(const Invocation& inv, std::ostream& out);
int cmd_emulate(const Invocation& inv, std::ostream& out);
int cmd_hm(const Invocation& inv, std::ostream& out);
int cmd_wave(const Invocation& inv, std::ostream& out);
int cmd_terminal_demo(const Invocation& inv, std::ostream& out);

}  // namespace calibasis::cli
