#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "calibasis/error.hpp"
#include "internal.hpp"

#ifndef CALIBASIS_VERSION
#define CALIBASIS_VERSION "0.0.0"
#endif

namespace calibasis::cli {

Invocation make_invocation(const std::string& command, const std::string& path,
                           std::optional<std::uint64_t> seed_flag, const std::string& out) {
  Invocation inv;
  inv.command = command;
  inv.out = out;
  inv.config = json::object();
  if (!path.empty()) {
    inv.config_path = fs::absolute(path);
    std::ifstream in(inv.config_path);
    if (!in) throw ParseError(path, 0, "cannot open config file");
    try {
      in >> inv.config;
    } catch (const json::parse_error& e) {
      throw ParseError(path, 0, std::string("invalid JSON: ") + e.what());
    }
    if (!inv.config.is_object()) throw ParseError(path, 0, "config must be a JSON object");
  }
  if (seed_flag)
    inv.seed = *seed_flag;
  else if (inv.config.contains("seed"))
    inv.seed = inv.config.at("seed").get<std::uint64_t>();
  return inv;
}

std::string config_hash(const json& config, std::uint64_t seed) {
  const std::string text = config.dump() + "#" + std::to_string(seed);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

OutputDir::OutputDir(fs::path dir) : dir_(std::move(dir)) {
  if (dir_.empty()) throw InvalidConfig("--out is required");
  fs::create_directories(dir_);
  lock_ = dir_ / ".calibasis.lock";
  const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw Error("output directory " + dir_.string() + " is locked by another invocation (" +
                  lock_.string() + ")");
    throw Error("cannot create lock file " + lock_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputDir::~OutputDir() {
  std::error_code ec;
  fs::remove(lock_, ec);
}

fs::path OutputDir::file(const std::string& name) {
  outputs_.push_back(name);
  const fs::path p = dir_ / name;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

void OutputDir::write_manifest(const Invocation& inv, int exit_code, double wall_seconds,
                               const json& extra) {
  json m;
  m["command"] = inv.command;
  m["config"] = inv.config_path.string();
  m["config_hash"] = config_hash(inv.config, inv.seed);
  m["seed"] = inv.seed;
  m["tool_version"] = CALIBASIS_VERSION;
  m["inputs"] = inputs_;
  std::vector<std::string> outs = outputs_;
  outs.push_back("manifest.json");
  m["outputs"] = outs;
  m["exit_code"] = exit_code;
  for (const auto& [k, v] : extra.items()) m[k] = v;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  m["timing"] = {{"timestamp", ts.str()}, {"wall_time_seconds", wall_seconds}};
  std::ofstream(dir_ / "manifest.json") << m.dump(2) << '\n';
}

fs::path config_path(const Invocation& inv, const std::string& key) {
  auto p = optional_path(inv, key);
  if (!p)
    throw InvalidConfig("config " + inv.config_path.string() + ": missing key '" + key + "'");
  return *p;
}

std::optional<fs::path> optional_path(const Invocation& inv, const std::string& key) {
  if (!inv.config.contains(key) || inv.config.at(key).is_null()) return std::nullopt;
  fs::path p = inv.config.at(key).get<std::string>();
  if (p.is_relative() && !inv.config_path.empty()) p = inv.config_path.parent_path() / p;
  return p.lexically_normal();
}

double threshold_from(const json& cfg, Index length) {
  if (!cfg.contains("threshold")) return chi2_threshold(length, 0.995);
  const json& t = cfg.at("threshold");
  if (t.is_number()) return t.get<double>();
  if (t.is_string()) {
    const std::string s = t.get<std::string>();
    if (s == "three_sigma") return kThreeSigmaThreshold;
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw InvalidConfig("threshold must be a number, 'three_sigma', 'inf' or {dof, level}");
  }
  if (t.is_object()) {
    Index dof = length;
    if (t.contains("dof") && !(t.at("dof").is_string() && t.at("dof") == "length"))
      dof = t.at("dof").get<Index>();
    return chi2_threshold(dof, t.value("level", 0.995));
  }
  throw InvalidConfig("threshold must be a number, 'three_sigma', 'inf' or {dof, level}");
}

RotationConfig rotation_config_from(const json& cfg) {
  RotationConfig rc;
  if (cfg.contains("v")) rc.v = cfg.at("v").get<std::vector<double>>();
  rc.v_tot = cfg.value("v_tot", rc.v_tot);
  rc.max_iterations = cfg.value("max_iterations", rc.max_iterations);
  if (cfg.contains("anneal")) {
    const json& a = cfg.at("anneal");
    AnnealConfig& ac = rc.annealer;
    ac.initial_temperature = a.value("initial_temperature", ac.initial_temperature);
    ac.cooling_rate = a.value("cooling_rate", ac.cooling_rate);
    ac.steps_per_temperature = a.value("steps_per_temperature", ac.steps_per_temperature);
    ac.min_temperature = a.value("min_temperature", ac.min_temperature);
    ac.proposal_scale = a.value("proposal_scale", ac.proposal_scale);
    ac.proposal_floor = a.value("proposal_floor", ac.proposal_floor);
    ac.restarts = a.value("restarts", ac.restarts);
  }
  return rc;
}

}  // namespace calibasis::cli
