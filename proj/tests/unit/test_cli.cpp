#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "calibasis/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Sandbox {
  fs::path root;
  Sandbox() {
    root = fs::temp_directory_path() / ("calibasis_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
  }
  ~Sandbox() { fs::remove_all(root); }
  fs::path config(const std::string& name, const json& j) const {
    const fs::path p = root / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }
};

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "calibasis");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = calibasis::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

Result toy_gen(const Sandbox& s, const std::string& out, int runs = 30, const std::string& seed = "5") {
  const auto cfg = s.config("toy_" + out + ".json", {{"runs", runs}, {"lhs_restarts", 5}});
  return run({"toy-gen", "--config", cfg.string(), "--seed", seed, "--out", (s.root / out).string()});
}

}  // namespace

TEST_CASE("toy-gen writes every declared file and a manifest") {
  Sandbox s;
  const Result r = toy_gen(s, "toy");
  REQUIRE(r.code == calibasis::cli::kExitOk);
  const json m = read_json(s.root / "toy" / "manifest.json");
  CHECK(m["command"] == "toy-gen");
  CHECK(m["seed"] == 5);
  CHECK(m["exit_code"] == 0);
  CHECK(m["config_hash"].get<std::string>().size() == 16u);
  for (const auto& f : m["outputs"]) CHECK(fs::exists(s.root / "toy" / f.get<std::string>()));
  for (const char* f : {"design.csv", "ensemble.csv", "z.csv", "sigma_e.csv", "sigma_eta.csv", "patterns.csv"})
    CHECK(fs::exists(s.root / "toy" / f));
  CHECK_FALSE(fs::exists(s.root / "toy" / ".calibasis.lock"));
}

TEST_CASE("same config and seed give byte-identical data files") {
  Sandbox s;
  REQUIRE(toy_gen(s, "a").code == 0);
  REQUIRE(toy_gen(s, "b").code == 0);
  for (const char* f : {"design.csv", "ensemble.csv", "z.csv", "patterns.csv"})
    CHECK(slurp(s.root / "a" / f) == slurp(s.root / "b" / f));
  json ma = read_json(s.root / "a" / "manifest.json");
  json mb = read_json(s.root / "b" / "manifest.json");
  CHECK(ma["config_hash"] == mb["config_hash"]);
  REQUIRE(toy_gen(s, "c", 30, "6").code == 0);
  CHECK(slurp(s.root / "a" / "design.csv") != slurp(s.root / "c" / "design.csv"));
}

TEST_CASE("basis: T = infinity never reports the terminal case; tiny T does") {
  Sandbox s;
  REQUIRE(toy_gen(s, "toy").code == 0);
  json base = {{"ensemble", "toy/ensemble.csv"}, {"weight", "toy/weight.csv"}, {"z", "toy/z.csv"}};
  json inf = base;
  inf["threshold"] = "inf";
  for (const char* mode : {"svd", "rotate"}) {
    inf["mode"] = mode;
    const Result r = run({"basis", "--config", s.config("inf.json", inf).string(), "--out",
                          (s.root / (std::string("inf_") + mode)).string()});
    CHECK(r.code == calibasis::cli::kExitOk);
  }
  const std::string header = slurp(s.root / "inf_svd" / "varmse.csv").substr(0, 38);
  CHECK(header == "k,var_explained,recon_error,threshold\n");
  json tiny = base;
  tiny["threshold"] = 1e-9;
  tiny["mode"] = "rotate";
  const Result r = run({"basis", "--config", s.config("tiny.json", tiny).string(), "--out",
                        (s.root / "tiny").string()});
  CHECK(r.code == calibasis::cli::kExitTerminal);
  CHECK(read_json(s.root / "tiny" / "basis_meta.json")["status"] == "terminal_case");
  CHECK(read_json(s.root / "tiny" / "manifest.json")["exit_code"] == 2);
}

TEST_CASE("basis: an unattainable variance share exits 3") {
  Sandbox s;
  REQUIRE(toy_gen(s, "toy").code == 0);
  const json cfg = {{"ensemble", "toy/ensemble.csv"}, {"weight", "toy/weight.csv"}, {"z", "toy/z.csv"},
                    {"mode", "rotate"}, {"v", {0.999}}};
  const Result r = run({"basis", "--config", s.config("b.json", cfg).string(), "--out", (s.root / "b").string()});
  CHECK(r.code == calibasis::cli::kExitInfeasible);
}

TEST_CASE("validation failures exit 1 with a precise diagnostic") {
  Sandbox s;
  REQUIRE(toy_gen(s, "toy").code == 0);
  std::ofstream(s.root / "bad.csv") << "1,2\n3\n";
  json cfg = {{"ensemble", "bad.csv"}, {"weight", "toy/weight.csv"}, {"z", "toy/z.csv"}};
  Result r = run({"basis", "--config", s.config("c1.json", cfg).string(), "--out", (s.root / "o1").string()});
  CHECK(r.code == calibasis::cli::kExitFailure);
  CHECK(r.err.find("bad.csv:2") != std::string::npos);

  cfg = {{"weight", "toy/weight.csv"}, {"z", "toy/z.csv"}};
  r = run({"basis", "--config", s.config("c2.json", cfg).string(), "--out", (s.root / "o2").string()});
  CHECK(r.code == calibasis::cli::kExitFailure);
  CHECK(r.err.find("ensemble") != std::string::npos);

  std::ofstream(s.root / "short_z.csv") << "1\n2\n3\n";
  cfg = {{"ensemble", "toy/ensemble.csv"}, {"weight", "toy/weight.csv"}, {"z", "short_z.csv"}};
  r = run({"basis", "--config", s.config("c3.json", cfg).string(), "--out", (s.root / "o3").string()});
  CHECK(r.code == calibasis::cli::kExitFailure);
  CHECK(r.err.find("length") != std::string::npos);

  r = run({"basis", "--out", (s.root / "o4").string()});
  CHECK(r.code == calibasis::cli::kExitFailure);
  r = run({"frobnicate"});
  CHECK(r.code == calibasis::cli::kExitFailure);
}

TEST_CASE("an output directory held by another run is refused") {
  Sandbox s;
  fs::create_directories(s.root / "busy");
  std::ofstream(s.root / "busy" / ".calibasis.lock") << "1";
  const Result r = run({"terminal-demo", "--out", (s.root / "busy").string()});
  CHECK(r.code == calibasis::cli::kExitFailure);
  CHECK(fs::exists(s.root / "busy" / ".calibasis.lock"));
}

TEST_CASE("basis, emulate and hm chain through files; emulator reload is exact") {
  Sandbox s;
  REQUIRE(toy_gen(s, "toy", 40).code == 0);
  const json b = {{"ensemble", "toy/ensemble.csv"}, {"weight", "toy/weight.csv"}, {"z", "toy/z.csv"},
                  {"mode", "svd"}, {"threshold", "inf"}};
  REQUIRE(run({"basis", "--config", s.config("b.json", b).string(), "--out", (s.root / "b").string()}).code == 0);
  const json e = {{"ensemble", "toy/ensemble.csv"}, {"design", "toy/design.csv"}, {"basis", "b/basis.csv"},
                  {"basis_meta", "b/basis_meta.json"}, {"weight", "toy/weight.csv"}};
  REQUIRE(run({"emulate", "--config", s.config("e.json", e).string(), "--out", (s.root / "e").string()}).code == 0);
  CHECK(fs::exists(s.root / "e" / "emulator.json"));
  CHECK(fs::exists(s.root / "e" / "loo.csv"));
  const json h = {{"emulator", "e"}, {"z", "toy/z.csv"}, {"sigma_e", "toy/sigma_e.csv"},
                  {"sigma_eta", "toy/sigma_eta.csv"}, {"samples", 500}, {"threshold", {{"dof", "length"}, {"level", 0.995}}}};
  REQUIRE(run({"hm", "--config", s.config("h.json", h).string(), "--out", (s.root / "h").string()}).code == 0);
  const json w = read_json(s.root / "h" / "wave.json");
  CHECK(w["sample_count"] == 500);
  CHECK(w["threshold"].get<double>() == doctest::Approx(140.1695).epsilon(1e-5));
  CHECK(slurp(s.root / "h" / "nroy_pairs.csv").rfind("param_i,param_j,bin_i,bin_j,fraction\n", 0) == 0);
  // A second hm run chained to the first.
  json h2 = h;
  h2["parent"] = "h";
  REQUIRE(run({"hm", "--config", s.config("h2.json", h2).string(), "--out", (s.root / "h2").string()}).code == 0);
  CHECK(read_json(s.root / "h2" / "wave.json")["nroy_fraction"].get<double>() <=
        w["nroy_fraction"].get<double>() + 0.1);
}

TEST_CASE("terminal-demo writes plot-ready CSVs") {
  Sandbox s;
  const json cfg = {{"steps", 3}, {"grid", 201}};
  const Result r = run({"terminal-demo", "--config", s.config("d.json", cfg).string(), "--out", (s.root / "d").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(s.root / "d" / "summary.csv").rfind("step,design_size,map,width95,f_at_map\n", 0) == 0);
  CHECK(fs::exists(s.root / "d" / "trajectory.csv"));
}

TEST_CASE("the installed binary runs") {
  const std::string cmd = std::string("\"") + CALIBASIS_TOOL + "\" --help > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
}
