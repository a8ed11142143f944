#include "calibasis/cli.hpp"

#include <CLI11.hpp>
#include <functional>
#include <map>
#include <ostream>

#include "calibasis/error.hpp"
#include "internal.hpp"

namespace calibasis::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibration-oriented basis selection, emulation and history matching"};
  app.require_subcommand(1);
  struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
  };
  using Handler = std::function<int(const Invocation&, std::ostream&)>;
  const std::vector<std::tuple<std::string, std::string, Handler, bool>> commands = {
      {"toy-gen", "Generate the toy model ensemble, observation and covariances", cmd_toy_gen, false},
      {"basis", "Compute an SVD or rotated basis and its VarMSE table", cmd_basis, true},
      {"emulate", "Fit coefficient emulators and write an emulator bundle", cmd_emulate, true},
      {"hm", "History match with an emulator bundle", cmd_hm, true},
      {"wave", "Run basis, emulation and history matching as one wave", cmd_wave, true},
      {"terminal-demo", "Iterative calibration demo on a 1-D function", cmd_terminal_demo, false},
  };
  std::map<std::string, Options> opts;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help, handler, needs_config] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    Options& o = opts[name];
    auto* cfg = sub->add_option("--config", o.config, "JSON config file");
    if (needs_config) cfg->required();
    sub->add_option("--seed", o.seed, "Random seed (overrides the config)");
    sub->add_option("--out", o.out, "Output directory")->required();
    subs[name] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitFailure;
  }
  for (const auto& [name, help, handler, needs_config] : commands) {
    if (!subs[name]->parsed()) continue;
    const Options& o = opts[name];
    try {
      return handler(make_invocation(name, o.config, o.seed, o.out), out);
    } catch (const InfeasibleConstraint& e) {
      err << "error: " << e.what() << '\n';
      return kExitInfeasible;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitFailure;
    }
  }
  return kExitFailure;
}

}  // namespace calibasis::cli
