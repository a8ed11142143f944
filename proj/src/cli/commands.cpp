#include <chrono>
#include <fstream>
#include <ostream>

#include "calibasis/demo.hpp"
#include "calibasis/design.hpp"
#include "calibasis/error.hpp"
#include "calibasis/io.hpp"
#include "calibasis/rng.hpp"
#include "calibasis/toy_model.hpp"
#include "calibasis/waves.hpp"
#include "internal.hpp"

namespace calibasis::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename T>
T value_or(const json& cfg, const std::string& key, T fallback) {
  if (!cfg.contains(key)) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidConfig("config key '" + key + "': " + e.what());
  }
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}


WeightMatrix::Form form_of(const json& cfg, const std::string& key) {
  return io::parse_weight_form(value_or<std::string>(cfg, key, "dense"));
}

void check_lengths(const std::string& what, Index expected, Index got) {
  if (expected != got)
    throw DimensionMismatch(what + ": expected length " + std::to_string(expected) + ", got " +
                            std::to_string(got));
}

ToyConfig toy_config_from(const json& cfg, std::uint64_t seed) {
  ToyConfig tc;
  if (cfg.contains("theta_star")) {
    tc.theta_star = to_vector(cfg.at("theta_star").get<std::vector<double>>());
    if (tc.theta_star.size() != kToyInputs) throw InvalidConfig("theta_star must have 6 entries");
    if (tc.theta_star.cwiseAbs().maxCoeff() > 1.0)
      throw InvalidConfig("theta_star must lie in [-1, 1]^6");
  }
  tc.noise_sd = value_or(cfg, "noise_sd", tc.noise_sd);
  tc.amplitude = value_or(cfg, "amplitude", tc.amplitude);
  tc.observation_noise = value_or(cfg, "observation_noise", tc.observation_noise);
  tc.seed = derive_seed(seed, 4);
  return tc;
}

void write_varmse(const fs::path& path, const std::vector<VarMseRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << "k,var_explained,recon_error,threshold\n";
  for (const auto& r : rows)
    out << r.k << ',' << io::format_double(r.variance_explained) << ','
        << io::format_double(r.reconstruction_error) << ',' << io::format_double(r.threshold)
        << '\n';
}

void write_pairs(const fs::path& path, const std::vector<PairCell>& cells) {
  std::ofstream out(path, std::ios::binary);
  out << "param_i,param_j,bin_i,bin_j,fraction\n";
  for (const auto& c : cells)
    out << c.param_i << ',' << c.param_j << ',' << c.bin_i << ',' << c.bin_j << ','
        << io::format_double(c.fraction) << '\n';
}

json rotation_meta(const RotationResult& r) {
  json j;
  j["status"] = status_name(r.status);
  j["q"] = r.q;
  j["size"] = r.full_basis.size();
  j["optimized_vectors"] = r.optimized_vectors;
  j["full_basis_error"] = r.full_basis_error;
  j["truncated_error"] = r.truncated_error;
  j["reconstruction_trace"] = r.reconstruction_trace;
  j["truncated_trace"] = r.truncated_trace;
  j["per_vector_variance"] = r.per_vector_variance;
  j["v_used"] = r.v_used;
  j["rotation_defect"] = r.rotation_defect;
  j["diagnostic"] = r.diagnostic;
  return j;
}

struct ObservationInputs {
  Vector z;
  UncertaintySpec u;
};

ObservationInputs read_observation(const Invocation& inv, OutputDir& out) {
  const fs::path zp = config_path(inv, "z");
  const fs::path ep = config_path(inv, "sigma_e");
  const fs::path hp = config_path(inv, "sigma_eta");
  out.input(zp);
  out.input(ep);
  out.input(hp);
  const auto form = form_of(inv.config, "sigma_form");
  return {io::read_vector_csv(zp), UncertaintySpec{io::read_weight(ep, form), io::read_weight(hp, form)}};
}

// A finished wave directory, reconstructed as an NROY membership chain.
struct LoadedWave {
  std::shared_ptr<const NroyMembership> membership;
  WaveResult result;
  json meta;
};

LoadedWave load_wave(const fs::path& dir, int depth = 0) {
  if (depth > 64) throw Error("wave chain is too deep or cyclic at " + dir.string());
  const fs::path meta_path = dir / "wave.json";
  std::ifstream in(meta_path);
  if (!in) throw ParseError(meta_path.string(), 0, "cannot open parent wave");
  LoadedWave w;
  try {
    in >> w.meta;
  } catch (const json::exception& e) {
    throw ParseError(meta_path.string(), 0, e.what());
  }
  std::shared_ptr<const NroyMembership> parent;
  if (w.meta.contains("parent") && !w.meta.at("parent").is_null())
    parent = load_wave(w.meta.at("parent").get<std::string>(), depth + 1).membership;
  auto em = std::make_shared<const FieldEmulator>(io::load_emulator(dir / "emulator"));
  const auto form = io::parse_weight_form(w.meta.at("sigma_form").get<std::string>());
  const UncertaintySpec u{io::read_weight(dir / "sigma_e.csv", form),
                          io::read_weight(dir / "sigma_eta.csv", form)};
  ImplausibilityOptions opts;
  opts.include_discarded = w.meta.value("include_discarded", true);
  auto eval = std::make_shared<const ImplausibilityEvaluator>(em, io::read_vector_csv(dir / "z.csv"),
                                                              u, opts);
  const double threshold = w.meta.at("threshold").get<double>();
  w.membership = std::make_shared<const NroyMembership>(eval, threshold, parent);
  w.result.threshold = threshold;
  w.result.sample_count = w.meta.at("sample_count").get<Index>();
  w.result.seed = w.meta.at("seed").get<std::uint64_t>();
  w.result.membership = w.membership;
  w.result.samples = Matrix(0, em->inputs());
  if (w.meta.at("accepted").get<Index>() > 0) {
    const Matrix s = io::read_csv(dir / "samples.csv");
    w.result.retained = s.leftCols(s.cols() - 1);
    w.result.retained_implausibility = s.col(s.cols() - 1);
  } else {
    w.result.retained = Matrix(0, em->inputs());
  }
  return w;
}

// Writes the history-matching outputs shared by `hm` and `wave`.
json write_wave_outputs(OutputDir& out, const WaveResult& res, const FieldEmulator& em,
                        const Vector& z, const UncertaintySpec& u, const std::string& sigma_form,
                        bool include_discarded, const std::optional<fs::path>& parent, Index bins) {
  io::save_emulator(out.file("emulator/emulator.json").parent_path(), em);
  io::write_vector_csv(out.file("z.csv"), z);
  io::write_weight(out.file("sigma_e.csv"), u.sigma_e);
  io::write_weight(out.file("sigma_eta.csv"), u.sigma_eta);
  Matrix s(res.retained.rows(), res.retained.cols() + 1);
  s << res.retained, res.retained_implausibility;
  if (s.rows() > 0) io::write_csv(out.file("samples.csv"), s);
  write_pairs(out.file("nroy_pairs.csv"), nroy_pair_grid(res, bins));
  json j;
  j["threshold"] = res.threshold;
  j["nroy_fraction"] = res.nroy_fraction;
  j["standard_error"] = res.standard_error;
  j["sample_count"] = res.sample_count;
  j["accepted"] = res.retained.rows();
  j["seed"] = res.seed;
  j["sigma_form"] = sigma_form;
  j["include_discarded"] = include_discarded;
  j["parent"] = parent ? json(fs::absolute(*parent).lexically_normal().string()) : json(nullptr);
  j["diagnostic"] = res.diagnostic;
  std::ofstream(out.file("wave.json")) << j.dump(2) << '\n';
  return j;
}

}  // namespace

int cmd_toy_gen(const Invocation& inv, std::ostream& log) {
  const auto t0 = Clock::now();
  OutputDir out(inv.out);
  const json& c = inv.config;
  const auto runs = value_or<Index>(c, "runs", 60);
  const int restarts = value_or(c, "lhs_restarts", 100);
  const auto pattern_seed = value_or<std::uint64_t>(c, "pattern_seed", derive_seed(inv.seed, 1));
  const ToyConfig tc = toy_config_from(c, inv.seed);
  const ToyPatternSet patterns = make_toy_patterns(pattern_seed);
  const Matrix design = maximin_lhs(runs, kToyInputs, derive_seed(inv.seed, 2), restarts);
  const Matrix ensemble = toy_ensemble(design, patterns, tc, derive_seed(inv.seed, 3));
  const Vector z = toy_observe(patterns, tc);
  const WeightMatrix se = toy_sigma_e();
  const WeightMatrix sh = toy_sigma_eta();
  io::write_csv(out.file("design.csv"), design);
  io::write_csv(out.file("ensemble.csv"), ensemble);
  io::write_vector_csv(out.file("z.csv"), z);
  io::write_csv(out.file("sigma_e.csv"), se.to_dense());
  io::write_csv(out.file("sigma_eta.csv"), sh.to_dense());
  io::write_csv(out.file("weight.csv"), se.plus(sh).to_dense());
  io::write_csv(out.file("patterns.csv"), patterns.phi);
  io::write_vector_csv(out.file("theta_star.csv"), tc.theta_star);
  json extra;
  extra["pattern_seed"] = pattern_seed;
  extra["amplitude"] = tc.amplitude;
  extra["noise_sd"] = tc.noise_sd;
  out.write_manifest(inv, kExitOk, seconds_since(t0), extra);
  log << "toy-gen: " << runs << " runs written to " << out.path().string() << '\n';
  return kExitOk;
}

int cmd_basis(const Invocation& inv, std::ostream& log) {
  const auto t0 = Clock::now();
  OutputDir out(inv.out);
  const json& c = inv.config;
  const fs::path ep = config_path(inv, "ensemble");
  const fs::path wp = config_path(inv, "weight");
  const fs::path zp = config_path(inv, "z");
  out.input(ep);
  out.input(wp);
  out.input(zp);
  const Matrix outputs = io::read_csv(ep);
  const WeightMatrix w = io::read_weight(wp, form_of(c, "weight_form"));
  const Vector z = io::read_vector_csv(zp);
  check_lengths("weight matrix vs ensemble " + ep.string(), outputs.rows(), w.dim());
  check_lengths("observation vs ensemble " + ep.string(), outputs.rows(), z.size());
  const Ensemble ens(Matrix::Zero(outputs.cols(), 0), outputs);
  const Vector za = z - ens.mean();
  const double threshold = threshold_from(c, ens.length());
  const std::string mode = value_or<std::string>(c, "mode", "svd");

  RotationResult result;
  if (mode == "svd") {
    const WsvdResult svd = wsvd(ens.centred(), w);
    if (svd.basis.empty()) throw DegenerateEnsemble(svd.diagnostic);
    const TerminalCheck tc = terminal_case_check(svd.basis, w, za, threshold);
    result.full_basis = svd.basis;
    result.q = truncation_for_variance(svd.basis, w, ens.centred(), value_or(c, "v_tot", 0.95));
    result.basis = svd.basis.leading(result.q);
    result.full_basis_error = tc.error;
    result.truncated_error = reconstruction_error(result.basis, w, za);
    for (Index k = 0; k < svd.basis.size(); ++k)
      result.per_vector_variance.push_back(variance_explained_single(svd.basis.col(k), w, ens.centred()));
    result.status = tc.terminal ? RotationStatus::terminal_case : RotationStatus::converged;
    if (tc.terminal) result.diagnostic = "terminal case on the full SVD basis";
  } else if (mode == "rotate") {
    RotationConfig rc = rotation_config_from(c);
    rc.threshold = threshold;
    rc.annealer.seed = inv.seed;
    if (const auto pp = optional_path(inv, "physical")) {
      out.input(*pp);
      const Matrix phys = io::read_csv(*pp);
      check_lengths("physical vectors " + pp->string(), ens.length(), phys.rows());
      result = rotation_with_physical_vectors(ens.centred(), w, za, rc, Basis(phys));
    } else {
      result = optimal_rotation(ens.centred(), w, za, rc, wsvd(ens.centred(), w).basis);
    }
  } else {
    throw InvalidConfig("basis mode must be 'svd' or 'rotate', got '" + mode + "'");
  }

  io::write_csv(out.file("basis.csv"), result.full_basis.vectors());
  write_varmse(out.file("varmse.csv"), varmse_table(result.full_basis, w, za, ens.centred(), threshold));
  json meta = rotation_meta(result);
  meta["mode"] = mode;
  meta["threshold"] = threshold;
  std::ofstream(out.file("basis_meta.json")) << meta.dump(2) << '\n';
  int code = kExitOk;
  if (result.status == RotationStatus::terminal_case) code = kExitTerminal;
  if (result.status == RotationStatus::infeasible_v) code = kExitInfeasible;
  out.write_manifest(inv, code, seconds_since(t0));
  log << "basis: status " << status_name(result.status) << ", q = " << result.q << '\n';
  if (!result.diagnostic.empty()) log << "basis: " << result.diagnostic << '\n';
  return code;
}

namespace {

Index q_from(const Invocation& inv, OutputDir& out) {
  if (inv.config.contains("q")) return inv.config.at("q").get<Index>();
  const fs::path mp = config_path(inv, "basis_meta");
  out.input(mp);
  std::ifstream in(mp);
  if (!in) throw ParseError(mp.string(), 0, "cannot open basis metadata");
  json m;
  in >> m;
  return m.at("q").get<Index>();
}

}  // namespace

int cmd_emulate(const Invocation& inv, std::ostream& log) {
  const auto t0 = Clock::now();
  OutputDir out(inv.out);
  const json& c = inv.config;
  const fs::path ep = config_path(inv, "ensemble");
  const fs::path dp = config_path(inv, "design");
  const fs::path bp = config_path(inv, "basis");
  const fs::path wp = config_path(inv, "weight");
  out.input(ep);
  out.input(dp);
  out.input(bp);
  out.input(wp);
  const Matrix outputs = io::read_csv(ep);
  const Matrix design = io::read_csv(dp);
  const WeightMatrix w = io::read_weight(wp, form_of(c, "weight_form"));
  const Matrix bv = io::read_csv(bp);
  check_lengths("design rows vs ensemble runs", outputs.cols(), design.rows());
  check_lengths("basis vs ensemble", outputs.rows(), bv.rows());
  check_lengths("weight vs ensemble", outputs.rows(), w.dim());
  const Index q = q_from(inv, out);
  const Ensemble ens(design, outputs);
  const GpSpec spec = c.contains("gp") ? io::gp_spec_from_json(c.at("gp")) : GpSpec{};
  const FieldEmulator em =
      fit_coefficient_emulators(ens, Basis::orthonormal(bv, w), q, w, spec);
  io::save_emulator(out.file("emulator.json").parent_path(), em);
  for (const char* f : {"design.csv", "coefficients.csv", "retained_basis.csv", "mean.csv", "weight.csv"})
    out.file(f);
  if (em.discarded().size() > 0) {
    out.file("discarded_basis.csv");
    out.file("discarded_variances.csv");
  }
  if (ens.runs() >= 5) io::write_csv(out.file("loo.csv"), em.loo_validate().standardized);
  out.write_manifest(inv, kExitOk, seconds_since(t0));
  for (const auto& e : em.emulators())
    if (!e.warning().empty()) log << "emulate: warning: " << e.warning() << '\n';
  log << "emulate: fitted " << q << " coefficient emulators\n";
  return kExitOk;
}

int cmd_hm(const Invocation& inv, std::ostream& log) {
  const auto t0 = Clock::now();
  OutputDir out(inv.out);
  const json& c = inv.config;
  const fs::path emp = config_path(inv, "emulator");
  out.input(emp);
  auto em = std::make_shared<const FieldEmulator>(io::load_emulator(emp));
  const ObservationInputs obs = read_observation(inv, out);
  check_lengths("observation vs emulator", em->length(), obs.z.size());
  check_lengths("uncertainty vs emulator", em->length(), obs.u.dim());
  ImplausibilityOptions opts;
  opts.include_discarded = value_or(c, "include_discarded", true);
  const double threshold = threshold_from(c, em->length());
  const auto parent_dir = optional_path(inv, "parent");
  SamplerConfig sc;
  sc.samples = value_or<Index>(c, "samples", 100000);
  sc.seed = inv.seed;
  if (parent_dir) {
    out.input(*parent_dir);
    sc.parent = load_wave(*parent_dir).membership;
  }
  auto eval = std::make_shared<const ImplausibilityEvaluator>(em, obs.z, obs.u, opts);
  const WaveResult res = history_match(eval, threshold, sc);
  write_wave_outputs(out, res, *em, obs.z, obs.u, value_or<std::string>(c, "sigma_form", "dense"),
                     opts.include_discarded, parent_dir, value_or<Index>(c, "pair_bins", 10));
  out.write_manifest(inv, kExitOk, seconds_since(t0));
  log << "hm: NROY fraction " << res.nroy_fraction << " (se " << res.standard_error << ")\n";
  if (!res.diagnostic.empty()) log << "hm: " << res.diagnostic << '\n';
  return kExitOk;
}

int cmd_wave(const Invocation& inv, std::ostream& log) {
  const auto t0 = Clock::now();
  OutputDir out(inv.out);
  const json& c = inv.config;
  const ObservationInputs obs = read_observation(inv, out);
  const Index length = obs.z.size();
  check_lengths("uncertainty vs observation", length, obs.u.dim());
  WeightMatrix w = obs.u.total();
  if (const auto wp = optional_path(inv, "weight")) {
    out.input(*wp);
    w = io::read_weight(*wp, form_of(c, "weight_form"));
  }
  check_lengths("weight vs observation", length, w.dim());

  const auto parent_dir = optional_path(inv, "parent");
  std::optional<LoadedWave> parent;
  if (parent_dir) {
    out.input(*parent_dir);
    parent = load_wave(*parent_dir);
  }

  Matrix design;
  Matrix outputs;
  if (c.contains("simulator")) {
    const json& sim = c.at("simulator");
    if (value_or<std::string>(sim, "kind", "toy") != "toy")
      throw InvalidConfig("only the built-in 'toy' simulator is available");
    const Index runs = value_or<Index>(c, "runs", 60);
    if (parent)
      design = design_in_nroy(parent->result, runs, derive_seed(inv.seed, 10));
    else
      design = maximin_lhs(runs, kToyInputs, derive_seed(inv.seed, 10), value_or(c, "lhs_restarts", 100));
    fs::path pp = sim.at("patterns").get<std::string>();
    if (pp.is_relative()) pp = inv.config_path.parent_path() / pp;
    out.input(pp);
    ToyPatternSet patterns{io::read_csv(pp), 0};
    const ToyConfig tc = toy_config_from(sim, inv.seed);
    outputs = toy_ensemble(design, patterns, tc, derive_seed(inv.seed, 11));
  } else {
    const fs::path dp = config_path(inv, "design");
    const fs::path ep = config_path(inv, "ensemble");
    out.input(dp);
    out.input(ep);
    design = io::read_csv(dp);
    outputs = io::read_csv(ep);
  }
  check_lengths("ensemble vs observation", length, outputs.rows());
  check_lengths("design rows vs ensemble runs", outputs.cols(), design.rows());
  const Ensemble ens(design, outputs);
  io::write_csv(out.file("design.csv"), design);
  io::write_csv(out.file("ensemble.csv"), outputs);

  WaveSpec spec;
  spec.threshold = threshold_from(c, length);
  spec.v_tot = value_or(c, "v_tot", spec.v_tot);
  spec.rotate = value_or(c, "rotate", true);
  spec.rotation = rotation_config_from(c);
  if (c.contains("gp")) spec.gp = io::gp_spec_from_json(c.at("gp"));
  spec.implausibility.include_discarded = value_or(c, "include_discarded", true);
  spec.samples = value_or<Index>(c, "samples", 100000);
  spec.seed = inv.seed;
  const WaveOutput wave = run_wave(ens, obs.z, obs.u, w, spec, parent ? parent->membership : nullptr);

  const Vector za = obs.z - ens.mean();
  write_varmse(out.file("svd_varmse.csv"),
               varmse_table(wave.svd.basis, w, za, ens.centred(), spec.threshold));
  io::write_csv(out.file("basis.csv"), wave.basis.vectors());
  write_varmse(out.file("varmse.csv"), varmse_table(wave.basis, w, za, ens.centred(), spec.threshold));
  json meta;
  if (wave.rotation) meta = rotation_meta(*wave.rotation);
  meta["mode"] = spec.rotate ? "rotate" : "svd";
  meta["q"] = wave.q;
  meta["svd_q"] = wave.svd_q;
  meta["svd_full_error"] = wave.svd_full_error;
  meta["svd_truncated_error"] = wave.svd_truncated_error;
  meta["threshold"] = spec.threshold;
  std::ofstream(out.file("basis_meta.json")) << meta.dump(2) << '\n';

  int code = kExitOk;
  if (wave.terminal) code = kExitTerminal;
  if (wave.infeasible) code = kExitInfeasible;
  json extra;
  if (code == kExitOk) {
    const json wj = write_wave_outputs(out, *wave.history, *wave.emulator, obs.z, obs.u,
                                       value_or<std::string>(c, "sigma_form", "dense"),
                                       spec.implausibility.include_discarded, parent_dir,
                                       value_or<Index>(c, "pair_bins", 10));
    extra["nroy_fraction"] = wj.at("nroy_fraction");
    log << "wave: q = " << wave.q << ", NROY fraction " << wave.history->nroy_fraction << " (se "
        << wave.history->standard_error << ")\n";
  } else {
    log << "wave: stopped before emulation: " << wave.diagnostic << '\n';
  }
  out.write_manifest(inv, code, seconds_since(t0), extra);
  return code;
}

int cmd_terminal_demo(const Invocation& inv, std::ostream& log) {
  const auto t0 = Clock::now();
  OutputDir out(inv.out);
  const json& c = inv.config;
  if (value_or<std::string>(c, "function", "bumps") != "bumps")
    throw InvalidConfig("terminal-demo: only the built-in 'bumps' function is available");
  DemoConfig dc;
  dc.initial_design = value_or<Index>(c, "initial_design", dc.initial_design);
  dc.steps = value_or(c, "steps", dc.steps);
  dc.lengthscale = value_or(c, "lengthscale", dc.lengthscale);
  dc.nugget = value_or(c, "nugget", dc.nugget);
  dc.observation = value_or(c, "observation", dc.observation);
  dc.observation_sd = value_or(c, "observation_sd", dc.observation_sd);
  dc.discrepancy_sd = value_or(c, "discrepancy_sd", dc.discrepancy_sd);
  dc.grid = value_or<Index>(c, "grid", dc.grid);
  const DemoTrajectory tr = iterative_calibration_demo(demo_bumps, dc);
  {
    std::ofstream f(out.file("trajectory.csv"), std::ios::binary);
    f << "step,theta,posterior,emulator_mean,emulator_sd,truth\n";
    for (const auto& s : tr.steps)
      for (Index i = 0; i < tr.grid.size(); ++i)
        f << s.step << ',' << io::format_double(tr.grid[i]) << ',' << io::format_double(s.posterior[i])
          << ',' << io::format_double(s.emulator_mean[i]) << ','
          << io::format_double(s.emulator_sd[i]) << ',' << io::format_double(demo_bumps(tr.grid[i]))
          << '\n';
  }
  {
    std::ofstream f(out.file("summary.csv"), std::ios::binary);
    f << "step,design_size,map,width95,f_at_map\n";
    for (const auto& s : tr.steps)
      f << s.step << ',' << s.design.size() << ',' << io::format_double(s.map) << ','
        << io::format_double(s.width95) << ',' << io::format_double(demo_bumps(s.map)) << '\n';
  }
  {
    std::ofstream f(out.file("design.csv"), std::ios::binary);
    f << "step,index,theta,output\n";
    for (const auto& s : tr.steps)
      for (Index i = 0; i < s.design.size(); ++i)
        f << s.step << ',' << i << ',' << io::format_double(s.design[i]) << ','
          << io::format_double(s.outputs[i]) << '\n';
  }
  out.write_manifest(inv, kExitOk, seconds_since(t0));
  log << "terminal-demo: " << tr.steps.size() << " steps, final MAP " << tr.steps.back().map << '\n';
  return kExitOk;
}

}  // namespace calibasis::cli
