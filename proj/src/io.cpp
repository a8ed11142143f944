#include "calibasis/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "calibasis/error.hpp"

namespace calibasis::io {

using nlohmann::json;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Matrix read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      std::string field = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      if (b == std::string::npos)
        throw ParseError(path.string(), lineno, "empty field in column " + std::to_string(row.size() + 1));
      field = field.substr(b, e - b + 1);
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(field.c_str(), &end);
      if (end != field.c_str() + field.size() || errno == ERANGE)
        throw ParseError(path.string(), lineno, "not a number: '" + field + "'");
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path.string(), lineno,
                       "row has " + std::to_string(row.size()) + " fields, expected " +
                           std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path.string(), lineno, "file contains no data");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

void write_csv(const fs::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error("failed writing " + path.string());
}

Vector read_vector_csv(const fs::path& path) {
  const Matrix m = read_csv(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw ParseError(path.string(), 1,
                   "expected a single row or column, got " + std::to_string(m.rows()) + "x" +
                       std::to_string(m.cols()));
}

void write_vector_csv(const fs::path& path, const Vector& v) { write_csv(path, Matrix(v)); }

WeightMatrix::Form parse_weight_form(const std::string& name) {
  if (name == "diagonal") return WeightMatrix::Form::diagonal;
  if (name == "dense") return WeightMatrix::Form::dense;
  throw InvalidConfig("weight form must be 'diagonal' or 'dense', got '" + name + "'");
}

WeightMatrix read_weight(const fs::path& path, WeightMatrix::Form form) {
  if (form == WeightMatrix::Form::diagonal) return WeightMatrix::diagonal(read_vector_csv(path));
  const Matrix m = read_csv(path);
  if (m.rows() != m.cols())
    throw ParseError(path.string(), 1,
                     "dense weight must be square, got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  return WeightMatrix::dense(m);
}

void write_weight(const fs::path& path, const WeightMatrix& w) {
  if (w.is_diagonal())
    write_vector_csv(path, w.diagonal_entries());
  else
    write_csv(path, w.to_dense());
}

json gp_spec_to_json(const GpSpec& spec) {
  json j;
  switch (spec.regressors.kind) {
    case RegressorSpec::Kind::constant: j["regressors"] = "constant"; break;
    case RegressorSpec::Kind::linear: j["regressors"] = "linear"; break;
    case RegressorSpec::Kind::monomials:
      j["regressors"] = "monomials";
      j["powers"] = spec.regressors.powers;
      break;
  }
  j["lengthscales"] = spec.lengthscales;
  j["nugget"] = spec.nugget;
  j["mode"] = spec.mode == FitMode::fixed ? "fixed" : "maximum_likelihood";
  j["min_lengthscale"] = spec.min_lengthscale;
  j["max_lengthscale"] = spec.max_lengthscale;
  j["max_iterations"] = spec.max_iterations;
  return j;
}

GpSpec gp_spec_from_json(const json& j) {
  GpSpec s;
  if (!j.is_object()) throw InvalidConfig("gp config must be an object");
  try {
    if (j.contains("regressors")) {
      const std::string r = j.at("regressors").get<std::string>();
      if (r == "constant")
        s.regressors.kind = RegressorSpec::Kind::constant;
      else if (r == "linear")
        s.regressors.kind = RegressorSpec::Kind::linear;
      else if (r == "monomials") {
        s.regressors.kind = RegressorSpec::Kind::monomials;
        s.regressors.powers = j.at("powers").get<std::vector<std::vector<int>>>();
      } else
        throw InvalidConfig("unknown regressors '" + r + "'");
    }
    if (j.contains("lengthscales")) s.lengthscales = j.at("lengthscales").get<std::vector<double>>();
    if (j.contains("nugget")) s.nugget = j.at("nugget").get<double>();
    if (j.contains("mode")) {
      const std::string m = j.at("mode").get<std::string>();
      if (m == "fixed")
        s.mode = FitMode::fixed;
      else if (m == "maximum_likelihood" || m == "ml")
        s.mode = FitMode::maximum_likelihood;
      else
        throw InvalidConfig("unknown gp mode '" + m + "'");
    }
    if (j.contains("min_lengthscale")) s.min_lengthscale = j.at("min_lengthscale").get<double>();
    if (j.contains("max_lengthscale")) s.max_lengthscale = j.at("max_lengthscale").get<double>();
    if (j.contains("max_iterations")) s.max_iterations = j.at("max_iterations").get<int>();
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("gp config: ") + e.what());
  }
  return s;
}

void save_emulator(const fs::path& dir, const FieldEmulator& em) {
  fs::create_directories(dir);
  json j;
  j["format"] = "calibasis-emulator";
  j["version"] = 1;
  j["q"] = em.q();
  j["inputs"] = em.inputs();
  j["length"] = em.length();
  j["weight_form"] = em.weight().is_diagonal() ? "diagonal" : "dense";
  j["gp"] = gp_spec_to_json(em.emulators().front().spec());
  json coeffs = json::array();
  Matrix targets(em.emulators().front().inputs().rows(), em.q());
  for (Index i = 0; i < em.q(); ++i) {
    const auto& c = em.emulators()[static_cast<std::size_t>(i)];
    json cj;
    cj["lengthscales"] = std::vector<double>(c.lengthscales().begin(), c.lengthscales().end());
    cj["beta"] = std::vector<double>(c.beta().begin(), c.beta().end());
    cj["sigma2"] = c.sigma2();
    cj["gp"] = gp_spec_to_json(c.spec());
    if (!c.warning().empty()) cj["warning"] = c.warning();
    coeffs.push_back(cj);
    targets.col(i) = c.targets();
  }
  j["coefficients"] = coeffs;
  std::ofstream(dir / "emulator.json") << j.dump(2) << '\n';
  write_csv(dir / "design.csv", em.emulators().front().inputs());
  write_csv(dir / "coefficients.csv", targets);
  write_csv(dir / "retained_basis.csv", em.retained().vectors());
  if (em.discarded().size() > 0) {
    write_csv(dir / "discarded_basis.csv", em.discarded().vectors());
    write_vector_csv(dir / "discarded_variances.csv", em.discarded_variances());
  }
  write_vector_csv(dir / "mean.csv", em.mean());
  write_weight(dir / "weight.csv", em.weight());
}

FieldEmulator load_emulator(const fs::path& dir) {
  const fs::path meta = dir / "emulator.json";
  std::ifstream in(meta);
  if (!in) throw ParseError(meta.string(), 0, "cannot open emulator bundle");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(meta.string(), 0, e.what());
  }
  try {
    const Index q = j.at("q").get<Index>();
    const WeightMatrix w =
        read_weight(dir / "weight.csv", parse_weight_form(j.at("weight_form").get<std::string>()));
    const Matrix x = read_csv(dir / "design.csv");
    const Matrix targets = read_csv(dir / "coefficients.csv");
    if (targets.cols() != q || targets.rows() != x.rows())
      throw ParseError((dir / "coefficients.csv").string(), 1, "coefficient table does not match q and design");
    std::vector<CoefficientEmulator> ems;
    const auto& cs = j.at("coefficients");
    if (static_cast<Index>(cs.size()) != q) throw ParseError(meta.string(), 0, "coefficient count does not match q");
    for (Index i = 0; i < q; ++i) {
      const auto& cj = cs.at(static_cast<std::size_t>(i));
      const auto ls = cj.at("lengthscales").get<std::vector<double>>();
      ems.push_back(CoefficientEmulator::with_lengthscales(
          x, targets.col(i), gp_spec_from_json(cj.at("gp")),
          Eigen::Map<const Vector>(ls.data(), static_cast<Index>(ls.size())),
          cj.value("warning", std::string())));
    }
    Basis retained = Basis::orthonormal(read_csv(dir / "retained_basis.csv"), w);
    Basis discarded(Matrix(w.dim(), 0));
    Vector dvar(0);
    if (fs::exists(dir / "discarded_basis.csv")) {
      discarded = Basis(read_csv(dir / "discarded_basis.csv"));
      dvar = read_vector_csv(dir / "discarded_variances.csv");
    }
    return FieldEmulator(std::move(retained), std::move(ems), std::move(discarded), std::move(dvar),
                         read_vector_csv(dir / "mean.csv"), w);
  } catch (const json::exception& e) {
    throw ParseError(meta.string(), 0, e.what());
  }
}

}  // namespace calibasis::io
