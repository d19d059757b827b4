// Copyright 2026 The ouqt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "ouqt/dynamics.hpp"
#include "ouqt/error.hpp"
#include "ouqt/linalg.hpp"
#include "ouqt/model.hpp"
#include "ouqt/noise.hpp"

namespace ouqt {

inline constexpr const char* kVersion = "0.1.0";

using Json = nlohmann::ordered_json;

struct NamedObservable {
  std::string name;
  Operator matrix;
};

struct ModelConfig {
  ModelKind kind = ModelKind::random_hamiltonian;
  std::size_t dim = 2;
  double gamma = 1.0;
  std::vector<Operator> H;
  std::vector<Operator> B;  // K for the random-Hamiltonian kind
};

struct GridConfig {
  double dt = 1e-3;
  double T = 1.0;
};

struct RunConfig {
  Mode mode = Mode::linear;
  std::size_t n_traj = 1000;
  std::uint64_t master_seed = 1;
  double output_interval = 0.0;  // 0 means every step
  std::size_t substeps = 1;
  StateVector psi0;
  std::vector<NamedObservable> observables;
};

inline const std::vector<std::string>& known_suites() {
  static const std::vector<std::string> s = {"consistency", "martingale", "girsanov", "mean_equation", "ou_covariance"};
  return s;
}

struct CheckConfig {
  std::vector<std::string> suites = known_suites();
  double c_disc = 5.0;
  double c_fd = 5.0;
  double perturb_drift = 0.0;  // adds eps * I to the drift; for exercising the consistency check
  std::size_t girsanov_n_traj = 10000;
  std::vector<double> girsanov_times;  // empty means {T}
  std::string girsanov_observable;     // empty means the first run observable
  std::size_t covariance_n_paths = 100000;
  std::size_t covariance_points = 5;
};

struct OutputConfig {
  std::string directory = "ouqt_out";
};

struct ExperimentConfig {
  ModelConfig model;
  GridConfig grid;
  RunConfig run;
  CheckConfig check;
  OutputConfig output;

  TimeGrid time_grid() const { return TimeGrid::from_horizon(grid.dt, grid.T); }

  std::size_t output_stride() const {
    if (run.output_interval == 0.0) return 1;
    return static_cast<std::size_t>(std::llround(run.output_interval / grid.dt));
  }

  ModelSpec build_model() const {
    ModelSpec m = model.kind == ModelKind::random_hamiltonian
                      ? make_random_hamiltonian(model.H.front(), model.B.front(), model.gamma)
                      : make_measurement_model(OperatorPolynomial(model.H), OperatorPolynomial(model.B), model.gamma);
    if (check.perturb_drift != 0.0)
      m = m.with_drift_perturbation(Complex(check.perturb_drift) * Operator::identity(model.dim));
    return m;
  }

  const NamedObservable* find_observable(const std::string& name) const {
    for (const auto& o : run.observables)
      if (o.name == name) return &o;
    return nullptr;
  }
};

struct ParseResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  // "field.path: message"
  bool ok() const { return config.has_value(); }
};

namespace detail {

inline std::optional<Mode> mode_from_string(const std::string& s) {
  for (Mode m : {Mode::linear, Mode::nonlinear, Mode::density_linear, Mode::sme})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

inline std::optional<ModelKind> kind_from_string(const std::string& s) {
  for (ModelKind k : {ModelKind::random_hamiltonian, ModelKind::measurement})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

// Collects every problem it meets instead of stopping at the first.
class Reader {
 public:
  std::vector<std::string> errors;

  void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

  const Json* object(const Json& parent, const std::string& key, const std::string& path, bool required) {
    if (!parent.contains(key)) {
      if (required) fail(path, "missing required block");
      return nullptr;
    }
    const Json& v = parent.at(key);
    if (!v.is_object()) {
      fail(path, "expected an object");
      return nullptr;
    }
    return &v;
  }

  void unknown_keys(const Json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : obj.items()) {
      bool found = false;
      for (const char* a : allowed) found = found || k == a;
      if (!found) fail(path + "." + k, "unknown field");
    }
  }

  std::optional<double> number(const Json& obj, const std::string& key, const std::string& path, std::optional<double> def) {
    if (!obj.contains(key)) {
      if (!def) fail(path, "missing required number");
      return def;
    }
    const Json& v = obj.at(key);
    if (!v.is_number()) {
      fail(path, "expected a number");
      return std::nullopt;
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
      fail(path, "must be finite");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::uint64_t> count(const Json& obj, const std::string& key, const std::string& path,
                                     std::optional<std::uint64_t> def) {
    if (!obj.contains(key)) {
      if (!def) fail(path, "missing required integer");
      return def;
    }
    const Json& v = obj.at(key);
    if (!v.is_number_unsigned()) {
      fail(path, "expected a non-negative integer");
      return std::nullopt;
    }
    return v.get<std::uint64_t>();
  }

  std::optional<std::string> string(const Json& obj, const std::string& key, const std::string& path,
                                    std::optional<std::string> def) {
    if (!obj.contains(key)) {
      if (!def) fail(path, "missing required string");
      return def;
    }
    const Json& v = obj.at(key);
    if (!v.is_string()) {
      fail(path, "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<Complex> complex(const Json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(path, "expected a [re, im] pair");
      return std::nullopt;
    }
    const Complex z(v[0].get<double>(), v[1].get<double>());
    if (!is_finite(z)) {
      fail(path, "must be finite");
      return std::nullopt;
    }
    return z;
  }

  std::optional<StateVector> vector(const Json& v, std::size_t d, const std::string& path) {
    if (!v.is_array() || v.size() != d) {
      fail(path, "expected an array of " + std::to_string(d) + " [re, im] pairs");
      return std::nullopt;
    }
    StateVector out(d);
    bool good = true;
    for (std::size_t i = 0; i < d; ++i) {
      auto z = complex(v[i], path + "[" + std::to_string(i) + "]");
      if (z) out[i] = *z;
      good = good && z.has_value();
    }
    if (!good) return std::nullopt;
    return out;
  }

  std::optional<Operator> matrix(const Json& v, std::size_t d, const std::string& path, bool hermitian) {
    if (!v.is_array() || v.size() != d) {
      fail(path, "expected " + std::to_string(d) + " rows");
      return std::nullopt;
    }
    Operator out = Operator::zero(d);
    bool good = true;
    for (std::size_t i = 0; i < d; ++i) {
      const std::string rp = path + "[" + std::to_string(i) + "]";
      if (!v[i].is_array() || v[i].size() != d) {
        fail(rp, "expected " + std::to_string(d) + " entries");
        good = false;
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) {
        auto z = complex(v[i][j], rp + "[" + std::to_string(j) + "]");
        if (z) out(i, j) = *z;
        good = good && z.has_value();
      }
    }
    if (!good) return std::nullopt;
    if (hermitian && !is_hermitian(out)) {
      fail(path, "not Hermitian (residual " + std::to_string(hermitian_residual(out)) + ")");
      return std::nullopt;
    }
    return out;
  }

  std::vector<Operator> polynomial(const Json& model, const std::string& key, std::size_t d, const std::string& path,
                                   bool hermitian, std::size_t max_coeffs) {
    std::vector<Operator> out;
    const Json* block = object(model, key, path, true);
    if (!block) return out;
    unknown_keys(*block, path, {"coefficients"});
    const std::string cp = path + ".coefficients";
    if (!block->contains("coefficients") || !block->at("coefficients").is_array()) {
      fail(cp, "expected an array of matrices");
      return out;
    }
    const Json& c = block->at("coefficients");
    if (c.empty() || c.size() > max_coeffs) {
      fail(cp, "expected 1 to " + std::to_string(max_coeffs) + " coefficients");
      return out;
    }
    bool good = true;
    for (std::size_t k = 0; k < c.size(); ++k) {
      auto a = matrix(c[k], d, cp + "[" + std::to_string(k) + "]", hermitian);
      if (a) out.push_back(*a);
      good = good && a.has_value();
    }
    if (!good) out.clear();
    return out;
  }
};

// Index of t on a grid of spacing dt, or nullopt when t is off the grid.
inline std::optional<std::size_t> grid_index(double t, double dt) {
  const double k = std::round(t / dt);
  if (k < 0.0 || std::abs(k * dt - t) > 1e-9 * std::max(1.0, std::abs(t))) return std::nullopt;
  return static_cast<std::size_t>(k);
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Json matrix_json(const Operator& a) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < a.dim(); ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < a.dim(); ++j) row.push_back(complex_json(a(i, j)));
    rows.push_back(row);
  }
  return rows;
}

inline Json polynomial_json(const std::vector<Operator>& coeffs) {
  Json c = Json::array();
  for (const auto& a : coeffs) c.push_back(matrix_json(a));
  return Json{{"coefficients", c}};
}

}  // namespace detail

inline ParseResult parse_config(const std::string& text) {
  ParseResult res;
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    res.errors.push_back(std::string("document: ") + e.what());
    return res;
  }
  detail::Reader r;
  if (!doc.is_object()) {
    res.errors.push_back("document: expected a JSON object");
    return res;
  }
  r.unknown_keys(doc, "", {"model", "grid", "run", "check", "output"});
  ExperimentConfig c;

  // model
  bool model_ok = false;
  if (const Json* m = r.object(doc, "model", "model", true)) {
    const std::size_t before = r.errors.size();
    auto kind = r.string(*m, "kind", "model.kind", std::nullopt);
    if (kind) {
      if (auto k = detail::kind_from_string(*kind))
        c.model.kind = *k;
      else
        r.fail("model.kind", "unknown kind '" + *kind + "'");
    }
    const bool rh = c.model.kind == ModelKind::random_hamiltonian;
    r.unknown_keys(*m, "model", {"kind", "dim", "gamma", "H", rh ? "K" : "B"});
    auto dim = r.count(*m, "dim", "model.dim", std::nullopt);
    if (dim && (*dim < 1 || *dim > 64)) r.fail("model.dim", "must be between 1 and 64");
    auto gamma = r.number(*m, "gamma", "model.gamma", std::nullopt);
    if (gamma && *gamma < 0.0) r.fail("model.gamma", "must be non-negative");
    if (gamma) c.model.gamma = *gamma;
    if (dim && *dim >= 1 && *dim <= 64 && kind && r.errors.size() == before) {
      c.model.dim = *dim;
      const std::size_t maxc = rh ? 1 : OperatorPolynomial::kMaxDegree + 1;
      c.model.H = r.polynomial(*m, "H", c.model.dim, "model.H", true, maxc);
      c.model.B = rh ? r.polynomial(*m, "K", c.model.dim, "model.K", true, 1)
                     : r.polynomial(*m, "B", c.model.dim, "model.B", false, maxc);
    }
    model_ok = r.errors.size() == before;
  }

  // grid
  bool grid_ok = false;
  if (const Json* g = r.object(doc, "grid", "grid", true)) {
    const std::size_t before = r.errors.size();
    r.unknown_keys(*g, "grid", {"dt", "T"});
    auto dt = r.number(*g, "dt", "grid.dt", std::nullopt);
    auto T = r.number(*g, "T", "grid.T", std::nullopt);
    if (dt && *dt <= 0.0) r.fail("grid.dt", "must be positive");
    if (T && *T <= 0.0) r.fail("grid.T", "must be positive");
    if (dt && T && r.errors.size() == before) {
      c.grid = {*dt, *T};
      try {
        (void)c.time_grid();
      } catch (const Error&) {
        r.fail("grid.T", "must be an integer multiple of grid.dt");
      }
    }
    grid_ok = r.errors.size() == before;
  }
  if (model_ok && grid_ok && c.model.gamma * c.grid.dt >= 1.0)
    r.fail("grid.dt", "unstable OU scheme: gamma*dt = " + std::to_string(c.model.gamma * c.grid.dt) + " >= 1");

  // run
  c.run.psi0 = StateVector::basis(c.model.dim, 0);
  if (const Json* run = r.object(doc, "run", "run", true)) {
    r.unknown_keys(*run, "run", {"mode", "n_traj", "master_seed", "output_interval", "substeps", "psi0", "observables"});
    if (auto s = r.string(*run, "mode", "run.mode", std::string("linear"))) {
      if (auto md = detail::mode_from_string(*s))
        c.run.mode = *md;
      else
        r.fail("run.mode", "unknown mode '" + *s + "'");
    }
    if (model_ok && c.run.mode == Mode::density_linear && c.model.kind != ModelKind::random_hamiltonian)
      r.fail("run.mode", "density_linear needs a random_hamiltonian model");
    if (auto n = r.count(*run, "n_traj", "run.n_traj", std::nullopt)) {
      if (*n < 2) r.fail("run.n_traj", "must be at least 2");
      c.run.n_traj = *n;
    }
    if (auto s = r.count(*run, "master_seed", "run.master_seed", std::nullopt)) c.run.master_seed = *s;
    if (auto s = r.count(*run, "substeps", "run.substeps", 1)) {
      if (*s < 1) r.fail("run.substeps", "must be at least 1");
      c.run.substeps = *s;
    }
    if (auto oi = r.number(*run, "output_interval", "run.output_interval", 0.0)) {
      c.run.output_interval = *oi;
      if (*oi < 0.0) {
        r.fail("run.output_interval", "must be non-negative");
      } else if (*oi > 0.0 && grid_ok) {
        auto k = detail::grid_index(*oi, c.grid.dt);
        if (!k || *k == 0 || c.time_grid().n_steps() % *k != 0)
          r.fail("run.output_interval", "must be a multiple of grid.dt that divides grid.T");
      }
    }
    if (model_ok) {
      if (run->contains("psi0")) {
        if (auto v = r.vector(run->at("psi0"), c.model.dim, "run.psi0")) {
          if (std::abs(v->norm() - 1.0) > 1e-9)
            r.fail("run.psi0", "not normalized (norm " + std::to_string(v->norm()) + ")");
          else
            c.run.psi0 = *v;
        }
      }
      if (run->contains("observables")) {
        const Json& obs = run->at("observables");
        if (!obs.is_array()) r.fail("run.observables", "expected an array");
        std::set<std::string> names;
        static const std::regex ident("[A-Za-z_][A-Za-z0-9_]*");
        for (std::size_t q = 0; obs.is_array() && q < obs.size(); ++q) {
          const std::string p = "run.observables[" + std::to_string(q) + "]";
          if (!obs[q].is_object()) {
            r.fail(p, "expected an object");
            continue;
          }
          r.unknown_keys(obs[q], p, {"name", "matrix"});
          auto name = r.string(obs[q], "name", p + ".name", std::nullopt);
          if (name && !std::regex_match(*name, ident)) r.fail(p + ".name", "must be an identifier");
          if (name && !names.insert(*name).second) r.fail(p + ".name", "duplicate observable name");
          if (!obs[q].contains("matrix")) {
            r.fail(p + ".matrix", "missing required matrix");
            continue;
          }
          auto a = r.matrix(obs[q].at("matrix"), c.model.dim, p + ".matrix", true);
          if (name && a) c.run.observables.push_back({*name, *a});
        }
      }
    }
  }

  // check
  if (const Json* ck = r.object(doc, "check", "check", false)) {
    r.unknown_keys(*ck, "check",
                   {"suites", "c_disc", "c_fd", "perturb_drift", "girsanov_n_traj", "girsanov_times",
                    "girsanov_observable", "covariance_n_paths", "covariance_points"});
    if (ck->contains("suites")) {
      const Json& s = ck->at("suites");
      c.check.suites.clear();
      if (!s.is_array()) r.fail("check.suites", "expected an array of suite names");
      for (std::size_t q = 0; s.is_array() && q < s.size(); ++q) {
        const std::string p = "check.suites[" + std::to_string(q) + "]";
        if (!s[q].is_string()) {
          r.fail(p, "expected a string");
          continue;
        }
        const std::string name = s[q].get<std::string>();
        bool known = false;
        for (const auto& k : known_suites()) known = known || k == name;
        if (!known)
          r.fail(p, "unknown suite '" + name + "'");
        else
          c.check.suites.push_back(name);
      }
    }
    if (auto v = r.number(*ck, "c_disc", "check.c_disc", 5.0)) {
      if (*v < 0.0) r.fail("check.c_disc", "must be non-negative");
      c.check.c_disc = *v;
    }
    if (auto v = r.number(*ck, "c_fd", "check.c_fd", 5.0)) {
      if (*v < 0.0) r.fail("check.c_fd", "must be non-negative");
      c.check.c_fd = *v;
    }
    if (auto v = r.number(*ck, "perturb_drift", "check.perturb_drift", 0.0)) c.check.perturb_drift = *v;
    if (auto v = r.count(*ck, "girsanov_n_traj", "check.girsanov_n_traj", 10000)) {
      if (*v < 2) r.fail("check.girsanov_n_traj", "must be at least 2");
      c.check.girsanov_n_traj = *v;
    }
    if (ck->contains("girsanov_times")) {
      const Json& ts = ck->at("girsanov_times");
      if (!ts.is_array()) r.fail("check.girsanov_times", "expected an array of times");
      for (std::size_t q = 0; ts.is_array() && q < ts.size(); ++q) {
        const std::string p = "check.girsanov_times[" + std::to_string(q) + "]";
        if (!ts[q].is_number()) {
          r.fail(p, "expected a number");
          continue;
        }
        const double t = ts[q].get<double>();
        if (grid_ok) {
          auto k = detail::grid_index(t, c.grid.dt);
          if (!k || *k == 0 || *k > c.time_grid().n_steps()) r.fail(p, "must be a positive grid time no later than grid.T");
        }
        c.check.girsanov_times.push_back(t);
      }
    }
    if (auto v = r.string(*ck, "girsanov_observable", "check.girsanov_observable", std::string())) {
      c.check.girsanov_observable = *v;
      if (!v->empty() && !c.find_observable(*v)) r.fail("check.girsanov_observable", "no run observable named '" + *v + "'");
    }
    if (auto v = r.count(*ck, "covariance_n_paths", "check.covariance_n_paths", 100000)) {
      if (*v < 2) r.fail("check.covariance_n_paths", "must be at least 2");
      c.check.covariance_n_paths = *v;
    }
    if (auto v = r.count(*ck, "covariance_points", "check.covariance_points", 5)) {
      if (*v < 1) r.fail("check.covariance_points", "must be at least 1");
      c.check.covariance_points = *v;
    }
  }

  // output
  if (const Json* out = r.object(doc, "output", "output", false)) {
    r.unknown_keys(*out, "output", {"directory"});
    if (auto d = r.string(*out, "directory", "output.directory", std::string("ouqt_out"))) c.output.directory = *d;
  }

  if (r.errors.empty()) {
    try {
      (void)c.build_model();
    } catch (const Error& e) {
      r.fail("model", e.what());
    }
  }
  res.errors = std::move(r.errors);
  if (res.errors.empty()) res.config = std::move(c);
  return res;
}

// Canonical form: every field present, fixed key order.
inline Json to_json(const ExperimentConfig& c) {
  const bool rh = c.model.kind == ModelKind::random_hamiltonian;
  Json model = {{"kind", to_string(c.model.kind)}, {"dim", c.model.dim}, {"gamma", c.model.gamma}};
  model["H"] = detail::polynomial_json(c.model.H);
  model[rh ? "K" : "B"] = detail::polynomial_json(c.model.B);

  Json psi0 = Json::array();
  for (std::size_t i = 0; i < c.run.psi0.dim(); ++i) psi0.push_back(detail::complex_json(c.run.psi0[i]));
  Json obs = Json::array();
  for (const auto& o : c.run.observables) obs.push_back(Json{{"name", o.name}, {"matrix", detail::matrix_json(o.matrix)}});
  Json run = {{"mode", to_string(c.run.mode)},
              {"n_traj", c.run.n_traj},
              {"master_seed", c.run.master_seed},
              {"output_interval", c.run.output_interval},
              {"substeps", c.run.substeps},
              {"psi0", psi0},
              {"observables", obs}};

  Json check = {{"suites", c.check.suites},
                {"c_disc", c.check.c_disc},
                {"c_fd", c.check.c_fd},
                {"perturb_drift", c.check.perturb_drift},
                {"girsanov_n_traj", c.check.girsanov_n_traj},
                {"girsanov_times", c.check.girsanov_times},
                {"girsanov_observable", c.check.girsanov_observable},
                {"covariance_n_paths", c.check.covariance_n_paths},
                {"covariance_points", c.check.covariance_points}};

  return Json{{"model", model},
              {"grid", {{"dt", c.grid.dt}, {"T", c.grid.T}}},
              {"run", run},
              {"check", check},
              {"output", {{"directory", c.output.directory}}}};
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

}  // namespace ouqt
