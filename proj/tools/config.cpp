#include "config.hpp"

#include "qprobe/parallel.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace qprobe::cli {

using spin::Vec3;

void fail(const YAML::Node& n, const std::string& msg) {
  std::ostringstream s;
  s << "config";
  if (n.IsDefined() && n.Mark().line >= 0) s << ":" << n.Mark().line + 1 << ":" << n.Mark().column + 1;
  s << ": " << msg;
  throw ConfigError(s.str());
}

void allow_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
  if (!n.IsMap()) fail(n, where + " must be a mapping");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
  }
}

YAML::Node require(const YAML::Node& n, const std::string& key) {
  const YAML::Node v = n[key];
  if (!v) fail(n, "missing required key '" + key + "'");
  return v;
}

namespace {

template <class T>
T scalar(const YAML::Node& v, const std::string& key, const char* what) {
  if (!v.IsScalar()) fail(v, "'" + key + "' must be " + what);
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    fail(v, "'" + key + "' must be " + what);
  }
}

Vec3 get_vec3(const YAML::Node& n, const std::string& key, std::optional<Vec3> def = std::nullopt) {
  const YAML::Node v = n[key];
  if (!v) {
    if (def) return *def;
    fail(n, "missing required key '" + key + "'");
  }
  if (!v.IsSequence() || v.size() != 3) fail(v, "'" + key + "' must be a list of 3 numbers");
  Vec3 out;
  for (std::size_t i = 0; i < 3; ++i) out(Index(i)) = scalar<double>(v[i], key, "a number");
  return out;
}

RVec to_rvec(const std::vector<double>& v) { return Eigen::Map<const RVec>(v.data(), Index(v.size())); }

}  // namespace

double get_double(const YAML::Node& n, const std::string& key, std::optional<double> def) {
  const YAML::Node v = n[key];
  if (!v) {
    if (def) return *def;
    fail(n, "missing required key '" + key + "'");
  }
  const double x = scalar<double>(v, key, "a number");
  if (!std::isfinite(x)) fail(v, "'" + key + "' must be finite");
  return x;
}

long long get_int(const YAML::Node& n, const std::string& key, std::optional<long long> def) {
  const YAML::Node v = n[key];
  if (!v) {
    if (def) return *def;
    fail(n, "missing required key '" + key + "'");
  }
  return scalar<long long>(v, key, "an integer");
}

bool get_bool(const YAML::Node& n, const std::string& key, std::optional<bool> def) {
  const YAML::Node v = n[key];
  if (!v) {
    if (def) return *def;
    fail(n, "missing required key '" + key + "'");
  }
  return scalar<bool>(v, key, "true or false");
}

std::string get_string(const YAML::Node& n, const std::string& key, std::optional<std::string> def) {
  const YAML::Node v = n[key];
  if (!v) {
    if (def) return *def;
    fail(n, "missing required key '" + key + "'");
  }
  return scalar<std::string>(v, key, "a string");
}

std::vector<double> get_doubles(const YAML::Node& n, const std::string& key) {
  const YAML::Node v = require(n, key);
  if (!v.IsSequence()) fail(v, "'" + key + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    const double d = scalar<double>(x, key, "a list of numbers");
    if (!std::isfinite(d)) fail(x, "'" + key + "' entries must be finite");
    out.push_back(d);
  }
  return out;
}

std::vector<double> get_axis(const YAML::Node& n, const std::string& key) {
  const YAML::Node v = require(n, key);
  std::vector<double> out;
  if (v.IsSequence()) {
    out = get_doubles(n, key);
  } else if (v.IsMap()) {
    allow_keys(v, key, {"start", "stop", "count"});
    const double a = get_double(v, "start"), b = get_double(v, "stop");
    const long long c = get_int(v, "count");
    if (c < 1) fail(v["count"], "'count' must be >= 1");
    for (long long i = 0; i < c; ++i) out.push_back(c == 1 ? a : a + (b - a) * double(i) / double(c - 1));
  } else {
    fail(v, "'" + key + "' must be a list or {start, stop, count}");
  }
  if (out.empty()) fail(v, "'" + key + "' is empty");
  return out;
}

CMat get_complex_matrix(const YAML::Node& n, const std::string& key, Index rows, Index cols) {
  const YAML::Node v = require(n, key);
  std::vector<double> flat;
  if (v.IsSequence() && v.size() > 0 && v[0].IsSequence()) {
    // list of [re, im] pairs
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].IsSequence() || v[i].size() != 2) fail(v[i], "'" + key + "' entries must be [re, im] pairs");
      flat.push_back(scalar<double>(v[i][0], key, "a number"));
      flat.push_back(scalar<double>(v[i][1], key, "a number"));
    }
  } else {
    flat = get_doubles(n, key);
  }
  if (Index(flat.size()) != 2 * rows * cols)
    fail(v, "'" + key + "' needs " + std::to_string(2 * rows * cols) + " numbers (row-major re, im), got " +
                std::to_string(flat.size()));
  CMat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      const std::size_t k = std::size_t(2 * (i * cols + j));
      m(i, j) = cplx(flat[k], flat[k + 1]);
    }
  return m;
}

model::ProbePureState get_probe_state(const YAML::Node& n, const std::string& key) {
  const YAML::Node v = require(n, key);
  if (v.IsScalar()) {
    const auto s = v.as<std::string>();
    if (s == "pi0") return model::basis_state(0);
    if (s == "pi1") return model::basis_state(1);
    if (s == "plus") return model::superposition(1, 1);
    if (s == "minus") return model::superposition(1, -1);
    fail(v, "'" + key + "' must be pi0, pi1, plus, minus or {c0, c1}");
  }
  allow_keys(v, key, {"c0", "c1"});
  const auto c0 = get_doubles(v, "c0"), c1 = get_doubles(v, "c1");
  if (c0.size() != 2 || c1.size() != 2) fail(v, "'" + key + "' amplitudes are [re, im] pairs");
  try {
    return model::superposition(cplx(c0[0], c0[1]), cplx(c1[0], c1[1]));
  } catch (const std::invalid_argument& e) {
    fail(v, e.what());
  }
}

LoadedConfig load_config(const std::filesystem::path& path) {
  LoadedConfig c;
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  c.text = ss.str();
  c.dir = std::filesystem::absolute(path).parent_path();
  try {
    c.root = YAML::Load(c.text);
    if (c.root.IsMap() && c.root["manifest_version"]) {
      if (c.root["seed"]) c.seed = c.root["seed"].as<std::uint64_t>();
      c.text = require(c.root, "config").as<std::string>();
      c.root = YAML::Load(c.text);
    }
  } catch (const YAML::ParserException& e) {
    std::ostringstream s;
    s << "config:" << e.mark.line + 1 << ":" << e.mark.column + 1 << ": " << e.msg;
    throw ConfigError(s.str());
  }
  if (!c.root.IsMap()) throw ConfigError("config: top level must be a mapping");
  return c;
}

namespace {

CMat random_bounded_hermitian(Index n, std::mt19937_64& g, double bound) {
  std::uniform_real_distribution<double> u(-1, 1);
  CMat m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) {
      cplx z;
      do z = cplx(u(g), u(g));
      while (std::abs(z) > 1);
      if (i == j) z = z.real();
      m(i, j) = bound * z;
      m(j, i) = std::conj(m(i, j));
    }
  return m;
}

CMat random_density(Index n, std::mt19937_64& g) {
  std::normal_distribution<double> nd;
  CMat a(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = cplx(nd(g), nd(g));
  const CMat r = a * a.adjoint();
  return r / r.trace().real();
}

}  // namespace

spin::SpinGeometry parse_spin_geometry(const YAML::Node& n, std::uint64_t seed, std::vector<spin::Vec3>* probes) {
  spin::SpinGeometry g;
  const YAML::Node s = require(n, "spins");
  if (s.IsMap()) {
    allow_keys(s, "spins", {"count", "radius", "min_separation", "moment", "seed"});
    const int count = int(get_int(s, "count", 4));
    const auto pseed = std::uint64_t(get_int(s, "seed", (long long)(derive_seed(seed, 1) >> 1)));
    try {
      g.positions = spin::random_spin_positions(count, get_double(s, "radius", 0.5), get_double(s, "min_separation", 0.3), pseed);
    } catch (const std::invalid_argument& e) {
      fail(s, e.what());
    }
    g.moments.assign(std::size_t(count), get_double(s, "moment", 2.7928));
  } else if (s.IsSequence()) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      const YAML::Node e = s[i];
      allow_keys(e, "spins entry", {"position", "moment"});
      g.positions.push_back(get_vec3(e, "position"));
      g.moments.push_back(get_double(e, "moment", 2.7928));
    }
  } else {
    fail(s, "'spins' must be a mapping or a list of {position, moment}");
  }
  g.b0 = get_vec3(n, "b0", Vec3(0, 0, 1e-3));

  const YAML::Node p = n["probe"];
  std::vector<Vec3> pos;
  if (p) {
    allow_keys(p, "probe", {"moment", "axis", "position", "positions", "random"});
    g.probe_moment = get_double(p, "moment", 0.3);
    const Vec3 axis = get_vec3(p, "axis", Vec3(1, 0, 0));
    if (axis.norm() == 0) fail(p["axis"], "probe axis must be nonzero");
    g.probe_axis = axis.normalized();
    if (p["position"]) pos.push_back(get_vec3(p, "position"));
    if (p["positions"]) {
      const YAML::Node l = p["positions"];
      if (!l.IsSequence()) fail(l, "'positions' must be a list of [x, y, z]");
      for (std::size_t i = 0; i < l.size(); ++i) {
        YAML::Node wrap;
        wrap["p"] = l[i];
        pos.push_back(get_vec3(wrap, "p"));
      }
    }
    if (p["random"]) {
      const YAML::Node r = p["random"];
      allow_keys(r, "probe.random", {"count", "r_min", "r_max", "seed"});
      const int count = int(get_int(r, "count", 1));
      const auto rseed = std::uint64_t(get_int(r, "seed", (long long)(derive_seed(seed, 2) >> 1)));
      for (int i = 0; i < count; ++i)
        pos.push_back(spin::random_probe_position(get_double(r, "r_min", 3.5), get_double(r, "r_max", 5.0),
                                                  derive_seed(rseed, std::uint64_t(i))));
    }
  }
  if (pos.empty()) pos.push_back(g.probe_position);
  g.probe_position = pos.front();
  if (probes) *probes = pos;
  try {
    spin::check_geometry(g);
  } catch (const std::invalid_argument& e) {
    fail(s, e.what());
  }
  return g;
}

vibronic::VibronicModel parse_vibronic_model(const YAML::Node& n) {
  vibronic::VibronicModel m;
  m.omega = to_rvec(get_doubles(n, "omega"));
  m.gamma_d = to_rvec(get_doubles(n, "gamma_d"));
  m.gamma_a = to_rvec(get_doubles(n, "gamma_a"));
  m.V = get_double(n, "V", 1.0);
  m.lambda = get_double(n, "lambda", 100.0);
  m.T = get_double(n, "T", 300.0);
  try {
    vibronic::check_model(m);
  } catch (const std::invalid_argument& e) {
    fail(n, e.what());
  }
  return m;
}

ModelSpec parse_model(const YAML::Node& n, std::uint64_t seed) {
  ModelSpec s;
  s.builder = get_string(n, "builder", "explicit");
  if (s.builder == "explicit") {
    allow_keys(n, "model", {"builder", "dim", "v_ps", "h_s", "rho_s"});
    const Index d = Index(get_int(n, "dim"));
    if (d < 1 || d > 1024) fail(n["dim"], "'dim' must be in [1, 1024]");
    s.v_ps = get_complex_matrix(n, "v_ps", 2 * d, 2 * d);
    if (!linalg::is_hermitian(s.v_ps, 1e-10)) fail(n["v_ps"], "v_ps is not Hermitian");
    if (n["h_s"]) {
      const CMat h = get_complex_matrix(n, "h_s", d, d);
      if (!linalg::is_hermitian(h, 1e-10)) fail(n["h_s"], "h_s is not Hermitian");
      s.v_ps = model::combine_coupling(h, s.v_ps);
    }
    if (!n["rho_s"] || (n["rho_s"].IsScalar() && n["rho_s"].as<std::string>() == "mixed"))
      s.rho_s = CMat::Identity(d, d) / double(d);
    else {
      s.rho_s = get_complex_matrix(n, "rho_s", d, d);
      try {
        linalg::check_density(s.rho_s);
      } catch (const std::invalid_argument& e) {
        fail(n["rho_s"], e.what());
      }
    }
  } else if (s.builder == "random") {
    allow_keys(n, "model", {"builder", "dim", "bound", "seed"});
    const Index d = Index(get_int(n, "dim", 2));
    if (d < 1 || d > 256) fail(n, "'dim' must be in [1, 256]");
    std::mt19937_64 g(std::uint64_t(get_int(n, "seed", (long long)(derive_seed(seed, 3) >> 1))));
    s.v_ps = random_bounded_hermitian(2 * d, g, get_double(n, "bound", std::sqrt(2.0)));
    s.rho_s = random_density(d, g);
  } else if (s.builder == "spin") {
    allow_keys(n, "model", {"builder", "spins", "b0", "probe"});
    const auto geo = parse_spin_geometry(n, seed, nullptr);
    const CMat h = spin::build_spin_hamiltonian(geo).matrix() / spin::kHbar;
    s.v_ps = model::combine_coupling(h, spin::build_probe_coupling(geo) / spin::kHbar);
    s.rho_s = CMat::Identity(h.rows(), h.rows()) / double(h.rows());
    s.hbar = spin::kHbar;
  } else if (s.builder == "vibronic") {
    allow_keys(n, "model", {"builder", "omega", "gamma_d", "gamma_a", "V", "T", "cutoff"});
    YAML::Node copy = YAML::Clone(n);
    const auto m = parse_vibronic_model(copy);
    const int cutoff = int(get_int(n, "cutoff", 8));
    if (cutoff < 1 || std::pow(cutoff + 1.0, double(m.omega.size())) > 1024) fail(n, "'cutoff' too large for the mode count");
    const auto fm = vibronic::fock_model(m, cutoff);
    s.v_ps = model::assemble_coupling(fm.blocks, model::control_eigenbasis(0, 0)) / vibronic::kHbar;
    s.rho_s = fm.rho;
    s.hbar = vibronic::kHbar;
    s.lambda_shift = -vibronic::polaron(m).reorganization;
  } else {
    fail(n["builder"], "unknown builder '" + s.builder + "' (explicit, random, spin, vibronic)");
  }
  try {
    linalg::check_density(s.rho_s, 1e-8);
  } catch (const std::exception& e) {
    fail(n, std::string("rho_s: ") + e.what());
  }
  return s;
}

spin::NmrRunConfig parse_nmr_run(const YAML::Node& n) {
  spin::NmrRunConfig c;
  if (!n) return c;
  allow_keys(n, "run", {"budget", "budgets", "tau_step", "lambda_count", "shots", "lambda_margin", "gap_margin",
                        "pad_factor", "window"});
  c.budgets = n["budgets"] ? get_doubles(n, "budgets") : c.budgets;
  c.budget = get_double(n, "budget", n["budgets"] ? *std::max_element(c.budgets.begin(), c.budgets.end()) : c.budget);
  c.tau_step = get_double(n, "tau_step", c.tau_step);
  c.lambda_count = int(get_int(n, "lambda_count", c.lambda_count));
  c.shots = get_int(n, "shots", c.shots);
  c.lambda_margin = get_double(n, "lambda_margin", c.lambda_margin);
  c.gap_margin = get_double(n, "gap_margin", c.gap_margin);
  c.pad_factor = int(get_int(n, "pad_factor", c.pad_factor));
  c.window = parse_window(n, "window");
  try {
    spin::check_config(c);
  } catch (const std::invalid_argument& e) {
    fail(n, e.what());
  }
  return c;
}

estimation::Window parse_window(const YAML::Node& n, const std::string& key) {
  const auto w = get_string(n, key, "rectangular");
  if (w == "rectangular") return estimation::Window::rectangular;
  if (w == "hann") return estimation::Window::hann;
  fail(n[key], "'" + key + "' must be rectangular or hann");
}

}  // namespace qprobe::cli
