#include "commands.hpp"

#include "qprobe/estimation.hpp"
#include "qprobe/parallel.hpp"
#include "qprobe/perturbation.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

namespace qprobe::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

// json cannot hold inf/nan
json jnum(double x) {
  if (std::isfinite(x)) return x;
  return num(x);
}

struct Context {
  LoadedConfig cfg;
  fs::path out;
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string command;
  std::vector<std::string> outputs;
};

Context make_context(const RunOptions& o, const std::string& command, const std::set<std::string>& keys) {
  Context c;
  c.cfg = load_config(o.config);
  c.command = command;
  std::set<std::string> allowed = keys;
  allowed.insert({"seed", "jobs"});
  allow_keys(c.cfg.root, "top level", allowed);
  c.seed = o.seed ? *o.seed
           : c.cfg.seed ? *c.cfg.seed
                        : std::uint64_t(get_int(c.cfg.root, "seed", 1));
  c.jobs = o.jobs ? *o.jobs : int(get_int(c.cfg.root, "jobs", 1));
  if (c.jobs < 1) fail(c.cfg.root["jobs"], "'jobs' must be >= 1");
  c.out = o.out;
  fs::create_directories(c.out);
  return c;
}

fs::path resolve(const Context& c, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : c.cfg.dir / q;
}

class Csv {
 public:
  Csv(Context& c, const std::string& name, const std::vector<std::string>& header)
      : path_(c.out / name), file_(path_, std::ios::binary) {
    if (!file_) throw std::runtime_error("cannot write " + path_.string());
    c.outputs.push_back(name);
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) file_ << (i ? "," : "") << cells[i];
    file_ << "\n";
  }

 private:
  fs::path path_;
  std::ofstream file_;
};

void write_manifest(Context& c, const json& report) {
  json m;
  m["manifest_version"] = 1;
  m["tool"] = "qprobe";
  m["version"] = kVersion;
  m["versions"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"yaml-cpp", "0.7+"}};
  m["command"] = c.command;
  m["seed"] = c.seed;
  m["config"] = c.cfg.text;
  m["outputs"] = c.outputs;
  m["report"] = report;
  std::ofstream f(c.out / "manifest.json", std::ios::binary);
  f << m.dump(2) << "\n";
}

json validity_json(const perturbation::ValidityReport& r) {
  json j;
  j["lambda"] = jnum(r.lambda);
  j["tau"] = jnum(r.tau);
  j["order"] = r.order;
  j["margin"] = jnum(r.margin);
  j["pass"] = r.pass;
  j["matrix_element_bound"] = jnum(r.matrix_element_bound);
  j["constraints"] = json::array();
  for (const auto& c : r.constraints)
    j["constraints"].push_back(
        {{"name", c.name}, {"lhs", jnum(c.lhs)}, {"rhs", jnum(c.rhs)}, {"ratio", jnum(c.ratio)}, {"pass", c.pass}});
  j["resonances"] = json::array();
  for (const auto& s : r.resonances)
    j["resonances"].push_back({{"j", s.j}, {"k", s.k}, {"gap", jnum(s.gap)}, {"detuning", jnum(s.detuning)}});
  return j;
}

model::ProbeControl parse_control(const YAML::Node& root) {
  model::ProbeControl c;
  if (const YAML::Node n = root["control"]) {
    allow_keys(n, "control", {"theta", "phi"});
    c.theta = get_double(n, "theta", 0.0);
    c.phi = get_double(n, "phi", 0.0);
    try {
      model::check_control(c);
    } catch (const std::invalid_argument& e) {
      fail(n, e.what());
    }
  }
  return c;
}

struct Experiment {
  std::string name;
  model::ProbePureState prep, meas;
};

std::vector<Experiment> parse_experiments(const YAML::Node& root) {
  std::vector<Experiment> out;
  if (const YAML::Node l = root["experiments"]) {
    if (!l.IsSequence() || l.size() == 0) fail(l, "'experiments' must be a non-empty list");
    for (std::size_t i = 0; i < l.size(); ++i) {
      const YAML::Node e = l[i];
      allow_keys(e, "experiment", {"name", "prep", "meas"});
      out.push_back({get_string(e, "name"), get_probe_state(e, "prep"), get_probe_state(e, "meas")});
      for (char ch : out.back().name)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) fail(e["name"], "name must be [A-Za-z0-9_-]");
    }
    if (root["prep"] || root["meas"]) fail(root, "give either 'experiments' or 'prep'/'meas'");
  } else {
    out.push_back({"", get_probe_state(root, "prep"), get_probe_state(root, "meas")});
  }
  return out;
}

// Column-indexed CSV reader.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    return -1;
  }
  int need(const std::string& name, const fs::path& path) const {
    const int c = col(name);
    if (c < 0) throw ConfigError(path.string() + ": missing column '" + name + "'");
    return c;
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

Table read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open input " + path.string());
  Table t;
  std::string line;
  if (!std::getline(f, line)) throw ConfigError(path.string() + ": empty file");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto r = split(line);
    if (r.size() != t.header.size())
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " fields");
    t.rows.push_back(std::move(r));
  }
  return t;
}

double parse_num(const std::string& s, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(path.string() + ": not a number: '" + s + "'");
  }
}

}  // namespace

// ---- sweep

int cmd_sweep(const RunOptions& o) {
  Context c = make_context(o, "sweep",
                           {"model", "control", "prep", "meas", "experiments", "grid", "shots", "validity_margin"});
  const YAML::Node& root = c.cfg.root;
  const ModelSpec ms = parse_model(require(root, "model"), c.seed);
  const auto ctl = parse_control(root);
  const auto exps = parse_experiments(root);
  const YAML::Node g = require(root, "grid");
  allow_keys(g, "grid", {"lambda", "tau"});
  const auto lambdas = get_axis(g, "lambda");
  const auto taus = get_axis(g, "tau");
  for (double t : taus)
    if (t < 0) fail(g["tau"], "tau values must be >= 0");
  const long long shots = get_int(root, "shots", 0);
  if (shots < 0) fail(root["shots"], "'shots' must be >= 0");
  perturbation::ValidityOptions vo;
  vo.margin = get_double(root, "validity_margin", 10.0);

  std::vector<dynamics::GridPoint> grid;
  for (double l : lambdas)
    for (double t : taus) grid.push_back({(l + ms.lambda_shift) / ms.hbar, t});
  for (const auto& gp : grid)
    if (gp.lambda < 0) fail(g["lambda"], "lambda (after builder shift) must be >= 0");

  const auto basis = model::control_eigenbasis(ctl.theta, ctl.phi);
  const auto blocks = model::decompose_coupling(ms.v_ps, basis);
  const double lmin = *std::min_element(lambdas.begin(), lambdas.end());
  const double tmax = *std::max_element(taus.begin(), taus.end());

  json report;
  report["builder"] = ms.builder;
  report["points"] = grid.size();
  report["experiments"] = json::array();
  for (std::size_t e = 0; e < exps.size(); ++e) {
    const auto& ex = exps[e];
    dynamics::SweepModel sm{ms.v_ps, ms.rho_s, ctl.theta, ctl.phi, ex.prep, ex.meas};
    const auto res = dynamics::run_sweep(sm, grid, shots, derive_seed(c.seed, e), c.jobs);
    const double q = perturbation::q_term(ex.prep, ex.meas);
    const std::string name = ex.name.empty() ? "sweep.csv" : "sweep_" + ex.name + ".csv";
    Csv csv(c, name, {"lambda", "tau", "p_exact", "p_sampled", "stderr", "q"});
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& p = res.points[i];
      csv.row({num(lambdas[i / taus.size()]), num(p.tau), num(p.p_exact), p.p_sampled ? num(*p.p_sampled) : "",
               p.p_sampled ? num(p.std_error) : "", num(q)});
    }
    const auto cls = perturbation::classify_leading_order(ex.prep, ex.meas);
    const auto vr = perturbation::validity_report(blocks, ms.rho_s, (lmin + ms.lambda_shift) / ms.hbar, tmax, cls.order, vo);
    report["experiments"].push_back({{"name", ex.name},
                                     {"file", name},
                                     {"leading_order", cls.order},
                                     {"near_member", cls.near_member},
                                     {"q", q},
                                     {"validity", validity_json(vr)}});
    std::cout << name << ": " << grid.size() << " points, leading order " << cls.order
              << (vr.pass ? "" : " (validity check failed at lambda_min)") << "\n";
  }
  write_manifest(c, report);
  return 0;
}

// ---- fit

namespace {

struct TauColumn {
  double tau = 0;
  std::vector<double> lambda, p;
  double q = 0;
};

std::vector<std::vector<std::size_t>> chunk(std::size_t n, int windows) {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(windows));
  for (std::size_t i = 0; i < n; ++i) out[i * std::size_t(windows) / n].push_back(i);
  return out;
}

std::vector<estimation::OscillationFit> window_fits(const TauColumn& col, int windows,
                                                    const estimation::FitOptions& base) {
  std::vector<std::size_t> order(col.lambda.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return col.lambda[a] < col.lambda[b]; });
  std::vector<estimation::OscillationFit> fits;
  for (const auto& idx : chunk(order.size(), windows)) {
    std::vector<double> l, p;
    for (auto i : idx) {
      l.push_back(col.lambda[order[i]]);
      p.push_back(col.p[order[i]]);
    }
    estimation::FitOptions fo = base;
    fo.lambda_ref = 0;
    fits.push_back(estimation::fit_oscillation(l, p, {}, col.tau, fo));
  }
  return fits;
}

}  // namespace

int cmd_fit(const RunOptions& o) {
  Context c = make_context(o, "fit", {"input", "envelope_order", "envelope_shift", "windows", "use", "hbar"});
  const YAML::Node& root = c.cfg.root;
  const fs::path input = resolve(c, get_string(root, "input"));
  const std::string use = get_string(root, "use", "auto");
  if (use != "auto" && use != "exact" && use != "sampled") fail(root["use"], "'use' must be auto, exact or sampled");
  const int windows = int(get_int(root, "windows", 3));
  if (windows < 3) fail(root["windows"], "'windows' must be >= 3");
  const double hbar = get_double(root, "hbar", 1.0);
  const double shift = get_double(root, "envelope_shift", 0.0);

  const Table t = read_csv(input);
  const int cl = t.need("lambda", input), ct = t.need("tau", input);
  const int ce = t.col("p_exact"), cs = t.col("p_sampled"), cq = t.col("q");
  const bool sampled = cs >= 0 && !t.rows.empty() && !t.rows[0][std::size_t(cs)].empty();
  int cp = -1;
  if (use == "sampled" || (use == "auto" && sampled)) cp = t.need("p_sampled", input);
  else cp = t.need("p_exact", input);
  (void)ce;

  std::map<double, TauColumn> cols;
  for (const auto& r : t.rows) {
    const double tau = parse_num(r[std::size_t(ct)], input);
    auto& col = cols[tau];
    col.tau = tau / hbar;
    col.lambda.push_back(parse_num(r[std::size_t(cl)], input));
    if (r[std::size_t(cp)].empty()) throw ConfigError(input.string() + ": empty probability cell");
    col.p.push_back(parse_num(r[std::size_t(cp)], input));
    col.q = cq >= 0 ? parse_num(r[std::size_t(cq)], input) : 0.0;
  }
  if (cols.empty()) throw ConfigError(input.string() + ": no data rows");

  // envelope order: explicit, or the rounded log-log slope of window amplitudes
  json report;
  double order = 0;
  const YAML::Node eo = root["envelope_order"];
  const bool auto_order = !eo || (eo.IsScalar() && eo.as<std::string>() == "auto");
  if (auto_order) {
    std::vector<double> slopes;
    for (const auto& [tau, col] : cols) {
      if (tau <= 0) continue;
      estimation::FitOptions fo;
      fo.q_offset = col.q;
      std::vector<estimation::OscillationFit> fits;
      try {
        fits = window_fits(col, windows, fo);
      } catch (const numerical_error&) {
        continue;
      }
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      bool ok = true;
      for (const auto& f : fits) {
        if (!(f.D > 0)) ok = false;
        const double x = std::log(f.lambda_ref), y = std::log(std::max(f.D, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      const double n = double(fits.size());
      if (ok && n * sxx - sx * sx > 0) slopes.push_back((n * sxy - sx * sy) / (n * sxx - sx * sx));
    }
    if (slopes.empty()) throw numerical_error("fit: insufficient lambda coverage to estimate the envelope order");
    std::sort(slopes.begin(), slopes.end());
    const double med = slopes[slopes.size() / 2];
    order = std::clamp(std::round(-med), 0.0, 2.0);
    report["amplitude_slope"] = med;
  } else {
    order = get_double(root, "envelope_order");
    if (order < 0) fail(eo, "'envelope_order' must be >= 0");
  }
  report["envelope_order"] = order;
  report["source"] = cp == cs ? "p_sampled" : "p_exact";

  Csv out(c, "fit.csv", {"tau", "eta", "D", "phi", "stderr_eta", "stderr_D", "stderr_phi", "lambda_ref", "order",
                         "residual_rms"});
  report["convergence"] = json::array();
  for (const auto& [tau, col] : cols) {
    if (tau <= 0) continue;
    estimation::FitOptions fo;
    fo.q_offset = col.q;
    fo.envelope_order = order;
    fo.envelope_shift = shift;
    const auto f = estimation::fit_oscillation(col.lambda, col.p, {}, col.tau, fo);
    out.row({num(tau), num(f.eta), num(f.D), num(f.phi), num(f.stderr_eta), num(f.stderr_D), num(f.stderr_phi),
             num(f.lambda_ref), num(order), num(f.residual_rms)});
    json cj{{"tau", tau}};
    try {
      const auto rep = estimation::convergence_check(window_fits(col, windows, fo), order);
      cj["pass"] = rep.pass;
      cj["message"] = rep.message;
    } catch (const numerical_error& e) {
      cj["pass"] = false;
      cj["message"] = e.what();
    }
    report["convergence"].push_back(cj);
  }
  write_manifest(c, report);
  std::cout << "fit.csv: " << cols.size() << " tau values, envelope order " << order << "\n";
  return 0;
}

// ---- reconstruct

int cmd_reconstruct(const RunOptions& o) {
  Context c = make_context(o, "reconstruct", {"input", "window", "pad_factor", "peak_factor", "scale", "hbar", "refine"});
  const YAML::Node& root = c.cfg.root;
  const fs::path input = resolve(c, get_string(root, "input"));
  const auto window = parse_window(root, "window");
  const int pad = int(get_int(root, "pad_factor", 1));
  if (pad < 1) fail(root["pad_factor"], "'pad_factor' must be >= 1");
  const double factor = get_double(root, "peak_factor", 5.0);
  const double hbar = get_double(root, "hbar", 1.0);
  const bool refine = get_bool(root, "refine", false);
  cplx scale = 1.0;
  if (root["scale"]) {
    const auto s = get_doubles(root, "scale");
    if (s.size() != 2) fail(root["scale"], "'scale' is an [re, im] pair");
    scale = cplx(s[0], s[1]);
  }

  const Table t = read_csv(input);
  const int ct = t.need("tau", input);
  const bool fitted = t.col("D") >= 0 && t.col("phi") >= 0;
  const Index n = Index(t.rows.size());
  if (n == 0) throw ConfigError(input.string() + ": no data rows");
  RVec tau(n);
  CVec val(n);
  for (Index k = 0; k < n; ++k) {
    const auto& r = t.rows[std::size_t(k)];
    tau(k) = parse_num(r[std::size_t(ct)], input) / hbar;
    if (fitted) {
      const double d = parse_num(r[std::size_t(t.col("D"))], input);
      const double ph = parse_num(r[std::size_t(t.col("phi"))], input);
      double env = 1;
      if (t.col("order") >= 0 && t.col("lambda_ref") >= 0)
        env = std::pow(parse_num(r[std::size_t(t.col("lambda_ref"))], input) / hbar,
                       parse_num(r[std::size_t(t.col("order"))], input));
      val(k) = scale * env * std::polar(d, ph);
    } else {
      val(k) = scale * cplx(parse_num(r[std::size_t(t.need("re", input))], input),
                            parse_num(r[std::size_t(t.need("im", input))], input));
    }
  }
  const auto series = estimation::make_tau_series(tau, val, fitted ? "fit" : "series");
  auto spec = estimation::fourier_spectrum(series, window, pad);
  estimation::rescale_omega(spec, hbar);
  auto peaks = estimation::find_peaks(spec, factor);
  if (refine) peaks = estimation::refine_lines(spec, peaks);

  Csv sc(c, "spectrum.csv", {"omega", "re_weight", "im_weight", "abs_weight"});
  for (Index i = 0; i < spec.omega.size(); ++i)
    sc.row({num(spec.omega(i)), num(spec.weights(i).real()), num(spec.weights(i).imag()), num(std::abs(spec.weights(i)))});
  Csv pc(c, "peaks.csv", {"omega", "re_weight", "im_weight", "abs_weight", "fwhm"});
  for (const auto& p : peaks)
    pc.row({num(p.omega), num(p.weight.real()), num(p.weight.imag()), num(p.magnitude), num(estimation::fwhm(spec, p.bin))});

  json report{{"points", n},
              {"resolution", spec.resolution},
              {"peaks", peaks.size()},
              {"refined", refine},
              {"phase_jump", series.phase_jump},
              {"max_phase_step", series.max_phase_step}};
  write_manifest(c, report);
  std::cout << "spectrum.csv: " << spec.omega.size() << " bins, " << peaks.size() << " peaks\n";
  return 0;
}

// ---- validate

int cmd_validate(const RunOptions& o) {
  Context c = make_context(o, "validate", {"model", "control", "prep", "meas", "order", "points", "grid", "margin",
                                           "resonance_width", "reach"});
  const YAML::Node& root = c.cfg.root;
  const ModelSpec ms = parse_model(require(root, "model"), c.seed);
  const auto ctl = parse_control(root);
  int order = 0;
  if (root["order"]) {
    order = int(get_int(root, "order"));
    if (order < 0 || order > 2) fail(root["order"], "'order' must be 0, 1 or 2");
  } else {
    order = perturbation::classify_leading_order(get_probe_state(root, "prep"), get_probe_state(root, "meas")).order;
  }
  perturbation::ValidityOptions vo;
  vo.margin = get_double(root, "margin", 10.0);
  vo.resonance_width = get_double(root, "resonance_width", -1.0);
  vo.reach = int(get_int(root, "reach", 3));

  std::vector<std::pair<double, double>> pts;
  if (const YAML::Node p = root["points"]) {
    if (!p.IsSequence() || p.size() == 0) fail(p, "'points' must be a non-empty list of {lambda, tau}");
    for (std::size_t i = 0; i < p.size(); ++i) {
      allow_keys(p[i], "point", {"lambda", "tau"});
      pts.emplace_back(get_double(p[i], "lambda"), get_double(p[i], "tau"));
    }
  } else {
    const YAML::Node g = require(root, "grid");
    allow_keys(g, "grid", {"lambda", "tau"});
    for (double l : get_axis(g, "lambda"))
      for (double t : get_axis(g, "tau")) pts.emplace_back(l, t);
  }

  const auto blocks = model::decompose_coupling(ms.v_ps, model::control_eigenbasis(ctl.theta, ctl.phi));
  json reports = json::array();
  bool all = true;
  for (const auto& [l, t] : pts) {
    const auto r = perturbation::validity_report(blocks, ms.rho_s, (l + ms.lambda_shift) / ms.hbar, t, order, vo);
    json j = validity_json(r);
    j["lambda"] = l;  // in the config's units
    reports.push_back(j);
    all = all && r.pass;
  }
  {
    std::ofstream f(c.out / "validity.json", std::ios::binary);
    f << reports.dump(2) << "\n";
    c.outputs.push_back("validity.json");
  }
  write_manifest(c, {{"points", pts.size()}, {"order", order}, {"all_pass", all}});
  std::cout << "validity.json: " << pts.size() << " points, " << (all ? "all pass" : "some checks failed") << "\n";
  return 0;
}

// ---- spin demo

int cmd_spin_demo(const RunOptions& o) {
  Context c = make_context(o, "spin-demo", {"spins", "b0", "probe", "run"});
  const YAML::Node& root = c.cfg.root;
  std::vector<spin::Vec3> probes;
  spin::SpinGeometry geo = parse_spin_geometry(root, c.seed, &probes);
  spin::NmrRunConfig run = parse_nmr_run(root["run"]);
  run.jobs = c.jobs;

  json report;
  report["spins"] = json::array();
  for (std::size_t k = 0; k < geo.positions.size(); ++k)
    report["spins"].push_back({{"position", {geo.positions[k](0), geo.positions[k](1), geo.positions[k](2)}},
                               {"moment", geo.moments[k]}});
  report["probes"] = json::array();
  for (std::size_t i = 0; i < probes.size(); ++i) {
    geo.probe_position = probes[i];
    run.seed = derive_seed(c.seed, i);
    const auto res = spin::run_nmr_experiment(geo, run);
    const std::string tag = std::to_string(i);

    Csv ser(c, "series_" + tag + ".csv", {"tau", "re_measured", "im_measured", "re_exact", "im_exact"});
    for (Index k = 0; k < res.measured.size(); ++k)
      ser.row({num(res.measured.tau(k)), num(res.measured.values(k).real()), num(res.measured.values(k).imag()),
               num(res.exact.values(k).real()), num(res.exact.values(k).imag())});

    Csv pk(c, "peaks_" + tag + ".csv", {"source", "budget", "omega", "abs_weight", "fwhm"});
    json budgets = json::array();
    auto dump = [&](const char* source, const std::vector<spin::BudgetSpectrum>& specs) {
      for (const auto& bs : specs) {
        Csv sp(c, std::string("spectrum_") + source + "_" + tag + "_" + num(bs.budget) + ".csv",
               {"omega", "re_weight", "im_weight", "abs_weight"});
        for (Index j = 0; j < bs.spectrum.omega.size(); ++j)
          sp.row({num(bs.spectrum.omega(j)), num(bs.spectrum.weights(j).real()), num(bs.spectrum.weights(j).imag()),
                  num(std::abs(bs.spectrum.weights(j)))});
        double best = 0, width = 0;
        for (const auto& p : bs.peaks) {
          const double w = estimation::fwhm(bs.spectrum, p.bin);
          pk.row({source, num(bs.budget), num(p.omega), num(p.magnitude), num(w)});
          if (p.magnitude > best) best = p.magnitude, width = w;
        }
        budgets.push_back({{"source", source},
                           {"budget_ns", bs.budget},
                           {"resolution_peV", bs.spectrum.resolution},
                           {"peaks", bs.peaks.size()},
                           {"strongest_fwhm_peV", jnum(width)}});
      }
    };
    dump("reconstructed", res.reconstructed);
    dump("perfect", res.perfect);

    Csv ref(c, "reference_" + tag + ".csv", {"omega", "re_weight", "im_weight"});
    for (const auto& l : res.reference) ref.row({num(l.omega), num(l.weight.real()), num(l.weight.imag())});

    report["probes"].push_back({{"position", {probes[i](0), probes[i](1), probes[i](2)}},
                                {"lambda0_peV", res.lambda0},
                                {"validity", validity_json(res.validity)},
                                {"budgets", budgets},
                                {"notes", res.notes}});
    std::cout << "probe " << i << ": lambda0 = " << res.lambda0 << " peV, validity "
              << (res.validity.pass ? "pass" : "FAIL") << "\n";
  }
  write_manifest(c, report);
  return 0;
}

// ---- vibronic demo

int cmd_vibronic_demo(const RunOptions& o) {
  Context c = make_context(o, "vibronic-demo", {"model", "grid", "shots", "temperature_known", "j_known", "oracle"});
  const YAML::Node& root = c.cfg.root;
  const YAML::Node mn = require(root, "model");
  allow_keys(mn, "model", {"omega", "gamma_d", "gamma_a", "V", "lambda", "T"});
  const auto m = parse_vibronic_model(mn);
  for (const auto& w : vibronic::check_model(m)) std::cerr << "warning: " << w << "\n";

  const YAML::Node g = require(root, "grid");
  allow_keys(g, "grid", {"tau_step", "tau_count", "lambda_count", "lambda_span"});
  const double dtau = get_double(g, "tau_step");
  if (!(dtau > 0)) fail(g["tau_step"], "'tau_step' must be > 0");
  const int nt = int(get_int(g, "tau_count", 64));
  const int nl = int(get_int(g, "lambda_count", 100));
  if (nt < 8) fail(g, "'tau_count' must be >= 8");
  if (nl < 5) fail(g, "'lambda_count' must be >= 5");
  const double span = get_double(g, "lambda_span", 1.1 * 2 * std::numbers::pi * vibronic::kHbar / dtau);
  const long long shots = get_int(root, "shots", 0);
  if (shots < 0) fail(root["shots"], "'shots' must be >= 0");
  const bool t_known = get_bool(root, "temperature_known", true);

  std::vector<double> taus, lams;
  for (int k = 0; k < nt; ++k) taus.push_back((k + 1) * dtau);
  for (int i = 0; i < nl; ++i) lams.push_back(m.lambda - span / 2 + span * (i + 0.5) / nl);
  Eigen::MatrixXd p(nl, nt);
  parallel_for(std::size_t(nl), c.jobs, [&](std::size_t i) {
    auto mi = m;
    mi.lambda = lams[i];
    for (int k = 0; k < nt; ++k) {
      const double pe = vibronic::analytic_probability(mi, taus[std::size_t(k)]);
      p(Index(i), k) = shots > 0 ? double(dynamics::sample_shots(pe, shots, derive_seed(c.seed, i * std::size_t(nt) + std::size_t(k)))) / double(shots)
                                 : pe;
    }
  });

  vibronic::ReconstructOptions ro;
  if (t_known) ro.T = m.T;
  const auto rec = vibronic::reconstruct_f_and_Er(lams, taus, p, m.V, ro);
  Csv fc(c, "f.csv", {"tau", "f", "f_stderr", "f_model", "resolved"});
  for (int k = 0; k < nt; ++k)
    fc.row({num(taus[std::size_t(k)]), num(rec.f(k)), num(rec.f_stderr(k)), num(vibronic::f_tau(m, taus[std::size_t(k)])),
            rec.resolved[std::size_t(k)] ? "1" : "0"});

  const auto sd = vibronic::spectral_density(taus, rec.f, ro.T);
  Csv sc(c, "spectrum.csv", {"omega", "f_tilde", "J"});
  for (Index i = 0; i < sd.omega.size(); ++i)
    sc.row({num(sd.omega(i)), num(sd.f_tilde(i)), sd.J.size() ? num(sd.J(i)) : ""});

  json report;
  report["reorganization"] = {{"estimate", rec.reorganization},
                              {"stderr", rec.reorganization_stderr},
                              {"model", vibronic::polaron(m).reorganization},
                              {"iterations", rec.iterations}};
  report["resolution_meV"] = sd.resolution;
  report["notes"] = rec.notes;
  if (const YAML::Node jk = root["j_known"]) {
    allow_keys(jk, "j_known", {"omega", "J"});
    const auto th = vibronic::thermometry(sd, get_doubles(jk, "omega"), get_doubles(jk, "J"));
    report["thermometry"] = {{"ok", th.ok}, {"T", th.T}, {"omega", th.omega}, {"message", th.message}};
  }
  if (const YAML::Node on = root["oracle"]) {
    allow_keys(on, "oracle", {"cutoff", "points", "margin"});
    const int cutoff = int(get_int(on, "cutoff", 12));
    const int np = int(get_int(on, "points", 101));
    if (np < 2) fail(on, "'points' must be >= 2");
    const double tm = vibronic::tau_max(m, get_double(on, "margin", 10.0));
    std::vector<double> ts;
    for (int i = 0; i < np; ++i) ts.push_back(tm * i / (np - 1));
    const auto ex = vibronic::fock_probability(m, ts, cutoff);
    double nrm = 0, dc = 0, dp = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      nrm += ex[i] * ex[i];
      dc += std::pow(vibronic::analytic_probability(m, ts[i]) - ex[i], 2);
      dp += std::pow(vibronic::analytic_probability(m, ts[i], vibronic::Formula::uncorrected) - ex[i], 2);
    }
    report["oracle"] = {{"tau_max_ps", tm},
                        {"cutoff", cutoff},
                        {"relative_l2_corrected", std::sqrt(dc / nrm)},
                        {"relative_l2_uncorrected", std::sqrt(dp / nrm)}};
  }
  write_manifest(c, report);
  std::cout << "f.csv: E_r = " << rec.reorganization << " +/- " << rec.reorganization_stderr << " meV\n";
  return 0;
}

}  // namespace qprobe::cli
