#pragma once

// Batch jobs: a JSON config selects a model, a theta list and a set of
// analyses; run_job produces an in-memory report which export_report writes
// as CSV tables and JSON documents.

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cscale/assembly.hpp"
#include "cscale/errors.hpp"
#include "cscale/geometry.hpp"
#include "cscale/linalg.hpp"
#include "cscale/resolvent.hpp"
#include "cscale/spectral.hpp"
#include "cscale/weyl.hpp"

namespace cscale {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline const std::vector<std::string>& analysis_names() {
  static const std::vector<std::string> n{"spectrum", "resonances", "numrange",
                                          "weyl", "resolvent", "ichinose"};
  return n;
}

struct GridSpec {
  double u_max = 20.0;
  int n = 399;
  BoundaryCondition bc0 = BoundaryCondition::Neumann;
  HalfLineGrid make() const { return make_grid(u_max, n, bc0); }
};

struct PotentialSpec {
  std::vector<GaussianTerm> terms;
  double support_end = 0.0;
  PotentialProfile make(const CutoffProfile& p) const {
    if (terms.empty()) return PotentialProfile();
    return make_potential(p, terms, support_end);
  }
};

struct ModelSpec {
  std::string kind = "cylinder";  // cylinder | corner
  CrossSectionSpectrum cross_section = circle_cross_section(1, 1.0);
  GridSpec grid;
  GridSpec grid2;  // corner only
  double K = 2.0;
  double R = 4.0;
  PotentialSpec potential;  // cylinder
  PotentialSpec end1, end2;  // corner ends
  CornerPotential corner;
  bool is_corner() const { return kind == "corner"; }
  CutoffProfile profile() const { return CutoffProfile(K, R); }
};

struct Tolerances {
  double classification = 0.05;
  double match = 1e-4;
  double real_match = 1e-5;      // relative, real resonances vs Hermitian eigenvalues
  double ichinose = 1e-8;        // random pairs
  double ichinose_blocks = 1e-7; // dilated blocks
  double weyl_slope = -0.8;
  double resolvent = 1e-6;       // relative spread over theta at the check point
  double sector_k_min = 0.2;
};

struct WeylSpec {
  std::vector<int> indices{4, 8, 16, 32};
  std::vector<double> d_values{8, 16, 32, 64};
  double spacing = 0.1;
  double wavenumber = 1.0;  // lambda = mu + theta' k^2
};

struct ResolventSpec {
  cplx path_start{0.2, 0.05};
  cplx path_end{0.8, -0.05};
  int points = 61;
  cplx check_lambda{-1.0, 0.0};
  int proxy_n = 399;
};

struct IchinoseSpec {
  int pairs = 20;
  int size = 3;
  int block_n = 40;
};

struct JobConfig {
  int schema_version = kSchemaVersion;
  ModelSpec model;
  std::vector<cplx> thetas{cplx(0.0)};
  std::vector<std::string> analyses{"spectrum"};
  Tolerances tolerances;
  WeylSpec weyl;
  ResolventSpec resolvent;
  IchinoseSpec ichinose;
  int numrange_points = 64;
  std::uint64_t seed = 42;
  std::string output_dir = "out";
};

namespace detail {

class ConfigReader {
public:
  std::vector<std::string> errors;

  // Rejects keys outside the allowed set.
  void keys(const json& j, const std::string& where, std::set<std::string> allowed) {
    if (!j.is_object()) {
      errors.push_back(where + ": expected an object");
      return;
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key())) errors.push_back(where + ": unknown key '" + it.key() + "'");
    }
  }

  template <class T>
  void get(const json& j, const char* key, const std::string& where, T& out) {
    if (!j.is_object() || !j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const std::exception&) {
      errors.push_back(where + "." + key + ": wrong type");
    }
  }

  void complex(const json& j, const std::string& where, cplx& out) {
    if (j.is_number()) {
      out = cplx(j.get<double>(), 0.0);
    } else if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
      out = cplx(j[0].get<double>(), j[1].get<double>());
    } else {
      errors.push_back(where + ": expected a number or [re, im]");
    }
  }

  void complex(const json& j, const char* key, const std::string& where, cplx& out) {
    if (j.is_object() && j.contains(key)) complex(j.at(key), where + "." + key, out);
  }

  void grid(const json& j, const std::string& where, GridSpec& g) {
    keys(j, where, {"u_max", "n", "bc0"});
    get(j, "u_max", where, g.u_max);
    get(j, "n", where, g.n);
    std::string bc = to_string(g.bc0);
    get(j, "bc0", where, bc);
    if (bc == "neumann") {
      g.bc0 = BoundaryCondition::Neumann;
    } else if (bc == "dirichlet") {
      g.bc0 = BoundaryCondition::Dirichlet;
    } else {
      errors.push_back(where + ".bc0: expected neumann or dirichlet");
    }
  }

  void potential(const json& j, const std::string& where, PotentialSpec& p) {
    keys(j, where, {"terms", "support_end"});
    get(j, "support_end", where, p.support_end);
    if (!j.is_object() || !j.contains("terms")) return;
    const json& t = j.at("terms");
    if (!t.is_array()) {
      errors.push_back(where + ".terms: expected an array");
      return;
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string w = where + ".terms[" + std::to_string(i) + "]";
      keys(t[i], w, {"amplitude", "center", "width"});
      GaussianTerm g{0.0, 0.0, 1.0};
      get(t[i], "amplitude", w, g.amplitude);
      get(t[i], "center", w, g.center);
      get(t[i], "width", w, g.width);
      p.terms.push_back(g);
    }
  }

  void cross_section(const json& j, const std::string& where, CrossSectionSpectrum& cs) {
    keys(j, where, {"kind", "modes", "radius", "mus"});
    std::string kind = "circle";
    get(j, "kind", where, kind);
    try {
      if (kind == "circle") {
        int modes = 1;
        double radius = 1.0;
        get(j, "modes", where, modes);
        get(j, "radius", where, radius);
        cs = circle_cross_section(modes, radius);
      } else if (kind == "explicit") {
        std::vector<double> mus;
        get(j, "mus", where, mus);
        cs = explicit_cross_section(mus);
      } else {
        errors.push_back(where + ".kind: expected circle or explicit");
      }
    } catch (const Error& e) {
      errors.push_back(where + ": " + e.what());
    }
  }
};

}  // namespace detail

/// Parses and validates; every problem found is reported in one ConfigError.
inline JobConfig parse_config(const json& j) {
  detail::ConfigReader r;
  JobConfig c;
  r.keys(j, "config", {"schema_version", "model", "thetas", "analyses", "tolerances", "weyl",
                       "resolvent", "ichinose", "numrange", "seed", "output_dir"});
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  if (!j.contains("schema_version")) {
    r.errors.push_back("config: missing schema_version");
  } else {
    r.get(j, "schema_version", "config", c.schema_version);
    if (c.schema_version != kSchemaVersion) {
      r.errors.push_back("config.schema_version: unsupported version " +
                         std::to_string(c.schema_version));
    }
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    r.keys(m, "model", {"kind", "cross_section", "grid", "grid2", "profile", "potential", "end1",
                        "end2", "corner_potential"});
    r.get(m, "kind", "model", c.model.kind);
    if (c.model.kind != "cylinder" && c.model.kind != "corner") {
      r.errors.push_back("model.kind: expected cylinder or corner");
    }
    if (m.contains("cross_section")) r.cross_section(m.at("cross_section"), "model.cross_section", c.model.cross_section);
    if (m.contains("grid")) r.grid(m.at("grid"), "model.grid", c.model.grid);
    c.model.grid2 = c.model.grid;
    if (m.contains("grid2")) r.grid(m.at("grid2"), "model.grid2", c.model.grid2);
    if (m.contains("profile")) {
      r.keys(m.at("profile"), "model.profile", {"K", "R"});
      r.get(m.at("profile"), "K", "model.profile", c.model.K);
      r.get(m.at("profile"), "R", "model.profile", c.model.R);
    }
    if (m.contains("potential")) r.potential(m.at("potential"), "model.potential", c.model.potential);
    if (m.contains("end1")) r.potential(m.at("end1"), "model.end1", c.model.end1);
    if (m.contains("end2")) r.potential(m.at("end2"), "model.end2", c.model.end2);
    if (m.contains("corner_potential")) {
      const json& cp = m.at("corner_potential");
      const std::string w = "model.corner_potential";
      r.keys(cp, w, {"depth", "center1", "center2", "width", "support_end"});
      r.get(cp, "depth", w, c.model.corner.depth);
      r.get(cp, "center1", w, c.model.corner.center1);
      r.get(cp, "center2", w, c.model.corner.center2);
      r.get(cp, "width", w, c.model.corner.width);
      r.get(cp, "support_end", w, c.model.corner.support_end);
    }
  }
  if (j.contains("thetas")) {
    const json& t = j.at("thetas");
    if (!t.is_array() || t.empty()) {
      r.errors.push_back("thetas: expected a non-empty array");
    } else {
      c.thetas.clear();
      for (std::size_t i = 0; i < t.size(); ++i) {
        cplx z;
        r.complex(t[i], "thetas[" + std::to_string(i) + "]", z);
        c.thetas.push_back(z);
      }
    }
  }
  r.get(j, "analyses", "config", c.analyses);
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    auto& o = c.tolerances;
    r.keys(t, "tolerances", {"classification", "match", "real_match", "ichinose", "ichinose_blocks",
                             "weyl_slope", "resolvent", "sector_k_min"});
    r.get(t, "classification", "tolerances", o.classification);
    r.get(t, "match", "tolerances", o.match);
    r.get(t, "real_match", "tolerances", o.real_match);
    r.get(t, "ichinose", "tolerances", o.ichinose);
    r.get(t, "ichinose_blocks", "tolerances", o.ichinose_blocks);
    r.get(t, "weyl_slope", "tolerances", o.weyl_slope);
    r.get(t, "resolvent", "tolerances", o.resolvent);
    r.get(t, "sector_k_min", "tolerances", o.sector_k_min);
  }
  if (j.contains("weyl")) {
    const json& w = j.at("weyl");
    r.keys(w, "weyl", {"indices", "d_values", "spacing", "wavenumber"});
    r.get(w, "indices", "weyl", c.weyl.indices);
    r.get(w, "d_values", "weyl", c.weyl.d_values);
    r.get(w, "spacing", "weyl", c.weyl.spacing);
    r.get(w, "wavenumber", "weyl", c.weyl.wavenumber);
  }
  if (j.contains("resolvent")) {
    const json& w = j.at("resolvent");
    r.keys(w, "resolvent", {"path_start", "path_end", "points", "check_lambda", "proxy_n"});
    r.complex(w, "path_start", "resolvent", c.resolvent.path_start);
    r.complex(w, "path_end", "resolvent", c.resolvent.path_end);
    r.complex(w, "check_lambda", "resolvent", c.resolvent.check_lambda);
    r.get(w, "points", "resolvent", c.resolvent.points);
    r.get(w, "proxy_n", "resolvent", c.resolvent.proxy_n);
  }
  if (j.contains("ichinose")) {
    const json& w = j.at("ichinose");
    r.keys(w, "ichinose", {"pairs", "size", "block_n"});
    r.get(w, "pairs", "ichinose", c.ichinose.pairs);
    r.get(w, "size", "ichinose", c.ichinose.size);
    r.get(w, "block_n", "ichinose", c.ichinose.block_n);
  }
  if (j.contains("numrange")) {
    r.keys(j.at("numrange"), "numrange", {"points"});
    r.get(j.at("numrange"), "points", "numrange", c.numrange_points);
  }
  r.get(j, "seed", "config", c.seed);
  r.get(j, "output_dir", "config", c.output_dir);

  // semantic checks
  if (!j.contains("analyses")) c.analyses = {"spectrum"};
  for (const auto& a : c.analyses) {
    if (std::find(analysis_names().begin(), analysis_names().end(), a) == analysis_names().end()) {
      r.errors.push_back("analyses: unknown analysis '" + a + "'");
    }
  }
  for (std::size_t i = 0; i < c.thetas.size(); ++i) {
    if (!in_gamma(c.thetas[i]) && !is_unitary_theta(c.thetas[i])) {
      std::ostringstream os;
      os << "thetas[" << i << "]: " << c.thetas[i] << " is neither in Gamma nor real >= 0";
      r.errors.push_back(os.str());
    }
  }
  try {
    const CutoffProfile p = c.model.profile();
    for (const auto* g : {&c.model.grid, &c.model.grid2}) {
      try {
        const auto grid = g->make();
        if (grid.u_max() <= p.R()) r.errors.push_back("model.grid: u_max must exceed R");
      } catch (const Error& e) {
        r.errors.push_back(std::string("model.grid: ") + e.what());
      }
    }
    for (const auto* ps : {&c.model.potential, &c.model.end1, &c.model.end2}) {
      try {
        ps->make(p);
      } catch (const Error& e) {
        r.errors.push_back(std::string("model potential: ") + e.what());
      }
    }
    if (c.model.corner.support_end > p.K()) {
      r.errors.push_back("model.corner_potential: support_end exceeds K");
    }
  } catch (const Error& e) {
    r.errors.push_back(std::string("model.profile: ") + e.what());
  }
  auto selected = [&](const char* a) {
    return std::find(c.analyses.begin(), c.analyses.end(), a) != c.analyses.end();
  };
  if (selected("resonances") && c.thetas.size() < 2) {
    r.errors.push_back("resonances: needs at least two thetas");
  }
  if (selected("resolvent") && c.model.is_corner()) {
    r.errors.push_back("resolvent: only cylinder models are supported");
  }
  if (selected("resolvent") && c.resolvent.points < 3) r.errors.push_back("resolvent.points: need >= 3");
  if (c.weyl.indices.size() < 2 || c.weyl.d_values.size() < 2) {
    r.errors.push_back("weyl: need at least two indices and two d values");
  }
  for (int n : c.weyl.indices) {
    if (n < 1) r.errors.push_back("weyl.indices: must be positive");
  }
  if (!(c.weyl.spacing > 0.0)) r.errors.push_back("weyl.spacing: must be > 0");
  if (c.ichinose.size < 1 || c.ichinose.pairs < 0 || c.ichinose.block_n < 16) {
    r.errors.push_back("ichinose: need size >= 1, pairs >= 0, block_n >= 16");
  }
  if (c.numrange_points < 8) r.errors.push_back("numrange.points: need >= 8");
  if (c.output_dir.empty()) r.errors.push_back("output_dir: must not be empty");

  if (!r.errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : r.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

inline JobConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

/// Creates the directory if needed and probes that it is writable.
inline void ensure_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto probe = dir / ".write_probe";
  std::ofstream out(probe);
  if (ec || !out) throw ConfigError("output directory not writable: " + dir.string());
  out.close();
  std::filesystem::remove(probe, ec);
}

// ----------------------------------------------------------------------------
// Report

struct SpectrumRow {
  cplx theta;
  double mu = 0.0;
  cplx value;
  std::string cls;  // ray | discrete
  cplx origin;
  std::string origin_kind;
  double distance = 0.0;
};

struct ResonanceRow {
  cplx theta_a, theta_b;
  double mu = 0.0;
  cplx value_a, value_b;
  double drift = 0.0;
  bool real = false;
  double hermitian_mismatch = 0.0;  // relative; 0 for nonreal matches
};

struct NumrangeRow {
  cplx theta;
  double mu = 0.0;
  int index = 0;
  cplx z;
};

struct DecayRow {
  std::string kind;
  cplx theta;
  double n_or_d = 0.0;
  double value = 0.0;
  double slope = 0.0;
};

struct TraceRow {
  cplx theta;
  cplx lambda;
  cplx value;
  std::string flag;
};

struct IchinoseRow {
  std::string kind;  // random | block
  int index = 0;
  double mismatch = 0.0;
  std::size_t unmatched = 0;
};

enum class Status { Pass, Fail, Error };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Error: return "error";
  }
  return "?";
}

struct AnalysisResult {
  Status status = Status::Pass;
  std::string message;
  std::map<std::string, double> metrics;
};

struct RunReport {
  std::uint64_t seed = 42;
  std::vector<SpectrumRow> spectrum;
  std::vector<ResonanceRow> resonances;
  std::vector<NumrangeRow> numrange;
  std::vector<DecayRow> weyl;
  std::vector<TraceRow> resolvent;
  std::vector<IchinoseRow> ichinose;
  std::map<std::string, AnalysisResult> analyses;

  Status overall() const {
    Status s = Status::Pass;
    for (const auto& [name, r] : analyses) {
      if (r.status == Status::Error) return Status::Error;
      if (r.status == Status::Fail) s = Status::Fail;
    }
    return s;
  }
};

namespace detail {

inline std::vector<double> distinct_mus(const ModelSpec& m) { return distinct_thresholds(m.cross_section); }

inline MatrixXc model_block(const ModelSpec& m, const DilationParameter& th, double mu) {
  const CutoffProfile p = m.profile();
  if (!m.is_corner()) return assemble_cyl_mode(th, mu, m.grid.make(), m.potential.make(p), p).dense();
  CornerModel cm{m.cross_section, m.grid.make(), m.grid2.make(), p, m.corner,
                 m.end1.make(p), m.end2.make(p)};
  return assemble_corner_mode(th, mu, cm).dense();
}

inline RayFamily model_rays(const ModelSpec& m, const DilationParameter& th, double mu, double tol) {
  const auto one = explicit_cross_section({mu});
  if (!m.is_corner()) return predict_essential(th, one);
  const CutoffProfile p = m.profile();
  return predict_essential(th, one,
                           {end_point_spectrum(th, p, m.grid.make(), m.end1.make(p), one, tol),
                            end_point_spectrum(th, p, m.grid2.make(), m.end2.make(p), one, tol)});
}

inline void run_spectrum(const JobConfig& c, RunReport& rep, AnalysisResult& res) {
  std::size_t ray = 0, discrete = 0;
  double resid = 0.0;
  for (cplx t : c.thetas) {
    const DilationParameter th(t);
    for (double mu : distinct_mus(c.model)) {
      const auto ev = eig_dense(model_block(c.model, th, mu));
      resid = std::max(resid, ev.max_residual());
      const RayFamily rays = model_rays(c.model, th, mu, c.tolerances.classification);
      for (cplx z : ev.eigenvalues) {
        const auto cls = classify_spectrum({z}, rays, c.tolerances.classification);
        SpectrumRow row{t, mu, z, "ray", 0.0, "", 0.0};
        std::size_t r = 0;
        if (!cls.ray_bound.empty()) {
          r = cls.ray_bound[0].ray;
          row.distance = cls.ray_bound[0].distance;
          ++ray;
        } else {
          row.cls = "discrete";
          r = cls.discrete[0].nearest_ray;
          row.distance = cls.discrete[0].distance;
          ++discrete;
        }
        row.origin = rays.origins[r];
        row.origin_kind = to_string(rays.provenance[r]);
        rep.spectrum.push_back(row);
      }
    }
  }
  res.metrics["ray_bound"] = double(ray);
  res.metrics["discrete"] = double(discrete);
  res.metrics["max_residual"] = resid;
}

inline void run_resonances(const JobConfig& c, RunReport& rep, AnalysisResult& res) {
  const DilationParameter ta(c.thetas[0]), tb(c.thetas[1]);
  double worst = 0.0, drift = 0.0;
  std::size_t matches = 0, reals = 0;
  for (double mu : distinct_mus(c.model)) {
    const auto ea = eigenvalues(model_block(c.model, ta, mu));
    const auto eb = eigenvalues(model_block(c.model, tb, mu));
    const double tol = c.tolerances.classification;
    const auto found = detect_resonances(ea, ta, eb, tb, model_rays(c.model, ta, mu, tol),
                                         model_rays(c.model, tb, mu, tol),
                                         ResonanceOptions{tol, c.tolerances.match});
    std::vector<double> herm;
    for (const auto& m : found) {
      ResonanceRow row{ta.theta(), tb.theta(), mu, m.value_a, m.value_b, m.drift, m.real, 0.0};
      if (m.real) {
        if (herm.empty()) {
          const auto he = eig_hermitian(model_block(c.model, DilationParameter(0.0), mu));
          herm.assign(he.values.data(), he.values.data() + he.values.size());
        }
        double best = std::numeric_limits<double>::infinity();
        for (double e : herm) best = std::min(best, std::abs(e - m.value().real()));
        row.hermitian_mismatch = best / std::max(1.0, std::abs(m.value()));
        worst = std::max(worst, row.hermitian_mismatch);
        ++reals;
      }
      drift = std::max(drift, m.drift);
      ++matches;
      rep.resonances.push_back(row);
    }
  }
  res.metrics["matches"] = double(matches);
  res.metrics["real_matches"] = double(reals);
  res.metrics["max_drift"] = drift;
  res.metrics["max_hermitian_mismatch"] = worst;
  if (worst > c.tolerances.real_match) {
    res.status = Status::Fail;
    res.message = "real match off the Hermitian spectrum";
  }
}

inline void run_numrange(const JobConfig& c, RunReport& rep, AnalysisResult& res) {
  std::vector<double> k_grid;
  for (int i = 1; i <= 50; ++i) k_grid.push_back(0.1 * i);
  double k_min = std::numeric_limits<double>::infinity(), gamma_max = 0.0;
  for (cplx t : c.thetas) {
    const DilationParameter th(t);
    for (double mu : distinct_mus(c.model)) {
      const MatrixXc M = model_block(c.model, th, mu);
      const auto poly = numerical_range_boundary(M, c.numrange_points);
      for (std::size_t i = 0; i < poly.size(); ++i) {
        rep.numrange.push_back({t, mu, static_cast<int>(i), poly[i]});
      }
      auto pts = poly;
      for (cplx z : numerical_range_support(M, sector_edge_angles(k_grid))) pts.push_back(z);
      const auto fit = sector_search(pts, k_grid);
      k_min = std::min(k_min, fit ? fit->k : 0.0);
      if (fit) gamma_max = std::max(gamma_max, fit->gamma);
    }
  }
  res.metrics["min_sector_k"] = k_min;
  res.metrics["max_sector_gamma"] = gamma_max;
  if (k_min < c.tolerances.sector_k_min) {
    res.status = Status::Fail;
    res.message = "sector slope below tolerance";
  }
}

inline cplx weyl_theta(const JobConfig& c) {
  for (cplx t : c.thetas) {
    if (t.imag() != 0.0) return t;
  }
  return c.thetas[0];
}

inline void run_weyl(const JobConfig& c, RunReport& rep, AnalysisResult& res) {
  const DilationParameter th(weyl_theta(c));
  const CutoffProfile p = c.model.profile();
  const auto& W = c.weyl;
  const int nmax = *std::max_element(W.indices.begin(), W.indices.end());
  const auto g = grid_with_spacing(W.spacing, packet_extent(nmax) + 2.0);
  const double mu = c.model.cross_section.mus.front();
  const cplx lambda = mu + th.prime() * W.wavenumber * W.wavenumber;
  double worst = -std::numeric_limits<double>::infinity();
  auto record = [&](const std::string& kind, DecayTable t) {
    t.fit();
    for (const auto& pt : t.points) rep.weyl.push_back({kind, th.theta(), pt.x, pt.value, t.slope});
    res.metrics["slope_" + kind] = t.slope;
    worst = std::max(worst, t.slope);
  };
  if (!c.model.is_corner()) {
    const auto A = assemble_cyl_mode(th, mu, g, c.model.potential.make(p), p);
    DecayTable t;
    for (int n : W.indices) {
      SingularSequenceSpec s{SequenceKind::Free, n, lambda, mu, 0.0, th};
      t.points.push_back({double(n), defect_norm(build_free_bws(s, g), lambda, A)});
    }
    record("free", t);
  } else {
    CornerModel cm{c.model.cross_section, g, g, p, c.model.corner, c.model.end1.make(p),
                   c.model.end2.make(p)};
    const auto A = assemble_corner_factors(th, mu, cm);
    DecayTable t;
    for (int n : W.indices) {
      SingularSequenceSpec s{SequenceKind::Corner, n, lambda, mu, 0.0, th};
      t.points.push_back({double(n), defect_norm(build_corner_bws(s, g, g), lambda, A)});
    }
    record("corner", t);
    // channel along u1 over the end-2 ground state, when there is one
    const auto short2 = grid_with_spacing(W.spacing, 12.0);
    const auto ends = eig_dense(MatrixXc(radial_block(th, p, short2, cm.end_potential2)));
    RayFamily base;
    base.direction = th.prime();
    base.add(0.0, RayOrigin::CrossSectionThreshold);
    const auto cls = classify_spectrum({ends.eigenvalues[0]}, base, c.tolerances.classification);
    if (!cls.discrete.empty()) {
      const cplx gamma = ends.eigenvalues[0];
      const auto g2 = grid_with_spacing(W.spacing, 2.0 * nmax + 6.0);
      CornerModel ch{c.model.cross_section, g, g2, p, CornerPotential{}, PotentialProfile(),
                     cm.end_potential2};
      const auto B = assemble_corner_factors(th, mu, ch);
      const cplx lam = mu + gamma + th.prime() * W.wavenumber * W.wavenumber;
      DecayTable tc;
      for (int n : W.indices) {
        SingularSequenceSpec s{SequenceKind::Channel, n, lam, mu, gamma, th};
        tc.points.push_back({double(n), defect_norm(build_channel_bws(s, g, g2, ends.vectors.col(0)), lam, B)});
      }
      record("channel", tc);
    }
    const double dmax = *std::max_element(W.d_values.begin(), W.d_values.end());
    const auto gd = grid_with_spacing(W.spacing, 2.0 * dmax + 4.0);
    CornerModel cd{c.model.cross_section, gd, gd, p, c.model.corner, c.model.end1.make(p),
                   c.model.end2.make(p)};
    record("commutator", commutator_decay(W.d_values, assemble_corner_factors(th, mu, cd), c.seed));
  }
  if (worst > c.tolerances.weyl_slope) {
    res.status = Status::Fail;
    res.message = "decay slope above tolerance";
  }
}

inline void run_resolvent(const JobConfig& c, RunReport& rep, AnalysisResult& res) {
  const CutoffProfile p = c.model.profile();
  const auto grid = c.model.grid.make();
  const auto v = c.model.potential.make(p);
  const auto& cs = c.model.cross_section;
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double edge = p.K() - 1.0;
  auto random_vector = [&]() {
    std::vector<VectorXc> in;
    for (std::size_t i = 0; i < cs.mus.size(); ++i) {
      const double a = 0.3 * edge * U(rng);
      const double b = a + (edge - a) * (0.5 + 0.5 * U(rng));
      const cplx phase = std::polar(1.0, 6.283185307179586 * U(rng));
      VectorXc x = VectorXc::Zero(grid.n());
      for (int j = 0; j < grid.n(); ++j) x(j) = phase * bump((grid.node(j) - a) / (b - a));
      in.push_back(x);
    }
    return make_analytic_vector(grid, in, std::vector<std::vector<cplx>>(cs.mus.size()), p);
  };
  const auto f = random_vector();
  const auto g = random_vector();
  const auto& R = c.resolvent;
  std::vector<cplx> path;
  for (int k = 0; k < R.points; ++k) path.push_back(R.path_start + (R.path_end - R.path_start) * (double(k) / (R.points - 1)));
  std::vector<cplx> checks;
  double d2 = 0.0;
  std::size_t flagged = 0;
  for (cplx t : c.thetas) {
    auto ctx = make_resolvent_context(DilationParameter(t), cs, grid, v, p, grid.n() <= 1000);
    if (grid.n() > 1000) attach_proxy_spectra(ctx, cs, make_grid(grid.u_max(), R.proxy_n, grid.bc0()), v, p);
    const auto tr = continuation_scan(path, ctx, f, g);
    for (std::size_t k = 0; k < path.size(); ++k) {
      rep.resolvent.push_back({t, path[k], tr.values[k], to_string(tr.flags[k])});
    }
    if (t.imag() != 0.0) d2 = std::max(d2, tr.second_difference);
    flagged += path.size() - tr.count(TraceFlag::Ok);
    checks.push_back(matrix_element(R.check_lambda, ctx, f, g));
  }
  double spread = 0.0;
  for (cplx z : checks) spread = std::max(spread, std::abs(z - checks[0]) / std::abs(checks[0]));
  res.metrics["theta_spread"] = spread;
  res.metrics["max_second_difference"] = d2;
  res.metrics["flagged_points"] = double(flagged);
  if (spread > c.tolerances.resolvent) {
    res.status = Status::Fail;
    res.message = "matrix elements differ across theta";
  }
}

inline MatrixXc random_complex(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  MatrixXc A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = cplx(d(rng), d(rng));
  return A;
}

inline void run_ichinose(const JobConfig& c, RunReport& rep, AnalysisResult& res) {
  std::mt19937_64 rng(c.seed);
  double worst_r = 0.0, worst_b = 0.0;
  std::size_t unmatched = 0;
  for (int i = 0; i < c.ichinose.pairs; ++i) {
    const MatrixXc A = random_complex(c.ichinose.size, rng);
    const MatrixXc B = random_complex(c.ichinose.size, rng);
    const auto r = ichinose_sumcheck(A, B);
    rep.ichinose.push_back({"random", i, r.max_mismatch, r.unmatched});
    worst_r = std::max(worst_r, r.max_mismatch);
    unmatched += r.unmatched;
  }
  const CutoffProfile p = c.model.profile();
  const auto g = make_grid(8.0, c.ichinose.block_n, BoundaryCondition::Neumann);
  const auto v = c.model.is_corner() ? c.model.end1.make(p) : c.model.potential.make(p);
  int idx = 0;
  for (cplx t : c.thetas) {
    const DilationParameter th(t);
    const MatrixXc A(radial_block(th, p, g, v));
    const MatrixXc B(radial_block(th, p, g, PotentialProfile()));
    const auto r = ichinose_sumcheck(A, B);
    rep.ichinose.push_back({"block", idx++, r.max_mismatch, r.unmatched});
    worst_b = std::max(worst_b, r.max_mismatch);
    unmatched += r.unmatched;
  }
  res.metrics["max_mismatch_random"] = worst_r;
  res.metrics["max_mismatch_blocks"] = worst_b;
  res.metrics["unmatched"] = double(unmatched);
  if (worst_r >= c.tolerances.ichinose || worst_b >= c.tolerances.ichinose_blocks || unmatched) {
    res.status = Status::Fail;
    res.message = "sum-set mismatch above tolerance";
  }
}

}  // namespace detail

/// Runs every selected analysis. A failing analysis is recorded as an error
/// in its own entry and does not stop the others.
inline RunReport run_job(const JobConfig& c) {
  RunReport rep;
  rep.seed = c.seed;
  for (const auto& name : analysis_names()) {
    if (std::find(c.analyses.begin(), c.analyses.end(), name) == c.analyses.end()) continue;
    AnalysisResult res;
    try {
      if (name == "spectrum") detail::run_spectrum(c, rep, res);
      if (name == "resonances") detail::run_resonances(c, rep, res);
      if (name == "numrange") detail::run_numrange(c, rep, res);
      if (name == "weyl") detail::run_weyl(c, rep, res);
      if (name == "resolvent") detail::run_resolvent(c, rep, res);
      if (name == "ichinose") detail::run_ichinose(c, rep, res);
    } catch (const std::exception& e) {
      res.status = Status::Error;
      res.message = e.what();
    }
    rep.analyses[name] = res;
  }
  return rep;
}

// ----------------------------------------------------------------------------
// Export

inline std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

// JSON text with every number at 17 significant digits; non-finite values become null.
inline void dump17(const json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + json(it.key()).dump() + ": ";
        dump17(it.value(), out, indent, depth + 1);
      }
      out += "\n" + close + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump17(j[i], out, indent, depth + 1);
      }
      out += "\n" + close + "]";
      return;
    }
    case json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? fmt17(x) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

inline json cjson(cplx z) { return json::array({z.real(), z.imag()}); }

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

inline std::string cols(std::initializer_list<std::string> c) {
  std::string s;
  for (const auto& x : c) s += (s.empty() ? "" : ",") + x;
  return s + "\n";
}

}  // namespace detail

inline std::string to_json_text(const json& j) {
  std::string s;
  detail::dump17(j, s, 2, 0);
  return s + "\n";
}

inline json summary_json(const RunReport& r) {
  json a = json::object();
  for (const auto& [name, res] : r.analyses) {
    json m = json::object();
    for (const auto& [k, v] : res.metrics) m[k] = v;
    a[name] = {{"status", to_string(res.status)}, {"message", res.message}, {"metrics", m}};
  }
  return {{"schema_version", kSchemaVersion},
          {"seed", r.seed},
          {"status", to_string(r.overall())},
          {"analyses", a}};
}

inline json resonances_json(const RunReport& r) {
  json list = json::array();
  for (const auto& x : r.resonances) {
    list.push_back({{"theta_a", detail::cjson(x.theta_a)},
                    {"theta_b", detail::cjson(x.theta_b)},
                    {"mu", x.mu},
                    {"value_a", detail::cjson(x.value_a)},
                    {"value_b", detail::cjson(x.value_b)},
                    {"drift", x.drift},
                    {"real", x.real},
                    {"hermitian_mismatch", x.hermitian_mismatch}});
  }
  return {{"resonances", list}};
}

inline json ichinose_json(const RunReport& r) {
  json list = json::array();
  for (const auto& x : r.ichinose) {
    list.push_back({{"kind", x.kind}, {"index", x.index}, {"max_mismatch", x.mismatch},
                    {"unmatched", x.unmatched}});
  }
  return {{"checks", list}};
}

enum class ExportFormat { Csv, Json };

/// Writes the CSV tables or the JSON documents into dir. Output depends only
/// on the report, so re-exporting gives identical bytes.
inline std::vector<std::filesystem::path> export_report(const RunReport& r,
                                                        const std::filesystem::path& dir,
                                                        ExportFormat fmt) {
  using detail::cols;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto put = [&](const char* name, const std::string& text) {
    detail::write_file(dir / name, text);
    written.push_back(dir / name);
  };
  auto c = [](cplx z) { return fmt17(z.real()) + "," + fmt17(z.imag()); };
  if (fmt == ExportFormat::Csv) {
    std::string s = cols({"theta_re", "theta_im", "mu", "re", "im", "class", "origin_re",
                          "origin_im", "origin_kind", "distance"});
    for (const auto& x : r.spectrum) {
      s += c(x.theta) + "," + fmt17(x.mu) + "," + c(x.value) + "," + x.cls + "," + c(x.origin) +
           "," + x.origin_kind + "," + fmt17(x.distance) + "\n";
    }
    put("spectrum.csv", s);
    s = cols({"theta_re", "theta_im", "mu", "index", "re", "im"});
    for (const auto& x : r.numrange) {
      s += c(x.theta) + "," + fmt17(x.mu) + "," + std::to_string(x.index) + "," + c(x.z) + "\n";
    }
    put("numrange.csv", s);
    s = cols({"kind", "theta_re", "theta_im", "n_or_d", "value", "fitted_slope"});
    for (const auto& x : r.weyl) {
      s += x.kind + "," + c(x.theta) + "," + fmt17(x.n_or_d) + "," + fmt17(x.value) + "," +
           fmt17(x.slope) + "\n";
    }
    put("weyl.csv", s);
    s = cols({"theta_re", "theta_im", "re_lambda", "im_lambda", "re_value", "im_value", "flag"});
    for (const auto& x : r.resolvent) {
      s += c(x.theta) + "," + c(x.lambda) + "," + c(x.value) + "," + x.flag + "\n";
    }
    put("resolvent.csv", s);
  } else {
    put("resonances.json", to_json_text(resonances_json(r)));
    put("ichinose.json", to_json_text(ichinose_json(r)));
    put("summary.json", to_json_text(summary_json(r)));
  }
  return written;
}

}  // namespace cscale
