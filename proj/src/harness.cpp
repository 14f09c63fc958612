#include "htlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "htlab/atoms.hpp"
#include "htlab/cutoffs.hpp"
#include "htlab/fiber.hpp"
#include "htlab/group.hpp"
#include "htlab/multiplier.hpp"
#include "htlab/wave.hpp"

namespace htlab {

// ---------------------------------------------------------------------------
// exponent fitting
// ---------------------------------------------------------------------------

namespace {

// two-sided 97.5% t quantiles for dof = 1..30
const double kT975[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                        2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                        2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};

double t975(int dof) {
  if (dof <= 0) return 0.0;
  if (dof <= 30) return kT975[dof - 1];
  return 1.96 + 2.4 / dof;
}

}  // namespace

FitResult fit_exponent(const std::vector<double>& param, const std::vector<double>& value) {
  require(param.size() == value.size(), "fit_exponent: size mismatch");
  require(param.size() >= 4, "fit_exponent: need >= 4 points");
  int n = int(param.size());
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    require(param[i] > 0.0, "fit_exponent: nonpositive abscissa");
    require(value[i] > 0.0, "fit_exponent: nonpositive value");
    lx[i] = std::log(param[i]);
    ly[i] = std::log(value[i]);
  }
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  require(sxx > 1e-14, "fit_exponent: degenerate abscissae");
  FitResult f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  if (n > 2) {
    double se = std::sqrt(ss / (n - 2) / sxx);
    f.half_width = t975(n - 2) * se;
  }
  return f;
}

// ---------------------------------------------------------------------------
// config
// ---------------------------------------------------------------------------

namespace {

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["group"] = c.group;
  j["multiplier"] = c.multiplier;
  j["suites"] = c.suites;
  j["tau_range"] = c.tau_range;
  j["k_range"] = c.k_range;
  j["n_range"] = c.n_range;
  j["r_atoms"] = c.r_atoms;
  j["tau_fixed"] = c.tau_fixed;
  j["sub_order"] = c.sub_order;
  j["slope_tol"] = c.slope_tol;
  j["res_factor"] = c.res_factor;
  j["eps"] = c.eps;
  j["seed"] = c.seed;
  j["cache_dir"] = c.cache_dir;
  j["out_dir"] = c.out_dir;
  j["workers"] = c.workers;
  return j;
}

}  // namespace

std::string ExperimentConfig::canonical_json() const { return config_to_json(*this).dump(); }

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), "load_config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  ExperimentConfig c;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("group", c.group);
  get("multiplier", c.multiplier);
  get("suites", c.suites);
  get("tau_range", c.tau_range);
  get("k_range", c.k_range);
  get("n_range", c.n_range);
  get("r_atoms", c.r_atoms);
  get("tau_fixed", c.tau_fixed);
  get("sub_order", c.sub_order);
  get("slope_tol", c.slope_tol);
  get("res_factor", c.res_factor);
  get("eps", c.eps);
  get("seed", c.seed);
  get("cache_dir", c.cache_dir);
  get("out_dir", c.out_dir);
  get("workers", c.workers);
  require(!c.tau_range.empty() && !c.k_range.empty() && !c.n_range.empty(),
          "load_config: ranges must be nonempty");
  require(c.slope_tol > 0.0 && c.res_factor > 0.0, "load_config: tolerances must be positive");
  return c;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  require(bool(out), "save_config: cannot open " + path);
  out << config_to_json(cfg).dump(2) << "\n";
}

std::string cache_directory(const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("HTLAB_CACHE")) return env;
  return ".htlab-cache";
}

// ---------------------------------------------------------------------------
// records
// ---------------------------------------------------------------------------

std::string record_to_json(const ExperimentRecord& r) {
  nlohmann::json j;
  j["suite"] = r.suite;
  j["name"] = r.name;
  j["config_hash"] = r.config_hash;
  j["params"] = r.params;
  j["values"] = r.values;
  j["slope"] = r.fit.slope;
  j["intercept"] = r.fit.intercept;
  j["residual"] = r.fit.residual;
  j["ci"] = r.fit.half_width;
  j["fit_n"] = r.fit.n;
  j["band_lo"] = r.band_lo;
  j["band_hi"] = r.band_hi;
  j["pass"] = r.pass;
  j["fit_valid"] = r.fit_valid;
  j["error"] = r.error;
  j["wall_seconds"] = r.wall_seconds;
  return j.dump();
}

ExperimentRecord record_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ExperimentRecord r;
  r.suite = j["suite"].get<std::string>();
  r.name = j["name"].get<std::string>();
  r.config_hash = j["config_hash"].get<std::uint64_t>();
  r.params = j["params"].get<std::vector<double>>();
  r.values = j["values"].get<std::vector<double>>();
  r.fit.slope = j["slope"].get<double>();
  r.fit.intercept = j["intercept"].get<double>();
  r.fit.residual = j["residual"].get<double>();
  r.fit.half_width = j["ci"].get<double>();
  r.fit.n = j["fit_n"].get<int>();
  r.band_lo = j["band_lo"].get<double>();
  r.band_hi = j["band_hi"].get<double>();
  r.pass = j["pass"].get<bool>();
  r.fit_valid = j["fit_valid"].get<bool>();
  r.error = j["error"].get<std::string>();
  r.wall_seconds = j["wall_seconds"].get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// suite execution
// ---------------------------------------------------------------------------

namespace {

struct SuiteContext {
  const ExperimentConfig& cfg;
  HTypeStructure g;
  CutoffSet cut;
  FiberParams fiber;
};

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

ExperimentRecord make_record(const SuiteContext& ctx, const std::string& suite,
                             const std::string& name) {
  ExperimentRecord r;
  r.suite = suite;
  r.name = name;
  r.config_hash = ctx.cfg.hash();
  return r;
}

void finish_slope_record(ExperimentRecord& r, const ScanResult& scan, double lo, double hi) {
  r.params = scan.params;
  r.values = scan.norms;
  r.fit = scan.fit;
  r.fit_valid = true;
  r.band_lo = lo;
  r.band_hi = hi;
  r.pass = (r.fit.slope >= lo && r.fit.slope <= hi);
}

std::vector<ExperimentRecord> suite_growth(const SuiteContext& ctx) {
  std::vector<ExperimentRecord> out;
  ScanOptions opt;
  opt.fiber = ctx.fiber;
  opt.sub_order = ctx.cfg.sub_order;
  opt.res_factor = ctx.cfg.res_factor;
  double exact = 0.5 * (ctx.g.d - 1);
  {
    ExperimentRecord r = make_record(ctx, "growth", "K_tau_l1");
    double t0 = now_seconds();
    ScanResult scan = growth_scan(ctx.g, ScanFamily::K_tau, ctx.cfg.tau_range, ctx.cut, opt);
    finish_slope_record(r, scan, exact - 0.15, exact + 0.15);
    r.wall_seconds = now_seconds() - t0;
    out.push_back(std::move(r));
  }
  {
    ExperimentRecord r = make_record(ctx, "growth", "n0_tau_l1");
    double t0 = now_seconds();
    ScanResult scan = growth_scan(ctx.g, ScanFamily::n0_tau, ctx.cfg.tau_range, ctx.cut, opt);
    finish_slope_record(r, scan, exact - 0.15, exact + 0.15);
    r.wall_seconds = now_seconds() - t0;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExperimentRecord> suite_decay(const SuiteContext& ctx) {
  std::vector<ExperimentRecord> out;
  ScanOptions opt;
  opt.fiber = ctx.fiber;
  opt.sub_order = ctx.cfg.sub_order;
  opt.res_factor = ctx.cfg.res_factor;
  opt.tau = ctx.cfg.tau_fixed;
  {
    // shell decay in k at fixed tau
    ExperimentRecord r = make_record(ctx, "decay", "n_tau_k_l1");
    double t0 = now_seconds();
    ScanResult scan = growth_scan(ctx.g, ScanFamily::n_tau_k, ctx.cfg.k_range, ctx.cut, opt);
    double exact = -0.5 * (ctx.g.d1 + 1);
    finish_slope_record(r, scan, exact - 0.3, exact + 0.3);
    r.wall_seconds = now_seconds() - t0;
    out.push_back(std::move(r));
  }
  {
    // zeta-shell decay in n at fixed tau; one-sided bound
    ExperimentRecord r = make_record(ctx, "decay", "W_tau_n_l1");
    double t0 = now_seconds();
    ScanResult scan = growth_scan(ctx.g, ScanFamily::W_tau_n, ctx.cfg.n_range, ctx.cut, opt);
    double bound = -0.5 * (ctx.g.d1 - 1) + 0.3;
    finish_slope_record(r, scan, -1e9, bound);
    r.wall_seconds = now_seconds() - t0;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExperimentRecord> suite_subordination(const SuiteContext& ctx) {
  std::vector<ExperimentRecord> out;
  ExperimentRecord r0 = make_record(ctx, "subordination", "residual_order0");
  ExperimentRecord r2 = make_record(ctx, "subordination", "residual_order2");
  double t0 = now_seconds();
  bool dominated = true;
  for (double tau : ctx.cfg.tau_range) {
    SubordinationTerms s0 = subordination_terms(tau, ctx.cut, 0);
    SubordinationTerms s2 = subordination_terms(tau, ctx.cut, 2);
    r0.params.push_back(tau);
    r0.values.push_back(s0.sup_residual);
    r2.params.push_back(tau);
    r2.values.push_back(s2.sup_residual);
    dominated = dominated && (s2.sup_residual < s0.sup_residual);
  }
  r0.fit = fit_exponent(r0.params, r0.values);
  r0.fit_valid = true;
  r0.band_lo = -1e9;
  r0.band_hi = -1.0;
  r0.pass = r0.fit.slope <= -1.0;
  r0.wall_seconds = now_seconds() - t0;
  r2.fit = fit_exponent(r2.params, r2.values);
  r2.fit_valid = true;
  r2.band_lo = -1e9;
  r2.band_hi = r0.fit.slope;
  r2.pass = dominated;
  r2.wall_seconds = now_seconds() - t0;
  out.push_back(std::move(r0));
  out.push_back(std::move(r2));
  return out;
}

std::vector<ExperimentRecord> suite_dyadic(const SuiteContext& ctx) {
  std::vector<ExperimentRecord> out;
  ExperimentRecord r = make_record(ctx, "dyadic", "sobolev_ratio");
  double t0 = now_seconds();
  MultiplierFn m = multiplier_preset(ctx.cfg.multiplier, ctx.cut);
  require(m.theta > 0 && m.beta >= 0, "dyadic suite needs an oscillating multiplier");
  double s = 2.0;
  auto rows = dyadic_norm_table(m, ctx.cut, s, 1, 10);
  double rmin = 1e300, rmax = 0.0;
  for (const auto& row : rows) {
    r.params.push_back(row.j);
    r.values.push_back(row.ratio);
    rmin = std::min(rmin, row.ratio);
    rmax = std::max(rmax, row.ratio);
  }
  r.fit_valid = false;
  r.band_lo = 0.0;
  r.band_hi = 4.0;
  r.pass = (rmax / rmin) <= 4.0;
  r.wall_seconds = now_seconds() - t0;
  out.push_back(std::move(r));
  return out;
}

std::vector<ExperimentRecord> suite_atoms(const SuiteContext& ctx) {
  std::vector<ExperimentRecord> out;
  ExperimentRecord r = make_record(ctx, "atoms", "image_l1_sweep");
  double t0 = now_seconds();
  MultiplierFn m = multiplier_preset(ctx.cfg.multiplier, ctx.cut);
  AtomImageOptions opt;
  opt.fiber = ctx.fiber;
  opt.res_factor = ctx.cfg.res_factor;
  double vmin = 1e300, vmax = 0.0;
  for (double ra : ctx.cfg.r_atoms) {
    Atom a = make_atom(ctx.g, ra, ra > 0.5 ? AtomProfile::plain : AtomProfile::oscillating_sign);
    AtomImageRecord rec = atom_image_norm(ctx.g, m, ctx.cut, a, opt);
    r.params.push_back(ra);
    r.values.push_back(rec.total);
    vmin = std::min(vmin, rec.total);
    vmax = std::max(vmax, rec.total);
  }
  r.fit_valid = false;
  r.band_lo = 0.0;
  r.band_hi = 4.0;
  r.pass = (vmax / vmin) <= 4.0;
  r.wall_seconds = now_seconds() - t0;
  out.push_back(std::move(r));
  return out;
}

}  // namespace

std::vector<ExperimentRecord> run(const ExperimentConfig& cfg) {
  SuiteContext ctx{cfg, group_preset(cfg.group), make_partition("standard"), FiberParams{}};
  ctx.fiber.eps = cfg.eps;
  ctx.fiber.density = cfg.res_factor;
  if (cfg.workers > 0) {
#ifdef _WIN32
#else
    setenv("HTLAB_WORKERS", std::to_string(cfg.workers).c_str(), 1);
#endif
  }
  std::vector<ExperimentRecord> all;
  for (const std::string& suite : cfg.suites) {
    try {
      std::vector<ExperimentRecord> part;
      if (suite == "growth")
        part = suite_growth(ctx);
      else if (suite == "decay")
        part = suite_decay(ctx);
      else if (suite == "subordination")
        part = suite_subordination(ctx);
      else if (suite == "dyadic")
        part = suite_dyadic(ctx);
      else if (suite == "atoms")
        part = suite_atoms(ctx);
      else
        throw error("unknown suite: " + suite);
      all.insert(all.end(), part.begin(), part.end());
    } catch (const std::exception& e) {
      ExperimentRecord r;
      r.suite = suite;
      r.name = suite + "_aborted";
      r.config_hash = cfg.hash();
      r.error = e.what();
      r.pass = false;
      all.push_back(std::move(r));
    }
  }
  return all;
}

// ---------------------------------------------------------------------------
// emission
// ---------------------------------------------------------------------------

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> emit(const std::vector<ExperimentRecord>& records,
                              const ExperimentConfig& cfg, EmitFormat format) {
  require(!records.empty(), "emit: no records");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  require(fs::is_directory(cfg.out_dir), "emit: cannot create output directory " + cfg.out_dir);
  std::vector<std::string> written;

  if (format == EmitFormat::csv) {
    std::map<std::string, std::vector<const ExperimentRecord*>> by_suite;
    for (const auto& r : records) by_suite[r.suite].push_back(&r);
    for (const auto& [suite, rs] : by_suite) {
      std::string path = cfg.out_dir + "/" + suite + ".csv";
      std::ofstream out(path);
      require(bool(out), "emit: cannot open " + path);
      out << "name,param,l1_norm\n";
      for (const auto* r : rs)
        for (std::size_t i = 0; i < r->params.size(); ++i)
          out << r->name << "," << fmt17(r->params[i]) << "," << fmt17(r->values[i]) << "\n";
      written.push_back(path);
    }
  } else if (format == EmitFormat::json) {
    std::string path = cfg.out_dir + "/manifest.json";
    std::ofstream out(path);
    require(bool(out), "emit: cannot open " + path);
    out << "[\n";
    for (std::size_t i = 0; i < records.size(); ++i)
      out << record_to_json(records[i]) << (i + 1 < records.size() ? ",\n" : "\n");
    out << "]\n";
    written.push_back(path);
  } else {
    for (const auto& r : records) {
      if (r.params.empty()) continue;
      std::string path = cfg.out_dir + "/" + r.suite + "_" + r.name + ".dat";
      std::ofstream out(path);
      require(bool(out), "emit: cannot open " + path);
      for (std::size_t i = 0; i < r.params.size(); ++i)
        out << fmt17(r.params[i]) << " " << fmt17(r.values[i]) << "\n";
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace htlab
