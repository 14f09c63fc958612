// htlab: command-line front end for the spectral-multiplier lab.

#include <CLI11.hpp>

#include <cstdio>
#include <random>

#include "htlab/atoms.hpp"
#include "htlab/fiber.hpp"
#include "htlab/group.hpp"
#include "htlab/harness.hpp"
#include "htlab/multiplier.hpp"
#include "htlab/wave.hpp"

using namespace htlab;

namespace {

int cmd_group_validate(const std::string& preset, const std::string& json_file) {
  HTypeStructure g = json_file.empty() ? group_preset(preset) : load_htype_json(json_file);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> mu(g.d2);
    for (double& v : mu) v = gauss(rng);
    if (trial % 2 == 0) {
      double n = 0;
      for (double v : mu) n += v * v;
      n = std::sqrt(n);
      if (n > 0)
        for (double& v : mu) v /= n;
    }
    worst = std::max(worst, htype_residual(g, mu));
  }
  std::printf("group %s: d1=%d d2=%d d=%d Q=%d  max ||J_mu^2 + |mu|^2 I||_F = %.3e  %s\n",
              g.name.c_str(), g.d1, g.d2, g.d, g.Q, worst, worst <= 1e-12 ? "PASS" : "FAIL");
  return worst <= 1e-12 ? 0 : 1;
}

int cmd_kernel(const std::string& group, const std::string& mult, double Rx, double Ru, int nr,
               int nrho, const std::string& out, const std::string& cache_dir, bool no_cache) {
  HTypeStructure g = group_preset(group);
  CutoffSet c = make_partition("standard");
  MultiplierFn m = multiplier_preset(mult, c);
  JointMultiplier f = joint_from_scalar(m, 0.0, m.lambda_max);
  if (mult.rfind("heat:", 0) == 0 || mult == "mh:gaussian" || mult.rfind("schrod:", 0) == 0)
    f.mu_integrable = true;
  FiberParams p;
  if (f.mu_integrable) p.eps = 0.0;
  BiradialGrid grid = build_grid(g, Rx, Ru, nr, nrho);
  KernelField k = fiber_kernel_cached(g, f, grid, p, cache_directory(cache_dir), !no_cache);
  NormResult l1 = field_norm(k, 1);
  std::printf("kernel %s on %s: L1 = %.10g (tail est %.2e), sup = %.10g\n", mult.c_str(),
              group.c_str(), l1.value, l1.tail_estimate, field_sup(k));
  if (!out.empty()) {
    export_field_csv(k, out);
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

void print_record(const ExperimentRecord& r) {
  if (!r.error.empty()) {
    std::printf("[%s/%s] ERROR: %s\n", r.suite.c_str(), r.name.c_str(), r.error.c_str());
    return;
  }
  if (r.fit_valid)
    std::printf("[%s/%s] slope=%.4f ci=%.4f band=[%.3f, %.3f] %s\n", r.suite.c_str(),
                r.name.c_str(), r.fit.slope, r.fit.half_width, r.band_lo, r.band_hi,
                r.pass ? "PASS" : "FAIL");
  else
    std::printf("[%s/%s] band=[%.3f, %.3f] %s\n", r.suite.c_str(), r.name.c_str(), r.band_lo,
                r.band_hi, r.pass ? "PASS" : "FAIL");
}

int run_and_emit(ExperimentConfig cfg) {
  std::vector<ExperimentRecord> records = run(cfg);
  emit(records, cfg, EmitFormat::csv);
  emit(records, cfg, EmitFormat::json);
  emit(records, cfg, EmitFormat::plotdata);
  bool all = true;
  for (const auto& r : records) {
    print_record(r);
    all = all && r.pass;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"htlab: oscillating spectral multipliers on Heisenberg-type groups"};
  app.require_subcommand(1);

  // group validate
  auto* grp = app.add_subcommand("group", "group-structure utilities");
  grp->require_subcommand(1);
  auto* gval = grp->add_subcommand("validate", "check the H-type identities for a preset");
  std::string preset = "heisenberg-1", json_file;
  gval->add_option("preset", preset, "heisenberg-<n> or quaternionic-4-2");
  gval->add_option("--json", json_file, "custom J matrices (JSON, row-major)");

  // kernel
  auto* ker = app.add_subcommand("kernel", "compute one convolution kernel");
  std::string kgroup = "heisenberg-1", kmult = "heat:t=1", kout, kcache;
  double kRx = 6, kRu = 6;
  int knr = 96, knrho = 96;
  bool no_cache = false;
  ker->add_option("--group", kgroup);
  ker->add_option("--mult", kmult);
  ker->add_option("--Rx", kRx);
  ker->add_option("--Ru", kRu);
  ker->add_option("--nr", knr);
  ker->add_option("--nrho", knrho);
  ker->add_option("--out", kout, "CSV export path");
  ker->add_option("--cache-dir", kcache);
  ker->add_flag("--no-cache", no_cache, "force recomputation");

  // verify <suite>
  auto* ver = app.add_subcommand("verify", "run one verification suite");
  std::string vsuite = "growth", vgroup = "heisenberg-1", vout = "htlab-out";
  double vres = 1.0;
  ver->add_option("suite", vsuite, "growth | decay | subordination | dyadic");
  ver->add_option("--group", vgroup);
  ver->add_option("--out-dir", vout);
  ver->add_option("--res", vres, "resolution multiplier");

  // atoms sweep
  auto* atm = app.add_subcommand("atoms", "atom experiments");
  atm->require_subcommand(1);
  auto* swp = atm->add_subcommand("sweep", "atom-image L1 sweep");
  std::string agroup = "heisenberg-1", amult = "osc:theta=2,beta=3", aout = "htlab-out";
  swp->add_option("--group", agroup);
  swp->add_option("--mult", amult);
  swp->add_option("--out-dir", aout);

  // run <config>
  auto* runc = app.add_subcommand("run", "run suites from a config file");
  std::string config_path;
  runc->add_option("config", config_path, "JSON config")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gval->parsed()) return cmd_group_validate(preset, json_file);
    if (ker->parsed())
      return cmd_kernel(kgroup, kmult, kRx, kRu, knr, knrho, kout, kcache, no_cache);
    if (ver->parsed()) {
      ExperimentConfig cfg;
      cfg.group = vgroup;
      cfg.suites = {vsuite};
      cfg.out_dir = vout;
      cfg.res_factor = vres;
      return run_and_emit(cfg);
    }
    if (swp->parsed()) {
      ExperimentConfig cfg;
      cfg.group = agroup;
      cfg.multiplier = amult;
      cfg.suites = {"atoms"};
      cfg.out_dir = aout;
      return run_and_emit(cfg);
    }
    if (runc->parsed()) return run_and_emit(load_config(config_path));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
