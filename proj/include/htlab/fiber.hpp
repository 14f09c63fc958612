#pragma once

#include <functional>
#include <string>
#include <vector>

#include "htlab/cutoffs.hpp"
#include "htlab/grid.hpp"
#include "htlab/group.hpp"
#include "htlab/multiplier.hpp"

namespace htlab {

struct Band {
  double lo = 0.0, hi = 0.0;
};

/// Joint symbol f(lamL, lamU) of the pair (L, |U|), with the support and
/// oscillation metadata the fiber quadrature needs. lamL_band bounds the
/// L-spectral support (the symbol is treated as zero outside); lamU bounds
/// are optional (0 = unbounded). mu_freq_scale bounds the mu derivative of
/// the symbol phase along the fiber lattice: |d/dmu arg f| <= scale / mu.
struct JointMultiplier {
  std::function<cplx(double, double)> eval;
  std::function<std::function<cplx(double)>(double)> prepare_row;  // optional lamU -> row
  Band lamL_band;
  double lamU_min = 0.0, lamU_max = 0.0;
  bool mu_integrable = false;  // fiber integrand absolutely integrable: Abel factor optional
  double mu_freq_scale = 0.0;
  std::string id;

  std::uint64_t hash() const;
};

/// Fiber quadrature controls. eps multiplies e^{-eps |mu|} into the mu
/// integral (Abel regularization); density scales the mu-node density and is
/// the knob the doubling tests turn.
struct FiberParams {
  double eps = 1.0 / 512.0;
  double mu_min = 0.02;
  int k_cap = 1 << 22;
  double density = 1.0;
  double nodes_per_cycle = 6.0;

  std::string key_string() const;
};

/// Calibrated spectral constants: lam_{k,mu} = c_E mu (2k + d1/2), Laguerre
/// argument z = c_Z mu r^2, |U| eigenvalue c_U mu, overall factor c_N.
struct CalibrationReport {
  double c_E = two_pi;
  double c_Z = pi;
  double c_U = two_pi;  // pinned by the e^{2 pi i u mu} Fourier convention
  cplx c_N{1.0, 0.0};
  double fit_error = 0.0;    // relative l2 misfit at the fit times
  double match_error = 0.0;  // held-out relative L_inf error
  std::string group;
};

/// Least-squares fit of the fiber route against the closed-form Schrodinger
/// kernel at two times, validated on a third. Throws if the held-out match
/// error exceeds 1e-4.
CalibrationReport calibrate_constants(const HTypeStructure& g, double delta = 1.0 / 128.0);

/// Cached calibration per group (computed on first use).
const CalibrationReport& calibration_for(const HTypeStructure& g);

/// Convolution kernel of f(L, |U|) sampled on the grid:
///   K(x,u) = int_{R^{d2}} Phi^mu(|x|) e^{2 pi i u.mu} e^{-eps|mu|} dmu,
///   Phi^mu(r) = c_N |mu|^{d1/2} sum_k f(lam_{k,mu}, c_U |mu|) ell_k(c_Z mu r^2),
/// with ell_k the e^{-z/2}-weighted Laguerre functions of order d1/2 - 1 and
/// the mu integral reduced to its radial form.
KernelField fiber_kernel(const HTypeStructure& g, const JointMultiplier& f,
                         const BiradialGrid& grid, const FiberParams& p,
                         const CalibrationReport& cal);
KernelField fiber_kernel(const HTypeStructure& g, const JointMultiplier& f,
                         const BiradialGrid& grid, const FiberParams& p);

/// Disk-cached variant: key = (group, multiplier hash, grid hash, params).
KernelField fiber_kernel_cached(const HTypeStructure& g, const JointMultiplier& f,
                                const BiradialGrid& grid, const FiberParams& p,
                                const std::string& cache_dir, bool use_cache = true);

/// Doubling test on a probe subset: recompute with doubled mu density and
/// k cap, and with halved eps; returns the max relative change. Throws if the
/// change exceeds tol (truncation not converged).
double fiber_convergence_probe(const HTypeStructure& g, const JointMultiplier& f,
                               const BiradialGrid& grid, const FiberParams& p, double tol);

/// Closed-form Schrodinger kernel at complex time t + i delta (delta > 0):
/// radial quadrature of the Mehler fiber, domain split at the singular shells
/// 2 t |mu| in Z with panels graded into the shells. Reports eps convergence
/// via schrodinger_eps_stability.
KernelField schrodinger_closed_form(const HTypeStructure& g, double t, double delta,
                                    const BiradialGrid& grid, double eps = 0.0);

/// Max relative change of the closed form between (eps, delta) and halved
/// values, on a probe grid.
double schrodinger_eps_stability(const HTypeStructure& g, double t, double delta, double eps);

JointMultiplier heat_multiplier(double t);
JointMultiplier schrodinger_multiplier(double t, double delta);

/// chi_band(lambda) e^{i tau lambda}: the unit band propagated to time tau.
/// The time-1 band kernel K_tau of chi_band(sqrt(L)/tau) e^{i sqrt(L)} is its
/// delta_tau dilate, with equal L^1 norm.
JointMultiplier band_propagator(const CutoffSet& c, double tau);

/// f(lamL) = m(sqrt(lamL)) restricted to the sqrt-band [lam_lo, lam_hi].
JointMultiplier joint_from_scalar(const MultiplierFn& m, double lam_lo, double lam_hi);

KernelField heat_kernel(const HTypeStructure& g, double t, const BiradialGrid& grid);

/// Kernel of m_j(sqrt(L)) assembled from the wave family: m^j is DFT'd in
/// lambda, and the synthesis sums tau-weighted dilates of the band propagator
/// kernels. Cross-validation against the direct fiber route is the caller's
/// (test suite's) job. Throws if the kept tau window misses spectral mass
/// (tail of the DFT above tail_tol).
KernelField synthesize_via_wave(const HTypeStructure& g, const DyadicPiece& mj,
                                const CutoffSet& c, const BiradialGrid& out_grid,
                                const FiberParams& p, double tail_tol = 1e-6);

/// Laguerre engine: acc[k - k_lo] gets ell_k(z) for k in [k_lo, k_hi] via the
/// scaled three-term recurrence (safe across underflow), or the weighted sum
/// sum_k coef[k - k_lo] ell_k(z) is returned directly.
cplx laguerre_weighted_sum(double z, double alpha, int k_lo, int k_hi, const cplx* coef);
void laguerre_accumulate(double z, double alpha, int k_hi, cplx weight, cplx* acc);

/// L^1(G) norm through per-radius u-line synthesis (d2 = 1): the fiber rows
/// are laid on a uniform mu lattice and each radius gets one FFT to u space,
/// resolving arbitrarily oscillatory central frequencies. Reports the share
/// of mass in the outer 10% of each axis as a truncation indicator.
struct LineL1Options {
  double R_r = 2.4;
  double U = 2.4;
  double res_factor = 1.0;
  int max_r_nodes = 520;
};

struct LineL1Result {
  double value = 0.0;
  double edge_fraction = 0.0;  // mass share near the domain edge
};

LineL1Result l1_norm_ufft(const HTypeStructure& g, const JointMultiplier& f, const FiberParams& p,
                          const LineL1Options& opt);

}  // namespace htlab
