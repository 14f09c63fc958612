#pragma once

#include <memory>

#include "htlab/cutoffs.hpp"
#include "htlab/fiber.hpp"
#include "htlab/fitting.hpp"
#include "htlab/grid.hpp"

namespace htlab {

/// Subordination data at a fixed tau: the amplitude a_tau(s) on s ~ 1 whose
/// oscillatory s-integral reproduces chi_band(sqrt(x)) e^{i tau sqrt(x)}, and
/// the measured residual of that scalar identity on an x grid.
///
/// a_tau is built from the leading stationary-phase inversion
///   a0(s) = e^{-i pi/4} / (2 sqrt(pi)) s^{-3/2} chi_band(1/(2s)),
/// refined by `order` defect-correction sweeps, each of which cancels the
/// current residual's co-moving component and gains one power of 1/tau.
struct SubordinationTerms {
  double tau = 0.0;
  int order = 0;
  double s0 = 0.125, s1 = 2.0;  // amplitude support
  std::function<cplx(double)> amplitude;
  std::vector<double> res_x;  // residual abscissae (x grid)
  std::vector<cplx> res_val;
  double sup_residual = 0.0;

  double phase(double s, double x) const { return tau * (s * x + 0.25 / s); }
  double critical_point(double x) const { return 0.5 / std::sqrt(x); }
  double phase_at_crit(double x) const { return tau * std::sqrt(x); }
  double phase_dd_at_crit(double x) const { return 4.0 * tau * std::pow(x, 1.5); }
  cplx residual_at(double x) const;
};

SubordinationTerms subordination_terms(double tau, const CutoffSet& c, int order);

/// Kernel of chi_band(2^-j lambda) e^{i 2^-j tau lambda} on the given grid,
/// evaluated through the dilation identity from the unit-band propagator.
KernelField wave_band_kernel(const HTypeStructure& g, double tau, int j, const CutoffSet& c,
                             const BiradialGrid& grid, const FiberParams& p);

struct DecompIndex {
  double tau = 8.0;
  int j = 0;
  int k = 0;  // eta0 shell
  int n = 0;  // zeta shell
  double dilation_g() const { return std::ldexp(1.0, j) / tau; }
};

enum class PieceKind { n0, n_k, W_n, V, E_residual };

/// Joint multiplier of the selected decomposition piece. wside = false gives
/// the time-1 symbol in (lamL, lamU); wside = true gives the delta_tau-dilated
/// symbol (unit spectral band), whose kernel has the same L^1 norm.
JointMultiplier piece_multiplier(const DecompIndex& idx, PieceKind kind, const CutoffSet& c,
                                 const SubordinationTerms& sub, bool wside);

/// Kernel of the piece on the grid (K side: time-1 coordinates).
KernelField refined_piece_kernel(const HTypeStructure& g, const DecompIndex& idx, PieceKind kind,
                                 const CutoffSet& c, const SubordinationTerms& sub,
                                 const BiradialGrid& grid, const FiberParams& p);

enum class ScanFamily { K_tau, n0_tau, n_tau_k, W_tau_n, heat_const };

struct ScanOptions {
  double tau = 32.0;      // fixed tau for the k / n scans
  int sub_order = 2;
  FiberParams fiber;
  double res_factor = 1.0;  // grid resolution multiplier
  int max_nodes = 400;      // per-axis cap
};

struct ScanResult {
  std::vector<double> params;
  std::vector<double> norms;
  std::vector<double> tails;
  FitResult fit;
};

/// L^1 norms of a kernel family over a parameter range and the fitted
/// log-log slope.
ScanResult growth_scan(const HTypeStructure& g, ScanFamily fam, const std::vector<double>& range,
                       const CutoffSet& c, const ScanOptions& opt);

enum class DecayRegion { finite_speed, k0_far, k0_central };

struct DecayScanResult {
  std::vector<int> exponents;
  std::vector<double> sup_products;  // sup over region of |K| w^N
  double region_floor = 0.0;         // w threshold defining the region
  int points_in_region = 0;
};

/// sup |K| * w^N over the region, w the region's distance functional:
/// finite_speed: w = lambda r + lambda^2 rho >= 10; k0_far: w = r^2 + rho >= 2;
/// k0_central: w = 1 + rho on r^2 <= 1/20.
DecayScanResult pointwise_decay_scan(const KernelField& K, double lambda, DecayRegion region,
                                     const std::vector<int>& exponents = {2, 4, 6});

}  // namespace htlab
