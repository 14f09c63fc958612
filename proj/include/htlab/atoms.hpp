#pragma once

#include <string>
#include <vector>

#include "htlab/cutoffs.hpp"
#include "htlab/fiber.hpp"
#include "htlab/grid.hpp"
#include "htlab/multiplier.hpp"

namespace htlab {

enum class AtomProfile { plain, oscillating_sign, radial_shell };

/// Centered isotropic atom: biradial profile supported in ||(x,u)||_E <= r,
/// ||a||_2 <= r^{-d/2}, mean zero when r <= 1/2.
struct Atom {
  double r = 1.0;
  int L = 0;  // 2^{L-1} < r <= 2^L
  AtomProfile kind = AtomProfile::plain;
  bool cancellation_required = false;
  std::function<double(double, double)> profile;  // (|x|, |u|)
  double l1 = 0.0, l2 = 0.0;
  double mass = 0.0;  // signed integral
  std::string id;
  // quadrature over the support, cached for the fiber transforms
  std::vector<double> qr_n, qr_w, qu_n, qu_w;

  BiradialProfile as_profile() const;
};

Atom make_atom(const HTypeStructure& g, double r, AtomProfile kind);

/// Laguerre-fiber coefficients of the atom at a fixed mu: out[k] for
/// k = 0..k_hi such that the atom's fiber is c_N mu^{d1/2} sum_k out[k] ell_k.
/// Computed by the orthogonality integral against the atom's u-Fourier
/// profile; the engine's inverse transform, tested against the heat symbol.
void atom_fiber_coeffs(const HTypeStructure& g, const Atom& a, const CalibrationReport& cal,
                       double mu, int k_hi, cplx* out);

/// Diagonal (Gelfand) product: the joint multiplier of a * K_f. Biradial
/// convolution is coefficient-wise multiplication on the (k, mu) lattice.
JointMultiplier atom_applied_multiplier(const HTypeStructure& g, const Atom& a,
                                        const JointMultiplier& f);

struct AtomImageRecord {
  double total = 0.0;            // || sum_j m_j(sqrt(L)) a ||_1 over the window
  std::vector<int> js;
  std::vector<double> per_j;     // || a * K_j ||_1
  std::vector<double> edge_fracs;
  double tail_estimate = 0.0;    // extrapolated mass beyond the exact window
  bool converged = true;         // tail below 5 %
  int j_exact = 0;
};

struct AtomImageOptions {
  int j_min = 1, j_max = 10;
  int j_exact = 5;        // pieces beyond this are extrapolated
  double base_R = 4.0;    // output extent for j = 0, grows with the piece spread
  double R_cap = 40.0;
  FiberParams fiber;
  double res_factor = 1.0;
};

/// || sum_j m_j(sqrt(L)) a ||_{L^1} for an oscillating multiplier, per-j
/// contributions recorded, geometric tail fit for the uncomputed part of the
/// window.
AtomImageRecord atom_image_norm(const HTypeStructure& g, const MultiplierFn& m,
                                const CutoffSet& c, const Atom& a, const AtomImageOptions& opt);

struct HjnResult {
  double h_l1 = 0.0;       // ||H_{j,n}||_1
  double image_l1 = 0.0;   // ||a * H_{j,n}||_1
  double bound = 0.0;      // min(1, 2^n 2^{j+L})
  double ratio = 0.0;
};

/// H_{j,n} = kernel of chi1'(2^{-2j} L) zeta'(2^{-j-n} |U|); the cancellation
/// experiment convolves it with an atom and compares against
/// min(1, 2^n 2^{j+L}).
HjnResult hjn_cancellation(const HTypeStructure& g, int j, int n, const CutoffSet& c,
                           const Atom& a, const FiberParams& p, double res_factor = 1.0);

/// Kernel of the bare H_{j,n} on a caller-provided grid.
KernelField hjn_field(const HTypeStructure& g, int j, int n, const CutoffSet& c,
                      const BiradialGrid& grid, const FiberParams& p);

}  // namespace htlab
