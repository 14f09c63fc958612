#pragma once

#include <functional>
#include <string>

#include "htlab/common.hpp"

namespace htlab {

using Fn1 = std::function<double(double)>;

/// Smooth transition 0 -> 1 across [a, b], exactly 0 at t <= a and 1 at t >= b.
double smooth_step(double a, double b, double t);

/// Smooth plateau: exactly 1 on [b, c], supported in (a, d).
double smooth_plateau(double a, double b, double c, double d, double t);

/// Mother bump exp(-1/(1-t^2)) on (-1,1), 0 outside.
double mother_bump(double t);

/// The named cutoff family shared by the whole lab.
///
/// chi        high-pass: 0 for lambda <= 1, 1 for lambda >= 2
/// phi        dyadic bump, supported [1/2, 2], sum_j phi(2^-j l) = 1 by telescoping
/// chi_band   band bump: 1 on [1/2, 2], supported [1/4, 4] (wave-band cutoff)
/// chi1       function of x: 1 on [1/16, 16] (the chi_band support squared), supported [1/32, 32]
/// chi1p      1 on supp chi1, supported [1/64, 64]
/// eta0       periodization bump: sum_k eta0(t - k pi) = 1, supp (-2, 2)
/// zeta0/1    radial dyadic pair: zeta0 + sum_{n>=1} zeta1(2^-n t) = 1
/// zetap      1 on supp zeta1 (|t| in [1/2,2]), supported |t| in [1/4, 4]
struct CutoffSet {
  Fn1 chi, phi, chi_band, chi1, chi1p, eta0, zeta0, zeta1, zetap;
  double eta0_halfwidth = 2.0;
  // region cutoffs for the central-kernel decay experiments
  Fn1 phi_w;   // of w = |x|^2 + |u|: 1 for w <= 2, 0 for w >= 3
  Fn1 psi_x2;  // of |x|^2: 1 for |x|^2 <= 1/40, 0 for |x|^2 >= 1/20
  std::string kind;
};

/// Build the cutoff family. kind = "standard" or "alt" (shifted bands, used to
/// check that class constants do not depend on the cutoff choice).
CutoffSet make_partition(const std::string& kind = "standard");

/// sum_j phi(2^-j lambda) over a finite window (telescopes to 1 for lambda > 0).
double dyadic_partition_sum(const CutoffSet& c, double lambda, int jmin = -40, int jmax = 40);

/// sum_k eta0(t - k pi).
double eta0_row_sum(const CutoffSet& c, double t);

/// zeta0(t) + sum_{1<=n<=nmax} zeta1(2^-n t).
double zeta_partition_sum(const CutoffSet& c, double t, int nmax = 64);

}  // namespace htlab
