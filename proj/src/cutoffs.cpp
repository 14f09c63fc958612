#include "htlab/cutoffs.hpp"

#include <cmath>

namespace htlab {

namespace {

// half-line mollifier exp(-1/t), 0 for t <= 0
double half_bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

}  // namespace

double mother_bump(double t) {
  if (std::abs(t) >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - t * t));
}

// Ratio-of-mollifiers step: C^inf, saturates exactly (the denominator term
// half_bump(1-s) vanishes identically for s >= 1, so the ratio is exactly 1
// there; likewise exactly 0 for s <= 0). Partition identities built from this
// step telescoping therefore hold to roundoff, not to quadrature accuracy.
double smooth_step(double a, double b, double t) {
  require(b > a, "smooth_step: need b > a");
  double s = (t - a) / (b - a);
  if (s <= 0.0) return 0.0;
  if (s >= 1.0) return 1.0;
  double p = half_bump(s), q = half_bump(1.0 - s);
  return p / (p + q);
}

double smooth_plateau(double a, double b, double c, double d, double t) {
  return smooth_step(a, b, t) * (1.0 - smooth_step(c, d, t));
}

CutoffSet make_partition(const std::string& kind) {
  require(kind == "standard" || kind == "alt", "make_partition: unknown kind " + kind);
  CutoffSet cs;
  cs.kind = kind;

  // "alt" shifts the dyadic edges; used only to probe cutoff independence.
  const double e0 = (kind == "standard") ? 1.0 : 1.25;
  const double e1 = 2.0 * e0;

  cs.chi = [e0, e1](double l) { return smooth_step(e0, e1, l); };
  cs.phi = [e0, e1](double l) { return smooth_step(e0 / 2, e1 / 2, l) - smooth_step(e0, e1, l); };
  cs.chi_band = [](double l) { return smooth_plateau(0.25, 0.5, 2.0, 4.0, l); };
  cs.chi1 = [](double x) { return smooth_plateau(1.0 / 32, 1.0 / 16, 16.0, 32.0, x); };
  cs.chi1p = [](double x) { return smooth_plateau(1.0 / 64, 1.0 / 32, 32.0, 64.0, x); };

  // eta0: mother bump at half scale, normalized by its own pi-periodization
  cs.eta0 = [](double t) {
    double num = mother_bump(t / 2.0);
    if (num == 0.0) return 0.0;
    int k0 = int(std::lround(t / pi));
    double den = 0.0;
    for (int k = k0 - 2; k <= k0 + 2; ++k) den += mother_bump((t - k * pi) / 2.0);
    return num / den;
  };
  cs.eta0_halfwidth = 2.0;

  // zeta1 supported in [1/2, 2]; zeta0 = 1 - sum of its dyadic dilates, which
  // forces supp zeta0 = [-2, 2] (no smooth pair with zeta0 inside (-1,1) can
  // telescope exactly against a [1/2, 2]-supported zeta1)
  cs.zeta0 = [](double t) { return 1.0 - smooth_step(1.0, 2.0, std::abs(t)); };
  cs.zeta1 = [](double t) {
    double a = std::abs(t);
    return smooth_step(1.0, 2.0, 2.0 * a) - smooth_step(1.0, 2.0, a);
  };
  cs.zetap = [](double t) { return smooth_plateau(0.25, 0.5, 2.0, 4.0, std::abs(t)); };

  cs.phi_w = [](double w) { return 1.0 - smooth_step(2.0, 3.0, w); };
  cs.psi_x2 = [](double x2) { return 1.0 - smooth_step(1.0 / 40, 1.0 / 20, x2); };
  return cs;
}

double dyadic_partition_sum(const CutoffSet& c, double lambda, int jmin, int jmax) {
  require(lambda > 0.0, "dyadic_partition_sum: lambda > 0");
  double s = 0.0;
  for (int j = jmin; j <= jmax; ++j) s += c.phi(std::ldexp(lambda, -j));
  return s;
}

double eta0_row_sum(const CutoffSet& c, double t) {
  int k0 = int(std::lround(t / pi));
  double s = 0.0;
  for (int k = k0 - 3; k <= k0 + 3; ++k) s += c.eta0(t - k * pi);
  return s;
}

double zeta_partition_sum(const CutoffSet& c, double t, int nmax) {
  double s = c.zeta0(t);
  for (int n = 1; n <= nmax; ++n) s += c.zeta1(std::ldexp(t, -n));
  return s;
}

}  // namespace htlab
