#include "htlab/atoms.hpp"

#include <algorithm>
#include <memory>
#include <cmath>
#include <cstdio>

namespace htlab {

namespace {

// quadrature over the atom's own support for norms and fiber transforms
struct AtomQuad {
  std::vector<double> rn, rw;  // with omega_{d1-1} r^{d1-1}
  std::vector<double> un, uw;  // with omega_{d2-1} rho^{d2-1}
};

AtomQuad atom_quad(const HTypeStructure& g, double r) {
  AtomQuad q;
  std::vector<double> n1, w1, n2, w2;
  gauss_panels(0.0, r, 10, 6, n1, w1);
  gauss_panels(0.0, r, 10, 6, n2, w2);
  double wd1 = sphere_area(g.d1), wd2 = sphere_area(g.d2);
  q.rn = n1;
  q.rw = w1;
  for (std::size_t i = 0; i < n1.size(); ++i) q.rw[i] *= wd1 * std::pow(n1[i], g.d1 - 1);
  q.un = n2;
  q.uw = w2;
  for (std::size_t i = 0; i < n2.size(); ++i) q.uw[i] *= wd2 * std::pow(n2[i], g.d2 - 1);
  return q;
}

double integral_of(const AtomQuad& q, const std::function<double(double, double)>& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < q.rn.size(); ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < q.un.size(); ++j) inner += q.uw[j] * f(q.rn[i], q.un[j]);
    s += q.rw[i] * inner;
  }
  return s;
}

int level_of(double r) {
  // L with 2^{L-1} < r <= 2^L
  int L = int(std::ceil(std::log2(r)));
  if (std::ldexp(1.0, L - 1) >= r) ++L;
  while (std::ldexp(1.0, L - 1) >= r) --L;
  return L;
}

}  // namespace

BiradialProfile Atom::as_profile() const {
  BiradialProfile p;
  p.support_radius = r;
  p.eval = profile;
  return p;
}

Atom make_atom(const HTypeStructure& g, double r, AtomProfile kind) {
  require(r > 0.0 && r <= 1.0, "make_atom: radius in (0, 1]");
  Atom a;
  a.r = r;
  a.L = level_of(r);
  a.kind = kind;
  a.cancellation_required = (r <= 0.5);
  if (kind == AtomProfile::plain && a.cancellation_required)
    throw error("make_atom: plain profile cannot satisfy the cancellation required for r <= 1/2");

  // profiles in the normalized radius t = (|x| + |u|) / r
  std::function<double(double)> shape_a, shape_b;
  switch (kind) {
    case AtomProfile::plain:
      shape_a = [](double t) { return 1.0 - smooth_step(0.55, 0.95, t); };
      shape_b = nullptr;
      break;
    case AtomProfile::oscillating_sign:
      shape_a = [](double t) { return 1.0 - smooth_step(0.25, 0.475, t); };
      shape_b = [](double t) { return 1.0 - smooth_step(0.55, 0.95, t); };
      break;
    case AtomProfile::radial_shell:
      shape_a = [](double t) { return smooth_plateau(0.45, 0.55, 0.6, 0.7, t); };
      shape_b = [](double t) { return smooth_plateau(0.72, 0.8, 0.86, 0.95, t); };
      break;
  }

  AtomQuad q = atom_quad(g, r);
  double c = 0.0;
  if (a.cancellation_required || kind != AtomProfile::plain) {
    if (shape_b) {
      double ma = integral_of(q, [&](double rr, double uu) { return shape_a((rr + uu) / r); });
      double mb = integral_of(q, [&](double rr, double uu) { return shape_b((rr + uu) / r); });
      require(mb != 0.0, "make_atom: degenerate profile");
      c = a.cancellation_required ? ma / mb : 0.0;
    }
  }
  double rr_ = r;
  auto base = [shape_a, shape_b, c, rr_](double rad, double u) {
    double t = (rad + u) / rr_;
    double v = shape_a(t);
    if (shape_b && c != 0.0) v -= c * shape_b(t);
    return v;
  };
  double l2sq = integral_of(q, [&](double rr2, double uu) {
    double v = base(rr2, uu);
    return v * v;
  });
  require(l2sq > 0.0, "make_atom: zero profile");
  int d = g.d;
  double target = 0.995 * std::pow(r, -0.5 * d);
  double scale = target / std::sqrt(l2sq);
  a.profile = [base, scale](double rad, double u) { return scale * base(rad, u); };
  a.l2 = target;
  a.l1 = integral_of(q, [&](double rr2, double uu) { return std::abs(a.profile(rr2, uu)); });
  a.mass = integral_of(q, [&](double rr2, double uu) { return a.profile(rr2, uu); });
  if (a.cancellation_required)
    require(std::abs(a.mass) <= 1e-8 * a.l1, "make_atom: cancellation not achieved");
  char buf[64];
  std::snprintf(buf, sizeof(buf), "atom:r=%.17g,kind=%d", r, int(kind));
  a.id = buf;
  a.qr_n = q.rn;
  a.qr_w = q.rw;
  a.qu_n = q.un;
  a.qu_w = q.uw;
  return a;
}

void atom_fiber_coeffs(const HTypeStructure& g, const Atom& a, const CalibrationReport& cal,
                       double mu, int k_hi, cplx* out) {
  require(g.d2 == 1, "atom_fiber_coeffs: d2 = 1 only");
  require(!a.qr_n.empty(), "atom_fiber_coeffs: atom lacks cached quadrature");
  // u-Fourier profile Phi_a^mu(r) = int a(r, u) e^{-2 pi i mu u} du (even in u)
  std::vector<double> phi(a.qr_n.size(), 0.0);
  for (std::size_t i = 0; i < a.qr_n.size(); ++i) {
    double s = 0.0;
    for (std::size_t jj = 0; jj < a.qu_n.size(); ++jj)
      s += a.qu_w[jj] * a.profile(a.qr_n[i], a.qu_n[jj]) * std::cos(two_pi * mu * a.qu_n[jj]);
    phi[i] = s;  // qu_w already contains omega_0 = 2: both u signs
  }
  for (int k = 0; k <= k_hi; ++k) out[k] = cplx(0.0, 0.0);
  const double alpha = 0.5 * g.d1 - 1.0;
  double wd1 = sphere_area(g.d1);
  for (std::size_t i = 0; i < a.qr_n.size(); ++i) {
    double rr2 = a.qr_n[i];
    double z = cal.c_Z * mu * rr2 * rr2;
    // qr_w carries omega_{d1-1} r^{d1-1}; the transform wants plain r^{d1-1} dr
    cplx w = (a.qr_w[i] / wd1) * phi[i];
    laguerre_accumulate(z, alpha, k_hi, w, out);
  }
  // q_k = [k! / Gamma(k + a + 1)] (2 c_Z^{d1/2} / c_N) integral
  double pref0 = 2.0 * std::pow(cal.c_Z, 0.5 * g.d1);
  cplx cpref = pref0 / cal.c_N;
  double gk = 1.0 / std::tgamma(alpha + 1.0);  // k!/Gamma(k+alpha+1) at k=0
  for (int k = 0; k <= k_hi; ++k) {
    out[k] *= cpref * gk;
    gk *= double(k + 1) / (k + 1 + alpha);
  }
}

JointMultiplier atom_applied_multiplier(const HTypeStructure& g, const Atom& a,
                                        const JointMultiplier& f) {
  require(g.d2 == 1, "atom_applied_multiplier: d2 = 1 only");
  JointMultiplier out = f;
  out.id = a.id + "*" + f.id;
  const CalibrationReport& cal = calibration_for(g);
  // atom coefficients decay once lam_k >> r^{-2}; widen the band cap slightly
  auto inner_prepare = f.prepare_row;
  auto inner_eval = f.eval;
  Atom atom = a;
  HTypeStructure grp = g;
  CalibrationReport calc = cal;
  int d1 = g.d1;
  out.prepare_row = [inner_prepare, inner_eval, atom, grp, calc, d1,
                     f](double lamU) -> std::function<cplx(double)> {
    double mu = lamU / calc.c_U;
    double step = calc.c_E * mu;
    int k_hi = int(std::floor((f.lamL_band.hi / step - 0.5 * d1) / 2.0 + 1e-12));
    k_hi = std::max(k_hi, 0);
    auto coeffs = std::make_shared<std::vector<cplx>>(std::size_t(k_hi) + 1);
    atom_fiber_coeffs(grp, atom, calc, mu, k_hi, coeffs->data());
    std::function<cplx(double)> row =
        inner_prepare ? inner_prepare(lamU) : nullptr;
    return [coeffs, row, inner_eval, lamU, step, d1, k_hi](double lamL) -> cplx {
      cplx base = row ? row(lamL) : inner_eval(lamL, lamU);
      if (base == cplx(0.0, 0.0)) return base;
      int k = int(std::lround(((lamL / step) - 0.5 * d1) / 2.0));
      if (k < 0 || k > k_hi) return {0.0, 0.0};
      return base * (*coeffs)[k];
    };
  };
  return out;
}

AtomImageRecord atom_image_norm(const HTypeStructure& g, const MultiplierFn& m,
                                const CutoffSet& c, const Atom& a, const AtomImageOptions& opt) {
  require(opt.j_max >= opt.j_min, "atom_image_norm: empty j window");
  AtomImageRecord rec;
  rec.j_exact = std::min(opt.j_exact, opt.j_max);
  auto pieces = dyadic_decompose(m, c, opt.j_min, rec.j_exact);

  double theta = std::max(m.theta, 0.0);
  for (const auto& p : pieces) {
    double lam_hi = std::ldexp(2.0, p.j);
    JointMultiplier jm = joint_from_scalar(p.piece, std::ldexp(0.5, p.j), lam_hi);
    JointMultiplier applied = atom_applied_multiplier(g, a, jm);
    LineL1Options lo;
    double spread = (theta > 1.0) ? 4.4 * std::pow(2.0, p.j * (theta - 1.0)) : 4.4;
    lo.R_r = std::min(opt.R_cap, opt.base_R + a.r + spread);
    lo.U = lo.R_r;
    lo.res_factor = opt.res_factor;
    LineL1Result lr = l1_norm_ufft(g, applied, opt.fiber, lo);
    rec.js.push_back(p.j);
    rec.per_j.push_back(lr.value);
    rec.edge_fracs.push_back(lr.edge_fraction);
  }

  // total over the exact window: one synthesis of the summed symbol
  {
    MultiplierFn msum = m;
    auto me = m.eval;
    Fn1 phi = c.phi;
    int jmin = opt.j_min, jmax = rec.j_exact;
    msum.eval = [me, phi, jmin, jmax](double l) -> cplx {
      double win = 0.0;
      for (int j = jmin; j <= jmax; ++j) win += phi(std::ldexp(l, -j));
      return me(l) * win;
    };
    JointMultiplier jm = joint_from_scalar(msum, std::ldexp(0.5, jmin), std::ldexp(2.0, jmax));
    JointMultiplier applied = atom_applied_multiplier(g, a, jm);
    LineL1Options lo;
    double spread = (theta > 1.0) ? 4.4 * std::pow(2.0, rec.j_exact * (theta - 1.0)) : 4.4;
    lo.R_r = std::min(opt.R_cap, opt.base_R + a.r + spread);
    lo.U = lo.R_r;
    lo.res_factor = opt.res_factor;
    rec.total = l1_norm_ufft(g, applied, opt.fiber, lo).value;
  }

  // geometric tail estimate for j in (j_exact, j_max]
  rec.tail_estimate = 0.0;
  if (rec.j_exact < opt.j_max && rec.per_j.size() >= 3) {
    std::size_t n = rec.per_j.size();
    double q1 = rec.per_j[n - 1] / std::max(rec.per_j[n - 2], 1e-300);
    double q2 = rec.per_j[n - 2] / std::max(rec.per_j[n - 3], 1e-300);
    double q = std::min(0.95, std::max(q1, q2));
    double tail = 0.0, term = rec.per_j[n - 1];
    for (int j = rec.j_exact + 1; j <= opt.j_max; ++j) {
      term *= q;
      tail += term;
    }
    rec.tail_estimate = tail;
  }
  if (rec.tail_estimate > 0.05 * std::max(rec.total, 1e-300)) rec.converged = false;
  return rec;
}

namespace {

JointMultiplier hjn_multiplier(const HTypeStructure&, int j, int n, const CutoffSet& c) {
  JointMultiplier f;
  Fn1 chi1p = c.chi1p;
  Fn1 zp = c.zetap;
  double Ls = std::ldexp(1.0, 2 * j);      // lamL scale 2^{2j}
  double Us = std::ldexp(1.0, j + n);      // lamU scale 2^{j+n}
  bool center = (n == 0);
  f.eval = [chi1p, zp, Ls, Us, center](double lamL, double lamU) -> cplx {
    double t = lamU / Us;
    double zf = center ? (1.0 - smooth_step(2.0, 4.0, t)) : zp(t);
    if (zf == 0.0) return {0.0, 0.0};
    return {chi1p(lamL / Ls) * zf, 0.0};
  };
  f.lamL_band = {Ls / 64.0, 64.0 * Ls};
  f.lamU_min = center ? 0.0 : Us / 4.0;
  f.lamU_max = center ? 4.0 * Us : 4.0 * Us;
  f.mu_integrable = true;  // compact lamU support
  f.mu_freq_scale = 4.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "hjn:j=%d,n=%d", j, n);
  f.id = buf;
  return f;
}

}  // namespace

KernelField hjn_field(const HTypeStructure& g, int j, int n, const CutoffSet& c,
                      const BiradialGrid& grid, const FiberParams& p) {
  require(j >= 0 && n >= 0, "hjn_field: j, n >= 0");
  // resolution guard: the kernel lives at scale 2^{-j}
  double dr = grid.R_x / std::max(1, grid.nr());
  require(dr <= 0.5 * std::ldexp(1.0, -j), "hjn_field: grid under-resolves the 2^-j scale");
  return fiber_kernel(g, hjn_multiplier(g, j, n, c), grid, p);
}

HjnResult hjn_cancellation(const HTypeStructure& g, int j, int n, const CutoffSet& c,
                           const Atom& a, const FiberParams& p, double res_factor) {
  HjnResult res;
  JointMultiplier h = hjn_multiplier(g, j, n, c);
  LineL1Options lo;
  lo.R_r = a.r + 2.0 + 24.0 * std::ldexp(1.0, -j);
  lo.U = lo.R_r;
  lo.res_factor = res_factor;
  res.h_l1 = l1_norm_ufft(g, h, p, lo).value;
  res.image_l1 = l1_norm_ufft(g, atom_applied_multiplier(g, a, h), p, lo).value;
  res.bound = std::min(1.0, std::ldexp(1.0, n + j + a.L));
  res.ratio = res.image_l1 / res.bound;
  return res;
}

}  // namespace htlab
