#include "htlab/wave.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <map>
#include <memory>
#include <mutex>

namespace htlab {

// ---------------------------------------------------------------------------
// s-integral tables: F(xi) = int g(s) e^{i s xi} ds for smooth compactly
// supported g, via midpoint sampling + zero-padded FFT. Midpoint sums of
// C_c^inf integrands converge spectrally, so the table error is set by the
// sample density against the e^{i tau/4s} oscillation.
// ---------------------------------------------------------------------------

namespace {

std::mutex plan_mutex;

fftw_plan plan_for(int n, int sign) {
  static std::map<std::pair<int, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto key = std::make_pair(n, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<cplx> a(n), b(n);
  fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                 reinterpret_cast<fftw_complex*>(b.data()), sign,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache.emplace(key, p);
  return p;
}

void run_dft(std::vector<cplx>& inout, int sign) {
  fftw_plan p = plan_for(int(inout.size()), sign);
  std::vector<cplx> out(inout.size());
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(inout.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  inout.swap(out);
}

struct RowTable {
  double dxi = 0.0;
  int n_use = 0;
  std::vector<cplx> F;

  cplx at(double xi) const {
    if (xi < 0.0) return {0.0, 0.0};
    double p = xi / dxi;
    int i = int(p);
    if (i + 1 >= n_use) return {0.0, 0.0};
    double f = p - i;
    return F[i] * (1.0 - f) + F[i + 1] * f;
  }
};

RowTable s_integral_table(const std::function<cplx(double)>& gfun, double s0, double s1, int n_s,
                          int n_fft, double xi_keep) {
  double ds = (s1 - s0) / n_s;
  std::vector<cplx> buf(n_fft, cplx(0.0, 0.0));
  for (int i = 0; i < n_s; ++i) buf[i] = gfun(s0 + (i + 0.5) * ds);
  run_dft(buf, FFTW_BACKWARD);  // sum_n g_n e^{+2 pi i m n / N}
  RowTable t;
  t.dxi = two_pi / (n_fft * ds);
  int half = n_fft / 2;
  t.n_use = (xi_keep > 0.0) ? std::min(half, int(xi_keep / t.dxi) + 2) : half;
  t.F.resize(t.n_use);
  double off = s0 + 0.5 * ds;
  for (int m = 0; m < t.n_use; ++m) {
    double xi = t.dxi * m;
    t.F[m] = ds * std::exp(cplx(0.0, off * xi)) * buf[m];
  }
  return t;
}

int next_pow2_int(double x) {
  int n = 1;
  while (n < x && n < (1 << 27)) n <<= 1;
  return n;
}

struct SGridSpec {
  int n_s, n_fft;
};

SGridSpec s_grid_for(double tau) {
  int n_s = next_pow2_int(std::max(1024.0, 24.0 * std::abs(tau)));
  return {n_s, 16 * n_s};
}

// y-parameterized family of s-integral tables with an LRU bucket cache and
// Catmull-Rom interpolation in y. y is the shell variable lamU / tau.
struct PieceTables {
  double tau = 0.0;
  double s0 = 0.0, s1 = 0.0;
  SGridSpec sg{};
  double xi_keep = 0.0;
  int k = 0;  // eta0 shell
  std::function<cplx(double)> amp;
  Fn1 eta0;
  double dy = 0.1;

  std::mutex m;
  std::map<int, std::shared_ptr<RowTable>> cache;
  std::deque<int> order;
  std::size_t cap = 96;

  std::shared_ptr<RowTable> bucket(int iy) {
    {
      std::lock_guard<std::mutex> lock(m);
      auto it = cache.find(iy);
      if (it != cache.end()) return it->second;
    }
    double y = iy * dy;
    double kpi = k * pi;
    auto a = amp;
    auto e = eta0;
    double t = tau;
    auto gfun = [a, e, y, kpi, t](double s) -> cplx {
      double win = e(s * y - kpi);
      if (win == 0.0) return {0.0, 0.0};
      return a(s) * win * std::exp(cplx(0.0, t * 0.25 / s));
    };
    auto tab = std::make_shared<RowTable>(s_integral_table(gfun, s0, s1, sg.n_s, sg.n_fft, xi_keep));
    std::lock_guard<std::mutex> lock(m);
    auto [it, inserted] = cache.emplace(iy, tab);
    if (inserted) {
      order.push_back(iy);
      while (order.size() > cap) {
        cache.erase(order.front());
        order.pop_front();
      }
    }
    return it->second;
  }

  // closure over the 4 buckets around y
  std::function<cplx(double)> row(double y, double scale, double rt) {
    int i = int(std::floor(y / dy));
    double f = y / dy - i;
    auto p0 = bucket(i - 1), p1 = bucket(i), p2 = bucket(i + 1), p3 = bucket(i + 2);
    double w0 = 0.5 * (-f + 2.0 * f * f - f * f * f);
    double w1 = 0.5 * (2.0 - 5.0 * f * f + 3.0 * f * f * f);
    double w2 = 0.5 * (f + 4.0 * f * f - 3.0 * f * f * f);
    double w3 = 0.5 * (-f * f + f * f * f);
    return [p0, p1, p2, p3, w0, w1, w2, w3, scale, rt](double lamL) -> cplx {
      double xi = lamL * scale;
      return rt * (w0 * p0->at(xi) + w1 * p1->at(xi) + w2 * p2->at(xi) + w3 * p3->at(xi));
    };
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// subordination
// ---------------------------------------------------------------------------

cplx SubordinationTerms::residual_at(double x) const {
  if (res_x.empty() || x < res_x.front() || x > res_x.back()) return {0.0, 0.0};
  auto it = std::upper_bound(res_x.begin(), res_x.end(), x);
  std::size_t i =
      std::min(res_x.size() - 2, std::size_t(std::max<long>(0, it - res_x.begin() - 1)));
  double f = (x - res_x[i]) / (res_x[i + 1] - res_x[i]);
  return res_val[i] * (1.0 - f) + res_val[i + 1] * f;
}

SubordinationTerms subordination_terms(double tau, const CutoffSet& c, int order) {
  require(tau >= 4.0, "subordination_terms: needs tau >= 4");
  require(order >= 0 && order <= 8, "subordination_terms: order in [0, 8]");
  SubordinationTerms sub;
  sub.tau = tau;
  sub.order = order;

  // leading stationary-phase inversion of the band symbol
  const cplx C0 = (0.5 / std::sqrt(pi)) * cplx(std::cos(-pi / 4), std::sin(-pi / 4));
  Fn1 band = c.chi_band;
  auto a0 = [C0, band](double s) -> cplx {
    if (s <= 0.0) return {0.0, 0.0};
    double cut = band(0.5 / s);
    if (cut == 0.0) return {0.0, 0.0};
    return C0 * std::pow(s, -1.5) * cut;
  };

  const int n_corr = 1024;
  const double s0 = sub.s0, s1 = sub.s1;
  const double dsc = (s1 - s0) / (n_corr - 1);
  auto corr = std::make_shared<std::vector<cplx>>(n_corr, cplx(0.0, 0.0));
  auto amp = [a0, corr, s0, dsc, n_corr](double s) -> cplx {
    cplx base = a0(s);
    double p = (s - s0) / dsc;
    if (p < 0.0 || p > n_corr - 1) return base;
    int i = std::min(n_corr - 2, int(p));
    double f = p - i;
    return base + (*corr)[i] * (1.0 - f) + (*corr)[i + 1] * f;
  };

  SGridSpec sg = s_grid_for(tau);
  Fn1 chi1 = c.chi1;
  const double x_hi = 36.0;

  for (int sweep = 0; sweep <= order; ++sweep) {
    auto gfun = [&](double s) -> cplx { return amp(s) * std::exp(cplx(0.0, tau * 0.25 / s)); };
    RowTable table = s_integral_table(gfun, s0, s1, sg.n_s, sg.n_fft, x_hi * tau);
    int m_hi = std::min(table.n_use - 1, int(x_hi * tau / table.dxi));
    sub.res_x.resize(m_hi + 1);
    sub.res_val.resize(m_hi + 1);
    double sup = 0.0;
    for (int m = 0; m <= m_hi; ++m) {
      double x = table.dxi * m / tau;
      double sx = std::sqrt(x);
      cplx lhs = band(sx) * std::exp(cplx(0.0, tau * sx));
      cplx rhs = chi1(x) * std::sqrt(tau) * table.F[m];
      sub.res_x[m] = x;
      sub.res_val[m] = lhs - rhs;
      sup = std::max(sup, std::abs(sub.res_val[m]));
    }
    sub.sup_residual = sup;
    if (sweep == order) break;
    // defect correction: cancel the co-moving leading part of the residual
    const cplx rot = std::sqrt(2.0 / pi) * cplx(std::cos(-pi / 4), std::sin(-pi / 4));
    for (int i = 0; i < n_corr; ++i) {
      double s = s0 + i * dsc;
      double x = 0.25 / (s * s);
      double mask = band(0.5 / s);
      if (mask == 0.0) continue;
      cplx rho = sub.residual_at(x);
      cplx d = -rot * std::pow(x, 0.75) * rho * std::exp(cplx(0.0, -tau * std::sqrt(x)));
      (*corr)[i] += mask * d;
    }
  }
  sub.amplitude = amp;

  double expect = 12.0 * std::pow(tau, -double(order + 1));
  if (sub.sup_residual > 10.0 * expect)
    throw error("subordination_terms: residual " + std::to_string(sub.sup_residual) +
                " exceeds 10x the order-" + std::to_string(order) + " expectation");
  return sub;
}

// ---------------------------------------------------------------------------
// wave band kernel (dilation through the unit-band propagator)
// ---------------------------------------------------------------------------

KernelField wave_band_kernel(const HTypeStructure& g, double tau, int j, const CutoffSet& c,
                             const BiradialGrid& grid, const FiberParams& p) {
  require(tau != 0.0, "wave_band_kernel: tau must be nonzero");
  std::vector<double> rs = grid.r_nodes, us = grid.rho_nodes;
  for (double& r : rs) r = std::ldexp(r, j);
  for (double& u : us) u = std::ldexp(u, 2 * j);
  BiradialGrid inner = eval_grid(g, rs, us);
  KernelField base = fiber_kernel(g, band_propagator(c, tau), inner, p);
  KernelField out = zero_field(grid, "waveband:tau=" + std::to_string(tau) +
                                         ",j=" + std::to_string(j));
  double pw = std::ldexp(1.0, j * g.Q);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = pw * base.values[i];
  fit_tail_descriptor(out);
  return out;
}

// ---------------------------------------------------------------------------
// refined decomposition pieces as joint multipliers
//
// Everything is assembled at symbol level: each piece is the s-integral
//   sqrt(tau) int a(s) eta0(s lamU/tau - k pi) e^{i tau/4s} e^{i s lamL/tau} ds
// tabulated per lamU row (one FFT per y bucket) and pushed through the one
// kernel engine. wside = true rescales both arguments by the automorphic
// delta_tau dilation, which keeps the spectral band at unit size and leaves
// L^1 norms unchanged.
// ---------------------------------------------------------------------------

JointMultiplier piece_multiplier(const DecompIndex& idx, PieceKind kind, const CutoffSet& c,
                                 const SubordinationTerms& sub, bool wside) {
  const double tau = idx.tau;
  require(tau >= 4.0, "piece_multiplier: tau >= 4");
  const double rt = std::sqrt(tau);
  const double Lscale = wside ? 1.0 : tau * tau;
  const double Uscale = wside ? 1.0 : tau;
  const double xi_of_lamL = tau / Lscale;  // xi = lamL_phys / tau = lamL * tau / Lscale

  JointMultiplier f;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "piece:%d:tau=%.17g,k=%d,n=%d,w=%d,ord=%d", int(kind), tau,
                idx.k, idx.n, int(wside), sub.order);
  f.id = buf;
  f.mu_integrable = false;
  f.mu_freq_scale = 64.0 * tau;

  Fn1 chi1 = c.chi1;
  Fn1 zeta0 = c.zeta0, zeta1 = c.zeta1;
  Fn1 band = c.chi_band;
  const double eta_hw = c.eta0_halfwidth;
  const double s0 = sub.s0, s1 = sub.s1;

  auto make_tables = [&](int k) {
    auto pt = std::make_shared<PieceTables>();
    pt->tau = tau;
    pt->s0 = s0;
    pt->s1 = s1;
    pt->sg = s_grid_for(tau);
    pt->xi_keep = 34.0 * tau;
    pt->k = k;
    pt->amp = sub.amplitude;
    pt->eta0 = c.eta0;
    return pt;
  };

  switch (kind) {
    case PieceKind::n0:
    case PieceKind::n_k:
    case PieceKind::V: {
      int k = (kind == PieceKind::n_k) ? idx.k : 0;
      require(kind != PieceKind::n_k || k >= 1, "piece_multiplier: n_k needs k >= 1");
      bool with_chi1 = (kind == PieceKind::V);
      f.lamL_band = with_chi1 ? Band{Lscale / 32.0, Lscale * 32.0} : Band{0.0, Lscale * 24.0};
      double ylo = (k * pi - eta_hw) / s1, yhi = (k * pi + eta_hw) / s0;
      f.lamU_min = (k >= 1) ? Uscale * std::max(0.0, ylo) : 0.0;
      f.lamU_max = Uscale * yhi;
      auto pt = make_tables(k);
      f.prepare_row = [pt, Uscale, Lscale, xi_of_lamL, rt, with_chi1,
                       chi1](double lamU) -> std::function<cplx(double)> {
        double y = lamU / Uscale;
        auto base = pt->row(y, xi_of_lamL, rt);
        if (!with_chi1) return base;
        return [base, chi1, Lscale](double lamL) -> cplx {
          double c1 = chi1(lamL / Lscale);
          if (c1 == 0.0) return {0.0, 0.0};
          return c1 * base(lamL);
        };
      };
      break;
    }
    case PieceKind::W_n: {
      int n = idx.n;
      f.lamL_band = {Lscale / 32.0, Lscale * 32.0};
      f.lamU_min = (n == 0) ? 0.0 : Uscale * std::ldexp(0.5, n);
      f.lamU_max = (n == 0) ? Uscale : Uscale * std::ldexp(2.0, n);
      auto pt_full = make_tables(0);  // used with eta0 == 1 via k = -1 trick below
      // full n_tau table: no eta0 window; represent as a single shared RowTable
      auto amp = sub.amplitude;
      auto gfun = [amp, tau](double s) -> cplx {
        return amp(s) * std::exp(cplx(0.0, tau * 0.25 / s));
      };
      SGridSpec sg = s_grid_for(tau);
      auto fullT = std::make_shared<RowTable>(
          s_integral_table(gfun, s0, s1, sg.n_s, sg.n_fft, 34.0 * tau));
      auto pt0 = make_tables(0);
      f.prepare_row = [pt0, fullT, Uscale, Lscale, xi_of_lamL, rt, zeta0, zeta1, chi1,
                       n](double lamU) -> std::function<cplx(double)> {
        double y = lamU / Uscale;
        double zwin = (n == 0) ? zeta0(y) : zeta1(std::ldexp(y, -n));
        if (zwin == 0.0) return [](double) -> cplx { return {0.0, 0.0}; };
        auto base0 = pt0->row(y, xi_of_lamL, rt);
        return [base0, fullT, zwin, chi1, Lscale, xi_of_lamL, rt](double lamL) -> cplx {
          double c1 = chi1(lamL / Lscale);
          if (c1 == 0.0) return {0.0, 0.0};
          cplx nfull = rt * fullT->at(lamL * xi_of_lamL);
          return zwin * c1 * (nfull - base0(lamL));
        };
      };
      (void)pt_full;
      break;
    }
    case PieceKind::E_residual: {
      f.lamL_band = {Lscale / 32.0, Lscale * 32.0};
      auto amp = sub.amplitude;
      auto gfun = [amp, tau](double s) -> cplx {
        return amp(s) * std::exp(cplx(0.0, tau * 0.25 / s));
      };
      SGridSpec sg = s_grid_for(tau);
      auto fullT = std::make_shared<RowTable>(
          s_integral_table(gfun, s0, s1, sg.n_s, sg.n_fft, 34.0 * tau));
      f.eval = [fullT, rt, band, chi1, Lscale, tau, xi_of_lamL](double lamL, double) -> cplx {
        double x = lamL / Lscale;
        double sx = std::sqrt(x);
        cplx lhs = band(sx) * std::exp(cplx(0.0, tau * sx));
        cplx rhs = chi1(x) * rt * fullT->at(lamL * xi_of_lamL);
        return lhs - rhs;
      };
      break;
    }
  }
  return f;
}

KernelField refined_piece_kernel(const HTypeStructure& g, const DecompIndex& idx, PieceKind kind,
                                 const CutoffSet& c, const SubordinationTerms& sub,
                                 const BiradialGrid& grid, const FiberParams& p) {
  JointMultiplier f = piece_multiplier(idx, kind, c, sub, false);
  return fiber_kernel(g, f, grid, p);
}

// ---------------------------------------------------------------------------
// scans
// ---------------------------------------------------------------------------

namespace {

int clampn(double x, int lo, int hi) { return std::max(lo, std::min(hi, int(x))); }

// W-side L1 norm of a unit-band multiplier (K_tau or n0 family)
double wside_l1(const HTypeStructure& g, const JointMultiplier& f, double tau,
                const ScanOptions& opt, double* tail) {
  double R = 1.3 * std::abs(tau) + 6.0;
  int n = clampn(R * 4.0 * opt.res_factor, 96, opt.max_nodes);
  BiradialGrid grid = build_grid(g, R, R, n, n);
  KernelField K = fiber_kernel(g, f, grid, opt.fiber);
  NormResult nr = field_norm(K, 1);
  if (tail) *tail = (nr.value > 0.0 && nr.tail_estimate > 0.0) ? nr.tail_estimate / nr.value : 0.0;
  return nr.value;
}

}  // namespace

ScanResult growth_scan(const HTypeStructure& g, ScanFamily fam, const std::vector<double>& range,
                       const CutoffSet& c, const ScanOptions& opt) {
  require(range.size() >= 4, "growth_scan: need >= 4 points");
  ScanResult res;
  for (double prm : range) {
    double tail = 0.0, value = 0.0;
    switch (fam) {
      case ScanFamily::K_tau:
        value = wside_l1(g, band_propagator(c, prm), prm, opt, &tail);
        break;
      case ScanFamily::n0_tau: {
        SubordinationTerms sub = subordination_terms(prm, c, opt.sub_order);
        DecompIndex idx{prm, 0, 0, 0};
        value = wside_l1(g, piece_multiplier(idx, PieceKind::n0, c, sub, true), prm, opt, &tail);
        break;
      }
      case ScanFamily::n_tau_k: {
        SubordinationTerms sub = subordination_terms(opt.tau, c, opt.sub_order);
        DecompIndex idx{opt.tau, 0, int(prm), 0};
        LineL1Options lo;
        lo.res_factor = opt.res_factor;
        LineL1Result lr = l1_norm_ufft(g, piece_multiplier(idx, PieceKind::n_k, c, sub, false),
                                       opt.fiber, lo);
        value = lr.value;
        tail = lr.edge_fraction;
        break;
      }
      case ScanFamily::W_tau_n: {
        SubordinationTerms sub = subordination_terms(opt.tau, c, opt.sub_order);
        DecompIndex idx{opt.tau, 0, 0, int(prm)};
        LineL1Options lo;
        lo.res_factor = opt.res_factor;
        LineL1Result lr = l1_norm_ufft(g, piece_multiplier(idx, PieceKind::W_n, c, sub, false),
                                       opt.fiber, lo);
        value = lr.value;
        tail = lr.edge_fraction;
        break;
      }
      case ScanFamily::heat_const: {
        BiradialGrid grid = build_grid(g, 8.0, 8.0, 96, 96);
        value = field_norm(heat_kernel(g, opt.tau, grid), 1).value;
        break;
      }
    }
    res.params.push_back(prm);
    res.norms.push_back(value);
    res.tails.push_back(tail);
  }
  // shifted abscissae for the n scan (2^n spacing): fit against 2^n directly
  if (fam == ScanFamily::W_tau_n) {
    std::vector<double> xs;
    for (double n : res.params) xs.push_back(std::ldexp(1.0, int(n)));
    res.fit = fit_exponent(xs, res.norms);
  } else {
    res.fit = fit_exponent(res.params, res.norms);
  }
  return res;
}

DecayScanResult pointwise_decay_scan(const KernelField& K, double lambda, DecayRegion region,
                                     const std::vector<int>& exponents) {
  DecayScanResult out;
  out.exponents = exponents;
  out.sup_products.assign(exponents.size(), 0.0);
  const BiradialGrid& gr = K.grid;
  double floor_w = (region == DecayRegion::finite_speed) ? 10.0
                   : (region == DecayRegion::k0_far)     ? 2.0
                                                         : 0.0;
  out.region_floor = floor_w;
  for (int ir = 0; ir < gr.nr(); ++ir) {
    double r = gr.r_nodes[ir];
    for (int iu = 0; iu < gr.nrho(); ++iu) {
      double rho = gr.rho_nodes[iu];
      double w = 0.0;
      bool in_region = false;
      switch (region) {
        case DecayRegion::finite_speed:
          w = lambda * r + lambda * lambda * rho;
          in_region = (w >= floor_w);
          break;
        case DecayRegion::k0_far:
          w = r * r + rho;
          in_region = (w >= floor_w);
          break;
        case DecayRegion::k0_central:
          w = 1.0 + rho;
          in_region = (r * r <= 1.0 / 20.0);
          break;
      }
      if (!in_region) continue;
      ++out.points_in_region;
      double a = std::abs(K.at(ir, iu));
      for (std::size_t e = 0; e < exponents.size(); ++e)
        out.sup_products[e] = std::max(out.sup_products[e], a * std::pow(w, exponents[e]));
    }
  }
  require(out.points_in_region > 0, "pointwise_decay_scan: grid too small to contain the region");
  return out;
}

}  // namespace htlab
