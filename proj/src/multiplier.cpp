#include "htlab/multiplier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>

namespace htlab {

namespace {

std::mutex fftw_mutex;

// forward DFT of the samples, fftw convention e^{-2 pi i m n / N}
std::vector<cplx> dft_forward(const std::vector<cplx>& in) {
  int n = int(in.size());
  std::vector<cplx> out(in.size());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                            reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                            FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

int next_pow2(double x) {
  int n = 1;
  while (n < x && n < (1 << 26)) n <<= 1;
  return n;
}

}  // namespace

MultiplierFn osc_multiplier(double theta, double beta, const CutoffSet& c) {
  require(theta >= 0.0 && beta >= 0.0, "osc_multiplier: theta, beta >= 0");
  MultiplierFn m;
  m.theta = theta;
  m.beta = beta;
  Fn1 chi = c.chi;
  m.eval = [theta, beta, chi](double l) -> cplx {
    double cut = chi(l);
    if (cut == 0.0) return {0.0, 0.0};
    double amp = cut * std::pow(l, -theta * beta / 2.0);
    double phase = std::pow(l, theta);
    return cplx(amp * std::cos(phase), amp * std::sin(phase));
  };
  m.lambda_max = 64.0;
  m.freq_hint = (theta > 0.0) ? theta * std::pow(m.lambda_max, theta - 1.0) : 1.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "osc:theta=%g,beta=%g", theta, beta);
  m.id = buf;
  return m;
}

MultiplierFn multiplier_preset(const std::string& name, const CutoffSet& c) {
  auto get_param = [&name](const std::string& key, double defval) {
    auto pos = name.find(key + "=");
    if (pos == std::string::npos) return defval;
    return std::stod(name.substr(pos + key.size() + 1));
  };
  if (name.rfind("osc:", 0) == 0) {
    return osc_multiplier(get_param("theta", 2.0), get_param("beta", 3.0), c);
  }
  if (name == "mh:gaussian") {
    MultiplierFn m;
    m.eval = [](double l) -> cplx { return {std::exp(-l * l), 0.0}; };
    m.lambda_max = 16.0;
    m.freq_hint = 1.0;
    m.id = name;
    return m;
  }
  if (name.rfind("heat:", 0) == 0) {
    double t = get_param("t", 1.0);
    MultiplierFn m;
    m.eval = [t](double l) -> cplx { return {std::exp(-t * l * l), 0.0}; };
    m.lambda_max = std::max(8.0, 8.0 / std::sqrt(t));
    m.freq_hint = 1.0;
    m.id = name;
    return m;
  }
  if (name.rfind("schrod:", 0) == 0) {
    double t = get_param("t", 0.1);
    double delta = get_param("delta", 1.0 / 256.0);
    MultiplierFn m;
    m.eval = [t, delta](double l) -> cplx {
      double ll = l * l;
      double amp = std::exp(-delta * ll);
      return cplx(amp * std::cos(t * ll), amp * std::sin(t * ll));
    };
    m.lambda_max = std::sqrt(40.0 / delta);
    m.freq_hint = 2.0 * std::abs(t) * m.lambda_max;
    m.id = name;
    return m;
  }
  throw error("unknown multiplier preset: " + name);
}

std::vector<cplx> sample_symbol(const MultiplierFn& m, double lambda_max, int n) {
  require(n >= 2, "sample_symbol: n >= 2");
  std::vector<cplx> v(n);
  double dl = lambda_max / n;
  for (int i = 0; i < n; ++i) v[i] = m.eval(i * dl);
  return v;
}

int suggested_samples(const MultiplierFn& m, double lambda_max, double oversample) {
  double cycles = m.freq_hint * lambda_max / two_pi;
  double n = std::max(1024.0, cycles * 2.0 * oversample);
  int np = next_pow2(n);
  require(np <= (1 << 26), "suggested_samples: window too oscillatory to sample");
  return np;
}

double sobolev_norm(const std::vector<cplx>& samples, double dlambda, double s) {
  require(s >= 0.0, "sobolev_norm: s >= 0");
  require(samples.size() >= 8, "sobolev_norm: too few samples");
  int n = int(samples.size());
  // aliasing guard: the symbol must be supported away from the window edges
  double amax = 0.0;
  for (const cplx& v : samples) amax = std::max(amax, std::abs(v));
  if (amax == 0.0) return 0.0;
  int edge = std::max(2, n / 256);
  double eleft = 0.0, eright = 0.0;
  for (int i = 0; i < edge; ++i) {
    eleft = std::max(eleft, std::abs(samples[i]));
    eright = std::max(eright, std::abs(samples[n - 1 - i]));
  }
  if (eleft > 1e-7 * amax || eright > 1e-7 * amax)
    throw error("sobolev_norm: support leakage at window edge (aliasing guard)");

  std::vector<cplx> hat = dft_forward(samples);
  // ||f||^2 = (dl / n) * sum_m (1 + xi_m^2)^s |hat_m|^2, xi_m = 2 pi m / (n dl)
  double dxi = two_pi / (n * dlambda);
  std::vector<double> terms(n);
  for (int m = 0; m < n; ++m) {
    int ms = (m <= n / 2) ? m : m - n;
    double xi = dxi * ms;
    double w = std::pow(1.0 + xi * xi, s);
    double a = std::abs(hat[m]);
    terms[m] = w * a * a;
  }
  double total = pairwise_sum(terms);
  return std::sqrt(total * dlambda / n);
}

double sobolev_norm(const MultiplierFn& m, double s, double lambda_max) {
  double L = (lambda_max > 0) ? lambda_max : m.lambda_max;
  int n = suggested_samples(m, L);
  return sobolev_norm(sample_symbol(m, L, n), L / n, s);
}

std::vector<DyadicPiece> dyadic_decompose(const MultiplierFn& m, const CutoffSet& c, int jmin,
                                          int jmax, double recon_tol) {
  require(jmax >= jmin, "dyadic_decompose: empty j range");
  std::vector<DyadicPiece> out;
  for (int j = jmin; j <= jmax; ++j) {
    DyadicPiece p;
    p.j = j;
    auto me = m.eval;
    Fn1 phi = c.phi;
    p.piece.eval = [me, phi, j](double l) -> cplx { return me(l) * phi(std::ldexp(l, -j)); };
    p.piece.lambda_max = std::ldexp(2.0, j) * 1.05;
    p.piece.freq_hint = m.freq_hint;
    p.piece.theta = m.theta;
    p.piece.beta = m.beta;
    p.piece.id = m.id + ":mj(j=" + std::to_string(j) + ")";
    p.rescaled.eval = [me, phi, j](double l) -> cplx { return me(std::ldexp(l, j)) * phi(l); };
    p.rescaled.lambda_max = 4.0;
    if (m.theta > 0.0)
      p.rescaled.freq_hint =
          m.theta * std::pow(2.0, double(j) * m.theta) * std::pow(2.0, m.theta - 1.0);
    else
      p.rescaled.freq_hint = std::ldexp(m.freq_hint, j);
    p.rescaled.theta = m.theta;
    p.rescaled.beta = m.beta;
    p.rescaled.id = m.id + ":m^j(j=" + std::to_string(j) + ")";
    out.push_back(std::move(p));
  }
  // reconstruction check on a probe grid restricted to the covered dyadic range
  double lo = std::ldexp(1.0, jmin - 1), hi = std::ldexp(2.0, jmax);
  double worst = 0.0;
  for (double l : logspace(std::max(lo, 1e-6), std::min(hi, m.lambda_max), 64)) {
    if (std::ldexp(1.0, jmin) > l || l > std::ldexp(1.0, jmax)) continue;
    cplx sum(0.0, 0.0);
    for (const auto& p : out) sum += p.piece.eval(l);
    worst = std::max(worst, std::abs(sum - m.eval(l)));
  }
  if (worst > recon_tol)
    throw error("dyadic_decompose: j range does not cover supp m (residual " +
                std::to_string(worst) + ")");
  return out;
}

std::vector<DyadicNormRow> dyadic_norm_table(const MultiplierFn& m, const CutoffSet& c, double s,
                                             int jmin, int jmax) {
  require(m.theta >= 0.0 && m.beta >= 0.0, "dyadic_norm_table: needs an oscillating multiplier");
  auto pieces = dyadic_decompose(m, c, jmin, jmax);
  std::vector<DyadicNormRow> rows;
  for (const auto& p : pieces) {
    DyadicNormRow row;
    row.j = p.j;
    row.l2s_norm = sobolev_norm(p.rescaled, s);
    double expo = std::abs(double(p.j)) * m.theta * (s - m.beta / 2.0);
    row.bound = std::pow(2.0, expo);
    row.ratio = row.l2s_norm / row.bound;
    rows.push_back(row);
  }
  return rows;
}

void write_dyadic_norm_csv(const std::vector<DyadicNormRow>& rows, const std::string& path) {
  std::ofstream out(path);
  require(bool(out), "write_dyadic_norm_csv: cannot open " + path);
  out << "j,l2s_norm,bound,ratio\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.j, r.l2s_norm, r.bound, r.ratio);
    out << buf;
  }
}

namespace {

double linf_of(const MultiplierFn& m, double t, const CutoffSet& c, double lo, double hi) {
  // sup over the cutoff band of |m(t l) phi(l)|
  double sup = 0.0;
  for (double l : linspace(lo, hi, 2048)) {
    double v = std::abs(m.eval(t * l)) * c.phi(l);
    sup = std::max(sup, v);
  }
  return sup;
}

double l2s_of(const MultiplierFn& m, double t, const CutoffSet& c, double s) {
  MultiplierFn g;
  auto me = m.eval;
  Fn1 phi = c.phi;
  g.eval = [me, phi, t](double l) -> cplx { return me(t * l) * phi(l); };
  g.lambda_max = 2.5;
  if (m.theta > 0.0 && t > 1e-9)
    g.freq_hint = m.theta * std::pow(2.0 * t, m.theta - 1.0) * t + 4.0;
  else
    g.freq_hint = m.freq_hint * t + 4.0;
  return sobolev_norm(g, s);
}

}  // namespace

ClassReport class_constants(const MultiplierFn& m, double theta, double beta, double s,
                            const CutoffSet& c, double t_max, int n_small, int n_large) {
  require(s >= 0.0, "class_constants: s >= 0");
  require(t_max > 4.0, "class_constants: t_max too small");
  ClassReport rep;
  rep.t_max = t_max;

  // t in [0, 1]: uniform Sobolev condition
  std::vector<double> ts = linspace(0.0, 1.0, n_small);
  for (double t : ts) rep.sup_small = std::max(rep.sup_small, l2s_of(m, t, c, s));

  // t >= 1, log-uniform
  std::vector<double> tl = logspace(1.0, t_max, n_large);
  double sup_linf_early = 0.0, sup_l2s_early = 0.0;
  for (double t : tl) {
    double a = std::pow(t, theta * beta / 2.0) * linf_of(m, t, c, 0.25, 2.5);
    double b = std::pow(t, -theta * (2.0 * s - beta) / 2.0) * l2s_of(m, t, c, s);
    rep.sup_linf = std::max(rep.sup_linf, a);
    rep.sup_l2s = std::max(rep.sup_l2s, b);
    if (t <= t_max / 4.0) {
      sup_linf_early = std::max(sup_linf_early, a);
      sup_l2s_early = std::max(sup_l2s_early, b);
    }
  }
  rep.C_m = std::max(rep.sup_linf, rep.sup_l2s);
  // stabilization: the top quarter of the t range must not move the sups
  rep.stabilized = rep.sup_linf <= sup_linf_early * 1.05 + 1e-12 &&
                   rep.sup_l2s <= sup_l2s_early * 1.05 + 1e-12;
  return rep;
}

std::pair<MultiplierFn, MultiplierFn> high_low_split(const MultiplierFn& m, const CutoffSet& c) {
  auto me = m.eval;
  Fn1 chi = c.chi;
  MultiplierFn small = m, large = m;
  small.eval = [me, chi](double l) -> cplx { return me(l) * (1.0 - chi(l)); };
  small.id = m.id + ":small";
  small.lambda_max = 2.5;
  large.eval = [me, chi](double l) -> cplx { return me(l) * chi(l); };
  large.id = m.id + ":large";
  return {small, large};
}

MultiplierFn analytic_family(const MultiplierFn& m_large, double theta, double beta, int d,
                             cplx z) {
  require(z.real() >= 0.0 && z.real() <= 1.0, "analytic_family: Re z in [0,1]");
  MultiplierFn out = m_large;
  cplx w = 0.5 * theta * (cplx(beta, 0.0) - double(d) * z);
  auto me = m_large.eval;
  out.eval = [me, w](double l) -> cplx {
    if (l <= 0.0) return {0.0, 0.0};
    cplx base = me(l);
    if (base == cplx(0.0, 0.0)) return base;
    return base * std::exp(w * std::log(l));
  };
  char buf[96];
  std::snprintf(buf, sizeof(buf), ":z=%g%+gi", z.real(), z.imag());
  out.id = m_large.id + buf;
  out.freq_hint = m_large.freq_hint + std::abs(w.imag());
  return out;
}

}  // namespace htlab
