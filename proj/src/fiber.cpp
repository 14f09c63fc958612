#include "htlab/fiber.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>

#include "htlab/parallel.hpp"

namespace htlab {

std::uint64_t JointMultiplier::hash() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "|band=%.17g,%.17g|uband=%.17g,%.17g|scale=%.17g", lamL_band.lo,
                lamL_band.hi, lamU_min, lamU_max, mu_freq_scale);
  return fnv1a(id + buf);
}

std::string FiberParams::key_string() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "eps=%.17g,mu_min=%.17g,k_cap=%d,den=%.17g,npc=%.17g", eps,
                mu_min, k_cap, density, nodes_per_cycle);
  return buf;
}

// ---------------------------------------------------------------------------
// Laguerre engine
//
// ell_k(z) = L_k^{(alpha)}(z) e^{-z/2} via the upward three-term recurrence
//   k ell_k = (2k - 1 + alpha - z) ell_{k-1} - (k - 1 + alpha) ell_{k-2},
// carried as (mantissa, binary exponent) pairs so the e^{-z/2} seed can pass
// through the denormal range and regrow toward the turning point k ~ z/4.
// ---------------------------------------------------------------------------

namespace {

constexpr double kLn2 = 0.69314718055994530942;

struct LagState {
  double v1, v2;  // ell_{k-1}, ell_{k-2} mantissas
  int E;          // shared binary exponent

  void renorm() {
    double m = std::max(std::abs(v1), std::abs(v2));
    if (m > 1e250) {
      v1 *= 0x1p-900;
      v2 *= 0x1p-900;
      E += 900;
    } else if (m > 0.0 && m < 1e-250) {
      v1 *= 0x1p900;
      v2 *= 0x1p900;
      E -= 900;
    }
  }

  double value1() const {  // ell_{k-1} as a double (0 on deep underflow)
    if (E < -1400 || E > 1000) return (E > 1000) ? HUGE_VAL : 0.0;
    return std::ldexp(v1, E);
  }
};

LagState lag_init(double z, double alpha) {
  LagState s;
  double e = -0.5 * z;
  s.E = int(e / kLn2);
  double l0 = std::exp(e - s.E * kLn2);
  s.v2 = l0;
  s.v1 = (1.0 + alpha - z) * l0;
  s.renorm();
  return s;
}

// advance from (ell_{k-1}, ell_{k-2}) to (ell_k, ell_{k-1})
inline void lag_step(LagState& s, int k, double alpha, double z) {
  double v0 = ((2.0 * k - 1.0 + alpha - z) * s.v1 - (k - 1.0 + alpha) * s.v2) / double(k);
  s.v2 = s.v1;
  s.v1 = v0;
}

}  // namespace

cplx laguerre_weighted_sum(double z, double alpha, int k_lo, int k_hi, const cplx* coef) {
  if (k_hi < k_lo) return {0.0, 0.0};
  LagState s = lag_init(z, alpha);
  double acc_re = 0.0, acc_im = 0.0;
  // k = 0 term sits in v2, k = 1 in v1
  if (k_lo == 0) {
    double l0 = (s.E < -1400) ? 0.0 : std::ldexp(s.v2, s.E);
    acc_re += coef[0].real() * l0;
    acc_im += coef[0].imag() * l0;
  }
  if (k_hi >= 1 && k_lo <= 1) {
    double l1 = s.value1();
    acc_re += coef[1 - k_lo].real() * l1;
    acc_im += coef[1 - k_lo].imag() * l1;
  }
  for (int k = 2; k <= k_hi; ++k) {
    lag_step(s, k, alpha, z);
    if ((k & 63) == 0) {
      s.renorm();
      double mag = std::abs(s.value1());
      double guard = 10.0 * std::pow(double(k + 1), alpha) + 100.0;
      if (!(mag <= guard))
        throw error("laguerre recurrence magnitude guard tripped at k=" + std::to_string(k));
    }
    if (k >= k_lo) {
      double lk = s.value1();
      acc_re += coef[k - k_lo].real() * lk;
      acc_im += coef[k - k_lo].imag() * lk;
    }
  }
  return {acc_re, acc_im};
}

void laguerre_accumulate(double z, double alpha, int k_hi, cplx weight, cplx* acc) {
  if (k_hi < 0) return;
  LagState s = lag_init(z, alpha);
  double l0 = (s.E < -1400) ? 0.0 : std::ldexp(s.v2, s.E);
  acc[0] += weight * l0;
  if (k_hi >= 1) acc[1] += weight * s.value1();
  for (int k = 2; k <= k_hi; ++k) {
    lag_step(s, k, alpha, z);
    if ((k & 63) == 0) s.renorm();
    acc[k] += weight * s.value1();
  }
}

// ---------------------------------------------------------------------------
// mu quadrature
// ---------------------------------------------------------------------------

namespace {

struct MuQuad {
  std::vector<double> nodes, weights;
};

// Composite Gauss panels over [lo, hi], panel width adapted to a local
// oscillation count estimate cycles(mu) per unit mu.
MuQuad adaptive_mu_quad(double lo, double hi, const std::function<double(double)>& cycles,
                        double nodes_per_cycle, double density) {
  require(hi > lo && lo > 0.0, "mu quadrature: empty range");
  std::vector<double> gx, gw;
  gauss_legendre(8, gx, gw);
  MuQuad q;
  double mu = lo;
  std::size_t limit = 6'000'000;
  while (mu < hi) {
    double dens = std::max(0.5, nodes_per_cycle * cycles(mu) * density);
    double h = 8.0 / dens;
    h = std::min(h, 0.75 * mu + 1e-3);  // geometric cap toward 0
    h = std::min(h, hi - mu);
    if (h <= 0.0) break;
    for (int i = 0; i < 8; ++i) {
      q.nodes.push_back(mu + 0.5 * h * (gx[i] + 1.0));
      q.weights.push_back(0.5 * h * gw[i]);
    }
    require(q.nodes.size() < limit, "mu quadrature: node budget exceeded");
    mu += h;
  }
  return q;
}

// graded edges in [a, b], clustering geometrically into both endpoints
void graded_edges(double a, double b, double wmin, std::vector<double>& edges) {
  double half = 0.5 * (b - a);
  if (half <= wmin) {
    edges.push_back(a);
    edges.push_back(b);
    return;
  }
  int levels = std::min(40, int(std::ceil(std::log2(half / wmin))));
  edges.push_back(a);
  for (int l = levels - 1; l >= 1; --l) edges.push_back(a + half * std::ldexp(1.0, -l));
  edges.push_back(a + half);
  for (int l = 1; l <= levels - 1; ++l) edges.push_back(b - half * std::ldexp(1.0, -l));
  edges.push_back(b);
}

// spherical transform factor: int_{S^{d2-1}} e^{i w cos} dsigma
double sphere_factor(int d2, double w) {
  switch (d2) {
    case 1:
      return 2.0 * std::cos(w);
    case 2:
      return two_pi * std::cyl_bessel_j(0.0, std::abs(w));
    case 3:
      return (std::abs(w) < 1e-8) ? 4.0 * pi * (1.0 - w * w / 6.0)
                                  : 4.0 * pi * std::sin(w) / w;
    default: {
      // even-weight quadrature in the polar cosine
      static std::vector<double> cn, cw;
      static std::mutex m;
      {
        std::lock_guard<std::mutex> lock(m);
        if (cn.empty()) gauss_panels(0.0, 1.0, 16, 4, cn, cw);
      }
      double ex = 0.5 * (d2 - 3);
      double s = 0.0;
      for (std::size_t i = 0; i < cn.size(); ++i)
        s += cw[i] * std::cos(w * cn[i]) * std::pow(1.0 - cn[i] * cn[i], ex);
      return 2.0 * sphere_area(d2 - 1) * s;
    }
  }
}

struct Accum {
  std::vector<double> re, im;
  void init(std::size_t n) {
    re.assign(n, 0.0);
    im.assign(n, 0.0);
  }
  void add(const Accum& o) {
    for (std::size_t i = 0; i < re.size(); ++i) {
      re[i] += o.re[i];
      im[i] += o.im[i];
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// fiber_kernel
// ---------------------------------------------------------------------------

KernelField fiber_kernel(const HTypeStructure& g, const JointMultiplier& f,
                         const BiradialGrid& grid, const FiberParams& p,
                         const CalibrationReport& cal) {
  require(grid.d1 == g.d1 && grid.d2 == g.d2, "fiber_kernel: grid/group mismatch");
  require(f.lamL_band.hi > 0.0, "fiber_kernel: multiplier needs a finite lamL band");
  require(f.mu_integrable || p.eps > 0.0,
          "fiber_kernel: oscillatory fiber needs Abel regularization (eps > 0)");
  const int d1 = g.d1, d2 = g.d2;
  const double alpha = 0.5 * d1 - 1.0;

  double mu_hi = f.lamL_band.hi / (cal.c_E * (0.5 * d1));
  if (f.lamU_max > 0.0) mu_hi = std::min(mu_hi, f.lamU_max / cal.c_U);
  if (p.eps > 0.0) mu_hi = std::min(mu_hi, 42.0 / p.eps);
  double mu_lo = p.mu_min;
  if (f.lamU_min > 0.0) mu_lo = std::max(mu_lo, 0.995 * f.lamU_min / cal.c_U);
  require(mu_hi > mu_lo, "fiber_kernel: empty mu range");

  const double rho_max = grid.R_u;
  double scale = f.mu_freq_scale;
  auto cycles = [rho_max, scale](double mu) { return rho_max + scale / (two_pi * mu); };
  MuQuad q = adaptive_mu_quad(mu_lo, mu_hi, cycles, p.nodes_per_cycle, p.density);

  const int nr = grid.nr(), nrho = grid.nrho();
  KernelField out = zero_field(grid, f.id);
  Accum global;
  global.init(std::size_t(nr) * nrho);

  const int chunk = 64;
  const int n_nodes = int(q.nodes.size());
  const int n_chunks = (n_nodes + chunk - 1) / chunk;
  std::vector<Accum> locals;
  locals.resize(n_chunks);

  auto work = [&](int cidx) {
    Accum& loc = locals[cidx];
    loc.init(std::size_t(nr) * nrho);
    std::vector<cplx> coef;
    std::vector<cplx> phi(nr);
    std::vector<double> svec(nrho);
    int i0 = cidx * chunk, i1 = std::min(n_nodes, i0 + chunk);
    for (int i = i0; i < i1; ++i) {
      double mu = q.nodes[i];
      double lamU = cal.c_U * mu;
      if (f.lamU_max > 0.0 && lamU > f.lamU_max) continue;
      if (f.lamU_min > 0.0 && lamU < f.lamU_min) {
        // keep nodes just below the window edge: symbol evaluates to 0 there
      }
      double step = cal.c_E * mu;  // lam_{k} = step (2k + d1/2)
      double kr_lo = (f.lamL_band.lo / step - 0.5 * d1) / 2.0;
      double kr_hi = (f.lamL_band.hi / step - 0.5 * d1) / 2.0;
      int k_lo = std::max(0, int(std::ceil(kr_lo - 1e-12)));
      int k_hi = int(std::floor(kr_hi + 1e-12));
      if (k_hi < k_lo) continue;
      if (k_hi > p.k_cap)
        throw error("fiber_kernel: k_cap exceeded (need " + std::to_string(k_hi) +
                    "); raise FiberParams.k_cap or mu_min");
      coef.resize(std::size_t(k_hi - k_lo) + 1);
      bool any = false;
      if (f.prepare_row) {
        auto row = f.prepare_row(lamU);
        for (int k = k_lo; k <= k_hi; ++k) {
          cplx v = row(step * (2.0 * k + 0.5 * d1));
          coef[k - k_lo] = v;
          any = any || (v != cplx(0.0, 0.0));
        }
      } else {
        for (int k = k_lo; k <= k_hi; ++k) {
          cplx v = f.eval(step * (2.0 * k + 0.5 * d1), lamU);
          coef[k - k_lo] = v;
          any = any || (v != cplx(0.0, 0.0));
        }
      }
      if (!any) continue;
      for (int ir = 0; ir < nr; ++ir) {
        double z = cal.c_Z * mu * grid.r_nodes[ir] * grid.r_nodes[ir];
        phi[ir] = laguerre_weighted_sum(z, alpha, k_lo, k_hi, coef.data());
      }
      double wmu = q.weights[i] * std::pow(mu, 0.5 * d1 + d2 - 1.0);
      if (p.eps > 0.0) wmu *= std::exp(-p.eps * mu);
      for (int iu = 0; iu < nrho; ++iu)
        svec[iu] = sphere_factor(d2, two_pi * grid.rho_nodes[iu] * mu);
      for (int ir = 0; ir < nr; ++ir) {
        cplx cval = wmu * (cal.c_N * phi[ir]);
        double cre = cval.real(), cim = cval.imag();
        if (cre == 0.0 && cim == 0.0) continue;
        double* lre = loc.re.data() + std::size_t(ir) * nrho;
        double* lim = loc.im.data() + std::size_t(ir) * nrho;
        for (int iu = 0; iu < nrho; ++iu) {
          lre[iu] += cre * svec[iu];
          lim[iu] += cim * svec[iu];
        }
      }
    }
  };
  auto merge = [&](int cidx) {
    global.add(locals[cidx]);
    locals[cidx] = Accum{};  // release
  };
  ordered_chunks(n_chunks, work, merge);

  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = cplx(global.re[i], global.im[i]);
  out.validate();
  fit_tail_descriptor(out);
  return out;
}

KernelField fiber_kernel(const HTypeStructure& g, const JointMultiplier& f,
                         const BiradialGrid& grid, const FiberParams& p) {
  return fiber_kernel(g, f, grid, p, calibration_for(g));
}

KernelField fiber_kernel_cached(const HTypeStructure& g, const JointMultiplier& f,
                                const BiradialGrid& grid, const FiberParams& p,
                                const std::string& cache_dir, bool use_cache) {
  std::uint64_t h = fnv1a(g.name, fnv1a(p.key_string(), f.hash() ^ grid.hash()));
  std::string path = cache_dir + "/kernel_" + hex64(h) + ".bin";
  if (use_cache) {
    std::ifstream probe(path, std::ios::binary);
    if (probe.good()) {
      std::string gid;
      KernelField k = load_field(path, &gid);
      if (gid == g.name) return k;
    }
  }
  KernelField k = fiber_kernel(g, f, grid, p);
  if (use_cache) {
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    save_field(k, path, g.name);
  }
  return k;
}

double fiber_convergence_probe(const HTypeStructure& g, const JointMultiplier& f,
                               const BiradialGrid& grid, const FiberParams& p, double tol) {
  // probe on a thinned grid: every 4th node per axis
  std::vector<double> rs, us;
  for (int i = 0; i < grid.nr(); i += std::max(1, grid.nr() / 6)) rs.push_back(grid.r_nodes[i]);
  for (int i = 0; i < grid.nrho(); i += std::max(1, grid.nrho() / 6)) us.push_back(grid.rho_nodes[i]);
  if (rs.size() < 2) rs.push_back(grid.r_nodes.back());
  if (us.size() < 2) us.push_back(grid.rho_nodes.back());
  BiradialGrid probe = eval_grid(g, rs, us);
  const CalibrationReport& cal = calibration_for(g);
  KernelField base = fiber_kernel(g, f, probe, p, cal);
  FiberParams fine = p;
  fine.density *= 2.0;
  fine.eps *= 0.5;
  fine.mu_min *= 0.5;
  KernelField ref = fiber_kernel(g, f, probe, fine, cal);
  double sup = field_sup(ref);
  if (sup == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < base.values.size(); ++i)
    worst = std::max(worst, std::abs(base.values[i] - ref.values[i]) / sup);
  if (worst > tol)
    throw error("fiber_kernel: truncation not converged (doubling test moved values by " +
                std::to_string(worst) + ")");
  return worst;
}

// ---------------------------------------------------------------------------
// closed-form Schrodinger kernel (complex time)
// ---------------------------------------------------------------------------

namespace {

// Mehler fiber at complex time tt, branch tracked through w = e^{2 i c_E tt m}:
//   fiber(m, r) = m^{d1/2} e^{i c_E tt m d1/2} (1-w)^{-d1/2} exp(-(z/2)(1+w)/(1-w))
// with z = pi m r^2. For real tt and sin > 0 this is the literal
// (m / 2 sin(2 pi t m))^{d1/2} e^{-i r^2 (pi/2) m cot(2 pi t m)} integrand.
cplx mehler_fiber(int d1, cplx tt, double m, double r) {
  cplx iphase = cplx(0.0, 1.0) * (two_pi * tt * m);
  cplx w = std::exp(2.0 * iphase);
  cplx ground = std::exp(iphase * (0.5 * d1));
  cplx one_minus = 1.0 - w;
  cplx pre = ground * std::pow(one_minus, -0.5 * d1);
  double z = pi * m * r * r;
  cplx gauss = std::exp(-(0.5 * z) * (1.0 + w) / one_minus);
  return std::pow(m, 0.5 * d1) * pre * gauss;
}

MuQuad shell_quad(double t, double delta, double mu_lo, double mu_hi, double density) {
  double at = std::abs(t);
  double shell_gap = 0.5 / at;
  double peak_w = std::max(1e-7, 0.25 * delta / at);
  std::vector<double> edges;
  int s_lo = int(std::floor(mu_lo / shell_gap));
  int s_hi = int(std::ceil(mu_hi / shell_gap));
  for (int s = s_lo; s < s_hi; ++s) {
    double a = std::max(mu_lo, s * shell_gap);
    double b = std::min(mu_hi, (s + 1) * shell_gap);
    if (b <= a) continue;
    std::vector<double> e;
    graded_edges(a, b, peak_w / density, e);
    if (!edges.empty() && !e.empty() && e.front() == edges.back()) e.erase(e.begin());
    edges.insert(edges.end(), e.begin(), e.end());
  }
  std::vector<double> gx, gw;
  gauss_legendre(6, gx, gw);
  MuQuad q;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    double a = edges[i], b = edges[i + 1];
    for (int k = 0; k < 6; ++k) {
      q.nodes.push_back(a + 0.5 * (b - a) * (gx[k] + 1.0));
      q.weights.push_back(0.5 * (b - a) * gw[k]);
    }
  }
  return q;
}

}  // namespace

KernelField schrodinger_closed_form(const HTypeStructure& g, double t, double delta,
                                    const BiradialGrid& grid, double eps) {
  require(t != 0.0, "schrodinger_closed_form: t must be nonzero");
  require(delta > 0.0, "schrodinger_closed_form: damping delta must be positive");
  const int d1 = g.d1, d2 = g.d2;
  cplx tt(t, delta);
  double mu_hi = 42.0 / (two_pi * delta * 0.5 * d1);
  double mu_lo = 1e-4;
  MuQuad q = shell_quad(t, delta, mu_lo, mu_hi, 1.0);

  const int nr = grid.nr(), nrho = grid.nrho();
  KernelField out = zero_field(grid, "schrod_closed:t=" + std::to_string(t));
  Accum acc;
  acc.init(std::size_t(nr) * nrho);
  std::vector<double> svec(nrho);
  std::vector<cplx> fib(nr);
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    double m = q.nodes[i];
    double wmu = q.weights[i] * std::pow(m, d2 - 1.0);
    if (eps > 0.0) wmu *= std::exp(-eps * m);
    for (int ir = 0; ir < nr; ++ir) fib[ir] = mehler_fiber(d1, tt, m, grid.r_nodes[ir]);
    for (int iu = 0; iu < nrho; ++iu) svec[iu] = sphere_factor(d2, two_pi * grid.rho_nodes[iu] * m);
    for (int ir = 0; ir < nr; ++ir) {
      double cre = wmu * fib[ir].real(), cim = wmu * fib[ir].imag();
      double* lre = acc.re.data() + std::size_t(ir) * nrho;
      double* lim = acc.im.data() + std::size_t(ir) * nrho;
      for (int iu = 0; iu < nrho; ++iu) {
        lre[iu] += cre * svec[iu];
        lim[iu] += cim * svec[iu];
      }
    }
  }
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = cplx(acc.re[i], acc.im[i]);
  out.validate();
  fit_tail_descriptor(out);
  return out;
}

double schrodinger_eps_stability(const HTypeStructure& g, double t, double delta, double eps) {
  BiradialGrid probe = uniform_grid(g, 3.5, 3.5, 8, 8);
  KernelField a = schrodinger_closed_form(g, t, delta, probe, eps);
  KernelField b = schrodinger_closed_form(g, t, delta, probe, eps > 0.0 ? 0.5 * eps : 0.0);
  double sup = field_sup(b);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]) / sup);
  return worst;
}

// ---------------------------------------------------------------------------
// standard multipliers
// ---------------------------------------------------------------------------

JointMultiplier heat_multiplier(double t) {
  require(t > 0.0, "heat_multiplier: t > 0");
  JointMultiplier f;
  f.eval = [t](double lamL, double) -> cplx { return {std::exp(-t * lamL), 0.0}; };
  f.lamL_band = {0.0, 42.0 / t};
  f.mu_integrable = true;
  f.mu_freq_scale = 0.0;
  f.id = "heat:t=" + std::to_string(t);
  return f;
}

JointMultiplier schrodinger_multiplier(double t, double delta) {
  require(delta > 0.0, "schrodinger_multiplier: damping delta must be positive");
  JointMultiplier f;
  f.eval = [t, delta](double lamL, double) -> cplx {
    double amp = std::exp(-delta * lamL);
    return {amp * std::cos(t * lamL), amp * std::sin(t * lamL)};
  };
  f.lamL_band = {0.0, 42.0 / delta};
  f.mu_integrable = true;  // heat damping decays the fiber
  f.mu_freq_scale = std::abs(t) * f.lamL_band.hi;
  char buf[80];
  std::snprintf(buf, sizeof(buf), "schrod:t=%.17g,delta=%.17g", t, delta);
  f.id = buf;
  return f;
}

JointMultiplier joint_from_scalar(const MultiplierFn& m, double lam_lo, double lam_hi) {
  require(lam_hi > lam_lo && lam_lo >= 0.0, "joint_from_scalar: bad band");
  JointMultiplier f;
  auto me = m.eval;
  f.eval = [me](double lamL, double) -> cplx { return me(std::sqrt(lamL)); };
  f.lamL_band = {lam_lo * lam_lo, lam_hi * lam_hi};
  f.mu_integrable = false;
  // d/dmu of the phase at fixed k: freq(lambda) * lambda / (2 mu)
  f.mu_freq_scale = 0.5 * m.freq_hint * lam_hi;
  f.id = "scalar:" + m.id;
  return f;
}

KernelField heat_kernel(const HTypeStructure& g, double t, const BiradialGrid& grid) {
  FiberParams p;
  p.eps = 0.0;
  p.mu_min = 0.005;
  return fiber_kernel(g, heat_multiplier(t), grid, p);
}

// ---------------------------------------------------------------------------
// calibration
// ---------------------------------------------------------------------------

namespace {

struct ProbeSet {
  BiradialGrid grid;
  std::vector<KernelField> targets;  // closed form at the fit times
  std::vector<double> times;
};

double calib_objective(const HTypeStructure& g, const ProbeSet& ps, double delta, double cE,
                       double cZ, cplx* cN_out) {
  CalibrationReport cal;
  cal.c_E = cE;
  cal.c_Z = cZ;
  cal.c_N = {1.0, 0.0};
  FiberParams p;
  p.eps = 0.0;
  p.mu_min = 0.03;
  p.nodes_per_cycle = 6.0;
  cplx num(0.0, 0.0);
  double den = 0.0, ref = 0.0;
  std::vector<KernelField> fields;
  for (std::size_t it = 0; it < ps.times.size(); ++it) {
    JointMultiplier f = schrodinger_multiplier(ps.times[it], delta);
    fields.push_back(fiber_kernel(g, f, ps.grid, p, cal));
    const auto& A = fields.back().values;
    const auto& B = ps.targets[it].values;
    for (std::size_t i = 0; i < A.size(); ++i) {
      num += std::conj(A[i]) * B[i];
      den += std::norm(A[i]);
      ref += std::norm(B[i]);
    }
  }
  cplx cN = (den > 0.0) ? num / den : cplx(1.0, 0.0);
  if (cN_out) *cN_out = cN;
  double err2 = 0.0;
  for (std::size_t it = 0; it < ps.times.size(); ++it) {
    const auto& A = fields[it].values;
    const auto& B = ps.targets[it].values;
    for (std::size_t i = 0; i < A.size(); ++i) err2 += std::norm(cN * A[i] - B[i]);
  }
  return std::sqrt(err2 / ref);
}

// deterministic golden-section minimization
template <class F>
double golden_min(F&& f, double a, double b, int iters) {
  const double gr = 0.6180339887498949;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

CalibrationReport calibrate_constants(const HTypeStructure& g, double delta) {
  ProbeSet ps;
  std::vector<double> rs = {0.3, 0.9, 1.7, 2.6, 3.4};
  std::vector<double> us = {0.25, 0.8, 1.7, 2.6, 3.3};
  ps.grid = eval_grid(g, rs, us);
  ps.times = {0.05, 0.1};
  for (double t : ps.times) ps.targets.push_back(schrodinger_closed_form(g, t, delta, ps.grid));

  double cE = two_pi, cZ = pi;
  for (int round = 0; round < 2; ++round) {
    double spanE = (round == 0) ? 0.10 * two_pi : 0.005 * two_pi;
    cE = golden_min([&](double x) { return calib_objective(g, ps, delta, x, cZ, nullptr); },
                    cE - spanE, cE + spanE, 22);
    double spanZ = (round == 0) ? 0.10 * pi : 0.005 * pi;
    cZ = golden_min([&](double x) { return calib_objective(g, ps, delta, cE, x, nullptr); },
                    cZ - spanZ, cZ + spanZ, 22);
  }
  CalibrationReport cal;
  cal.group = g.name;
  cal.c_E = cE;
  cal.c_Z = cZ;
  cal.fit_error = calib_objective(g, ps, delta, cE, cZ, &cal.c_N);

  // held-out validation at t = 0.2
  double t3 = 0.2;
  BiradialGrid vgrid = uniform_grid(g, 3.5, 3.5, 9, 9);
  KernelField B = schrodinger_closed_form(g, t3, delta, vgrid);
  FiberParams p;
  p.eps = 0.0;
  p.mu_min = 0.03;
  KernelField A = fiber_kernel(g, schrodinger_multiplier(t3, delta), vgrid, p, cal);
  double sup = field_sup(B), worst = 0.0;
  for (std::size_t i = 0; i < A.values.size(); ++i)
    worst = std::max(worst, std::abs(A.values[i] - B.values[i]) / sup);
  cal.match_error = worst;
  if (worst > 1e-4)
    throw error("calibrate_constants: held-out match error " + std::to_string(worst) +
                " exceeds 1e-4 (convention bug)");
  return cal;
}

const CalibrationReport& calibration_for(const HTypeStructure& g) {
  static std::map<std::string, CalibrationReport> cache;
  static std::mutex m;
  std::string key = g.name.empty() ? ("d1=" + std::to_string(g.d1) + ",d2=" + std::to_string(g.d2))
                                   : g.name;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  CalibrationReport cal = calibrate_constants(g);
  return cache.emplace(key, cal).first->second;
}

// ---------------------------------------------------------------------------
// wave synthesis of a dyadic piece
// ---------------------------------------------------------------------------

namespace {

std::mutex fftw_mutex2;

fftw_plan cached_plan(int n, int sign) {
  static std::map<std::pair<int, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(fftw_mutex2);
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

std::vector<cplx> dft(const std::vector<cplx>& in, int sign) {
  std::vector<cplx> out(in.size());
  fftw_plan plan = cached_plan(int(in.size()), sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

int next_pow2_sz(double x) {
  int n = 1;
  while (n < x && n < (1 << 27)) n <<= 1;
  return n;
}

}  // namespace

LineL1Result l1_norm_ufft(const HTypeStructure& g, const JointMultiplier& f, const FiberParams& p,
                          const LineL1Options& opt) {
  require(g.d2 == 1, "l1_norm_ufft: implemented for d2 = 1");
  const CalibrationReport& cal = calibration_for(g);
  require(f.mu_integrable || p.eps > 0.0, "l1_norm_ufft: oscillatory fiber needs Abel eps");
  require(f.lamL_band.hi > 0.0, "l1_norm_ufft: multiplier needs a finite lamL band");
  const double R_r = opt.R_r, U = opt.U;

  double rfreq = std::sqrt(std::max(4.0, f.lamL_band.hi));
  int n_r = std::max(64, std::min(opt.max_r_nodes, int(R_r * rfreq * 1.1 * opt.res_factor)));
  std::vector<double> rn, rw;
  gauss_panels(0.0, R_r, 8, (n_r + 7) / 8, rn, rw);
  double wd1 = sphere_area(g.d1);

  double mu_hi = f.lamL_band.hi / (cal.c_E * 0.5 * g.d1);
  if (f.lamU_max > 0.0) mu_hi = std::min(mu_hi, f.lamU_max / cal.c_U);
  if (p.eps > 0.0) mu_hi = std::min(mu_hi, 42.0 / p.eps);
  double mu_lo = std::max(p.mu_min, f.lamU_min > 0.0 ? 0.995 * f.lamU_min / cal.c_U : p.mu_min);
  require(mu_hi > mu_lo, "l1_norm_ufft: empty mu range");
  double dmu_osc = two_pi * mu_lo / (std::max(1.0, f.mu_freq_scale) * p.nodes_per_cycle);
  double dmu = std::min({1.0 / (2.0 * U + 12.0), dmu_osc, 0.25});
  dmu /= std::max(1.0, opt.res_factor);
  int i_lo = std::max(1, int(std::ceil(mu_lo / dmu)));
  int i_hi = int(std::floor(mu_hi / dmu));
  require(i_hi - i_lo < 8'000'000, "l1_norm_ufft: mu grid too large");

  // phase A: coefficient cache per mu bin
  const double alpha = 0.5 * g.d1 - 1.0;
  struct BinCoef {
    int k_lo = 0, k_hi = -1;
    std::size_t off = 0;
  };
  std::vector<BinCoef> bins(std::size_t(i_hi - i_lo + 1));
  std::vector<cplx> flat;
  for (int i = i_lo; i <= i_hi; ++i) {
    double mu = i * dmu;
    double lamU = cal.c_U * mu;
    BinCoef& b = bins[i - i_lo];
    if (f.lamU_max > 0.0 && lamU > f.lamU_max) continue;
    double step = cal.c_E * mu;
    int k_lo = std::max(0, int(std::ceil((f.lamL_band.lo / step - 0.5 * g.d1) / 2.0 - 1e-12)));
    int k_hi = int(std::floor((f.lamL_band.hi / step - 0.5 * g.d1) / 2.0 + 1e-12));
    if (k_hi < k_lo) continue;
    if (k_hi > p.k_cap) throw error("l1_norm_ufft: k_cap exceeded");
    auto row = f.prepare_row ? f.prepare_row(lamU) : nullptr;
    bool any = false;
    std::size_t off = flat.size();
    for (int k = k_lo; k <= k_hi; ++k) {
      double lamL = step * (2.0 * k + 0.5 * g.d1);
      cplx v = row ? row(lamL) : f.eval(lamL, lamU);
      flat.push_back(v);
      any = any || (v != cplx(0.0, 0.0));
    }
    if (!any) {
      flat.resize(off);
      continue;
    }
    b.k_lo = k_lo;
    b.k_hi = k_hi;
    b.off = off;
  }

  // phase B: blocks of radii; one FFT per radius to u space
  int n_fft = next_pow2_sz(2.2 * (mu_hi / dmu));
  double du = 1.0 / (n_fft * dmu);
  int m_keep = std::min(n_fft / 2, int(U / du) + 1);
  double total = 0.0, outer_u = 0.0, outer_r = 0.0;
  std::size_t block = std::max<std::size_t>(1, (std::size_t(48) << 20) / (sizeof(cplx) * n_fft));
  std::vector<std::vector<cplx>> rows;
  fftw_plan plan = cached_plan(n_fft, FFTW_BACKWARD);
  std::vector<cplx> line(n_fft);
  for (std::size_t r0 = 0; r0 < rn.size(); r0 += block) {
    std::size_t r1 = std::min(rn.size(), r0 + block);
    rows.assign(r1 - r0, std::vector<cplx>(n_fft, cplx(0.0, 0.0)));
    for (int i = i_lo; i <= i_hi; ++i) {
      const BinCoef& b = bins[i - i_lo];
      if (b.k_hi < b.k_lo) continue;
      double mu = i * dmu;
      double wmu = dmu * std::pow(mu, 0.5 * g.d1);
      if (p.eps > 0.0) wmu *= std::exp(-p.eps * mu);
      cplx wc = cal.c_N * wmu;
      int bin = i % n_fft;
      int binn = (n_fft - bin) % n_fft;
      for (std::size_t ir = r0; ir < r1; ++ir) {
        double z = cal.c_Z * mu * rn[ir] * rn[ir];
        cplx phi = wc * laguerre_weighted_sum(z, alpha, b.k_lo, b.k_hi, flat.data() + b.off);
        rows[ir - r0][bin] += phi;
        if (binn != bin) rows[ir - r0][binn] += phi;
      }
    }
    for (std::size_t ir = r0; ir < r1; ++ir) {
      fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(rows[ir - r0].data()),
                       reinterpret_cast<fftw_complex*>(line.data()));
      double lsum = 0.0, ledge = 0.0;
      for (int m = 0; m < m_keep; ++m) {
        double a = std::abs(line[m]);
        double w = (m == 0) ? du : 2.0 * du;  // even in u
        lsum += w * a;
        if (m >= int(0.9 * m_keep)) ledge += w * a;
      }
      double rfac = rw[ir] * wd1 * std::pow(rn[ir], g.d1 - 1);
      total += rfac * lsum;
      outer_u += rfac * ledge;
      if (rn[ir] >= 0.9 * R_r) outer_r += rfac * lsum;
    }
  }
  LineL1Result res;
  res.value = total;
  res.edge_fraction = (total > 0.0) ? std::max(outer_u, outer_r) / total : 0.0;
  return res;
}

JointMultiplier band_propagator(const CutoffSet& c, double tau) {
  JointMultiplier f;
  Fn1 band = c.chi_band;
  f.eval = [band, tau](double lamL, double) -> cplx {
    double l = std::sqrt(lamL);
    double a = band(l);
    if (a == 0.0) return {0.0, 0.0};
    return {a * std::cos(tau * l), a * std::sin(tau * l)};
  };
  f.lamL_band = {1.0 / 16.0, 16.0};
  f.mu_integrable = false;
  f.mu_freq_scale = 2.0 * std::abs(tau);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "bandprop:tau=%.17g", tau);
  f.id = buf;
  return f;
}

KernelField synthesize_via_wave(const HTypeStructure& g, const DyadicPiece& mj,
                                const CutoffSet& c, const BiradialGrid& out_grid,
                                const FiberParams& p, double tail_tol) {
  const int j = mj.j;
  // sample m^j over a 4x padded window for a denser tau grid
  double W = 4.0 * mj.rescaled.lambda_max;
  int n = 4 * suggested_samples(mj.rescaled, mj.rescaled.lambda_max);
  std::vector<cplx> samples(n);
  double dl = W / n;
  for (int i = 0; i < n; ++i) {
    double l = i * dl;
    samples[i] = (l <= mj.rescaled.lambda_max) ? mj.rescaled.eval(l) : cplx(0.0, 0.0);
  }
  std::vector<cplx> hat = dft(samples, FFTW_FORWARD);  // sum f_n e^{-2 pi i k n / N}
  double dtau = two_pi / W;
  // hat_k * dl / (2 pi) approximates the paper-normalized transform at tau_k
  double total = 0.0;
  std::vector<double> mag(n);
  for (int k = 0; k < n; ++k) {
    mag[k] = std::abs(hat[k]);
    total += mag[k];
  }
  if (total == 0.0) return zero_field(out_grid, "wave_synth:" + mj.rescaled.id);
  // keep the largest bins until the dropped tail is below tolerance
  std::vector<int> order(n);
  for (int k = 0; k < n; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return mag[a] > mag[b]; });
  double kept = 0.0;
  std::vector<int> keep;
  for (int k : order) {
    keep.push_back(k);
    kept += mag[k];
    if (total - kept <= tail_tol * total) break;
  }
  if (total - kept > tail_tol * total)
    throw error("synthesize_via_wave: tau-grid truncation insufficient");
  std::sort(keep.begin(), keep.end());

  // dilated evaluation nodes: 2^j r, 4^j rho
  std::vector<double> rs = out_grid.r_nodes, us = out_grid.rho_nodes;
  for (double& r : rs) r = std::ldexp(r, j);
  for (double& u : us) u = std::ldexp(u, 2 * j);
  BiradialGrid inner = eval_grid(g, rs, us);

  const CalibrationReport& cal = calibration_for(g);
  KernelField out = zero_field(out_grid, "wave_synth:" + mj.rescaled.id);
  double pw = std::ldexp(1.0, j * g.Q);  // 2^{jQ}
  for (int k : keep) {
    int ks = (k <= n / 2) ? k : k - n;
    double tau = dtau * ks;
    cplx weight = hat[k] * (dl / two_pi) * dtau * pw;
    KernelField term = fiber_kernel(g, band_propagator(c, tau), inner, p, cal);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += weight * term.values[i];
  }
  out.validate();
  fit_tail_descriptor(out);
  return out;
}

}  // namespace htlab
