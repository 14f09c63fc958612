#include "htlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace htlab {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  require(n >= 1, "gauss_legendre: n >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Tricomi initial guess, then Newton on P_n
    double x = std::cos(pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 0; k < n; ++k) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k + 1.0) * x * p1 - k * p2) / (k + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

void gauss_panels(double a, double b, int n_per_panel, int panels,
                  std::vector<double>& nodes, std::vector<double>& weights) {
  require(b > a && n_per_panel >= 1 && panels >= 1, "gauss_panels: bad arguments");
  std::vector<double> gx, gw;
  gauss_legendre(n_per_panel, gx, gw);
  nodes.clear();
  weights.clear();
  nodes.reserve(std::size_t(n_per_panel) * panels);
  weights.reserve(std::size_t(n_per_panel) * panels);
  double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * h;
    for (int i = 0; i < n_per_panel; ++i) {
      nodes.push_back(lo + 0.5 * h * (gx[i] + 1.0));
      weights.push_back(0.5 * h * gw[i]);
    }
  }
}

std::string BiradialGrid::spec_string() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "grid:d1=%d,d2=%d,Rx=%.17g,Ru=%.17g,nr=%d,nrho=%d", d1, d2, R_x,
                R_u, nr(), nrho());
  return buf;
}

BiradialGrid build_grid(const HTypeStructure& g, double R_x, double R_u, int n_r, int n_rho) {
  require(R_x > 0 && R_u > 0, "build_grid: extents must be positive");
  require(n_r >= 2 && n_rho >= 2, "build_grid: node counts too small");
  BiradialGrid gr;
  gr.d1 = g.d1;
  gr.d2 = g.d2;
  gr.R_x = R_x;
  gr.R_u = R_u;
  // composite panels of order 12 keep the radial power exact and resolve
  // oscillatory kernels once enough panels are requested
  int per = 12;
  int pr = std::max(1, (n_r + per - 1) / per);
  int prho = std::max(1, (n_rho + per - 1) / per);
  gauss_panels(0.0, R_x, per, pr, gr.r_nodes, gr.r_plain_w);
  gauss_panels(0.0, R_u, per, prho, gr.rho_nodes, gr.rho_plain_w);
  double wd1 = sphere_area(g.d1), wd2 = sphere_area(g.d2);
  gr.r_weights.resize(gr.r_nodes.size());
  for (std::size_t i = 0; i < gr.r_nodes.size(); ++i)
    gr.r_weights[i] = gr.r_plain_w[i] * wd1 * std::pow(gr.r_nodes[i], g.d1 - 1);
  gr.rho_weights.resize(gr.rho_nodes.size());
  for (std::size_t i = 0; i < gr.rho_nodes.size(); ++i)
    gr.rho_weights[i] = gr.rho_plain_w[i] * wd2 * std::pow(gr.rho_nodes[i], g.d2 - 1);
  return gr;
}

namespace {

void fold_measure(BiradialGrid& gr) {
  double wd1 = sphere_area(gr.d1), wd2 = sphere_area(gr.d2);
  gr.r_weights.resize(gr.r_nodes.size());
  for (std::size_t i = 0; i < gr.r_nodes.size(); ++i)
    gr.r_weights[i] = gr.r_plain_w[i] * wd1 * std::pow(gr.r_nodes[i], gr.d1 - 1);
  gr.rho_weights.resize(gr.rho_nodes.size());
  for (std::size_t i = 0; i < gr.rho_nodes.size(); ++i)
    gr.rho_weights[i] = gr.rho_plain_w[i] * wd2 * std::pow(gr.rho_nodes[i], gr.d2 - 1);
}

std::vector<double> trapezoid_weights(const std::vector<double>& nodes) {
  std::size_t n = nodes.size();
  std::vector<double> w(n, 0.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i) {
    double lo = (i == 0) ? nodes[0] : 0.5 * (nodes[i - 1] + nodes[i]);
    double hi = (i + 1 == n) ? nodes[n - 1] : 0.5 * (nodes[i] + nodes[i + 1]);
    w[i] = hi - lo;
  }
  return w;
}

}  // namespace

BiradialGrid uniform_grid(const HTypeStructure& g, double R_x, double R_u, int n_r, int n_rho) {
  require(R_x > 0 && R_u > 0 && n_r >= 2 && n_rho >= 2, "uniform_grid: bad arguments");
  BiradialGrid gr;
  gr.d1 = g.d1;
  gr.d2 = g.d2;
  gr.R_x = R_x;
  gr.R_u = R_u;
  gr.r_nodes = linspace(0.0, R_x, n_r);
  gr.rho_nodes = linspace(0.0, R_u, n_rho);
  gr.r_plain_w = trapezoid_weights(gr.r_nodes);
  gr.rho_plain_w = trapezoid_weights(gr.rho_nodes);
  fold_measure(gr);
  return gr;
}

BiradialGrid eval_grid(const HTypeStructure& g, std::vector<double> r_nodes,
                       std::vector<double> rho_nodes) {
  require(r_nodes.size() >= 2 && rho_nodes.size() >= 2, "eval_grid: need >= 2 nodes per axis");
  BiradialGrid gr;
  gr.d1 = g.d1;
  gr.d2 = g.d2;
  gr.R_x = r_nodes.back();
  gr.R_u = rho_nodes.back();
  gr.r_nodes = std::move(r_nodes);
  gr.rho_nodes = std::move(rho_nodes);
  gr.r_plain_w = trapezoid_weights(gr.r_nodes);
  gr.rho_plain_w = trapezoid_weights(gr.rho_nodes);
  fold_measure(gr);
  return gr;
}

void KernelField::validate() const {
  require(values.size() == std::size_t(grid.nr()) * grid.nrho(),
          "KernelField: value array shape mismatch");
  for (const cplx& v : values)
    require(std::isfinite(v.real()) && std::isfinite(v.imag()), "KernelField: non-finite entry");
}

KernelField zero_field(const BiradialGrid& grid, const std::string& meta) {
  KernelField f;
  f.grid = grid;
  f.values.assign(std::size_t(grid.nr()) * grid.nrho(), cplx(0.0, 0.0));
  f.meta = meta;
  return f;
}

NormResult field_norm(const KernelField& f, int p) {
  require(p == 1 || p == 2, "field_norm: p must be 1 or 2");
  const BiradialGrid& gr = f.grid;
  std::vector<double> row(gr.nr());
  std::vector<double> col(gr.nrho());
  for (int ir = 0; ir < gr.nr(); ++ir) {
    for (int iu = 0; iu < gr.nrho(); ++iu) {
      double a = std::abs(f.at(ir, iu));
      require(std::isfinite(a), "field_norm: NaN in field");
      col[iu] = gr.rho_weights[iu] * (p == 1 ? a : a * a);
    }
    row[ir] = gr.r_weights[ir] * pairwise_sum(col);
  }
  NormResult res;
  double s = pairwise_sum(row);
  res.value = (p == 1) ? s : std::sqrt(s);
  // tail estimate from the fitted decay model: integrate coef * w^{-power}
  // over ||.||_E > min(R_x, R_u) against the d-dimensional volume growth
  if (f.tail_coef > 0.0 && f.tail_power > 0.0) {
    double R = std::min(gr.R_x, gr.R_u);
    int d = gr.d1 + gr.d2;
    double q = (p == 1 ? 1.0 : 2.0) * f.tail_power - d;
    if (q > 0.0) {
      double amp = (p == 1) ? f.tail_coef : f.tail_coef * f.tail_coef;
      res.tail_estimate = amp * sphere_area(d) * std::pow(R, -q) / q;
      if (p == 2) res.tail_estimate = std::sqrt(res.tail_estimate);
    } else {
      res.tail_estimate = -1.0;  // divergent model: flag, caller must widen
    }
  }
  return res;
}

double field_mass_abs(const KernelField& f) { return field_norm(f, 1).value; }

cplx field_integral(const KernelField& f) {
  const BiradialGrid& gr = f.grid;
  std::vector<cplx> row(gr.nr());
  std::vector<cplx> col(gr.nrho());
  for (int ir = 0; ir < gr.nr(); ++ir) {
    for (int iu = 0; iu < gr.nrho(); ++iu) col[iu] = gr.rho_weights[iu] * f.at(ir, iu);
    row[ir] = gr.r_weights[ir] * pairwise_sum(col);
  }
  return pairwise_sum(row);
}

double field_sup(const KernelField& f) {
  double m = 0.0;
  for (const cplx& v : f.values) m = std::max(m, std::abs(v));
  return m;
}

void fit_tail_descriptor(KernelField& f) {
  // least squares on log|K| vs log(1+w) over the outer 25% shell
  const BiradialGrid& gr = f.grid;
  double wmax = gr.R_x + gr.R_u;
  double wcut = 0.75 * wmax;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int ir = 0; ir < gr.nr(); ++ir)
    for (int iu = 0; iu < gr.nrho(); ++iu) {
      double w = gr.r_nodes[ir] + gr.rho_nodes[iu];
      double a = std::abs(f.at(ir, iu));
      if (w < wcut || a <= 0.0) continue;
      double lx = std::log1p(w), ly = std::log(a);
      sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
      ++n;
    }
  if (n < 8) { f.tail_power = 0.0; f.tail_coef = 0.0; return; }
  double det = n * sxx - sx * sx;
  if (det <= 0.0) { f.tail_power = 0.0; f.tail_coef = 0.0; return; }
  double slope = (n * sxy - sx * sy) / det;
  double inter = (sy - slope * sx) / n;
  f.tail_power = -slope;
  f.tail_coef = std::exp(inter);
}

namespace {

// index of the cell [nodes[i], nodes[i+1]] containing t (nodes ascending)
int cell_index(const std::vector<double>& nodes, double t) {
  auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
  int i = int(it - nodes.begin()) - 1;
  return std::clamp(i, 0, int(nodes.size()) - 2);
}

}  // namespace

cplx interpolate(const KernelField& f, double r, double rho) {
  const BiradialGrid& gr = f.grid;
  double ar = std::abs(r), au = std::abs(rho);
  if (ar > gr.R_x || au > gr.R_u)
    throw error("interpolate: query outside truncated domain (r=" + std::to_string(ar) +
                ", rho=" + std::to_string(au) + ")");
  // Even extension below the first node: biradial fields are even in each
  // radial variable, so the interpolant is flat on [0, n0].
  auto axis_weights = [](const std::vector<double>& nodes, double t, int& ia, int& ib, double& wb) {
    if (t <= nodes.front()) {
      ia = ib = 0;
      wb = 0.0;
      return;
    }
    int i = cell_index(nodes, t);
    ia = i;
    ib = i + 1;
    wb = (t - nodes[i]) / (nodes[i + 1] - nodes[i]);
  };

  int ir0, ir1, iu0, iu1;
  double wr, wu;
  axis_weights(gr.r_nodes, ar, ir0, ir1, wr);
  axis_weights(gr.rho_nodes, au, iu0, iu1, wu);
  cplx v00 = f.at(ir0, iu0), v01 = f.at(ir0, iu1), v10 = f.at(ir1, iu0), v11 = f.at(ir1, iu1);
  return (1.0 - wr) * ((1.0 - wu) * v00 + wu * v01) + wr * ((1.0 - wu) * v10 + wu * v11);
}

namespace {

// 4-point Lagrange interpolation along one axis (order reduced at the edges).
// Biradial fields are even in each radial variable, so queries below the
// second node use the mirrored stencil {-n1, -n0, n0, n1}; this keeps the
// interpolant even and smooth through zero.
int cubic_stencil(const std::vector<double>& nodes, double t, double w[4]) {
  int nc = int(nodes.size());
  if (t < nodes[1]) {
    double m[4] = {-nodes[1], -nodes[0], nodes[0], nodes[1]};
    double lw[4];
    for (int a2 = 0; a2 < 4; ++a2) {
      double num = 1.0, den = 1.0;
      for (int b = 0; b < 4; ++b) {
        if (a2 == b) continue;
        num *= (t - m[b]);
        den *= (m[a2] - m[b]);
      }
      lw[a2] = num / den;
    }
    w[0] = lw[1] + lw[2];
    w[1] = lw[0] + lw[3];
    w[2] = 0.0;
    w[3] = 0.0;
    return 0;
  }
  int i = cell_index(nodes, t);
  int s = std::clamp(i - 1, 0, nc - 4);
  for (int a2 = 0; a2 < 4; ++a2) {
    double num = 1.0, den = 1.0;
    for (int b = 0; b < 4; ++b) {
      if (a2 == b) continue;
      num *= (t - nodes[s + b]);
      den *= (nodes[s + a2] - nodes[s + b]);
    }
    w[a2] = num / den;
  }
  return s;
}

cplx interpolate_cubic(const KernelField& f, double r, double rho) {
  const BiradialGrid& gr = f.grid;
  double ar = std::abs(r), au = std::abs(rho);
  if (ar > gr.R_x || au > gr.R_u)
    throw error("interpolate: query outside truncated domain (r=" + std::to_string(ar) +
                ", rho=" + std::to_string(au) + ")");
  if (gr.nr() < 4 || gr.nrho() < 4) return interpolate(f, r, rho);
  double wr[4], wu[4];
  int sr = cubic_stencil(gr.r_nodes, ar, wr);
  int su = cubic_stencil(gr.rho_nodes, au, wu);
  cplx acc(0.0, 0.0);
  for (int a2 = 0; a2 < 4; ++a2) {
    cplx rowv(0.0, 0.0);
    for (int b = 0; b < 4; ++b) rowv += wu[b] * f.at(sr + a2, su + b);
    acc += wr[a2] * rowv;
  }
  return acc;
}

}  // namespace

KernelField biradial_convolve(const HTypeStructure& g, const KernelField& K,
                              const BiradialProfile& a, const BiradialGrid& out_grid,
                              const ConvolveOptions& opt) {
  require(g.d2 == 1, "biradial_convolve: implemented for d2 = 1 groups");
  require(g.d1 == K.grid.d1 && g.d2 == K.grid.d2, "biradial_convolve: kernel grid group mismatch");
  double ra = a.support_radius;
  require(ra > 0, "biradial_convolve: empty atom support");
  // reachability check: the kernel argument stays inside K's domain
  double need_r = out_grid.R_x + ra;
  double need_u = out_grid.R_u + ra + 0.5 * out_grid.R_x * ra;
  if (need_r > K.grid.R_x + 1e-12 || need_u > K.grid.R_u + 1e-12)
    throw error("biradial_convolve: atom support exceeds kernel domain after shift (need r<=" +
                std::to_string(need_r) + ", u<=" + std::to_string(need_u) + ")");

  // quadrature over the atom ball: y in R^{d1} via (|y|, y1-dir, y2-dir), v in R
  std::vector<double> ry_n, ry_w, v_n, v_w;
  gauss_panels(0.0, ra, 8, std::max(1, opt.n_ry / 8), ry_n, ry_w);
  gauss_panels(-ra, ra, 8, std::max(1, opt.n_v / 8), v_n, v_w);

  const bool planar = (g.d1 == 2);
  // angular rule: d1 = 2 -> uniform angle; d1 >= 4 -> (c1, c2) disk rule with
  // weight (1 - c1^2 - c2^2)^{(d1-4)/2}
  std::vector<double> ang_n, ang_w;   // planar angles
  std::vector<double> c_n, c_w;       // disk coordinates (shared axis rule)
  if (planar) {
    int na = std::max(8, opt.n_ang);
    for (int i = 0; i < na; ++i) {
      ang_n.push_back(two_pi * (i + 0.5) / na);
      ang_w.push_back(two_pi / na);
    }
  } else {
    gauss_panels(-1.0, 1.0, 8, std::max(1, opt.n_ang / 8), c_n, c_w);
  }

  KernelField out = zero_field(out_grid, "convolve(" + K.meta + ")");
  const double half = 0.5;
  for (int ir = 0; ir < out_grid.nr(); ++ir) {
    double rx = out_grid.r_nodes[ir];
    for (int iu = 0; iu < out_grid.nrho(); ++iu) {
      double uu = out_grid.rho_nodes[iu];
      std::vector<cplx> acc;
      acc.reserve(ry_n.size());
      for (std::size_t iy = 0; iy < ry_n.size(); ++iy) {
        double ry = ry_n[iy];
        double wy = ry_w[iy] * std::pow(ry, g.d1 - 1);
        cplx inner(0.0, 0.0);
        if (planar) {
          for (std::size_t ia2 = 0; ia2 < ang_n.size(); ++ia2) {
            double cphi = std::cos(ang_n[ia2]), sphi = std::sin(ang_n[ia2]);
            double rr = std::sqrt(std::max(0.0, rx * rx - 2.0 * rx * ry * cphi + ry * ry));
            double jx = -rx * ry * sphi;  // <J x, y> for x = (rx, 0)
            cplx vinner(0.0, 0.0);
            for (std::size_t iv = 0; iv < v_n.size(); ++iv) {
              double av = a.eval(ry, std::abs(v_n[iv]));
              if (av == 0.0) continue;
              double up = uu - v_n[iv] + half * jx;
              vinner += v_w[iv] * av * interpolate_cubic(K, rr, up);
            }
            inner += ang_w[ia2] * vinner;
          }
        } else {
          // y = ry * (c1, c2, rest); only y1 (through |x-y|) and y2 (through
          // <Jx, y> = -rx*y2) matter; integrate the rest out via the disk
          // density omega_{d1-3} (1 - c1^2 - c2^2)^{(d1-4)/2}
          double wrest = sphere_area(g.d1 - 2);
          double ex = 0.5 * (g.d1 - 4);
          for (std::size_t i1 = 0; i1 < c_n.size(); ++i1)
            for (std::size_t i2 = 0; i2 < c_n.size(); ++i2) {
              double c1 = c_n[i1], c2 = c_n[i2];
              double rad2 = 1.0 - c1 * c1 - c2 * c2;
              if (rad2 <= 0.0) continue;
              double dens = wrest * std::pow(rad2, ex) * c_w[i1] * c_w[i2];
              double rr = std::sqrt(std::max(0.0, rx * rx - 2.0 * rx * ry * c1 + ry * ry));
              double jx = -rx * ry * c2;
              cplx vinner(0.0, 0.0);
              for (std::size_t iv = 0; iv < v_n.size(); ++iv) {
                double av = a.eval(ry, std::abs(v_n[iv]));
                if (av == 0.0) continue;
                double up = uu - v_n[iv] + half * jx;
                vinner += v_w[iv] * av * interpolate_cubic(K, rr, up);
              }
              inner += dens * vinner;
            }
        }
        acc.push_back(wy * inner);
      }
      out.at(ir, iu) = pairwise_sum(acc);
    }
  }
  return out;
}

void save_field(const KernelField& f, const std::string& path, const std::string& group_id) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), "save_field: cannot open " + path);
  const char magic[4] = {'H', 'T', 'L', 'B'};
  out.write(magic, 4);
  std::uint32_t version = 1, endian = 0x01020304u;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&endian), 4);
  auto wstr = [&out](const std::string& s) {
    std::uint32_t n = std::uint32_t(s.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(s.data(), n);
  };
  wstr(group_id);
  wstr(f.meta);
  const BiradialGrid& gr = f.grid;
  std::int32_t ints[4] = {gr.d1, gr.d2, gr.nr(), gr.nrho()};
  out.write(reinterpret_cast<const char*>(ints), sizeof(ints));
  double doubles[4] = {gr.R_x, gr.R_u, f.tail_power, f.tail_coef};
  out.write(reinterpret_cast<const char*>(doubles), sizeof(doubles));
  auto wvec = [&out](const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
  };
  wvec(gr.r_nodes);
  wvec(gr.r_weights);
  wvec(gr.r_plain_w);
  wvec(gr.rho_nodes);
  wvec(gr.rho_weights);
  wvec(gr.rho_plain_w);
  out.write(reinterpret_cast<const char*>(f.values.data()),
            std::streamsize(f.values.size() * sizeof(cplx)));
  require(bool(out), "save_field: write failed for " + path);
}

KernelField load_field(const std::string& path, std::string* group_id) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), "load_field: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  require(in && std::memcmp(magic, "HTLB", 4) == 0, "load_field: bad magic in " + path);
  std::uint32_t version = 0, endian = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&endian), 4);
  require(version == 1, "load_field: unsupported version");
  require(endian == 0x01020304u, "load_field: endianness mismatch");
  auto rstr = [&in]() {
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    std::string s(n, '\0');
    in.read(s.data(), n);
    return s;
  };
  std::string gid = rstr();
  if (group_id) *group_id = gid;
  KernelField f;
  f.meta = rstr();
  std::int32_t ints[4];
  in.read(reinterpret_cast<char*>(ints), sizeof(ints));
  double doubles[4];
  in.read(reinterpret_cast<char*>(doubles), sizeof(doubles));
  BiradialGrid& gr = f.grid;
  gr.d1 = ints[0];
  gr.d2 = ints[1];
  int nr = ints[2], nrho = ints[3];
  gr.R_x = doubles[0];
  gr.R_u = doubles[1];
  f.tail_power = doubles[2];
  f.tail_coef = doubles[3];
  auto rvec = [&in](std::vector<double>& v, int n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(std::size_t(n) * sizeof(double)));
  };
  rvec(gr.r_nodes, nr);
  rvec(gr.r_weights, nr);
  rvec(gr.r_plain_w, nr);
  rvec(gr.rho_nodes, nrho);
  rvec(gr.rho_weights, nrho);
  rvec(gr.rho_plain_w, nrho);
  f.values.resize(std::size_t(nr) * nrho);
  in.read(reinterpret_cast<char*>(f.values.data()),
          std::streamsize(f.values.size() * sizeof(cplx)));
  require(bool(in), "load_field: truncated file " + path);
  f.validate();
  return f;
}

void export_field_csv(const KernelField& f, const std::string& path) {
  std::ofstream out(path);
  require(bool(out), "export_field_csv: cannot open " + path);
  out << "r,rho,re,im\n";
  char buf[128];
  for (int ir = 0; ir < f.grid.nr(); ++ir)
    for (int iu = 0; iu < f.grid.nrho(); ++iu) {
      cplx v = f.at(ir, iu);
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", f.grid.r_nodes[ir],
                    f.grid.rho_nodes[iu], v.real(), v.imag());
      out << buf;
    }
}

}  // namespace htlab
