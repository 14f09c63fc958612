#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "htlab/grid.hpp"

using namespace htlab;

namespace {

KernelField fill_field(const BiradialGrid& gr, const std::function<cplx(double, double)>& f) {
  KernelField k = zero_field(gr, "test");
  for (int ir = 0; ir < gr.nr(); ++ir)
    for (int iu = 0; iu < gr.nrho(); ++iu) k.at(ir, iu) = f(gr.r_nodes[ir], gr.rho_nodes[iu]);
  return k;
}

}  // namespace

TEST_CASE("gauss-legendre nodes integrate polynomials exactly") {
  std::vector<double> x, w;
  gauss_legendre(12, x, w);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * std::pow(x[i], 10);
  CHECK(s == doctest::Approx(2.0 / 11.0).epsilon(1e-13));
}

TEST_CASE("constant field mass equals the ball-product volume on H1") {
  HTypeStructure g = heisenberg(1);
  BiradialGrid gr = build_grid(g, 1.0, 1.0, 24, 24);
  KernelField one = fill_field(gr, [](double, double) { return cplx(1.0, 0.0); });
  // vol(B_2(1)) * vol(B_1(1)) = pi * 2
  CHECK(field_norm(one, 1).value == doctest::Approx(pi * 2.0).epsilon(1e-10));
  CHECK_THROWS(build_grid(g, 0.0, 1.0, 24, 24));
}

TEST_CASE("refinement leaves a smooth gaussian mass unchanged to 1e-10") {
  HTypeStructure g = heisenberg(1);
  auto gauss = [](double r, double u) { return cplx(std::exp(-r * r - u * u), 0.0); };
  BiradialGrid g1 = build_grid(g, 6.0, 6.0, 48, 48);
  BiradialGrid g2 = build_grid(g, 6.0, 6.0, 96, 96);
  double m1 = field_norm(fill_field(g1, gauss), 1).value;
  double m2 = field_norm(fill_field(g2, gauss), 1).value;
  CHECK(std::abs(m1 - m2) / m2 <= 1e-10);
}

TEST_CASE("field_norm scaling and error paths") {
  HTypeStructure g = heisenberg(1);
  BiradialGrid gr = build_grid(g, 2.0, 2.0, 24, 24);
  KernelField z = zero_field(gr);
  CHECK(field_norm(z, 1).value == 0.0);
  KernelField f = fill_field(gr, [](double r, double u) { return cplx(std::exp(-r - u), 0.0); });
  double n1 = field_norm(f, 1).value;
  for (auto& v : f.values) v *= 3.0;
  CHECK(field_norm(f, 1).value == doctest::Approx(3.0 * n1).epsilon(1e-14));
  f.at(0, 0) = cplx(std::nan(""), 0.0);
  CHECK_THROWS(field_norm(f, 1));
}

TEST_CASE("interpolation: exact at nodes, exact on bilinear data, O(h^2) on smooth data") {
  HTypeStructure g = heisenberg(1);
  BiradialGrid gr = build_grid(g, 3.0, 3.0, 36, 36);
  SUBCASE("node queries return stored values") {
    KernelField f =
        fill_field(gr, [](double r, double u) { return cplx(std::sin(r) + u, r * u); });
    CHECK(interpolate(f, gr.r_nodes[7], gr.rho_nodes[11]) == f.at(7, 11));
  }
  SUBCASE("linear-in-r field reproduced exactly") {
    KernelField f = fill_field(gr, [](double r, double u) { return cplx(2.0 * r + u, 0.0); });
    CHECK(interpolate(f, 1.234, 0.777).real() == doctest::Approx(2.0 * 1.234 + 0.777).epsilon(1e-13));
  }
  SUBCASE("refinement halves the off-node error by ~4x") {
    auto smooth = [](double r, double u) { return cplx(std::exp(-(r * r + u * u) / 2.0), 0.0); };
    double worst1 = 0.0, worst2 = 0.0;
    BiradialGrid fine = build_grid(g, 3.0, 3.0, 72, 72);
    KernelField f1 = fill_field(gr, smooth), f2 = fill_field(fine, smooth);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unif(0.3, 2.7);
    for (int t = 0; t < 200; ++t) {
      double r = unif(rng), u = unif(rng);
      worst1 = std::max(worst1, std::abs(interpolate(f1, r, u) - smooth(r, u)));
      worst2 = std::max(worst2, std::abs(interpolate(f2, r, u) - smooth(r, u)));
    }
    CHECK(worst2 < worst1 / 2.5);  // between 2.5x and the asymptotic 4x
  }
  SUBCASE("out-of-range queries throw") {
    KernelField f = fill_field(gr, [](double, double) { return cplx(1.0, 0.0); });
    CHECK_THROWS(interpolate(f, 3.5, 0.0));
    CHECK_THROWS(interpolate(f, 0.0, 3.5));
  }
}

TEST_CASE("biradial convolution: Young inequality and mass multiplicativity") {
  HTypeStructure g = heisenberg(1);
  BiradialGrid kgrid = build_grid(g, 8.0, 8.0, 216, 216);
  // a smooth positive kernel
  KernelField K = fill_field(kgrid, [](double r, double u) {
    return cplx(std::exp(-0.7 * (r * r + u * u)), 0.3 * std::exp(-r * r - 2.0 * u * u));
  });
  BiradialProfile a;
  a.support_radius = 1.0;
  a.eval = [](double r, double u) {
    double t = r + u;
    return t < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
  };
  BiradialGrid out = build_grid(g, 4.5, 4.5, 48, 48);
  KernelField conv = biradial_convolve(g, K, a, out);

  // L1(a) via its own quadrature
  BiradialGrid agrid = build_grid(g, 1.0, 1.0, 32, 32);
  KernelField af = fill_field(agrid, [&](double r, double u) { return cplx(a.eval(r, u), 0.0); });
  double a1 = field_norm(af, 1).value;
  double K1 = field_norm(K, 1).value;
  double c1 = field_norm(conv, 1).value;
  CHECK(c1 <= 1.01 * a1 * K1);

  // mass multiplicativity within 1e-6 relative
  cplx ma = field_integral(af), mK = field_integral(K), mc = field_integral(conv);
  CHECK(std::abs(mc - ma * mK) / std::abs(ma * mK) <= 1e-6);

  // atom support exceeding the kernel domain is reported
  BiradialGrid big_out = build_grid(g, 8.0, 8.0, 24, 24);
  CHECK_THROWS(biradial_convolve(g, K, a, big_out));
}

TEST_CASE("narrow near-delta atom convolves to approximately the kernel") {
  HTypeStructure g = heisenberg(1);
  BiradialGrid kgrid = build_grid(g, 6.0, 6.0, 96, 96);
  KernelField K = fill_field(kgrid, [](double r, double u) {
    return cplx(std::exp(-(r * r + u * u)), 0.0);
  });
  auto run_with_radius = [&](double eps) {
    BiradialProfile a;
    a.support_radius = eps;
    a.eval = [eps](double r, double u) {
      double t = (r + u) / eps;
      return t < 1.0 ? std::exp(-1.0 / (1.0 - t * t)) : 0.0;
    };
    // normalize to unit mass
    BiradialGrid agrid = build_grid(g, eps, eps, 24, 24);
    KernelField af = fill_field(agrid, [&](double r, double u) { return cplx(a.eval(r, u), 0.0); });
    double mass = field_integral(af).real();
    auto base = a.eval;
    a.eval = [base, mass](double r, double u) { return base(r, u) / mass; };
    BiradialGrid out = build_grid(g, 3.0, 3.0, 48, 48);
    KernelField conv = biradial_convolve(g, K, a, out);
    double diff = 0.0;
    for (int ir = 0; ir < out.nr(); ++ir)
      for (int iu = 0; iu < out.nrho(); ++iu)
        diff = std::max(diff, std::abs(conv.at(ir, iu) -
                                       interpolate(K, out.r_nodes[ir], out.rho_nodes[iu])));
    return diff;
  };
  double d1 = run_with_radius(0.5);
  double d2 = run_with_radius(0.25);
  CHECK(d2 < d1);      // identity limit under refinement of the atom
  CHECK(d2 < 0.05);
}

TEST_CASE("kernel field binary round-trip and csv export") {
  HTypeStructure g = heisenberg(1);
  BiradialGrid gr = build_grid(g, 2.0, 3.0, 20, 28);
  KernelField f = fill_field(gr, [](double r, double u) { return cplx(r - u, r * u); });
  f.meta = "roundtrip-test";
  f.tail_power = 3.5;
  f.tail_coef = 0.25;
  std::string path = "test_field.bin";
  save_field(f, path, "heisenberg-1");
  std::string gid;
  KernelField f2 = load_field(path, &gid);
  CHECK(gid == "heisenberg-1");
  CHECK(f2.meta == f.meta);
  CHECK(f2.grid.nr() == f.grid.nr());
  CHECK(f2.tail_power == f.tail_power);
  bool same = true;
  for (std::size_t i = 0; i < f.values.size(); ++i) same = same && (f.values[i] == f2.values[i]);
  CHECK(same);
  export_field_csv(f, "test_field.csv");
  std::remove(path.c_str());
  std::remove("test_field.csv");
}
