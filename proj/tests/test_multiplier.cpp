#include <doctest.h>

#include <cmath>

#include "htlab/multiplier.hpp"

using namespace htlab;

namespace {
const CutoffSet cuts = make_partition("standard");
}

TEST_CASE("oscillating multiplier formula values") {
  MultiplierFn m = osc_multiplier(2.0, 3.0, cuts);
  SUBCASE("m_{2,3}(2) = e^{4i}/8") {
    cplx v = m(2.0);
    CHECK(v.real() == doctest::Approx(std::cos(4.0) / 8.0).epsilon(1e-14));
    CHECK(v.imag() == doctest::Approx(std::sin(4.0) / 8.0).epsilon(1e-14));
  }
  SUBCASE("modulus is lambda^{-theta beta/2} past the cutoff") {
    for (double l : {2.0, 3.7, 11.0}) CHECK(std::abs(m(l)) == doctest::Approx(std::pow(l, -3.0)));
  }
  SUBCASE("theta = 0 collapses to a constant times chi") {
    MultiplierFn m0 = osc_multiplier(0.0, 5.0, cuts);
    for (double l : {1.5, 2.5, 9.0}) {
      cplx expect = cplx(std::cos(1.0), std::sin(1.0)) * cuts.chi(l);
      CHECK(std::abs(m0(l) - expect) <= 1e-14);
    }
  }
  CHECK_THROWS(osc_multiplier(-1.0, 1.0, cuts));
}

TEST_CASE("sobolev norm: s = 0 is L2, homogeneity, gaussian oracle") {
  SUBCASE("s = 0 equals the L2 norm of the samples") {
    MultiplierFn g;
    g.eval = [](double l) -> cplx { return std::exp(-(l - 8.0) * (l - 8.0)); };
    g.lambda_max = 16.0;
    g.freq_hint = 4.0;
    double s0 = sobolev_norm(g, 0.0);
    // analytic L2: || e^{-(l-8)^2} ||_2 = (pi/2)^{1/4}
    CHECK(s0 == doctest::Approx(std::pow(pi / 2.0, 0.25)).epsilon(1e-8));
  }
  SUBCASE("homogeneity in the symbol") {
    MultiplierFn g;
    g.eval = [](double l) -> cplx { return std::exp(-(l - 8.0) * (l - 8.0)) * cplx(0.0, 1.0); };
    g.lambda_max = 16.0;
    g.freq_hint = 4.0;
    double n1 = sobolev_norm(g, 1.25);
    auto base = g.eval;
    g.eval = [base](double l) { return 7.0 * base(l); };
    CHECK(sobolev_norm(g, 1.25) == doctest::Approx(7.0 * n1).epsilon(1e-12));
  }
  SUBCASE("recentered gaussian matches the closed-form transform + quadrature") {
    // f(l) = exp(-(l-c)^2): |fhat(xi)|^2 = pi e^{-xi^2/2}
    // ||f||_{L2_s}^2 = (1/2pi) int (1+xi^2)^s pi e^{-xi^2/2} dxi
    for (double s : {0.0, 1.0, 2.0, 3.5}) {
      MultiplierFn g;
      g.eval = [](double l) -> cplx { return std::exp(-(l - 16.0) * (l - 16.0)); };
      g.lambda_max = 32.0;
      g.freq_hint = 8.0;
      double lhs = sobolev_norm(g, s);
      // independent high-resolution quadrature of the xi integral
      double acc = 0.0;
      int N = 400000;
      double hi = 14.0, dxi = 2.0 * hi / N;
      for (int i = 0; i < N; ++i) {
        double xi = -hi + (i + 0.5) * dxi;
        acc += std::pow(1.0 + xi * xi, s) * pi * std::exp(-xi * xi / 2.0) * dxi;
      }
      double rhs = std::sqrt(acc / (2.0 * pi));
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
    }
  }
  SUBCASE("monotone in s") {
    MultiplierFn g;
    g.eval = [](double l) -> cplx { return std::exp(-(l - 8.0) * (l - 8.0)); };
    g.lambda_max = 16.0;
    g.freq_hint = 4.0;
    double prev = 0.0;
    for (double s : {0.0, 0.5, 1.0, 2.0, 3.0}) {
      double v = sobolev_norm(g, s);
      CHECK(v >= prev);
      prev = v;
    }
  }
  SUBCASE("support leakage trips the aliasing guard") {
    MultiplierFn g;
    g.eval = [](double l) -> cplx { return std::exp(-0.01 * l * l); };  // alive at the window edge
    g.lambda_max = 8.0;
    g.freq_hint = 2.0;
    CHECK_THROWS_WITH_AS(sobolev_norm(g, 1.0), doctest::Contains("aliasing"), error);
  }
}

TEST_CASE("dyadic decomposition reconstructs and localizes") {
  MultiplierFn m = osc_multiplier(2.0, 3.0, cuts);
  SUBCASE("pieces vanish when chi kills the band") {
    auto pieces = dyadic_decompose(m, cuts, -3, 4);
    for (const auto& p : pieces) {
      if (p.j >= -1) continue;  // 2^{j+1} <= 1: the rescaled piece must vanish
      for (double l : {0.6, 1.0, 1.7}) CHECK(std::abs(p.rescaled.eval(l)) == 0.0);
    }
  }
  SUBCASE("sum of pieces reconstructs m on the covered range") {
    auto pieces = dyadic_decompose(m, cuts, -2, 8);
    for (double l : {1.2, 2.0, 7.7, 100.0, 250.0}) {
      cplx sum(0, 0);
      for (const auto& p : pieces) sum += p.piece.eval(l);
      CHECK(std::abs(sum - m.eval(l)) <= 1e-12);
    }
  }
  SUBCASE("band-limited symbol has only near-zero j pieces") {
    MultiplierFn band;
    band.eval = [](double l) -> cplx { return cuts.phi(l); };
    band.lambda_max = 4.0;
    band.freq_hint = 4.0;
    auto pieces = dyadic_decompose(band, cuts, -4, 4);
    for (const auto& p : pieces) {
      bool active = false;
      for (double l : {0.3, 0.6, 1.0, 1.9, 3.3}) active = active || std::abs(p.piece.eval(l)) > 0;
      if (p.j < -1 || p.j > 1) CHECK_FALSE(active);
    }
  }
  SUBCASE("m_j(l) = m^j(2^{-j} l) consistency") {
    auto pieces = dyadic_decompose(m, cuts, 3, 3);
    for (double l : {6.0, 8.0, 14.0})
      CHECK(std::abs(pieces[0].piece.eval(l) - pieces[0].rescaled.eval(std::ldexp(l, -3))) <=
            1e-14);
  }
}

TEST_CASE("dyadic sobolev growth bound for (2,3,2)") {
  MultiplierFn m = osc_multiplier(2.0, 3.0, cuts);
  auto rows = dyadic_norm_table(m, cuts, 2.0, 1, 10);
  double rmin = 1e300, rmax = 0.0;
  for (const auto& row : rows) {
    rmin = std::min(rmin, row.ratio);
    rmax = std::max(rmax, row.ratio);
  }
  CHECK(rmax / rmin <= 4.0);
}

TEST_CASE("class constants for the oscillating family") {
  MultiplierFn m = osc_multiplier(2.0, 3.0, cuts);
  SUBCASE("zero symbol gives zero constants") {
    MultiplierFn z;
    z.eval = [](double) -> cplx { return {0.0, 0.0}; };
    z.lambda_max = 8.0;
    z.freq_hint = 1.0;
    ClassReport rep = class_constants(z, 2.0, 3.0, 2.0, cuts, 64.0);
    CHECK(rep.C_m == 0.0);
  }
  SUBCASE("matching (theta, beta) is stable in t_max") {
    ClassReport r64 = class_constants(m, 2.0, 3.0, 2.0, cuts, 64.0);
    ClassReport r256 = class_constants(m, 2.0, 3.0, 2.0, cuts, 256.0);
    CHECK(r64.stabilized);
    CHECK(r256.stabilized);
    CHECK(r256.C_m <= 1.10 * r64.C_m);
    CHECK(r256.C_m >= 0.90 * r64.C_m);
  }
  SUBCASE("overstated beta' > beta diverges and is flagged") {
    ClassReport rep = class_constants(m, 2.0, 4.5, 2.0, cuts, 256.0);
    CHECK_FALSE(rep.stabilized);
  }
  SUBCASE("two cutoff choices agree up to a bounded constant") {
    CutoffSet alt = make_partition("alt");
    ClassReport a = class_constants(m, 2.0, 3.0, 2.0, cuts, 64.0);
    ClassReport b = class_constants(m, 2.0, 3.0, 2.0, alt, 64.0);
    double ratio = a.C_m / b.C_m;
    CHECK(ratio > 0.1);
    CHECK(ratio < 10.0);
  }
}

TEST_CASE("high/low split is exact and localized") {
  MultiplierFn m = osc_multiplier(2.0, 3.0, cuts);
  auto [small, large] = high_low_split(m, cuts);
  SUBCASE("sum reconstructs pointwise") {
    for (double l : {0.2, 1.0, 1.5, 2.0, 40.0})
      CHECK(std::abs(small.eval(l) + large.eval(l) - m.eval(l)) <= 1e-12);
  }
  SUBCASE("m_large vanishes at low frequency") {
    CHECK(std::abs(large.eval(0.9)) == 0.0);
    CHECK(std::abs(large.eval(1.0)) == 0.0);
  }
  SUBCASE("high-supported symbol has empty small part") {
    MultiplierFn hi;
    hi.eval = [](double l) -> cplx { return l >= 4.0 ? cplx(1.0, 0.0) : cplx(0.0, 0.0); };
    hi.lambda_max = 16.0;
    hi.freq_hint = 1.0;
    auto [s2, l2] = high_low_split(hi, cuts);
    for (double l : {0.5, 2.5, 6.0}) CHECK(std::abs(s2.eval(l)) == 0.0);
  }
}

TEST_CASE("analytic family") {
  MultiplierFn m = osc_multiplier(2.0, 3.0, cuts);
  auto [small, large] = high_low_split(m, cuts);
  const int d = 3;
  SUBCASE("z = beta/d is the identity") {
    MultiplierFn fam = analytic_family(large, 2.0, 3.0, d, cplx(1.0, 0.0));
    MultiplierFn id = analytic_family(large, 2.0, 3.0, d, cplx(3.0 / d, 0.0));
    for (double l : {1.3, 2.0, 9.0}) CHECK(std::abs(id.eval(l) - large.eval(l)) <= 1e-13);
    (void)fam;
  }
  SUBCASE("purely imaginary line is uniformly bounded by the class constant") {
    ClassReport rep = class_constants(m, 2.0, 3.0, 2.0, cuts, 256.0);
    for (double y : {0.0, 1.0, 5.0}) {
      MultiplierFn fam = analytic_family(large, 2.0, 3.0, d, cplx(0.0, y));
      double sup = 0.0;
      for (double l : logspace(1.0, 4096.0, 4096)) sup = std::max(sup, std::abs(fam.eval(l)));
      CHECK(sup <= rep.C_m * (1.0 + 1e-9));
    }
  }
  SUBCASE("Re z outside [0,1] is rejected") {
    CHECK_THROWS(analytic_family(large, 2.0, 3.0, d, cplx(1.5, 0.0)));
  }
}
