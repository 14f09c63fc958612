#include <doctest.h>

#include "htlab/cutoffs.hpp"

using namespace htlab;

TEST_CASE("chi saturates exactly at the dyadic edges") {
  CutoffSet c = make_partition("standard");
  CHECK(c.chi(0.9) == 0.0);
  CHECK(c.chi(1.0) == 0.0);
  CHECK(c.chi(2.0) == 1.0);
  CHECK(c.chi(2.1) == 1.0);
  CHECK(c.chi(1.5) > 0.0);
  CHECK(c.chi(1.5) < 1.0);
}

TEST_CASE("dyadic partition of unity telescopes exactly") {
  CutoffSet c = make_partition("standard");
  for (double l : {2.7, 0.013, 1.0, 731.4, 5e-5}) {
    CHECK(dyadic_partition_sum(c, l) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // phi supported in [1/2, 2], equals 1 at 1
  CHECK(c.phi(0.49) == 0.0);
  CHECK(c.phi(2.01) == 0.0);
  CHECK(c.phi(1.0) == 1.0);
}

TEST_CASE("eta0 periodization sums to one") {
  CutoffSet c = make_partition("standard");
  for (double t : {1.3, 0.0, -2.6, 3.14159, 40.5}) {
    CHECK(eta0_row_sum(c, t) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(c.eta0(2.1) == 0.0);  // supported in (-2, 2)
  CHECK(c.eta0(0.0) > 0.0);
}

TEST_CASE("zeta pair telescopes and has the declared supports") {
  CutoffSet c = make_partition("standard");
  for (double t : {0.2, 0.9, 3.7, 100.0, -55.0}) {
    CHECK(zeta_partition_sum(c, t) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(c.zeta0(0.99) == 1.0);
  CHECK(c.zeta0(2.01) == 0.0);
  CHECK(c.zeta1(0.49) == 0.0);
  CHECK(c.zeta1(2.01) == 0.0);
  CHECK(c.zeta1(1.0) > 0.0);
}

TEST_CASE("band cutoffs cover each other") {
  CutoffSet c = make_partition("standard");
  // chi_band is 1 on [1/2, 2], supported in [1/4, 4]
  CHECK(c.chi_band(0.5) == 1.0);
  CHECK(c.chi_band(2.0) == 1.0);
  CHECK(c.chi_band(0.24) == 0.0);
  CHECK(c.chi_band(4.01) == 0.0);
  // chi1 is 1 on the squared band [1/16, 16]
  CHECK(c.chi1(1.0 / 16) == 1.0);
  CHECK(c.chi1(16.0) == 1.0);
  CHECK(c.chi1(33.0) == 0.0);
  // chi1p covers supp chi1
  CHECK(c.chi1p(1.0 / 32) == 1.0);
  CHECK(c.chi1p(32.0) == 1.0);
}

TEST_CASE("smooth step is monotone and smooth-ish at edges") {
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    double t = i / 100.0;
    double v = smooth_step(0.0, 1.0, t);
    CHECK(v >= prev - 1e-15);
    prev = v;
  }
  // near-edge values decay faster than any power (flat contact)
  CHECK(smooth_step(0.0, 1.0, 0.01) < 1e-20);
  CHECK(1.0 - smooth_step(0.0, 1.0, 0.99) < 1e-20);
}
