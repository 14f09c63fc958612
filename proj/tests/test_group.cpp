#include <doctest.h>

#include <random>

#include "htlab/group.hpp"

using namespace htlab;

namespace {

GroupPoint random_point(const HTypeStructure& g, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  GroupPoint p;
  p.x.resize(g.d1);
  p.u.resize(g.d2);
  for (double& v : p.x) v = gauss(rng);
  for (double& v : p.u) v = gauss(rng);
  return p;
}

double dist(const GroupPoint& a, const GroupPoint& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) s += (a.x[i] - b.x[i]) * (a.x[i] - b.x[i]);
  for (std::size_t i = 0; i < a.u.size(); ++i) s += (a.u[i] - b.u[i]) * (a.u[i] - b.u[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("heisenberg presets carry the right dimensions") {
  HTypeStructure g1 = heisenberg(1);
  CHECK(g1.d1 == 2);
  CHECK(g1.d2 == 1);
  CHECK(g1.d == 3);
  CHECK(g1.Q == 4);
  HTypeStructure g3 = heisenberg(3);
  CHECK(g3.d == 7);
  CHECK(g3.Q == 8);
  CHECK_THROWS(heisenberg(0));
}

TEST_CASE("symplectic block squares to -I") {
  HTypeStructure g = heisenberg(1);
  Mat sq = g.J[0] * g.J[0];
  Mat target = Mat::identity(2).scaled(-1.0);
  CHECK((sq - target).frobenius() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("H-type identity holds on random mu for all presets") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const char* name : {"heisenberg-1", "heisenberg-2", "heisenberg-3", "quaternionic-4-2"}) {
    HTypeStructure g = group_preset(name);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> mu(g.d2);
      for (double& v : mu) v = gauss(rng);
      CHECK(htype_residual(g, mu) <= 1e-12);
    }
  }
}

TEST_CASE("build_htype validates skewness and the anti-commutation identity") {
  SUBCASE("standard symplectic passes") {
    Mat J(2);
    J(0, 1) = 1;
    J(1, 0) = -1;
    HTypeStructure g = build_htype({J});
    CHECK(g.d1 == 2);
  }
  SUBCASE("quaternionic left multiplications pass with d1=4, d2=2") {
    HTypeStructure g = quaternionic_4_2();
    CHECK(g.d1 == 4);
    CHECK(g.d2 == 2);
    // direct check of J_mu^2 = -|mu|^2 I by 4x4 arithmetic
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < 32; ++t) {
      std::vector<double> mu = {gauss(rng), gauss(rng)};
      Mat m = g.J_mu(mu);
      Mat sq = m * m;
      double m2 = mu[0] * mu[0] + mu[1] * mu[1];
      CHECK((sq + Mat::identity(4).scaled(m2)).frobenius() <= 1e-12);
    }
  }
  SUBCASE("identity matrix is rejected as non-skew") {
    CHECK_THROWS(build_htype({Mat::identity(2)}));
  }
  SUBCASE("non-anticommuting pair is rejected with the offending pair") {
    Mat J1(4), J2(4);
    // J1 = symplectic blocks, J2 = same (commutes with itself, violates the pair identity)
    for (int b = 0; b < 2; ++b) {
      J1(2 * b, 2 * b + 1) = 1;
      J1(2 * b + 1, 2 * b) = -1;
      J2(2 * b, 2 * b + 1) = 1;
      J2(2 * b + 1, 2 * b) = -1;
    }
    CHECK_THROWS_WITH_AS(build_htype({J1, J2}), doctest::Contains("pair (1,2)"), error);
  }
}

TEST_CASE("group law: identity, hand value, inverses, associativity") {
  HTypeStructure g = heisenberg(1);
  std::mt19937_64 rng(3);

  SUBCASE("p * e = p") {
    GroupPoint p = random_point(g, rng);
    CHECK(dist(mul(g, p, identity_point(g)), p) == doctest::Approx(0.0));
    CHECK(dist(mul(g, identity_point(g), p), p) == doctest::Approx(0.0));
  }
  SUBCASE("hand-evaluated product ((1,0),0)*((0,1),0) = ((1,1),-0.5)") {
    GroupPoint p = make_point(g, {1, 0}, {0});
    GroupPoint q = make_point(g, {0, 1}, {0});
    GroupPoint pq = mul(g, p, q);
    CHECK(pq.x[0] == doctest::Approx(1.0));
    CHECK(pq.x[1] == doctest::Approx(1.0));
    CHECK(pq.u[0] == doctest::Approx(-0.5));
  }
  SUBCASE("p * inv(p) = e, skewness kills <Jx, x>") {
    for (int t = 0; t < 20; ++t) {
      GroupPoint p = random_point(g, rng);
      GroupPoint e = mul(g, p, inv(g, p));
      CHECK(dist(e, identity_point(g)) <= 1e-12);
      GroupPoint e2 = mul(g, inv(g, p), p);
      CHECK(dist(e2, identity_point(g)) <= 1e-12);
    }
  }
  SUBCASE("inv formula") {
    GroupPoint p = make_point(g, {1, 0}, {2});
    GroupPoint ip = inv(g, p);
    CHECK(ip.x[0] == -1.0);
    CHECK(ip.u[0] == -2.0);
  }
  SUBCASE("associativity via cancellation on random triples") {
    HTypeStructure g2 = heisenberg(2);
    for (int t = 0; t < 50; ++t) {
      GroupPoint p = random_point(g2, rng), q = random_point(g2, rng);
      GroupPoint lhs = mul(g2, inv(g2, q), mul(g2, q, p));
      CHECK(dist(lhs, p) <= 1e-12);
      GroupPoint a = random_point(g2, rng);
      GroupPoint assoc1 = mul(g2, mul(g2, p, q), a);
      GroupPoint assoc2 = mul(g2, p, mul(g2, q, a));
      CHECK(dist(assoc1, assoc2) <= 1e-12);
    }
  }
  SUBCASE("dimension mismatch rejected") {
    GroupPoint bad{{1.0}, {0.0}};
    CHECK_THROWS(mul(g, bad, identity_point(g)));
  }
}

TEST_CASE("norms and dilations") {
  HTypeStructure g = heisenberg(1);
  SUBCASE("koranyi on the first layer is |x|") {
    GroupPoint p = make_point(g, {3, 4}, {0});
    CHECK(norm(p, NormKind::koranyi) == doctest::Approx(5.0));
  }
  SUBCASE("koranyi on the center: |u| = 1 gives 2") {
    GroupPoint p = make_point(g, {0, 0}, {1});
    CHECK(norm(p, NormKind::koranyi) == doctest::Approx(2.0));
  }
  SUBCASE("euclid is |x| + |u|") {
    GroupPoint p = make_point(g, {3, 4}, {2});
    CHECK(norm(p, NormKind::euclid) == doctest::Approx(7.0));
  }
  SUBCASE("dilate(p, 1) = p; koranyi degree-1 homogeneity; r <= 0 rejected") {
    std::mt19937_64 rng(5);
    GroupPoint p = random_point(g, rng);
    CHECK(dist(dilate(p, 1.0, DilationKind::automorphic), p) == doctest::Approx(0.0));
    double n0 = norm(p, NormKind::koranyi);
    CHECK(norm(dilate(p, 3.0, DilationKind::automorphic), NormKind::koranyi) ==
          doctest::Approx(3.0 * n0).epsilon(1e-13));
    double e0 = norm(p, NormKind::euclid);
    CHECK(norm(dilate(p, 3.0, DilationKind::isotropic), NormKind::euclid) ==
          doctest::Approx(3.0 * e0).epsilon(1e-13));
    CHECK_THROWS(dilate(p, 0.0, DilationKind::isotropic));
  }
  SUBCASE("automorphic dilation is a group automorphism") {
    std::mt19937_64 rng(9);
    for (const char* name : {"heisenberg-1", "quaternionic-4-2"}) {
      HTypeStructure gg = group_preset(name);
      for (int t = 0; t < 20; ++t) {
        GroupPoint p = random_point(gg, rng), q = random_point(gg, rng);
        double r = 0.3 + 2.0 * std::uniform_real_distribution<double>(0, 1)(rng);
        GroupPoint lhs = dilate(mul(gg, p, q), r, DilationKind::automorphic);
        GroupPoint rhs = mul(gg, dilate(p, r, DilationKind::automorphic),
                             dilate(q, r, DilationKind::automorphic));
        CHECK(dist(lhs, rhs) <= 1e-11);
      }
    }
  }
}
