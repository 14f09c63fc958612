#pragma once

#include <string>
#include <vector>

#include "htlab/common.hpp"

namespace htlab {

/// Dense row-major square matrix, just enough linear algebra for the
/// skew-symmetric J maps.
struct Mat {
  int n = 0;
  std::vector<double> a;  // row-major n*n

  Mat() = default;
  explicit Mat(int n_) : n(n_), a(std::size_t(n_) * n_, 0.0) {}

  double& operator()(int i, int j) { return a[std::size_t(i) * n + j]; }
  double operator()(int i, int j) const { return a[std::size_t(i) * n + j]; }

  static Mat identity(int n);
  Mat transpose() const;
  Mat operator*(const Mat& b) const;
  Mat operator+(const Mat& b) const;
  Mat operator-(const Mat& b) const;
  Mat scaled(double c) const;
  std::vector<double> apply(const std::vector<double>& x) const;
  double frobenius() const;
};

/// A point (x, u) of the group, x in the first layer, u in the center.
struct GroupPoint {
  std::vector<double> x;
  std::vector<double> u;
};

/// Heisenberg-type structure: layer dimensions, the skew maps J_1..J_{d2},
/// and the derived topological/homogeneous dimensions.
struct HTypeStructure {
  int d1 = 0;  // dim of first layer, even
  int d2 = 0;  // dim of center
  std::vector<Mat> J;
  int d = 0;   // d1 + d2
  int Q = 0;   // d1 + 2*d2
  std::string name;  // preset name when built from one

  Mat J_mu(const std::vector<double>& mu) const;
};

enum class NormKind { koranyi, euclid };
enum class DilationKind { automorphic, isotropic };

/// Standard Heisenberg group H^n: d1 = 2n, d2 = 1.
HTypeStructure heisenberg(int n);

/// Quaternionic example on R^4 with two skew maps (d1 = 4, d2 = 2).
HTypeStructure quaternionic_4_2();

/// Validate a list of square matrices as H-type data; throws with the
/// offending pair and residual if the identities fail.
HTypeStructure build_htype(const std::vector<Mat>& J_list, double tol = 1e-12);

/// Build a named preset ("heisenberg-1", "heisenberg-2", ..., "quaternionic-4-2").
HTypeStructure group_preset(const std::string& name);

/// Load custom J matrices from a JSON file of row-major matrices.
HTypeStructure load_htype_json(const std::string& path);

GroupPoint identity_point(const HTypeStructure& g);
GroupPoint make_point(const HTypeStructure& g, std::vector<double> x, std::vector<double> u);

GroupPoint mul(const HTypeStructure& g, const GroupPoint& p, const GroupPoint& q);
GroupPoint inv(const HTypeStructure& g, const GroupPoint& p);

double norm(const GroupPoint& p, NormKind kind);
GroupPoint dilate(const GroupPoint& p, double r, DilationKind kind);

/// ||J_mu^2 + |mu|^2 I||_F, the H-type identity residual for one mu.
double htype_residual(const HTypeStructure& g, const std::vector<double>& mu);

}  // namespace htlab
