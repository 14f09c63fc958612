#include "htlab/group.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace htlab {

Mat Mat::identity(int n) {
  Mat m(n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::transpose() const {
  Mat m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(j, i) = (*this)(i, j);
  return m;
}

Mat Mat::operator*(const Mat& b) const {
  require(n == b.n, "Mat: size mismatch");
  Mat m(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double aik = (*this)(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < n; ++j) m(i, j) += aik * b(k, j);
    }
  return m;
}

Mat Mat::operator+(const Mat& b) const {
  require(n == b.n, "Mat: size mismatch");
  Mat m(n);
  for (std::size_t i = 0; i < a.size(); ++i) m.a[i] = a[i] + b.a[i];
  return m;
}

Mat Mat::operator-(const Mat& b) const {
  require(n == b.n, "Mat: size mismatch");
  Mat m(n);
  for (std::size_t i = 0; i < a.size(); ++i) m.a[i] = a[i] - b.a[i];
  return m;
}

Mat Mat::scaled(double c) const {
  Mat m(n);
  for (std::size_t i = 0; i < a.size(); ++i) m.a[i] = c * a[i];
  return m;
}

std::vector<double> Mat::apply(const std::vector<double>& x) const {
  require(int(x.size()) == n, "Mat: vector size mismatch");
  std::vector<double> y(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += (*this)(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

double Mat::frobenius() const {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

Mat HTypeStructure::J_mu(const std::vector<double>& mu) const {
  require(int(mu.size()) == d2, "J_mu: mu dimension mismatch");
  Mat m(d1);
  for (int i = 0; i < d2; ++i)
    for (std::size_t k = 0; k < m.a.size(); ++k) m.a[k] += mu[i] * J[i].a[k];
  return m;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

void validate_structure(const HTypeStructure& g, double tol) {
  require(g.d1 > 0 && g.d1 % 2 == 0, "H-type: d1 must be a positive even integer");
  require(g.d2 > 0, "H-type: d2 must be positive");
  require(int(g.J.size()) == g.d2, "H-type: need d2 matrices");
  for (int i = 0; i < g.d2; ++i) {
    require(g.J[i].n == g.d1, "H-type: J matrices must be d1 x d1");
    double skew = (g.J[i] + g.J[i].transpose()).frobenius();
    if (skew > tol)
      throw error("H-type: J_" + std::to_string(i + 1) + " not skew-symmetric, residual " +
                  std::to_string(skew));
  }
  Mat I = Mat::identity(g.d1);
  for (int i = 0; i < g.d2; ++i)
    for (int j = i; j < g.d2; ++j) {
      Mat anti = g.J[i] * g.J[j] + g.J[j] * g.J[i];
      Mat target = (i == j) ? I.scaled(-2.0) : Mat(g.d1);
      double res = (anti - target).frobenius();
      if (res > tol)
        throw error("H-type identity violated for pair (" + std::to_string(i + 1) + "," +
                    std::to_string(j + 1) + "), residual " + std::to_string(res));
    }
}

}  // namespace

HTypeStructure heisenberg(int n) {
  require(n >= 1, "heisenberg: n >= 1");
  HTypeStructure g;
  g.d1 = 2 * n;
  g.d2 = 1;
  Mat J(g.d1);
  for (int b = 0; b < n; ++b) {
    J(2 * b, 2 * b + 1) = 1.0;
    J(2 * b + 1, 2 * b) = -1.0;
  }
  g.J = {J};
  g.d = g.d1 + g.d2;
  g.Q = g.d1 + 2 * g.d2;
  g.name = "heisenberg-" + std::to_string(n);
  validate_structure(g, 1e-12);
  return g;
}

HTypeStructure quaternionic_4_2() {
  // Left multiplications by i and j on H ~ R^4, coordinates (a, b, c, d).
  Mat Li(4), Lj(4);
  Li(0, 1) = -1; Li(1, 0) = 1; Li(2, 3) = -1; Li(3, 2) = 1;
  Lj(0, 2) = -1; Lj(1, 3) = 1; Lj(2, 0) = 1; Lj(3, 1) = -1;
  HTypeStructure g = build_htype({Li, Lj});
  g.name = "quaternionic-4-2";
  return g;
}

HTypeStructure build_htype(const std::vector<Mat>& J_list, double tol) {
  require(!J_list.empty(), "build_htype: empty J list");
  int n = J_list[0].n;
  for (const Mat& m : J_list) require(m.n == n, "build_htype: J matrices must share one size");
  HTypeStructure g;
  g.d1 = n;
  g.d2 = int(J_list.size());
  g.J = J_list;
  g.d = g.d1 + g.d2;
  g.Q = g.d1 + 2 * g.d2;
  validate_structure(g, tol);
  return g;
}

HTypeStructure group_preset(const std::string& name) {
  if (name.rfind("heisenberg-", 0) == 0) {
    int n = std::stoi(name.substr(11));
    return heisenberg(n);
  }
  if (name == "quaternionic-4-2") return quaternionic_4_2();
  throw error("unknown group preset: " + name);
}

HTypeStructure load_htype_json(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), "cannot open group file: " + path);
  nlohmann::json j;
  in >> j;
  require(j.contains("J") && j["J"].is_array(), "group file: expected key \"J\" with a list of matrices");
  std::vector<Mat> J_list;
  for (const auto& jm : j["J"]) {
    std::vector<double> flat = jm.get<std::vector<double>>();
    int n = int(std::lround(std::sqrt(double(flat.size()))));
    require(std::size_t(n) * n == flat.size(), "group file: matrix entries must form a square");
    Mat m(n);
    m.a = flat;
    J_list.push_back(std::move(m));
  }
  HTypeStructure g = build_htype(J_list);
  if (j.contains("name")) g.name = j["name"].get<std::string>();
  return g;
}

GroupPoint identity_point(const HTypeStructure& g) {
  return GroupPoint{std::vector<double>(g.d1, 0.0), std::vector<double>(g.d2, 0.0)};
}

GroupPoint make_point(const HTypeStructure& g, std::vector<double> x, std::vector<double> u) {
  require(int(x.size()) == g.d1 && int(u.size()) == g.d2, "make_point: dimension mismatch");
  for (double v : x) require(std::isfinite(v), "make_point: non-finite entry");
  for (double v : u) require(std::isfinite(v), "make_point: non-finite entry");
  return GroupPoint{std::move(x), std::move(u)};
}

GroupPoint mul(const HTypeStructure& g, const GroupPoint& p, const GroupPoint& q) {
  require(int(p.x.size()) == g.d1 && int(q.x.size()) == g.d1 &&
              int(p.u.size()) == g.d2 && int(q.u.size()) == g.d2,
          "mul: dimension mismatch");
  GroupPoint r;
  r.x.resize(g.d1);
  for (int i = 0; i < g.d1; ++i) r.x[i] = p.x[i] + q.x[i];
  r.u.resize(g.d2);
  for (int i = 0; i < g.d2; ++i) {
    double jterm = dot(g.J[i].apply(p.x), q.x);
    r.u[i] = p.u[i] + q.u[i] + 0.5 * jterm;
  }
  return r;
}

GroupPoint inv(const HTypeStructure& g, const GroupPoint& p) {
  require(int(p.x.size()) == g.d1 && int(p.u.size()) == g.d2, "inv: dimension mismatch");
  GroupPoint r = p;
  for (double& v : r.x) v = -v;
  for (double& v : r.u) v = -v;
  return r;
}

double norm(const GroupPoint& p, NormKind kind) {
  double nx = norm2(p.x), nu = norm2(p.u);
  if (kind == NormKind::euclid) return nx + nu;
  double q = nx * nx * nx * nx + 16.0 * nu * nu;
  return std::pow(q, 0.25);
}

GroupPoint dilate(const GroupPoint& p, double r, DilationKind kind) {
  require(r > 0.0, "dilate: r must be positive");
  GroupPoint q = p;
  for (double& v : q.x) v *= r;
  double cu = (kind == DilationKind::automorphic) ? r * r : r;
  for (double& v : q.u) v *= cu;
  return q;
}

double htype_residual(const HTypeStructure& g, const std::vector<double>& mu) {
  Mat Jm = g.J_mu(mu);
  double m2 = dot(mu, mu);
  Mat res = Jm * Jm + Mat::identity(g.d1).scaled(m2);
  return res.frobenius();
}

}  // namespace htlab
