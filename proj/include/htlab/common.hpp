#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace htlab {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

class error : public std::runtime_error {
public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw error(msg);
}

/// Surface area of the unit sphere S^{n-1} in R^n.
inline double sphere_area(int n) {
  require(n >= 1, "sphere_area: n >= 1");
  return 2.0 * std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n);
}

/// Volume of the unit ball in R^n.
inline double ball_volume(int n) {
  require(n >= 1, "ball_volume: n >= 1");
  return std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

/// Fixed-order pairwise (tree) summation. Deterministic for a given input
/// order regardless of how the values were produced.
template <class T>
T pairwise_sum(const T* v, std::size_t n) {
  if (n == 0) return T(0);
  if (n <= 8) {
    T s = v[0];
    for (std::size_t i = 1; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

template <class T>
T pairwise_sum(const std::vector<T>& v) {
  return pairwise_sum(v.data(), v.size());
}

inline std::vector<double> linspace(double a, double b, int n) {
  require(n >= 1, "linspace: n >= 1");
  std::vector<double> x(n);
  if (n == 1) {
    x[0] = a;
    return x;
  }
  for (int i = 0; i < n; ++i) x[i] = a + (b - a) * double(i) / double(n - 1);
  return x;
}

inline std::vector<double> logspace(double a, double b, int n) {
  require(a > 0 && b > 0, "logspace: positive endpoints");
  std::vector<double> x = linspace(std::log(a), std::log(b), n);
  for (double& t : x) t = std::exp(t);
  return x;
}

/// FNV-1a, used for cache keys; not cryptographic.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), seed);
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace htlab
