#pragma once

#include <functional>
#include <string>
#include <vector>

#include "htlab/common.hpp"
#include "htlab/group.hpp"

namespace htlab {

/// Gauss-Legendre nodes/weights on [-1, 1], Newton iteration on P_n.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Nodes/weights for int_a^b f, composite over `panels` equal panels.
void gauss_panels(double a, double b, int n_per_panel, int panels,
                  std::vector<double>& nodes, std::vector<double>& weights);

/// Quadrature grid in (r, rho) = (|x|, |u|) carrying the solid measure of
/// R^{d1} x R^{d2}: weights include the sphere areas and radial powers so
/// that summing f(r_i, rho_j) * wr_i * wrho_j approximates the integral of
/// the biradial extension of f over the ball product.
struct BiradialGrid {
  int d1 = 0, d2 = 0;
  double R_x = 0, R_u = 0;
  std::vector<double> r_nodes, r_weights;      // with omega_{d1-1} r^{d1-1} folded in
  std::vector<double> rho_nodes, rho_weights;  // with omega_{d2-1} rho^{d2-1} folded in
  std::vector<double> r_plain_w, rho_plain_w;  // bare 1-D weights, for line integrals

  int nr() const { return int(r_nodes.size()); }
  int nrho() const { return int(rho_nodes.size()); }
  std::string spec_string() const;
  std::uint64_t hash() const { return fnv1a(spec_string()); }
};

BiradialGrid build_grid(const HTypeStructure& g, double R_x, double R_u, int n_r, int n_rho);

/// Uniform evaluation grid (trapezoid weights with the solid measure folded
/// in); used for pointwise comparisons rather than accurate integrals.
BiradialGrid uniform_grid(const HTypeStructure& g, double R_x, double R_u, int n_r, int n_rho);

/// Grid from explicit node lists (trapezoid weights), for probe evaluations.
BiradialGrid eval_grid(const HTypeStructure& g, std::vector<double> r_nodes,
                       std::vector<double> rho_nodes);

/// Complex biradial samples on a grid; metadata identifies which multiplier,
/// tau or j the field represents. tail_power/tail_coef hold a fitted
/// |K| ~ coef * (1 + ||.||_E)^{-power} outer-shell decay model used for
/// truncation-tail estimates.
struct KernelField {
  BiradialGrid grid;
  std::vector<cplx> values;  // row-major [ir * nrho + irho]
  std::string meta;
  double tail_power = 0.0;
  double tail_coef = 0.0;

  cplx& at(int ir, int irho) { return values[std::size_t(ir) * grid.nrho() + irho]; }
  cplx at(int ir, int irho) const { return values[std::size_t(ir) * grid.nrho() + irho]; }
  void validate() const;
};

KernelField zero_field(const BiradialGrid& grid, const std::string& meta = "");

struct NormResult {
  double value = 0.0;
  double tail_estimate = 0.0;
};

/// Weighted l^p sum approximating the L^p(G) norm over the truncated domain,
/// p in {1, 2}; reports a truncation-tail estimate from the decay descriptor.
NormResult field_norm(const KernelField& f, int p);

double field_mass_abs(const KernelField& f);       // shorthand: field_norm(.,1).value
cplx field_integral(const KernelField& f);         // signed/complex mass
double field_sup(const KernelField& f);            // max |value| on nodes

/// Fit the outer-shell decay model and store it on the field.
void fit_tail_descriptor(KernelField& f);

/// Bilinear interpolation in (r, rho); exact at nodes. Queries below the
/// first node use the even extension in each radial variable; queries beyond
/// the extents throw (truncation-domain violation).
cplx interpolate(const KernelField& f, double r, double rho);

/// A centered biradial profile with compact support, used as the left factor
/// of group convolutions (atoms, test bumps).
struct BiradialProfile {
  double support_radius = 0.0;                     // ||(x,u)||_E support bound
  std::function<double(double, double)> eval;      // (r, rho) -> value
};

struct ConvolveOptions {
  int n_ry = 32;
  int n_ang = 32;
  int n_v = 32;
};

/// Group convolution (a * K)(x, u) of a compactly supported biradial profile
/// with a biradial kernel field, sampled on `out_grid` at the axis
/// representatives x = (r, 0, ...), u = (rho, 0, ...). d2 = 1 only.
KernelField biradial_convolve(const HTypeStructure& g, const KernelField& K,
                              const BiradialProfile& a, const BiradialGrid& out_grid,
                              const ConvolveOptions& opt = {});

/// Binary cache round-trip (header + raw float64 pairs) and CSV export.
void save_field(const KernelField& f, const std::string& path, const std::string& group_id);
KernelField load_field(const std::string& path, std::string* group_id = nullptr);
void export_field_csv(const KernelField& f, const std::string& path);

}  // namespace htlab
