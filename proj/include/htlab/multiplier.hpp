#pragma once

#include <functional>
#include <string>
#include <vector>

#include "htlab/common.hpp"
#include "htlab/cutoffs.hpp"

namespace htlab {

/// Scalar spectral symbol m(lambda), lambda >= 0, with sampling metadata.
/// freq_hint bounds the instantaneous frequency |d arg m / d lambda| over the
/// window and drives the sample density used for DFT-based norms.
struct MultiplierFn {
  std::function<cplx(double)> eval;
  double lambda_max = 16.0;
  double freq_hint = 1.0;
  double theta = -1.0, beta = -1.0;  // set for the oscillating family
  std::string id;

  cplx operator()(double l) const { return eval(l); }
};

/// m_{theta,beta}(l) = e^{i l^theta} l^{-theta beta / 2} chi(l).
MultiplierFn osc_multiplier(double theta, double beta, const CutoffSet& c);

/// Parse "osc:theta=2,beta=3", "mh:gaussian", "heat:t=1", "schrod:t=0.1" presets.
MultiplierFn multiplier_preset(const std::string& name, const CutoffSet& c);

std::vector<cplx> sample_symbol(const MultiplierFn& m, double lambda_max, int n);

/// Sample count for DFT work at the given window (power of two).
int suggested_samples(const MultiplierFn& m, double lambda_max, double oversample = 2.5);

/// ||f||_{L^2_s} of a sampled symbol: weight (1+|xi|^2)^{s/2} applied to the
/// DFT of the samples. Throws if the samples carry mass at the window edges
/// (aliasing guard).
double sobolev_norm(const std::vector<cplx>& samples, double dlambda, double s);

/// Convenience: sample m over [0, lambda_max] at its suggested density.
double sobolev_norm(const MultiplierFn& m, double s, double lambda_max = -1.0);

struct DyadicPiece {
  int j = 0;
  MultiplierFn piece;     // m_j(l)   = m(l) phi(2^-j l)
  MultiplierFn rescaled;  // m^j(l)   = m(2^j l) phi(l)
};

/// Dyadic decomposition of m over j in [jmin, jmax]; checks reconstruction on
/// the sample grid and reports the residual if the window misses support.
std::vector<DyadicPiece> dyadic_decompose(const MultiplierFn& m, const CutoffSet& c, int jmin,
                                          int jmax, double recon_tol = 1e-10);

/// L2_s norm of the rescaled piece m^j together with the dyadic growth bound
/// 2^{j theta (s - beta/2)} and their ratio.
struct DyadicNormRow {
  int j;
  double l2s_norm;
  double bound;
  double ratio;
};
std::vector<DyadicNormRow> dyadic_norm_table(const MultiplierFn& m, const CutoffSet& c, double s,
                                             int jmin, int jmax);
void write_dyadic_norm_csv(const std::vector<DyadicNormRow>& rows, const std::string& path);

/// Scale-invariant class data: sup_{0<=t<=1} ||m(t.)chi||_{L2_s} and the two
/// t >= 1 quantities t^{theta beta/2} ||m(t.)chi||_inf and
/// t^{-theta(2s-beta)/2} ||m(t.)chi||_{L2_s}. C_m is the max of the latter two.
struct ClassReport {
  double sup_small = 0.0;
  double sup_linf = 0.0;
  double sup_l2s = 0.0;
  double C_m = 0.0;
  bool stabilized = false;
  double t_max = 0.0;
};

ClassReport class_constants(const MultiplierFn& m, double theta, double beta, double s,
                            const CutoffSet& c, double t_max = 256.0, int n_small = 9,
                            int n_large = 25);

/// Smooth split m = m_small + m_large (exact sum), m_small = m below 1,
/// m_large = m above 2.
std::pair<MultiplierFn, MultiplierFn> high_low_split(const MultiplierFn& m, const CutoffSet& c);

/// Analytic family m^z(l) = m_large(l) l^{theta/2 (beta - d z)}, Re z in [0,1].
MultiplierFn analytic_family(const MultiplierFn& m_large, double theta, double beta, int d,
                             cplx z);

}  // namespace htlab
