#pragma once

#include <vector>

#include "htlab/common.hpp"

namespace htlab {

/// Ordinary least squares on (log param, log value).
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;  // in log space
  double residual = 0.0;   // RMS of log residuals
  double half_width = 0.0; // 95% confidence half width of the slope
  int n = 0;
};

/// Fit a power law y = C x^slope from positive samples. Requires >= 4 points,
/// positive values, non-degenerate abscissae.
FitResult fit_exponent(const std::vector<double>& param, const std::vector<double>& value);

}  // namespace htlab
