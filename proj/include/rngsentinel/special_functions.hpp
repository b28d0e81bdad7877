#pragma once

namespace rngsentinel {

double erfc(double x);

/// Standard normal CDF.
double normal_cdf(double x);

/// Q(a, x) = Gamma(a, x) / Gamma(a). Series below a + 1, Lentz continued
/// fraction above.
double regularized_upper_gamma(double a, double x);

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
double chi2_sf(double x, double dof);

/// Kolmogorov survival probability for a two-sided D statistic over n
/// samples, using the asymptotic series at t = d * (sqrt(n) + 0.12 + 0.11 / sqrt(n)).
double kolmogorov_sf(double d, double n);

}  // namespace rngsentinel
