#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace isc::stats {

/// Linear-interpolation sample quantile (Hyndman-Fan type 7). `sorted` must be
/// ascending and nonempty.
double quantile_sorted(std::span<const double> sorted, double prob);

/// Sorts a copy and returns the type-7 quantile.
double quantile(std::vector<double> values, double prob);

double mean(std::span<const double> values);

/// Sample standard deviation (n - 1 denominator); 0 when fewer than two values.
double sample_sd(std::span<const double> values);

/// Upper tail of the chi-square distribution.
double chi_square_sf(double statistic, int df);

/// Two-sided normal p-value for a z statistic.
double normal_two_sided_p(double z);

}  // namespace isc::stats
