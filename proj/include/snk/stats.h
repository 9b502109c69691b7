// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

namespace snk::stats {

/// Standard normal CDF.
double normalCdf(double x);

/// Complementary Kolmogorov distribution Q(lambda) = P(K > lambda).
double kolmogorovSurvival(double lambda);

struct KsResult {
    double statistic = 0.0; ///< sup |F_n - F|
    double pValue    = 1.0;
    std::size_t n    = 0;
};

/// One-sample Kolmogorov-Smirnov test against N(0, 1). The p-value uses the
/// asymptotic distribution with the Stephens small-sample correction.
KsResult ksTestStandardNormal(std::span<const double> samples);

/// Pearson correlation coefficient; 0 when either side has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

} // namespace snk::stats
