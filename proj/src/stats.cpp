// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/stats.h"

#include "snk/common.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace snk::stats {

double
normalCdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double
kolmogorovSurvival(double lambda) {
    if (lambda <= 0.0) {
        return 1.0;
    }
    if (lambda < 1.18) {
        // Jacobi-theta form converges fast for small lambda.
        const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
        double sum     = 0.0;
        for (int k = 1; k <= 9; k += 2) {
            sum += std::pow(y, k * k);
        }
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum, 0.0, 1.0);
    }
    double sum  = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-17) {
            break;
        }
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult
ksTestStandardNormal(std::span<const double> samples) {
    check(!samples.empty(), "KS test needs at least one sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::ranges::sort(sorted);
    const double n = double(sorted.size());
    double d       = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = normalCdf(sorted[i]);
        d              = std::max({d, (i + 1) / n - f, f - i / n});
    }
    const double rootN = std::sqrt(n);
    KsResult result;
    result.statistic = d;
    result.n         = sorted.size();
    result.pValue    = kolmogorovSurvival((rootN + 0.12 + 0.11 / rootN) * d);
    return result;
}

double
pearson(std::span<const double> a, std::span<const double> b) {
    check(a.size() == b.size() && !a.empty(), "correlation needs equal, non-empty samples");
    const double n = double(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) {
        return 0.0;
    }
    return sab / std::sqrt(saa * sbb);
}

} // namespace snk::stats
