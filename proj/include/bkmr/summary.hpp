#pragma once

#include <span>
#include <vector>

namespace bkmr {

/// Linear-interpolation quantile of sorted data: position (n - 1) p.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);

struct EffectSummary {
    double mean = 0.0;
    double median = 0.0;
    double lower = 0.0;  // 2.5%
    double upper = 0.0;  // 97.5%
    double sd = 0.0;
    long count = 0;
};

/// Needs at least two samples.
EffectSummary summarize(std::span<const double> samples);

}  // namespace bkmr
