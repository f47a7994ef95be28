#include "bkmr/summary.hpp"

#include "bkmr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bkmr {

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error(ErrorCode::input, "quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::input, "quantile probability outside [0, 1]");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    if (frac == 0.0) return sorted[lo];
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

EffectSummary summarize(std::span<const double> samples) {
    if (samples.size() < 2) throw Error(ErrorCode::input, "summaries need at least two samples");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    EffectSummary s;
    s.count = static_cast<long>(sorted.size());
    const double n = static_cast<double>(sorted.size());
    s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : samples) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
    s.median = quantile_sorted(sorted, 0.5);
    s.lower = quantile_sorted(sorted, 0.025);
    s.upper = quantile_sorted(sorted, 0.975);
    // Constant samples: keep every statistic exactly equal to the constant.
    if (sorted.front() == sorted.back()) s.mean = s.median = s.lower = s.upper = sorted.front();
    return s;
}

}  // namespace bkmr
