#include "wigait/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wigait {

double percentile(std::vector<double> v, double q) {
    check(!v.empty(), "percentile: empty input");
    check(q >= 0.0 && q <= 100.0, "percentile: q outside [0,100]");
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    double rank = q / 100.0 * double(v.size() - 1);
    std::size_t lo = std::size_t(std::floor(rank));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = rank - double(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

double mean(const std::vector<double>& v) {
    check(!v.empty(), "mean: empty input");
    return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

}  // namespace wigait
