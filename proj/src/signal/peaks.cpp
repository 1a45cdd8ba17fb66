#include "leakdetect/signal/peaks.hpp"

#include <algorithm>
#include <numeric>

#include "leakdetect/error.hpp"

namespace leakdetect::signal {

namespace {

double prominence_at(std::span<const double> x, std::size_t peak)
{
    const double height = x[peak];

    double left_base = height;
    for (std::size_t i = peak; i-- > 0;) {
        if (x[i] > height) break;
        left_base = std::min(left_base, x[i]);
    }

    double right_base = height;
    for (std::size_t i = peak + 1; i < x.size(); ++i) {
        if (x[i] > height) break;
        right_base = std::min(right_base, x[i]);
    }

    return height - std::max(left_base, right_base);
}

}  // namespace

std::vector<Peak> detect_peaks(std::span<const double> signal, double min_prominence, std::size_t min_distance)
{
    if (min_distance < 1) throw Error(ErrorCode::config, "peak min_distance must be >= 1");
    if (!(min_prominence >= 0.0)) throw Error(ErrorCode::config, "peak min_prominence must be >= 0");

    std::vector<Peak> candidates;
    for (std::size_t i = 1; i + 1 < signal.size(); ++i) {
        if (signal[i] > signal[i - 1] && signal[i] > signal[i + 1]) {
            const double prominence = prominence_at(signal, i);
            if (prominence >= min_prominence) candidates.push_back({i, signal[i], prominence});
        }
    }
    if (min_distance == 1 || candidates.size() < 2) return candidates;

    // Greedy thinning in order of decreasing height.
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].value > candidates[b].value; });

    std::vector<bool> keep(candidates.size(), true);
    for (std::size_t k : order) {
        if (!keep[k]) continue;
        const std::size_t at = candidates[k].index;
        for (std::size_t j = k; j-- > 0 && at - candidates[j].index < min_distance;) keep[j] = false;
        for (std::size_t j = k + 1; j < candidates.size() && candidates[j].index - at < min_distance; ++j)
            keep[j] = false;
    }

    std::vector<Peak> peaks;
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (keep[k]) peaks.push_back(candidates[k]);
    }
    return peaks;
}

}  // namespace leakdetect::signal
