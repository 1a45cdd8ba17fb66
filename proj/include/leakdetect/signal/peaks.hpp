#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace leakdetect::signal {

struct Peak {
    std::size_t index = 0;
    double value = 0.0;
    double prominence = 0.0;

    friend bool operator==(const Peak&, const Peak&) = default;
};

/**
 * Strict local maxima of `signal` whose prominence is at least
 * `min_prominence`, thinned so that no two kept peaks are closer than
 * `min_distance` samples (taller peaks win, ties go to the lower index).
 * Result is sorted by index.
 *
 * Prominence is the peak height above the higher of its two bases, each
 * base being the minimum between the peak and the nearest strictly higher
 * sample (or the signal boundary) on that side.
 */
std::vector<Peak> detect_peaks(std::span<const double> signal, double min_prominence, std::size_t min_distance);

inline constexpr std::size_t kDefaultPeakMinDistance = 10;
inline constexpr double kDefaultPeakProminenceFraction = 0.05;

}  // namespace leakdetect::signal
