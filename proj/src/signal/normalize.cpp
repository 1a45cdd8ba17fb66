#include "leakdetect/signal/normalize.hpp"

#include <cmath>
#include <string>

#include "leakdetect/error.hpp"

namespace leakdetect::signal {

NormStats fit_norm(std::span<const CycleSegment> train_segments)
{
    std::size_t count = 0;
    double sum = 0.0;
    for (const auto& seg : train_segments) {
        for (double v : seg.samples) sum += v;
        count += seg.samples.size();
    }
    if (count < 2) throw Error(ErrorCode::degenerate_data, "normalization needs at least 2 samples");

    const double mean = sum / static_cast<double>(count);
    double squares = 0.0;
    for (const auto& seg : train_segments) {
        for (double v : seg.samples) squares += (v - mean) * (v - mean);
    }
    const double std = std::sqrt(squares / static_cast<double>(count));
    if (!(std > 0.0)) throw Error(ErrorCode::degenerate_data, "training data is constant (zero std)");
    return {mean, std};
}

std::vector<double> resample(std::span<const double> values, std::size_t length)
{
    if (values.size() < 2)
        throw Error(ErrorCode::too_short, "resample needs at least 2 samples, got " + std::to_string(values.size()));
    if (length < 2) throw Error(ErrorCode::config, "resample length must be >= 2");

    const std::size_t n = values.size();
    std::vector<double> out(length);
    const double span = static_cast<double>(n - 1);
    const double steps = static_cast<double>(length - 1);
    for (std::size_t i = 0; i < length; ++i) {
        const double pos = static_cast<double>(i) * span / steps;
        const auto j = static_cast<std::size_t>(pos);
        if (j >= n - 1) {
            out[i] = values[n - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(j);
        out[i] = values[j] + frac * (values[j + 1] - values[j]);
    }
    return out;
}

}  // namespace leakdetect::signal
