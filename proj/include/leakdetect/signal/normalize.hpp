#pragma once

#include <span>
#include <vector>

#include "leakdetect/norm_stats.hpp"
#include "leakdetect/signal/segment.hpp"

namespace leakdetect::signal {

/// Mean and population std over every sample of every segment, in order.
NormStats fit_norm(std::span<const CycleSegment> train_segments);

/// Linear interpolation onto `length` evenly spaced points spanning the
/// first and last input sample. Endpoints are reproduced exactly.
std::vector<double> resample(std::span<const double> values, std::size_t length);

}  // namespace leakdetect::signal
