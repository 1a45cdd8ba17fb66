#pragma once

#include <cstddef>
#include <vector>

#include "leakdetect/sim/hydraulics.hpp"

namespace leakdetect::signal {

enum class Direction { extend, retract };

inline constexpr std::size_t kDefaultMinCycleSamples = 50;

/// One stroke of p1 samples, [start_index, end_index) into the parent trace.
struct CycleSegment {
    std::vector<double> samples;
    Direction direction = Direction::extend;
    std::size_t start_index = 0;
    std::size_t end_index = 0;
    sim::LeakClass label = sim::LeakClass::NoLeak;
};

/// One segment per maximal run of constant u; runs shorter than
/// min_cycle_samples are dropped.
std::vector<CycleSegment> segment_cycles(const sim::Trace& trace,
                                         std::size_t min_cycle_samples = kDefaultMinCycleSamples);

}  // namespace leakdetect::signal
