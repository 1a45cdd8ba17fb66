#include "leakdetect/signal/segment.hpp"

namespace leakdetect::signal {

std::vector<CycleSegment> segment_cycles(const sim::Trace& trace, std::size_t min_cycle_samples)
{
    trace.validate();
    std::vector<CycleSegment> segments;
    const std::size_t n = trace.size();
    std::size_t start = 0;
    while (start < n) {
        std::size_t end = start + 1;
        while (end < n && trace.u[end] == trace.u[start]) ++end;
        if (end - start >= min_cycle_samples) {
            CycleSegment seg;
            seg.samples.assign(trace.p1.begin() + static_cast<std::ptrdiff_t>(start),
                               trace.p1.begin() + static_cast<std::ptrdiff_t>(end));
            seg.direction = trace.u[start] > 0 ? Direction::extend : Direction::retract;
            seg.start_index = start;
            seg.end_index = end;
            seg.label = trace.label;
            segments.push_back(std::move(seg));
        }
        start = end;
    }
    return segments;
}

}  // namespace leakdetect::signal
