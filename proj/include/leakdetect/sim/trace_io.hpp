#pragma once

#include <filesystem>
#include <iosfwd>

#include "leakdetect/sim/hydraulics.hpp"

namespace leakdetect::sim {

// CSV schema: header `t,p1,p2,x,u,label`, one row per sample. Floats are
// written with 17 significant digits so a replayed trace is bit-identical.
void write_trace_csv(std::ostream& out, const Trace& trace);
void write_trace_csv(const std::filesystem::path& path, const Trace& trace);

Trace read_trace_csv(std::istream& in);
Trace read_trace_csv(const std::filesystem::path& path);

}  // namespace leakdetect::sim
