#pragma once

#include <filesystem>
#include <iosfwd>

#include "leakdetect/nn/network.hpp"

namespace leakdetect::nn {

// Model file: a JSON document with schema_version, the layer list
// (dims, activation, mode, flattened row-major weights), norm stats and
// the sequence length. Values round-trip bit-exactly.
template <typename S>
void save_model(std::ostream& out, const Network<S>& net);
template <typename S>
void save_model(const std::filesystem::path& path, const Network<S>& net);

/// Throws Error(model_format) for malformed or truncated input and
/// Error(schema_version) for an unknown version.
template <typename S>
Network<S> load_model(std::istream& in);
template <typename S>
Network<S> load_model(const std::filesystem::path& path);

}  // namespace leakdetect::nn
