#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace leakdetect {

enum class ErrorCode {
    usage,
    config,
    io,
    data,
    missing_class,
    degenerate_data,
    too_short,
    dimension,
    label,
    model_format,
    schema_version,
    incompatible,
    simulation_diverged,
    simulation_timeout,
    training_diverged,
    stuck_cycle,
    ordering,
    empty_report,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Process exit status for a failure of the given kind: 2 usage, 3 data, 4 diverged.
int exit_status(ErrorCode code) noexcept;

/**
 * Base of every error raised by the toolkit. The code selects the CLI exit
 * status and the machine-readable tag printed on failure.
 */
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class TrainingDivergedError : public Error {
public:
    TrainingDivergedError(const std::string& message, int last_good_epoch)
        : Error(ErrorCode::training_diverged, message), last_good_epoch_(last_good_epoch) {}

    /// Last epoch (numbered from 1) that completed with finite loss, or 0.
    int last_good_epoch() const noexcept { return last_good_epoch_; }

private:
    int last_good_epoch_;
};

}  // namespace leakdetect
