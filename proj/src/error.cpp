#include "leakdetect/error.hpp"

namespace leakdetect {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::usage: return "usage";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
    case ErrorCode::data: return "data";
    case ErrorCode::missing_class: return "missing_class";
    case ErrorCode::degenerate_data: return "degenerate_data";
    case ErrorCode::too_short: return "too_short";
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::label: return "label";
    case ErrorCode::model_format: return "model_format";
    case ErrorCode::schema_version: return "schema_version";
    case ErrorCode::incompatible: return "incompatible";
    case ErrorCode::simulation_diverged: return "simulation_diverged";
    case ErrorCode::simulation_timeout: return "simulation_timeout";
    case ErrorCode::training_diverged: return "training_diverged";
    case ErrorCode::stuck_cycle: return "stuck_cycle";
    case ErrorCode::ordering: return "ordering";
    case ErrorCode::empty_report: return "empty_report";
    }
    return "unknown";
}

int exit_status(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::usage:
    case ErrorCode::config:
        return 2;
    case ErrorCode::simulation_diverged:
    case ErrorCode::training_diverged:
        return 4;
    default:
        return 3;
    }
}

}  // namespace leakdetect
