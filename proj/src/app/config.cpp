#include "leakdetect/app/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <string>

#include "leakdetect/error.hpp"

namespace leakdetect::app {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text)
{
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw Error(ErrorCode::config, "bad value '" + std::string(text) + "' for key " + std::string(key));
    return value;
}

bool parse_bool(std::string_view key, std::string_view text)
{
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw Error(ErrorCode::config, "bad boolean '" + std::string(text) + "' for key " + std::string(key));
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Field {
    std::function<void(RunConfig&, std::string_view, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Field number(Access access)
{
    return {[access](RunConfig& c, std::string_view k, std::string_view v) { access(c) = parse_number<T>(k, v); },
            [access](const RunConfig& c) {
                if constexpr (std::is_floating_point_v<T>)
                    return fmt(access(const_cast<RunConfig&>(c)));
                else
                    return std::to_string(access(const_cast<RunConfig&>(c)));
            }};
}

const std::map<std::string, Field, std::less<>>& fields()
{
    static const std::map<std::string, Field, std::less<>> table = {
        {"seed", number<std::uint64_t>([](RunConfig& c) -> auto& { return c.seed; })},
        {"bore_diameter", number<double>([](RunConfig& c) -> auto& { return c.actuator.bore_diameter; })},
        {"rod_diameter", number<double>([](RunConfig& c) -> auto& { return c.actuator.rod_diameter; })},
        {"stroke", number<double>([](RunConfig& c) -> auto& { return c.actuator.stroke; })},
        {"bulk_modulus", number<double>([](RunConfig& c) -> auto& { return c.actuator.bulk_modulus; })},
        {"supply_pressure", number<double>([](RunConfig& c) -> auto& { return c.actuator.supply_pressure; })},
        {"relief_pressure", number<double>([](RunConfig& c) -> auto& { return c.actuator.relief_pressure; })},
        {"moving_mass", number<double>([](RunConfig& c) -> auto& { return c.actuator.moving_mass; })},
        {"viscous_friction", number<double>([](RunConfig& c) -> auto& { return c.actuator.viscous_friction; })},
        {"coulomb_friction", number<double>([](RunConfig& c) -> auto& { return c.actuator.coulomb_friction; })},
        {"valve_flow_gain", number<double>([](RunConfig& c) -> auto& { return c.actuator.valve_flow_gain; })},
        {"dead_volume", number<double>([](RunConfig& c) -> auto& { return c.actuator.dead_volume; })},
        {"k_low", number<double>([](RunConfig& c) -> auto& { return c.sim.leak.k_low; })},
        {"k_high", number<double>([](RunConfig& c) -> auto& { return c.sim.leak.k_high; })},
        {"dt", number<double>([](RunConfig& c) -> auto& { return c.sim.dt; })},
        {"sample_rate", number<double>([](RunConfig& c) -> auto& { return c.sim.sample_rate; })},
        {"duration", number<double>([](RunConfig& c) -> auto& { return c.sim.duration; })},
        {"noise_std", number<double>([](RunConfig& c) -> auto& { return c.sim.noise_std; })},
        {"cycles", number<int>([](RunConfig& c) -> auto& { return c.sim.n_cycles; })},
        {"repetitions", number<int>([](RunConfig& c) -> auto& { return c.repetitions; })},
        {"sequence_length", number<std::size_t>([](RunConfig& c) -> auto& { return c.sequence_length; })},
        {"min_cycle_samples", number<std::size_t>([](RunConfig& c) -> auto& { return c.min_cycle_samples; })},
        {"train_fraction", number<double>([](RunConfig& c) -> auto& { return c.train_fraction; })},
        {"peak_min_distance", number<std::size_t>([](RunConfig& c) -> auto& { return c.peak_min_distance; })},
        {"peak_prominence_fraction",
         number<double>([](RunConfig& c) -> auto& { return c.peak_prominence_fraction; })},
        {"lstm1_units", number<Eigen::Index>([](RunConfig& c) -> auto& { return c.network.lstm1_units; })},
        {"lstm2_units", number<Eigen::Index>([](RunConfig& c) -> auto& { return c.network.lstm2_units; })},
        {"dense1_units", number<Eigen::Index>([](RunConfig& c) -> auto& { return c.network.dense1_units; })},
        {"dense2_units", number<Eigen::Index>([](RunConfig& c) -> auto& { return c.network.dense2_units; })},
        {"dropout_rate", number<double>([](RunConfig& c) -> auto& { return c.network.dropout_rate; })},
        {"epochs", number<int>([](RunConfig& c) -> auto& { return c.training.epochs; })},
        {"lr", number<double>([](RunConfig& c) -> auto& { return c.training.lr; })},
        {"clip_norm", number<double>([](RunConfig& c) -> auto& { return c.training.clip_norm; })},
        {"batch_size", number<std::size_t>([](RunConfig& c) -> auto& { return c.training.batch_size; })},
        {"shuffle_each_epoch",
         {[](RunConfig& c, std::string_view k, std::string_view v) { c.training.shuffle_each_epoch = parse_bool(k, v); },
          [](const RunConfig& c) { return std::string(c.training.shuffle_each_epoch ? "true" : "false"); }}},
        {"max_cycle_samples", number<std::size_t>([](RunConfig& c) -> auto& { return c.max_cycle_samples; })},
    };
    return table;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value)
{
    const auto it = fields().find(trim(key));
    if (it == fields().end()) throw Error(ErrorCode::config, "unknown config key '" + std::string(trim(key)) + "'");
    it->second.set(*this, it->first, trim(value));
}

void RunConfig::load_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read config " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view s = line;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorCode::config, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        try {
            set(s.substr(0, eq), s.substr(eq + 1));
        } catch (const Error& e) {
            throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void RunConfig::validate() const
{
    actuator.validate();
    sim.validate();
    if (!(0.0 < sim.leak.k_low && sim.leak.k_low < sim.leak.k_high))
        throw Error(ErrorCode::config, "need 0 < k_low < k_high");
    if (repetitions < 1) throw Error(ErrorCode::config, "repetitions must be >= 1");
    if (sequence_length < 2) throw Error(ErrorCode::config, "sequence_length must be >= 2");
    if (min_cycle_samples < 2) throw Error(ErrorCode::config, "min_cycle_samples must be >= 2");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error(ErrorCode::config, "train_fraction must lie in (0, 1)");
    if (peak_min_distance < 1) throw Error(ErrorCode::config, "peak_min_distance must be >= 1");
    if (!(peak_prominence_fraction >= 0.0)) throw Error(ErrorCode::config, "peak_prominence_fraction must be >= 0");
    if (network.input_dim != 1) throw Error(ErrorCode::config, "input_dim is fixed at 1");
    network.validate();
    training.validate();
    if (max_cycle_samples != 0 && max_cycle_samples < min_cycle_samples)
        throw Error(ErrorCode::config, "max_cycle_samples must be >= min_cycle_samples");
}

std::vector<std::string> RunConfig::canonical_lines() const
{
    std::vector<std::string> lines;
    for (const auto& [key, field] : fields()) lines.push_back(key + " = " + field.get(*this));
    return lines;
}

std::string RunConfig::digest() const
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& line : canonical_lines()) {
        for (unsigned char ch : line + "\n") {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const std::vector<std::string_view>& RunConfig::keys()
{
    static const std::vector<std::string_view> list = [] {
        std::vector<std::string_view> k;
        for (const auto& entry : fields()) k.push_back(entry.first);
        return k;
    }();
    return list;
}

std::uint64_t trace_seed(std::uint64_t run_seed, sim::LeakClass c, int repetition) noexcept
{
    // splitmix64 finalizer over the packed tuple.
    std::uint64_t z = run_seed + 0x9E3779B97F4A7C15ULL * (1 + static_cast<std::uint64_t>(c) +
                                                           3 * static_cast<std::uint64_t>(repetition));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace leakdetect::app
