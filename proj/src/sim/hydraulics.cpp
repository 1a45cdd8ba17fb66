#include "leakdetect/sim/hydraulics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "leakdetect/error.hpp"

namespace leakdetect::sim {

namespace {

// Keeps the orifice Jacobian finite when the pressure drop vanishes.
constexpr double kOrificeRegularization = 1.0;  // Pa

double signed_sqrt(double dp) { return std::copysign(std::sqrt(std::abs(dp)), dp); }

double sign(double value) { return (value > 0.0) - (value < 0.0); }

void require(bool ok, const std::string& what)
{
    if (!ok) throw Error(ErrorCode::config, what);
}

// Orifice flow into a chamber and its sensitivity to the chamber pressure.
struct OrificeFlow {
    double flow;
    double conductance;  // -d(flow)/d(p_chamber), regularized near zero drop
};

OrificeFlow orifice(double port, double p, double gain)
{
    const double dp = port - p;
    return {gain * signed_sqrt(dp), gain / (2.0 * std::sqrt(std::abs(dp) + kOrificeRegularization))};
}

}  // namespace

std::string_view to_string(LeakClass c) noexcept
{
    switch (c) {
    case LeakClass::NoLeak: return "none";
    case LeakClass::LowLeak: return "low";
    case LeakClass::HighLeak: return "high";
    }
    return "unknown";
}

LeakClass leak_class_from_int(int code)
{
    if (code < 0 || code >= kNumClasses)
        throw Error(ErrorCode::label, "leak class code out of range: " + std::to_string(code));
    return static_cast<LeakClass>(code);
}

double ActuatorParams::cap_area() const noexcept
{
    const double r = bore_diameter / 2.0;
    return std::numbers::pi * r * r;
}

double ActuatorParams::rod_side_area() const noexcept
{
    const double r = rod_diameter / 2.0;
    return cap_area() - std::numbers::pi * r * r;
}

void ActuatorParams::validate() const
{
    require(rod_diameter > 0.0, "rod_diameter must be positive");
    require(bore_diameter > rod_diameter, "bore_diameter must exceed rod_diameter");
    require(stroke > 0.0, "stroke must be positive");
    require(bulk_modulus > 0.0, "bulk_modulus must be positive");
    require(supply_pressure > 0.0, "supply_pressure must be positive");
    require(relief_pressure > 0.0 && relief_pressure <= supply_pressure,
            "relief_pressure must satisfy 0 < relief <= supply");
    require(moving_mass > 0.0, "moving_mass must be positive");
    require(viscous_friction >= 0.0, "viscous_friction must be non-negative");
    require(coulomb_friction >= 0.0, "coulomb_friction must be non-negative");
    require(valve_flow_gain > 0.0, "valve_flow_gain must be positive");
    require(dead_volume > 0.0, "dead_volume must be positive");
    require(leak_coefficient >= 0.0, "leak_coefficient must be non-negative");
}

double leak_coefficient(LeakClass c, const LeakCalibration& calibration)
{
    if (!(calibration.k_low > 0.0 && calibration.k_low < calibration.k_high))
        throw Error(ErrorCode::config, "leak calibration requires 0 < k_low < k_high");
    switch (c) {
    case LeakClass::NoLeak: return 0.0;
    case LeakClass::LowLeak: return calibration.k_low;
    case LeakClass::HighLeak: return calibration.k_high;
    }
    throw Error(ErrorCode::label, "unknown leak class");
}

SimState step(const SimState& state, const ActuatorParams& params, int u, double dt)
{
    if (!(dt > 0.0)) throw Error(ErrorCode::config, "dt must be positive");
    if (u != 1 && u != -1) throw Error(ErrorCode::config, "valve command must be +1 or -1");

    const double a1 = params.cap_area();
    const double a2 = params.rod_side_area();
    const double m = params.moving_mass;

    SimState next = state;
    next.u = u;

    // Piston: m dv/dt = p1 A1 - p2 A2 - c v - Fc sign(v), with static friction at rest.
    const double pressure_force = state.p1 * a1 - state.p2 * a2;
    double drive = 0.0;
    if (state.v != 0.0) {
        drive = pressure_force - params.coulomb_friction * sign(state.v);
    } else if (std::abs(pressure_force) > params.coulomb_friction) {
        drive = pressure_force - params.coulomb_friction * sign(pressure_force);
    }
    double v = (state.v + dt * drive / m) / (1.0 + dt * params.viscous_friction / m);
    if (state.v != 0.0 && v * state.v < 0.0) v = 0.0;  // friction stops, never reverses

    double x = state.x + dt * v;
    if (x <= 0.0) {
        x = 0.0;
        v = 0.0;
    } else if (x >= params.stroke) {
        x = params.stroke;
        v = 0.0;
    }
    next.x = x;
    next.v = v;

    // Chambers: valve orifices and piston displacement.
    const double cap_port = u > 0 ? params.supply_pressure : 0.0;
    const double rod_port = u > 0 ? 0.0 : params.supply_pressure;
    const double v1 = params.dead_volume + a1 * x;
    const double v2 = params.dead_volume + a2 * (params.stroke - x);
    // Both chambers advance together with a linearly-implicit Euler step on
    // dp/dt = beta/V * (q_valve + q_displacement -/+ q_leak), which keeps the
    // sqrt orifice law stable when a chamber is down to its dead volume.
    const double k = params.leak_coefficient;
    const double b1 = params.bulk_modulus / v1;
    const double b2 = params.bulk_modulus / v2;
    const OrificeFlow o1 = orifice(cap_port, state.p1, params.valve_flow_gain);
    const OrificeFlow o2 = orifice(rod_port, state.p2, params.valve_flow_gain);
    const double q_leak = k * (state.p1 - state.p2);
    const double f1 = b1 * (o1.flow - a1 * v - q_leak);
    const double f2 = b2 * (o2.flow + a2 * v + q_leak);

    // (I - dt J) delta = dt f, J = [[-b1(g1+k), b1 k], [b2 k, -b2(g2+k)]]
    const double m11 = 1.0 + dt * b1 * (o1.conductance + k);
    const double m12 = -dt * b1 * k;
    const double m21 = -dt * b2 * k;
    const double m22 = 1.0 + dt * b2 * (o2.conductance + k);
    const double det = m11 * m22 - m12 * m21;
    const double p1 = state.p1 + dt * (m22 * f1 - m12 * f2) / det;
    const double p2 = state.p2 + dt * (m11 * f2 - m21 * f1) / det;

    next.p1 = std::clamp(p1, 0.0, params.relief_pressure);
    next.p2 = std::clamp(p2, 0.0, params.relief_pressure);

    const auto check = [](double value, const char* field) {
        if (!std::isfinite(value))
            throw Error(ErrorCode::simulation_diverged, std::string("simulation diverged: non-finite ") + field);
    };
    // clamp() passes NaN through, so checking after clamping is sufficient
    check(next.x, "x");
    check(next.v, "v");
    check(next.p1, "p1");
    check(next.p2, "p2");
    return next;
}

void SimConfig::validate() const
{
    require(dt > 0.0, "dt must be positive");
    require(sample_rate > 0.0 && sample_rate <= 1.0 / dt, "sample_rate must satisfy 0 < rate <= 1/dt");
    require(duration > 0.0, "duration must be positive");
    require(noise_std >= 0.0, "noise_std must be non-negative");
    require(n_cycles >= 1, "n_cycles must be at least 1");
}

void Trace::validate() const
{
    const std::size_t n = t.size();
    if (p1.size() != n || p2.size() != n || x.size() != n || u.size() != n)
        throw Error(ErrorCode::data, "trace channels have different lengths");
    for (std::size_t i = 1; i < n; ++i) {
        if (!(t[i] > t[i - 1])) throw Error(ErrorCode::data, "trace times are not strictly increasing");
    }
    for (int cmd : u) {
        if (cmd != 1 && cmd != -1) throw Error(ErrorCode::data, "trace valve command must be +1 or -1");
    }
}

Trace run_cycles(const ActuatorParams& params, const SimConfig& config, LeakClass c)
{
    params.validate();
    config.validate();

    ActuatorParams plant = params;
    plant.leak_coefficient = leak_coefficient(c, config.leak);

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> noise(0.0, config.noise_std > 0.0 ? config.noise_std : 1.0);
    const auto noisy = [&](double p) {
        if (config.noise_std == 0.0) return p;
        return std::clamp(p + noise(rng), 0.0, plant.relief_pressure);
    };

    Trace trace;
    trace.label = c;
    const auto reserve = static_cast<std::size_t>(config.n_cycles * 2.0 * config.sample_rate);
    trace.t.reserve(reserve);
    trace.p1.reserve(reserve);
    trace.p2.reserve(reserve);
    trace.x.reserve(reserve);
    trace.u.reserve(reserve);

    SimState state;
    state.u = 1;

    const auto record = [&](double t) {
        trace.t.push_back(t);
        // p1 before p2 keeps the noise stream order fixed
        const double p1 = noisy(state.p1);
        const double p2 = noisy(state.p2);
        trace.p1.push_back(p1);
        trace.p2.push_back(p2);
        trace.x.push_back(state.x);
        trace.u.push_back(state.u);
    };

    const double lower = kStrokeLimitBand * plant.stroke;
    const double upper = (1.0 - kStrokeLimitBand) * plant.stroke;
    const double slack = 1e-9 * config.dt;

    long sample_index = 0;
    record(0.0);
    ++sample_index;

    int completed = 0;
    bool finished = false;
    for (long n = 1;; ++n) {
        state = step(state, plant, state.u, config.dt);
        const double t = static_cast<double>(n) * config.dt;

        if (!finished) {
            if (state.u > 0 && state.x >= upper) {
                state.u = -1;
            } else if (state.u < 0 && state.x <= lower) {
                state.u = 1;
                finished = ++completed == config.n_cycles;
            }
        }

        for (double ts = static_cast<double>(sample_index) / config.sample_rate; ts <= t + slack;
             ts = static_cast<double>(sample_index) / config.sample_rate) {
            record(ts);
            ++sample_index;
            if (finished) return trace;
        }

        if (t > config.duration) {
            throw Error(ErrorCode::simulation_timeout,
                        "stroke limit not reached within " + std::to_string(config.duration) + " s after " +
                            std::to_string(completed) + " of " + std::to_string(config.n_cycles) + " cycles");
        }
    }
}

double mean_extension_pressure(const Trace& trace)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (trace.u[i] > 0) {
            sum += trace.p1[i];
            ++count;
        }
    }
    if (count == 0) throw Error(ErrorCode::data, "trace has no extension samples");
    return sum / static_cast<double>(count);
}

double mean_extension_speed(const Trace& trace)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i + 1 < trace.size(); ++i) {
        if (trace.u[i] > 0 && trace.u[i + 1] > 0) {
            sum += (trace.x[i + 1] - trace.x[i]) / (trace.t[i + 1] - trace.t[i]);
            ++count;
        }
    }
    if (count == 0) throw Error(ErrorCode::data, "trace has no extension samples");
    return sum / static_cast<double>(count);
}

int count_transitions(const Trace& trace)
{
    int n = 0;
    for (std::size_t i = 1; i < trace.size(); ++i) n += trace.u[i] != trace.u[i - 1];
    return n;
}

}  // namespace leakdetect::sim
