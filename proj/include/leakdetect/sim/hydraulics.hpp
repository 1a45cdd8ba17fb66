#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace leakdetect::sim {

/// Condition of the piston seal. The integer codes are the label encoding used everywhere.
enum class LeakClass : int { NoLeak = 0, LowLeak = 1, HighLeak = 2 };

inline constexpr int kNumClasses = 3;

std::string_view to_string(LeakClass c) noexcept;
LeakClass leak_class_from_int(int code);

/**
 * Physical constants of the double-acting cylinder and its 4/2 valve.
 *
 * Bore and rod default to a 63x28 mm cylinder. The valve gain is calibrated
 * so that a full extension takes roughly 0.65 s at the default supply
 * pressure; everything else is a plausible desk-scale value.
 */
struct ActuatorParams {
    double bore_diameter = 0.063;       // m
    double rod_diameter = 0.028;        // m
    double stroke = 0.16;               // m
    double bulk_modulus = 1.0e9;        // Pa
    double supply_pressure = 5.0e6;     // Pa
    double relief_pressure = 5.0e6;     // Pa
    double moving_mass = 5.0;           // kg
    double viscous_friction = 400.0;    // N*s/m
    double coulomb_friction = 50.0;     // N
    double valve_flow_gain = 4.0e-7;    // (m^3/s)/sqrt(Pa)
    double dead_volume = 2.0e-5;        // m^3 per chamber
    double leak_coefficient = 0.0;      // (m^3/s)/Pa, cap -> rod when P1 > P2

    double cap_area() const noexcept;
    double rod_side_area() const noexcept;

    /// Throws Error(config) naming the first violated constraint.
    void validate() const;
};

/// Laminar leak conductance for the two faulty classes.
struct LeakCalibration {
    double k_low = 2.0e-10;
    double k_high = 5.0e-10;
};

double leak_coefficient(LeakClass c, const LeakCalibration& calibration);

struct SimState {
    double x = 0.0;   // piston position, m
    double v = 0.0;   // velocity, m/s (positive = extending)
    double p1 = 0.0;  // cap-side pressure, Pa
    double p2 = 0.0;  // rod-side pressure, Pa
    int u = 1;        // valve command: +1 supply->cap, -1 supply->rod

    /// Cross-port flow, positive from cap to rod side.
    double leak_flow(const ActuatorParams& params) const noexcept
    {
        return params.leak_coefficient * (p1 - p2);
    }
};

/**
 * Advances the cylinder by one semi-implicit Euler step under valve command u.
 *
 * The piston is updated first (viscous term implicit), then both chamber
 * pressures together with a linearly-implicit step over the orifice and
 * leak flows so the sqrt orifice law stays stable for small volumes.
 * Pressures are clamped to [0, relief], position to [0, stroke] with the
 * velocity zeroed at an end stop.
 *
 * Throws Error(simulation_diverged) naming the first non-finite field.
 */
SimState step(const SimState& state, const ActuatorParams& params, int u, double dt);

struct SimConfig {
    double dt = 1.0e-4;           // integration step, s
    double sample_rate = 1000.0;  // Hz
    double duration = 600.0;      // wall of simulated time before a timeout, s
    double noise_std = 2.0e4;     // additive sensor noise on p1/p2, Pa
    std::uint64_t seed = 1;
    int n_cycles = 20;
    LeakCalibration leak;

    void validate() const;
};

/// Sampled channels of one simulated run. All vectors share one length.
struct Trace {
    std::vector<double> t;
    std::vector<double> p1;
    std::vector<double> p2;
    std::vector<double> x;
    std::vector<int> u;
    LeakClass label = LeakClass::NoLeak;

    std::size_t size() const noexcept { return t.size(); }
    void validate() const;

    friend bool operator==(const Trace&, const Trace&) = default;
};

/// Fraction of the stroke at either end where the valve command reverses.
inline constexpr double kStrokeLimitBand = 0.02;

/**
 * Runs n_cycles extend/retract strokes starting from rest at x = 0.
 *
 * The command flips whenever the piston enters the limit band at either
 * end. The run stops at the first sample taken after the final flip, so a
 * trace of n cycles has 2n command transitions and ends with a one-sample
 * run of u = +1.
 *
 * Throws Error(simulation_timeout) when the strokes do not complete within
 * config.duration.
 */
Trace run_cycles(const ActuatorParams& params, const SimConfig& config, LeakClass c);

/// Mean of p1 over samples where u == +1.
double mean_extension_pressure(const Trace& trace);

/// Mean of dx/dt over consecutive extension samples.
double mean_extension_speed(const Trace& trace);

/// Number of sign changes in the sampled valve command.
int count_transitions(const Trace& trace);

}  // namespace leakdetect::sim
