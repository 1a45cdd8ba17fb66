#pragma once

#include <array>
#include <chrono>
#include <exception>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "leakdetect/nn/network.hpp"
#include "leakdetect/signal/segment.hpp"
#include "leakdetect/sim/hydraulics.hpp"

namespace leakdetect::rt {

struct DetectorConfig {
    std::size_t min_cycle_samples = signal::kDefaultMinCycleSamples;
    // 0 selects ten times the model's sequence length.
    std::size_t max_cycle_samples = 0;
};

struct Classification {
    std::uint64_t cycle_index = 0;
    sim::LeakClass predicted = sim::LeakClass::NoLeak;
    std::array<double, 3> probs{};
    signal::Direction direction = signal::Direction::extend;
    std::size_t samples = 0;
    // Seconds from cycle-completion detection to emit, and the
    // resample + z-score part of that.
    double latency = 0.0;
    double preprocess_latency = 0.0;
};

struct LatencyStats {
    double mean = 0.0;
    double p95 = 0.0;
    double max = 0.0;
};

struct LatencyReport {
    std::vector<double> latencies;
    LatencyStats total;
    LatencyStats preprocess;
    std::size_t count = 0;
};

/// Aggregates per-cycle timings. Throws Error(empty_report) when empty.
LatencyReport make_latency_report(const std::vector<double>& latencies, const std::vector<double>& preprocess);

using RuntimeNetwork = nn::Network<nn::RuntimeScalar>;

/// Resamples, z-scores with the embedded norm stats and classifies one cycle.
class CycleClassifier {
public:
    explicit CycleClassifier(RuntimeNetwork net);

    const RuntimeNetwork& network() const noexcept { return net_; }
    std::size_t sequence_length() const noexcept { return net_.sequence_length; }

    /// Fills everything except cycle_index and latency.
    Classification classify(const std::vector<double>& samples, signal::Direction direction,
                            double* preprocess_seconds = nullptr) const;

private:
    RuntimeNetwork net_;
};

/**
 * Splits a sample stream into cycles at valve-command sign changes.
 * Holds at most max_cycle_samples; a run that grows past that raises
 * Error(stuck_cycle). Non-increasing time raises Error(ordering).
 */
class CycleTracker {
public:
    CycleTracker(std::size_t min_cycle_samples, std::size_t max_cycle_samples);

    struct Completed {
        std::vector<double> samples;
        signal::Direction direction;
    };

    /// Returns the finished cycle when `u` flips and the cycle is long enough.
    std::optional<Completed> push(double t, double p1, int u);

    std::size_t buffered() const noexcept { return buffer_.size(); }
    std::size_t capacity() const noexcept { return max_; }

private:
    std::size_t min_;
    std::size_t max_;
    std::vector<double> buffer_;
    std::optional<double> last_t_;
    int last_u_ = 0;
};

/// Synchronous detector: inference runs on the producer's call.
class Detector {
public:
    explicit Detector(RuntimeNetwork net, const DetectorConfig& config = {});

    std::optional<Classification> push_sample(double t, double p1, int u);
    LatencyReport latency_report() const;

    std::uint64_t cycles_emitted() const noexcept { return next_cycle_; }
    std::size_t buffered() const noexcept { return tracker_.buffered(); }
    std::size_t buffer_capacity() const noexcept { return tracker_.capacity(); }

private:
    CycleClassifier classifier_;
    CycleTracker tracker_;
    std::uint64_t next_cycle_ = 0;
    std::vector<double> latencies_;
    std::vector<double> preprocess_;
};

/**
 * Hand-off detector: the producer only splits cycles and queues them; a
 * worker thread classifies them in order. Latency includes queueing.
 */
class AsyncDetector {
public:
    explicit AsyncDetector(RuntimeNetwork net, const DetectorConfig& config = {});
    ~AsyncDetector();
    AsyncDetector(const AsyncDetector&) = delete;
    AsyncDetector& operator=(const AsyncDetector&) = delete;

    void push_sample(double t, double p1, int u);
    /// Classifications finished so far, in cycle order.
    std::vector<Classification> poll();
    /// Waits for every queued cycle, then returns what poll() would.
    std::vector<Classification> flush();
    LatencyReport latency_report() const;

private:
    struct Job {
        std::uint64_t cycle_index;
        CycleTracker::Completed cycle;
        std::chrono::steady_clock::time_point detected;
    };

    void run();

    CycleClassifier classifier_;
    CycleTracker tracker_;
    std::uint64_t next_cycle_ = 0;

    mutable std::mutex mutex_;
    std::condition_variable work_ready_;
    std::condition_variable idle_;
    std::deque<Job> jobs_;
    std::vector<Classification> done_;
    std::vector<double> latencies_;
    std::vector<double> preprocess_;
    bool busy_ = false;
    bool stopping_ = false;
    std::exception_ptr failure_;
    std::thread worker_;
};

}  // namespace leakdetect::rt
