#include "leakdetect/rt/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "leakdetect/error.hpp"
#include "leakdetect/signal/normalize.hpp"
#include "leakdetect/train/trainer.hpp"

namespace leakdetect::rt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    const double s = std::chrono::duration<double>(Clock::now() - start).count();
    return std::max(s, 1e-9);
}

LatencyStats summarize(std::vector<double> v)
{
    LatencyStats s;
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    std::sort(v.begin(), v.end());
    // Nearest-rank percentile.
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size())));
    s.p95 = v[std::max<std::size_t>(rank, 1) - 1];
    s.max = v.back();
    return s;
}

std::size_t resolve_max(const DetectorConfig& config, std::size_t sequence_length)
{
    if (config.max_cycle_samples != 0) return config.max_cycle_samples;
    if (sequence_length == 0) throw Error(ErrorCode::config, "model has no sequence length; set max_cycle_samples");
    return 10 * sequence_length;
}

}  // namespace

LatencyReport make_latency_report(const std::vector<double>& latencies, const std::vector<double>& preprocess)
{
    if (latencies.empty()) throw Error(ErrorCode::empty_report, "no cycles have been classified yet");
    LatencyReport r;
    r.latencies = latencies;
    r.count = latencies.size();
    r.total = summarize(latencies);
    r.preprocess = summarize(preprocess);
    return r;
}

CycleClassifier::CycleClassifier(RuntimeNetwork net) : net_(std::move(net))
{
    net_.check();
    if (net_.spec.input_dim != 1) throw Error(ErrorCode::incompatible, "detector needs a single-channel model");
    if (net_.sequence_length < 2) throw Error(ErrorCode::incompatible, "model does not record a sequence length");
}

Classification CycleClassifier::classify(const std::vector<double>& samples, signal::Direction direction,
                                         double* preprocess_seconds) const
{
    const auto start = Clock::now();
    std::vector<double> values = signal::resample(samples, net_.sequence_length);
    for (double& v : values) v = net_.norm.apply(v);
    if (preprocess_seconds) *preprocess_seconds = seconds_since(start);

    const std::vector<double>* one = &values;
    const auto result = nn::network_forward(net_, nn::make_batch<nn::RuntimeScalar>(std::span(one, 1)), false);

    Classification c;
    for (int k = 0; k < 3; ++k) c.probs[static_cast<std::size_t>(k)] = static_cast<double>(result.probs(0, k));
    c.predicted = sim::leak_class_from_int(train::argmax_class(c.probs));
    c.direction = direction;
    c.samples = samples.size();
    return c;
}

CycleTracker::CycleTracker(std::size_t min_cycle_samples, std::size_t max_cycle_samples)
    : min_(min_cycle_samples), max_(max_cycle_samples)
{
    if (max_ < 2 || min_ > max_) throw Error(ErrorCode::config, "need 2 <= max_cycle_samples and min <= max");
    buffer_.reserve(max_);
}

std::optional<CycleTracker::Completed> CycleTracker::push(double t, double p1, int u)
{
    if (u != 1 && u != -1) throw Error(ErrorCode::data, "valve command must be +1 or -1, got " + std::to_string(u));
    if (!std::isfinite(t) || !std::isfinite(p1)) throw Error(ErrorCode::data, "non-finite sample");
    if (last_t_ && !(t > *last_t_))
        throw Error(ErrorCode::ordering, "sample time " + std::to_string(t) + " does not advance past " +
                                             std::to_string(*last_t_));
    last_t_ = t;

    std::optional<Completed> done;
    if (last_u_ != 0 && u != last_u_) {
        if (buffer_.size() >= min_) {
            done.emplace();
            done->samples.assign(buffer_.begin(), buffer_.end());
            done->direction = last_u_ > 0 ? signal::Direction::extend : signal::Direction::retract;
        }
        buffer_.clear();
    }
    last_u_ = u;
    if (buffer_.size() == max_) {
        buffer_.clear();
        throw Error(ErrorCode::stuck_cycle,
                    "no valve transition within " + std::to_string(max_) + " samples (t = " + std::to_string(t) + ")");
    }
    buffer_.push_back(p1);
    return done;
}

Detector::Detector(RuntimeNetwork net, const DetectorConfig& config)
    : classifier_(std::move(net)),
      tracker_(config.min_cycle_samples, resolve_max(config, classifier_.sequence_length()))
{
}

std::optional<Classification> Detector::push_sample(double t, double p1, int u)
{
    auto cycle = tracker_.push(t, p1, u);
    if (!cycle) return std::nullopt;
    const auto detected = Clock::now();
    double pre = 0.0;
    Classification c = classifier_.classify(cycle->samples, cycle->direction, &pre);
    c.cycle_index = next_cycle_++;
    c.preprocess_latency = pre;
    c.latency = seconds_since(detected);
    latencies_.push_back(c.latency);
    preprocess_.push_back(pre);
    return c;
}

LatencyReport Detector::latency_report() const { return make_latency_report(latencies_, preprocess_); }

AsyncDetector::AsyncDetector(RuntimeNetwork net, const DetectorConfig& config)
    : classifier_(std::move(net)),
      tracker_(config.min_cycle_samples, resolve_max(config, classifier_.sequence_length())),
      worker_([this] { run(); })
{
}

AsyncDetector::~AsyncDetector()
{
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    work_ready_.notify_all();
    worker_.join();
}

void AsyncDetector::push_sample(double t, double p1, int u)
{
    auto cycle = tracker_.push(t, p1, u);
    if (!cycle) return;
    const auto detected = Clock::now();
    {
        std::lock_guard lock(mutex_);
        if (failure_) std::rethrow_exception(failure_);
        jobs_.push_back({next_cycle_++, std::move(*cycle), detected});
    }
    work_ready_.notify_one();
}

void AsyncDetector::run()
{
    std::unique_lock lock(mutex_);
    for (;;) {
        work_ready_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
        if (jobs_.empty()) return;
        Job job = std::move(jobs_.front());
        jobs_.pop_front();
        busy_ = true;
        lock.unlock();

        std::optional<Classification> c;
        std::exception_ptr error;
        double pre = 0.0;
        try {
            c = classifier_.classify(job.cycle.samples, job.cycle.direction, &pre);
            c->cycle_index = job.cycle_index;
            c->preprocess_latency = pre;
            c->latency = seconds_since(job.detected);
        } catch (...) {
            error = std::current_exception();
        }

        lock.lock();
        busy_ = false;
        if (c) {
            done_.push_back(*c);
            latencies_.push_back(c->latency);
            preprocess_.push_back(pre);
        } else if (!failure_) {
            failure_ = error;
        }
        if (jobs_.empty()) idle_.notify_all();
    }
}

std::vector<Classification> AsyncDetector::poll()
{
    std::lock_guard lock(mutex_);
    if (failure_) std::rethrow_exception(failure_);
    std::vector<Classification> out;
    out.swap(done_);
    return out;
}

std::vector<Classification> AsyncDetector::flush()
{
    {
        std::unique_lock lock(mutex_);
        idle_.wait(lock, [this] { return jobs_.empty() && !busy_; });
    }
    return poll();
}

LatencyReport AsyncDetector::latency_report() const
{
    std::lock_guard lock(mutex_);
    return make_latency_report(latencies_, preprocess_);
}

}  // namespace leakdetect::rt
