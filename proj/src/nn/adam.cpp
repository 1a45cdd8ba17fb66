#include "leakdetect/nn/adam.hpp"

#include <cmath>
#include <string>

#include "leakdetect/error.hpp"

namespace leakdetect::nn {

void AdamConfig::validate() const
{
    if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::config, "adam lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw Error(ErrorCode::config, "adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw Error(ErrorCode::config, "adam epsilon must be positive");
    if (!(global_clip_norm >= 0.0) || !std::isfinite(global_clip_norm))
        throw Error(ErrorCode::config, "adam global_clip_norm must be >= 0");
}

template <typename S>
void adam_step(std::span<const std::span<S>> params, std::span<const std::span<const S>> grads, AdamState<S>& state)
{
    if (params.size() != grads.size())
        throw Error(ErrorCode::dimension, "adam got " + std::to_string(params.size()) + " parameter tensors and " +
                                              std::to_string(grads.size()) + " gradients");
    double norm_sq = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size() != grads[k].size())
            throw Error(ErrorCode::dimension, "adam tensor " + std::to_string(k) + " shape mismatch");
        for (S g : grads[k]) {
            const auto gd = static_cast<double>(g);
            if (!std::isfinite(gd))
                throw Error(ErrorCode::training_diverged, "non-finite gradient in tensor " + std::to_string(k));
            norm_sq += gd * gd;
        }
    }
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
            state.m[k].assign(params[k].size(), S(0));
            state.v[k].assign(params[k].size(), S(0));
        }
    } else if (state.m.size() != params.size()) {
        throw Error(ErrorCode::dimension, "adam state does not match the parameter list");
    }

    ++state.step;
    const AdamConfig& c = state.config;
    const double t = static_cast<double>(state.step);
    const S b1 = static_cast<S>(c.beta1);
    const S b2 = static_cast<S>(c.beta2);
    const S correct1 = static_cast<S>(1.0 - std::pow(c.beta1, t));
    const S correct2 = static_cast<S>(1.0 - std::pow(c.beta2, t));
    const S lr = static_cast<S>(c.lr);
    const S eps = static_cast<S>(c.epsilon);
    const double norm = std::sqrt(norm_sq);
    const S scale = c.global_clip_norm > 0.0 && norm > c.global_clip_norm ? static_cast<S>(c.global_clip_norm / norm)
                                                                           : S(1);

    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& m = state.m[k];
        auto& v = state.v[k];
        if (m.size() != params[k].size()) throw Error(ErrorCode::dimension, "adam moment shape mismatch");
        S* theta = params[k].data();
        const S* grad = grads[k].data();
        for (std::size_t i = 0; i < m.size(); ++i) {
            const S g = scale * grad[i];
            m[i] = b1 * m[i] + (S(1) - b1) * g;
            v[i] = b2 * v[i] + (S(1) - b2) * g * g;
            const S m_hat = m[i] / correct1;
            const S v_hat = v[i] / correct2;
            theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

template void adam_step(std::span<const std::span<float>>, std::span<const std::span<const float>>,
                        AdamState<float>&);
template void adam_step(std::span<const std::span<double>>, std::span<const std::span<const double>>,
                        AdamState<double>&);

}  // namespace leakdetect::nn
