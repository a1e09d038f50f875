#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "wss/model/network.hpp"

namespace wss {

struct SgdSettings {
    double learning_rate = 16e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
};

/// Momentum SGD on one flat parameter block:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr * v
template <typename T>
void sgd_update(std::span<T> param, std::span<const T> grad, std::span<T> velocity, const SgdSettings& s) {
    if (param.size() != grad.size() || param.size() != velocity.size())
        throw std::invalid_argument("sgd_update: size mismatch");
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double v = s.momentum * static_cast<double>(velocity[i]) + static_cast<double>(grad[i]) +
                         s.weight_decay * static_cast<double>(param[i]);
        velocity[i] = static_cast<T>(v);
        param[i] = static_cast<T>(static_cast<double>(param[i]) - s.learning_rate * v);
    }
}

/// Applies sgd_update to every tensor. `velocity` is created (zero) for tensors it lacks.
/// Every gradient is checked before any parameter changes; a non-finite value throws
/// std::runtime_error naming the tensor.
void sgd_step(NetworkParams& params, const TensorSet& grads, TensorSet& velocity, const SgdSettings& settings);

}  // namespace wss
