#include "wss/train/sgd.hpp"

namespace wss {

void sgd_step(NetworkParams& params, const TensorSet& grads, TensorSet& velocity, const SgdSettings& settings) {
    if (grads.size() != params.tensors.size())
        throw std::invalid_argument("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                                    std::to_string(params.tensors.size()) + " parameters");
    for (const auto& [name, t] : params.tensors) {
        const auto it = grads.find(name);
        if (it == grads.end()) throw std::invalid_argument("sgd_step: missing gradient for " + name);
        if (it->second.shape != t.shape) throw std::invalid_argument("sgd_step: shape mismatch for " + name);
        for (float g : it->second.values)
            if (!std::isfinite(g)) throw std::runtime_error("sgd_step: non-finite gradient in " + name);
    }
    for (auto& [name, t] : params.tensors) {
        auto [vit, inserted] = velocity.try_emplace(name, Tensor(t.shape));
        if (vit->second.shape != t.shape) throw std::invalid_argument("sgd_step: velocity shape mismatch for " + name);
        sgd_update<float>(t.values, grads.at(name).values, vit->second.values, settings);
    }
}

}  // namespace wss
