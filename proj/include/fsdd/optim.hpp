#pragma once

#include <stdexcept>
#include <vector>

#include "fsdd/params.hpp"

namespace fsdd {

// SGD with momentum: v <- momentum*v + g; p <- p - lr*v.
// Frozen parameters and their velocity buffers are never touched.
template <typename T>
class SgdT {
public:
    SgdT(T lr, T momentum) : lr_(lr), momentum_(momentum) {
        check(lr > T(0), "sgd: learning rate must be positive");
        check(momentum >= T(0) && momentum < T(1), "sgd: momentum must be in [0,1)");
    }

    void step(ParamStoreT<T>& store) {
        if (velocity_.size() != store.size()) {
            velocity_.resize(store.size());
            for (size_t i = 0; i < store.size(); ++i)
                velocity_[i].assign(store.items()[i].tensor->values.size(), T(0));
        }
        for (size_t i = 0; i < store.size(); ++i) {
            auto& p = store.items()[i];
            if (p.frozen) continue;
            if (p.tensor->grad.empty())
                throw std::runtime_error("sgd: missing gradient on unfrozen parameter " + p.name);
            auto& v = velocity_[i];
            auto& vals = p.tensor->values;
            const auto& g = p.tensor->grad;
            for (size_t j = 0; j < vals.size(); ++j) {
                v[j] = momentum_ * v[j] + g[j];
                vals[j] -= lr_ * v[j];
            }
        }
        for (auto& p : store.items())
            if (!p.tensor->grad.empty()) p.tensor->zero_grad();
    }

    T lr() const { return lr_; }
    T momentum() const { return momentum_; }

    std::vector<std::vector<T>>& velocities() { return velocity_; }
    const std::vector<std::vector<T>>& velocities() const { return velocity_; }

    // Checkpoint restore: buffers must align with the store's layout.
    void set_velocities(std::vector<std::vector<T>> v) { velocity_ = std::move(v); }

private:
    T lr_;
    T momentum_;
    std::vector<std::vector<T>> velocity_;
};

}  // namespace fsdd
