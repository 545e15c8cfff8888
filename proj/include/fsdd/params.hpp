#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fsdd/rng.hpp"
#include "fsdd/tensor.hpp"

namespace fsdd {

template <typename T>
struct ParameterT {
    std::string name;  // path-like, unique within a store
    TensorPtrT<T> tensor;
    bool frozen = false;
};

// Ordered registry of all learnable weights; registration order defines the
// checkpoint layout, so construct modules in a fixed order.
template <typename T>
class ParamStoreT {
public:
    TensorPtrT<T> add(const std::string& name, std::vector<int> shape) {
        check(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
        auto t = make_tensor<T>(std::move(shape));
        t->requires_grad = true;
        index_[name] = params_.size();
        params_.push_back(ParameterT<T>{name, t, false});
        return t;
    }

    ParameterT<T>& at(const std::string& name) {
        auto it = index_.find(name);
        check(it != index_.end(), "unknown parameter: " + name);
        return params_[it->second];
    }

    const ParameterT<T>& at(const std::string& name) const {
        auto it = index_.find(name);
        check(it != index_.end(), "unknown parameter: " + name);
        return params_[it->second];
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    void freeze_prefix(const std::string& prefix, bool frozen = true) {
        for (auto& p : params_)
            if (p.name.rfind(prefix, 0) == 0) p.frozen = frozen;
    }

    std::vector<ParameterT<T>>& items() { return params_; }
    const std::vector<ParameterT<T>>& items() const { return params_; }
    size_t size() const { return params_.size(); }

private:
    std::vector<ParameterT<T>> params_;
    std::unordered_map<std::string, size_t> index_;
};

// Kaiming-uniform fill: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
template <typename T>
void init_kaiming(const TensorPtrT<T>& t, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t->values) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void init_uniform(const TensorPtrT<T>& t, double lo, double hi, Rng& rng) {
    for (auto& v : t->values) v = static_cast<T>(rng.uniform(lo, hi));
}

template <typename T>
void init_constant(const TensorPtrT<T>& t, T value) {
    std::fill(t->values.begin(), t->values.end(), value);
}

}  // namespace fsdd
