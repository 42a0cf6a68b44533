#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lsd2/error.hpp"
#include "lsd2/nets.hpp"

namespace lsd2 {

// Standard bias-corrected Adam. Moment buffers mirror the parameter list
// they were initialized against.
template <typename T>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int64_t step = 0;
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;

    void init_for(const std::vector<Param<T>>& params) {
        m.clear();
        v.clear();
        step = 0;
        for (const Param<T>& p : params) {
            m.emplace_back(p.value.data.size(), T(0));
            v.emplace_back(p.value.data.size(), T(0));
        }
    }

    bool matches(const std::vector<Param<T>>& params) const {
        if (m.size() != params.size()) return false;
        for (size_t i = 0; i < params.size(); ++i) {
            if (m[i].size() != params[i].value.data.size()) return false;
        }
        return true;
    }
};

template <typename T>
void adam_step(std::vector<Param<T>>& params, AdamState<T>& state) {
    if (!state.matches(params)) {
        throw TrainingError("adam_step: state does not match parameter shapes");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        std::vector<T>& m = state.m[i];
        std::vector<T>& v = state.v[i];
        std::vector<T>& value = params[i].value.data;
        const std::vector<T>& grad = params[i].grad.data;
        for (size_t j = 0; j < value.size(); ++j) {
            const double g = static_cast<double>(grad[j]);
            const double mj = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            const double vj = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            value[j] = static_cast<T>(value[j] - state.lr * mhat / (std::sqrt(vhat) + state.epsilon));
        }
    }
}

} // namespace lsd2
