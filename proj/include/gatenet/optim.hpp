#pragma once

#include <cmath>
#include <cstdint>

#include "gatenet/common.hpp"
#include "gatenet/model.hpp"

namespace gatenet {

// base_lr * (1 - iter/max_iter)^power, stepped per iteration.
inline double poly_lr(std::int64_t iter, std::int64_t max_iter, double base_lr,
                      double power = 0.9) {
    require(max_iter > 0, "poly_lr: max_iter must be positive");
    require(iter >= 0, "poly_lr: negative iteration");
    require(iter <= max_iter, "poly_lr: iter ", iter, " exceeds max_iter ", max_iter);
    return base_lr * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(max_iter),
                              power);
}

// Classical-momentum SGD with L2 weight decay on conv weights only (biases
// are exempt). Aborts on non-finite gradients, naming the parameter.
template <typename T>
void sgd_step(ParamTable<T>& params, T lr, T momentum, T weight_decay) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamEntry<T>& e = params[i];
        const T wd = e.is_bias ? T(0) : weight_decay;
        T* value = e.value.data();
        T* grad = e.grad.data();
        T* vel = e.velocity.data();
        for (std::size_t k = 0; k < e.value.size(); ++k) {
            if (!std::isfinite(grad[k]))
                throw NumericError(strcat_all("sgd_step: non-finite gradient in parameter '",
                                              e.name, "' at element ", k));
            const T g = grad[k] + wd * value[k];
            vel[k] = momentum * vel[k] + g;
            value[k] -= lr * vel[k];
        }
    }
}

}  // namespace gatenet
