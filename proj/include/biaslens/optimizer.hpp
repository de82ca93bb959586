#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "biaslens/errors.hpp"
#include "biaslens/model.hpp"

namespace biaslens {

// Adaptive-moment optimizer with decoupled weight decay over one parameter
// group (a weight matrix and its bias, moments laid out back to back).
// Decoupling means the decay term lr*wd*theta is applied outside the moment
// machinery: zero gradients contract parameters by exactly (1 - lr*wd) per
// step, and lr = 0 never moves them.
class AdamW {
public:
    AdamW(std::size_t size, double lr, double wd)
        : lr_(lr), wd_(wd), m_(size, 0.0), v_(size, 0.0) {}

    void step(Matrix& w, std::vector<double>& b, const Matrix& gw,
              const std::vector<double>& gb) {
        ++t_;
        bc1_ = 1.0 - std::pow(kBeta1, t_);
        bc2_ = 1.0 - std::pow(kBeta2, t_);
        bool finite = true;
        update(std::span<double>(w.data), std::span<const double>(gw.data), 0, finite);
        update(std::span<double>(b), std::span<const double>(gb), w.data.size(), finite);
        if (!finite) {
            throw NonFiniteLossError("parameter became non-finite during update");
        }
    }

    int steps_taken() const { return t_; }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    void update(std::span<double> params, std::span<const double> grads,
                std::size_t offset, bool& finite) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const std::size_t s = offset + i;
            m_[s] = kBeta1 * m_[s] + (1.0 - kBeta1) * grads[i];
            v_[s] = kBeta2 * v_[s] + (1.0 - kBeta2) * grads[i] * grads[i];
            const double m_hat = m_[s] / bc1_;
            const double v_hat = v_[s] / bc2_;
            params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + kEps) + lr_ * wd_ * params[i];
            finite = finite && std::isfinite(params[i]);
        }
    }

    double lr_;
    double wd_;
    int t_ = 0;
    double bc1_ = 1.0;
    double bc2_ = 1.0;
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace biaslens
