#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "../core/error.hpp"
#include "../nn/param.hpp"

namespace cocoanet {

template <typename T>
struct NamedParam {
    std::string name;
    Param<T>* param;
};

// Adam with the classic L2 coupling: lambda*w is added to the gradient
// before the moment updates, not applied as decoupled decay. Moments align
// with the canonical trainable-param visitation order and are lazily sized
// on the first step. Every step begins with a finiteness scan of all
// gradients; a poisoned step is rejected wholesale (no partial updates) so
// divergence is caught at its first appearance, not after the weights rot.
template <typename T>
class Adam {
public:
    Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
         double weight_decay = 0.0)
        : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
        if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
            throw ConfigError("adam betas must lie in [0, 1)");
        if (eps <= 0) throw ConfigError("adam epsilon must be positive");
        if (weight_decay < 0) throw ConfigError("weight decay must be >= 0");
    }

    void step(const std::vector<NamedParam<T>>& params, double lr) {
        if (lr <= 0) throw ConfigError("learning rate must be positive");
        if (m_.empty()) {
            for (const auto& np : params) {
                m_.emplace_back(np.param->value.shape());
                v_.emplace_back(np.param->value.shape());
            }
        } else if (m_.size() != params.size()) {
            throw std::logic_error("adam: parameter set changed between steps");
        }

        for (const auto& np : params) {
            np.param->ensure_grad();
            if (!np.param->grad.all_finite())
                throw TrainingDiverged("non-finite gradient in \"" + np.name +
                                       "\"; step rejected");
        }

        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param<T>& p = *params[i].param;
            Tensor<T>& m = m_[i];
            Tensor<T>& v = v_[i];
            if (!m.same_shape(p.value))
                throw std::logic_error("adam: moment shape drifted for \"" + params[i].name +
                                       "\"");
            for (std::size_t j = 0; j < p.value.size(); ++j) {
                const double g =
                    static_cast<double>(p.grad[j]) + weight_decay_ * p.value[j];
                const double mj = beta1_ * m[j] + (1.0 - beta1_) * g;
                const double vj = beta2_ * v[j] + (1.0 - beta2_) * g * g;
                m[j] = static_cast<T>(mj);
                v[j] = static_cast<T>(vj);
                const double mhat = mj / bc1;
                const double vhat = vj / bc2;
                p.value[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    long long steps_taken() const { return t_; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }
    double epsilon() const { return eps_; }
    double weight_decay() const { return weight_decay_; }

    const std::vector<Tensor<T>>& moments1() const { return m_; }
    const std::vector<Tensor<T>>& moments2() const { return v_; }

    void restore(long long t, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
        if (m.size() != v.size()) throw std::logic_error("adam: moment vectors disagree");
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    double beta1_, beta2_, eps_, weight_decay_;
    long long t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

} // namespace cocoanet
