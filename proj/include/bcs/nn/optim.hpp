#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "bcs/errors.hpp"
#include "bcs/nn/layers.hpp"

namespace bcs::nn {

class Adam {
public:
    explicit Adam(std::vector<ParamRef> params, double lr = 2e-4, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (!params_[i].grad) throw ValidationError("Adam: parameter without gradient: " + params_[i].name);
            m_[i].assign(params_[i].value->size(), 0.0);
            v_[i].assign(params_[i].value->size(), 0.0);
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    void zero_grad() {
        for (auto& p : params_)
            std::fill(p.grad->begin(), p.grad->end(), 0.0);
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            std::vector<double>& w = *params_[i].value;
            const std::vector<double>& g = *params_[i].grad;
            std::vector<double>& m = m_[i];
            std::vector<double>& v = v_[i];
            for (std::size_t j = 0; j < w.size(); ++j) {
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    std::vector<ParamRef> params_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Halves the LR when the monitored metric stops improving, like the usual
// reduce-on-plateau schedule.
class PlateauScheduler {
public:
    PlateauScheduler(double factor = 0.5, int patience = 5, double min_lr = 1e-7)
        : factor_(factor), patience_(patience), min_lr_(min_lr) {}

    // Returns true when the LR was reduced this step.
    bool step(double metric, Adam& opt) {
        if (metric < best_ - 1e-12) {
            best_ = metric;
            bad_epochs_ = 0;
            return false;
        }
        ++bad_epochs_;
        if (bad_epochs_ > patience_) {
            bad_epochs_ = 0;
            const double next = std::max(opt.lr() * factor_, min_lr_);
            if (next < opt.lr()) {
                opt.set_lr(next);
                return true;
            }
        }
        return false;
    }

    double best() const { return best_; }

private:
    double factor_;
    int patience_;
    double min_lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
};

}  // namespace bcs::nn
