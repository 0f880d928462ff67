// Copyright 2026 The ivakit authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef IVA_OPTIMIZER_HPP
#define IVA_OPTIMIZER_HPP

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "iva/errors.hpp"

namespace iva {

// Minimizer contract: given the current parameters and the gradient of the
// loss, produce the next parameters in place. Implementations own their
// internal state (moment buffers etc.).
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void update(std::vector<double>& params,
                      const std::vector<double>& grad) = 0;
  virtual std::string name() const = 0;
};

class SgdOptimizer final : public Optimizer {
 public:
  explicit SgdOptimizer(double step) : step_(step) {}
  void update(std::vector<double>& params,
              const std::vector<double>& grad) override {
    require(params.size() == grad.size(), "sgd: size mismatch");
    for (size_t i = 0; i < params.size(); ++i) params[i] -= step_ * grad[i];
  }
  std::string name() const override { return "sgd"; }

 private:
  double step_;
};

// Diagonal adaptive first-order method (Adam).
class AdamOptimizer final : public Optimizer {
 public:
  explicit AdamOptimizer(double step, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : step_(step), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void update(std::vector<double>& params,
              const std::vector<double>& grad) override {
    require(params.size() == grad.size(), "adam: size mismatch");
    if (m_.empty()) {
      m_.assign(params.size(), 0.0);
      v_.assign(params.size(), 0.0);
    }
    require(m_.size() == params.size(), "adam: parameter size changed");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= step_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }
  std::string name() const override { return "adam"; }

 private:
  double step_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

inline std::unique_ptr<Optimizer> make_optimizer(const std::string& kind,
                                                 double step) {
  if (kind == "adam") return std::make_unique<AdamOptimizer>(step);
  if (kind == "sgd") return std::make_unique<SgdOptimizer>(step);
  throw std::invalid_argument("unknown optimizer: " + kind);
}

}  // namespace iva

#endif  // IVA_OPTIMIZER_HPP
