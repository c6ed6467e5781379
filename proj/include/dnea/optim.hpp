#ifndef DNEA_OPTIM_HPP_
#define DNEA_OPTIM_HPP_

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dnea/autodiff.hpp"

namespace dnea {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with a per-coordinate learning rate, so parameter groups can use
/// different step sizes.
class Adam {
 public:
  Adam(Eigen::VectorXd learning_rates, AdamConfig config = {})
      : lr_(std::move(learning_rates)),
        config_(config),
        m_(Eigen::VectorXd::Zero(lr_.size())),
        v_(Eigen::VectorXd::Zero(lr_.size())) {}

  /// In-place update of x given the gradient; `scale` multiplies every
  /// learning rate (used for decay schedules).
  void step(Eigen::VectorXd& x, const Eigen::VectorXd& gradient, double scale = 1.0) {
    if (x.size() != lr_.size() || gradient.size() != lr_.size()) {
      throw std::invalid_argument("Adam::step: size mismatch");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, t_);
    const double c2 = 1.0 - std::pow(config_.beta2, t_);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double g = gradient[i];
      m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
      v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
      x[i] -= scale * lr_[i] * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + config_.epsilon);
    }
  }

  int steps() const { return t_; }

 private:
  Eigen::VectorXd lr_;
  AdamConfig config_;
  Eigen::VectorXd m_, v_;
  int t_ = 0;
};

struct LmConfig {
  int iterations = 50;
  double initial_damping = 1e-3;
  double tolerance = 1e-20;  // stop once the cost falls below this
};

struct LmResult {
  Eigen::VectorXd x;
  std::vector<double> cost;  // 0.5 |r|^2 after each accepted iteration, first entry at x0
};

/// Levenberg-Marquardt on a residual vector assembled from blocks. `block(i, x)`
/// returns the residuals of block i as Var; each block is taped separately so
/// the Jacobian costs one small reverse sweep per residual.
template <typename BlockFn>
LmResult levenberg_marquardt(BlockFn&& block, std::size_t blocks, Eigen::VectorXd x,
                             const LmConfig& config = {}) {
  const Eigen::Index n = x.size();
  auto evaluate = [&](const Eigen::VectorXd& at, Eigen::MatrixXd* jtj, Eigen::VectorXd* jtr) {
    double cost = 0.0;
    if (jtj) {
      jtj->setZero(n, n);
      jtr->setZero(n);
    }
    ad::Tape tape;
    std::vector<ad::Var> vars(static_cast<std::size_t>(n));
    Eigen::VectorXd row(n);
    for (std::size_t b = 0; b < blocks; ++b) {
      tape.clear();
      ad::TapeScope scope(tape);
      for (Eigen::Index i = 0; i < n; ++i) vars[static_cast<std::size_t>(i)] = ad::Var::independent(at[i]);
      const auto r = block(b, std::span<const ad::Var>(vars));
      for (Eigen::Index k = 0; k < r.size(); ++k) {
        const double rv = r[k].value();
        cost += 0.5 * rv * rv;
        if (!jtj || !r[k].recorded()) continue;
        const std::vector<double> adj = tape.adjoints(r[k].index());
        for (Eigen::Index i = 0; i < n; ++i) row[i] = adj[static_cast<std::size_t>(i)];
        jtj->noalias() += row * row.transpose();
        *jtr += row * rv;
      }
    }
    return cost;
  };

  LmResult result;
  Eigen::MatrixXd jtj;
  Eigen::VectorXd jtr;
  double cost = evaluate(x, &jtj, &jtr);
  result.cost.push_back(cost);
  double mu = config.initial_damping;
  for (int it = 0; it < config.iterations && cost > config.tolerance; ++it) {
    bool accepted = false;
    for (int attempt = 0; attempt < 20 && !accepted; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += mu * (jtj.diagonal().array() + 1e-12).matrix();
      const Eigen::VectorXd step = a.ldlt().solve(-jtr);
      const Eigen::VectorXd trial = x + step;
      const double c = evaluate(trial, nullptr, nullptr);
      if (std::isfinite(c) && c < cost) {
        x = trial;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
      } else {
        mu *= 4.0;
      }
    }
    if (!accepted) break;
    cost = evaluate(x, &jtj, &jtr);
    result.cost.push_back(cost);
  }
  result.x = x;
  return result;
}

}  // namespace dnea

#endif  // DNEA_OPTIM_HPP_
