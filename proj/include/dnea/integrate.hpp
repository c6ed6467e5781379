#ifndef DNEA_INTEGRATE_HPP_
#define DNEA_INTEGRATE_HPP_

// Fixed-step RK4 with zero-order-hold inputs, and joint-space rollouts.

#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnea/autodiff.hpp"
#include "dnea/dynamics.hpp"
#include "dnea/model.hpp"

namespace dnea {

inline constexpr double kDefaultDt = 1.0 / 250.0;

/// A stage derivative of rk4_step was not finite.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(int stage)
      : std::runtime_error("rk4: non-finite derivative at stage " + std::to_string(stage)),
        stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// One classical RK4 step of xdot = f(x, u) with u held constant.
template <typename S, typename F>
VecX<S> rk4_step(F&& f, const VecX<S>& x, const VecX<S>& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  auto checked = [](const VecX<S>& k, int stage) {
    for (Eigen::Index i = 0; i < k.size(); ++i) {
      if (!std::isfinite(ad::value(k[i]))) throw DivergenceError(stage);
    }
    return k;
  };
  const S h(dt);
  const S half(0.5 * dt);
  const VecX<S> k1 = checked(f(x, u), 1);
  const VecX<S> k2 = checked(f(VecX<S>(x + k1 * half), u), 2);
  const VecX<S> k3 = checked(f(VecX<S>(x + k2 * half), u), 3);
  const VecX<S> k4 = checked(f(VecX<S>(x + k3 * h), u), 4);
  return x + (k1 + k2 * S(2) + k3 * S(2) + k4) * (h / S(6));
}

/// qdd = f(q, qd, tau)
using AccelerationFn = std::function<Eigen::VectorXd(
    const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& tau)>;

AccelerationFn model_dynamics(const RobotModel& model);

struct RolloutOptions {
  double bound = 1e6;  // any |state component| above this flags divergence
  /// Optional tighter limit on |qd| alone; revolute angles may wind up
  /// without anything diverging.
  double velocity_bound = std::numeric_limits<double>::infinity();
};

struct Trajectory {
  double dt = kDefaultDt;
  std::string model_id;
  std::vector<double> time;
  std::vector<JointState> states;
  bool diverged = false;
  int divergence_step = -1;

  std::size_t size() const { return states.size(); }
};

/// Integrates from (q0, qd0) under the torque sequence; the result holds
/// u_seq.size() + 1 states unless the rollout diverged, in which case it
/// stops at the last admissible state.
Trajectory rollout(const AccelerationFn& f, const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                   const std::vector<Eigen::VectorXd>& u_seq, double dt = kDefaultDt,
                   const RolloutOptions& options = {});

Trajectory rollout(const RobotModel& model, const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                   const std::vector<Eigen::VectorXd>& u_seq, double dt = kDefaultDt,
                   const RolloutOptions& options = {});

}  // namespace dnea

#endif  // DNEA_INTEGRATE_HPP_
