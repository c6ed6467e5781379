#include "dnea/integrate.hpp"

#include <cmath>

namespace dnea {

AccelerationFn model_dynamics(const RobotModel& model) {
  auto tree = std::make_shared<const BodyTree<double>>(instantiate(model));
  ActuatorModel actuator = model.actuator;
  return [tree, actuator](const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                          const Eigen::VectorXd& tau) {
    return aba<double>(*tree, q, qd, apply_actuator(actuator, tau, q, qd));
  };
}

namespace {

bool admissible(const Eigen::VectorXd& x, const RolloutOptions& o) {
  const Eigen::Index n = x.size() / 2;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || std::abs(x[i]) > o.bound) return false;
    if (i >= n && std::abs(x[i]) > o.velocity_bound) return false;
  }
  return true;
}

}  // namespace

Trajectory rollout(const AccelerationFn& f, const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                   const std::vector<Eigen::VectorXd>& u_seq, double dt,
                   const RolloutOptions& options) {
  if (!(dt > 0.0)) throw std::invalid_argument("rollout: dt must be positive");
  const Eigen::Index n = q0.size();
  if (qd0.size() != n) throw DimensionError("rollout: q0 and qd0 differ in length");
  for (const auto& u : u_seq) {
    if (u.size() != n) throw DimensionError("rollout: torque has wrong length");
  }

  Trajectory traj;
  traj.dt = dt;
  const auto state_derivative = [&f, n](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd dx(2 * n);
    dx << x.tail(n), f(x.head(n), x.tail(n), u);
    return dx;
  };
  auto record = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u, std::size_t step) {
    JointState s;
    s.q = x.head(n);
    s.qd = x.tail(n);
    s.tau = u;
    s.qdd = f(s.q, s.qd, u);
    traj.time.push_back(static_cast<double>(step) * dt);
    traj.states.push_back(std::move(s));
  };

  Eigen::VectorXd x(2 * n);
  x << q0, qd0;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  if (!admissible(x, options)) {
    traj.diverged = true;
    traj.divergence_step = 0;
    return traj;
  }
  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    record(x, u_seq[k], k);
    Eigen::VectorXd next;
    try {
      next = rk4_step<double>(state_derivative, x, u_seq[k], dt);
    } catch (const DivergenceError&) {
      traj.diverged = true;
      traj.divergence_step = static_cast<int>(k + 1);
      return traj;
    }
    if (!admissible(next, options)) {
      traj.diverged = true;
      traj.divergence_step = static_cast<int>(k + 1);
      return traj;
    }
    x = next;
  }
  record(x, u_seq.empty() ? zero : u_seq.back(), u_seq.size());
  return traj;
}

Trajectory rollout(const RobotModel& model, const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                   const std::vector<Eigen::VectorXd>& u_seq, double dt,
                   const RolloutOptions& options) {
  Trajectory t = rollout(model_dynamics(model), q0, qd0, u_seq, dt, options);
  t.model_id = model.name;
  return t;
}

}  // namespace dnea
