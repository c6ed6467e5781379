#include "dnea/dynamics.hpp"

namespace dnea {

DegenerateInertiaError::DegenerateInertiaError(int link, double value)
    : std::runtime_error("aba: articulated inertia of link " + std::to_string(link) +
                         " along its joint axis is degenerate (" + std::to_string(value) + ")"),
      link_(link) {}

Eigen::VectorXd rnea(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                     const Eigen::VectorXd& qdd) {
  return rnea<double>(instantiate(model), q, qd, qdd);
}

Eigen::VectorXd aba(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                    const Eigen::VectorXd& tau) {
  return aba<double>(instantiate(model), q, qd, tau);
}

Energy<double> system_energy(const RobotModel& model, const Eigen::VectorXd& q,
                             const Eigen::VectorXd& qd) {
  return system_energy<double>(instantiate(model), q, qd);
}

Eigen::VectorXd forward_dynamics(const RobotModel& model, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qd, const Eigen::VectorXd& tau_d) {
  return aba<double>(instantiate(model), q, qd, apply_actuator(model.actuator, tau_d, q, qd));
}

}  // namespace dnea
