#ifndef DNEA_DYNAMICS_HPP_
#define DNEA_DYNAMICS_HPP_

// Recursive Newton-Euler (inverse dynamics) and the articulated body
// algorithm (forward dynamics) on Lie-algebra spatial quantities.
//
// All spatial quantities of link i live in the frame of joint i after the
// joint motion, T_{parent,i} = T_O T_q(q_i). Gravity enters as a fictitious
// acceleration of the base, a_0 = [-g; 0].

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnea/autodiff.hpp"
#include "dnea/model.hpp"
#include "dnea/spatial.hpp"

namespace dnea {

struct JointState {
  Eigen::VectorXd q, qd, qdd, tau;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// s^T M_hat s of some link fell below tolerance during ABA.
class DegenerateInertiaError : public std::runtime_error {
 public:
  DegenerateInertiaError(int link, double value);
  int link() const { return link_; }

 private:
  int link_;
};

namespace detail {

inline void check_dims(int n, Eigen::Index a, Eigen::Index b, Eigen::Index c, const char* what) {
  if (a != n || b != n || c != n) {
    throw DimensionError(std::string(what) + ": state vectors must have " + std::to_string(n) +
                         " entries");
  }
}

inline int axis_index(JointKind kind) { return kind == JointKind::kRevolute ? 5 : 2; }

template <typename S>
SpatialVector<S> base_acceleration(const BodyTree<S>& tree) {
  return make_spatial<S>(Vec3<S>(-tree.gravity), Vec3<S>::Zero());
}

}  // namespace detail

/// Joint-to-parent transforms T_{parent,i}(q_i).
template <typename S>
std::vector<SpatialTransform<S>> joint_transforms(const BodyTree<S>& tree, const VecX<S>& q) {
  std::vector<SpatialTransform<S>> t;
  t.reserve(static_cast<std::size_t>(tree.size()));
  for (int i = 0; i < tree.size(); ++i) {
    t.push_back(tree.fixed[i] * joint_transform(tree.joint[i], q[i]));
  }
  return t;
}

/// World poses of every link frame.
template <typename S>
std::vector<SpatialTransform<S>> link_poses(const BodyTree<S>& tree, const VecX<S>& q) {
  auto local = joint_transforms(tree, q);
  std::vector<SpatialTransform<S>> world(local.size());
  for (std::size_t i = 0; i < local.size(); ++i) {
    const int p = tree.parent[i];
    world[i] = p < 0 ? local[i] : world[static_cast<std::size_t>(p)] * local[i];
  }
  return world;
}

template <typename S>
VecX<S> rnea(const BodyTree<S>& tree, const VecX<S>& q, const VecX<S>& qd, const VecX<S>& qdd) {
  const int n = tree.size();
  detail::check_dims(n, q.size(), qd.size(), qdd.size(), "rnea");
  const auto t = joint_transforms(tree, q);
  std::vector<SpatialVector<S>> v(n), a(n), f(n);
  const SpatialVector<S> a0 = detail::base_acceleration(tree);
  const SpatialVector<S> zero = SpatialVector<S>::Zero();

  for (int i = 0; i < n; ++i) {
    const int p = tree.parent[i];
    const SpatialVector<S> s = motion_vector<S>(tree.joint[i]);
    const SpatialVector<S> v_in = inverse_transform_motion(t[i], p < 0 ? zero : v[p]);
    const SpatialVector<S> a_in = inverse_transform_motion(t[i], p < 0 ? a0 : a[p]);
    v[i] = v_in + s * qd[i];
    a[i] = a_in + bracket(v[i], s) * qd[i] + s * qdd[i];
    f[i] = tree.inertia[i] * a[i] - co_bracket<S>(v[i], tree.inertia[i] * v[i]);
  }

  VecX<S> tau(n);
  for (int i = n - 1; i >= 0; --i) {
    tau[i] = f[i][detail::axis_index(tree.joint[i])];
    const int p = tree.parent[i];
    if (p >= 0) f[p] += transform_force(t[i], f[i]);
  }
  return tau;
}

template <typename S>
VecX<S> aba(const BodyTree<S>& tree, const VecX<S>& q, const VecX<S>& qd, const VecX<S>& tau,
            double tolerance = 1e-12) {
  const int n = tree.size();
  detail::check_dims(n, q.size(), qd.size(), tau.size(), "aba");
  const auto t = joint_transforms(tree, q);
  std::vector<SpatialVector<S>> v(n), eta(n), bias(n), a(n), U(n);
  std::vector<Mat6<S>> lumped(n);
  std::vector<S> psi(n), u(n);
  const SpatialVector<S> zero = SpatialVector<S>::Zero();

  // Forward kinematics and velocity products.
  for (int i = 0; i < n; ++i) {
    const int p = tree.parent[i];
    const SpatialVector<S> s = motion_vector<S>(tree.joint[i]);
    v[i] = inverse_transform_motion(t[i], p < 0 ? zero : v[p]) + s * qd[i];
    eta[i] = bracket(v[i], s) * qd[i];
    bias[i] = -co_bracket<S>(v[i], tree.inertia[i] * v[i]);
    lumped[i] = tree.inertia[i];
  }

  // Articulated inertias and bias forces, leaves to root.
  for (int i = n - 1; i >= 0; --i) {
    const int k = detail::axis_index(tree.joint[i]);
    U[i] = lumped[i].col(k);
    const S d = U[i][k];
    if (!(ad::value(d) > tolerance)) throw DegenerateInertiaError(i, ad::value(d));
    psi[i] = S(1) / d;
    u[i] = tau[i] - bias[i][k];
    const int p = tree.parent[i];
    if (p < 0) continue;
    const Mat6<S> projected = lumped[i] - (U[i] * psi[i]) * U[i].transpose();
    const SpatialVector<S> beta = projected * eta[i] + U[i] * (psi[i] * u[i]);
    const Mat6<S> x = adjoint(t[i].inverse());
    lumped[p] += x.transpose() * projected * x;
    bias[p] += transform_force(t[i], SpatialVector<S>(bias[i] + beta));
  }

  // Accelerations, root to leaves.
  VecX<S> qdd(n);
  const SpatialVector<S> a0 = detail::base_acceleration(tree);
  for (int i = 0; i < n; ++i) {
    const int p = tree.parent[i];
    const SpatialVector<S> s = motion_vector<S>(tree.joint[i]);
    const SpatialVector<S> a_in = inverse_transform_motion(t[i], p < 0 ? a0 : a[p]) + eta[i];
    qdd[i] = psi[i] * (u[i] - U[i].dot(a_in));
    a[i] = a_in + s * qdd[i];
  }
  return qdd;
}

template <typename S>
struct Energy {
  S kinetic = S(0);
  S potential = S(0);
  S total() const { return kinetic + potential; }
};

/// Kinetic energy 1/2 sum v^T M v and potential -sum m g . c_world, the
/// reference height being the base frame origin.
template <typename S>
Energy<S> system_energy(const BodyTree<S>& tree, const VecX<S>& q, const VecX<S>& qd) {
  const int n = tree.size();
  detail::check_dims(n, q.size(), qd.size(), qd.size(), "system_energy");
  const auto t = joint_transforms(tree, q);
  std::vector<SpatialVector<S>> v(n);
  std::vector<SpatialTransform<S>> world(n);
  Energy<S> e;
  for (int i = 0; i < n; ++i) {
    const int p = tree.parent[i];
    v[i] = inverse_transform_motion(t[i], p < 0 ? SpatialVector<S>::Zero() : v[p]) +
           motion_vector<S>(tree.joint[i]) * qd[i];
    world[i] = p < 0 ? t[i] : world[p] * t[i];
    const Mat6<S>& m = tree.inertia[i];
    e.kinetic += S(0.5) * v[i].dot(m * v[i]);
    // mass and first moment m*c recovered from the spatial inertia blocks
    const S mass = m(0, 0);
    const Vec3<S> first_moment(m(5, 1), m(3, 2), m(4, 0));
    const Vec3<S> h = world[i].rotation * first_moment + world[i].translation * mass;
    e.potential -= tree.gravity.dot(h);
  }
  return e;
}

// Plain-double conveniences on a model's own parameters.
Eigen::VectorXd rnea(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                     const Eigen::VectorXd& qdd);
Eigen::VectorXd aba(const RobotModel& model, const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                    const Eigen::VectorXd& tau);
Energy<double> system_energy(const RobotModel& model, const Eigen::VectorXd& q,
                             const Eigen::VectorXd& qd);

/// Forward dynamics including the model's actuator: qdd = aba(q, qd, act(tau_d)).
Eigen::VectorXd forward_dynamics(const RobotModel& model, const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& qd, const Eigen::VectorXd& tau_d);

}  // namespace dnea

#endif  // DNEA_DYNAMICS_HPP_
