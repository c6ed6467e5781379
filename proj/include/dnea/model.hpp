#ifndef DNEA_MODEL_HPP_
#define DNEA_MODEL_HPP_

// Kinematic trees and the virtual-parameter maps.
//
// Each link carries 16 unrestricted reals:
//   [ rpy(3) | p_k(3) | theta_L(3) | sqrt_m(1) | inertia_rpy(3) | com(3) ]
// The first six are the kinematic parameters of the fixed transform T_O
// between the parent joint and this joint; the remaining ten are inertial.
// Every real-valued vector maps to a non-negative mass and a principal
// inertia that satisfies the triangle inequalities.

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnea/actuation.hpp"
#include "dnea/spatial.hpp"

namespace dnea {

enum class JointKind { kRevolute, kPrismatic };

std::string_view to_string(JointKind kind);
JointKind joint_kind_from_string(std::string_view name);

/// s_r = [0; e_z] for revolute joints, s_p = [e_z; 0] for prismatic ones.
template <typename S>
SpatialVector<S> motion_vector(JointKind kind) {
  SpatialVector<S> s = SpatialVector<S>::Zero();
  s[kind == JointKind::kRevolute ? 5 : 2] = S(1);
  return s;
}

template <typename S>
SpatialTransform<S> joint_transform(JointKind kind, const S& q) {
  SpatialTransform<S> t;
  if (kind == JointKind::kRevolute) {
    t.rotation = rot_z(q);
  } else {
    t.translation.z() = q;
  }
  return t;
}

inline constexpr int kLinkParamCount = 16;
inline constexpr int kKinematicParamCount = 6;

template <typename S>
struct LinkParams {
  Vec3<S> rpy = Vec3<S>::Zero();          // theta_R
  Vec3<S> offset = Vec3<S>::Zero();       // p_k
  Vec3<S> sqrt_moments = Vec3<S>::Zero(); // theta_L
  S sqrt_mass = S(0);
  Vec3<S> inertia_rpy = Vec3<S>::Zero();  // theta_J, orientation of principal axes
  Vec3<S> com = Vec3<S>::Zero();          // p_m

  static LinkParams unpack(std::span<const S> v) {
    LinkParams p;
    p.rpy = Vec3<S>(v[0], v[1], v[2]);
    p.offset = Vec3<S>(v[3], v[4], v[5]);
    p.sqrt_moments = Vec3<S>(v[6], v[7], v[8]);
    p.sqrt_mass = v[9];
    p.inertia_rpy = Vec3<S>(v[10], v[11], v[12]);
    p.com = Vec3<S>(v[13], v[14], v[15]);
    return p;
  }

  void pack(std::span<S> v) const {
    for (int i = 0; i < 3; ++i) {
      v[i] = rpy[i];
      v[3 + i] = offset[i];
      v[6 + i] = sqrt_moments[i];
      v[10 + i] = inertia_rpy[i];
      v[13 + i] = com[i];
    }
    v[9] = sqrt_mass;
  }
};

/// J_p = diag(L2 + L3, L1 + L3, L1 + L2) with L_i = theta_i^2.
template <typename S>
Mat3<S> principal_inertia(const Vec3<S>& sqrt_moments) {
  const S l1 = sqrt_moments[0] * sqrt_moments[0];
  const S l2 = sqrt_moments[1] * sqrt_moments[1];
  const S l3 = sqrt_moments[2] * sqrt_moments[2];
  Mat3<S> j = Mat3<S>::Zero();
  j(0, 0) = l2 + l3;
  j(1, 1) = l1 + l3;
  j(2, 2) = l1 + l2;
  return j;
}

/// Inertia about the link frame origin:
///   J = R_J J_p R_J^T - m [p_m][p_m]
/// The minus sign makes the parallel-axis term positive semidefinite.
template <typename S>
SpatialInertia<S> link_inertia(const LinkParams<S>& p) {
  SpatialInertia<S> out;
  out.mass = p.sqrt_mass * p.sqrt_mass;
  out.com = p.com;
  const Mat3<S> rj = rotation_from_rpy(p.inertia_rpy);
  const Mat3<S> pc = skew(p.com);
  out.inertia = rj * principal_inertia(p.sqrt_moments) * rj.transpose() - (pc * pc) * out.mass;
  return out;
}

template <typename S>
SpatialTransform<S> fixed_transform(const LinkParams<S>& p) {
  return transform_from_rpy(p.rpy, p.offset);
}

/// T(q) = T_O T_q(q)
template <typename S>
SpatialTransform<S> link_transform(const LinkParams<S>& p, JointKind kind, const S& q) {
  return fixed_transform(p) * joint_transform(kind, q);
}

/// Physical description of a rigid body in its link frame.
struct PhysicalBody {
  double mass = 0.0;
  Eigen::Vector3d com = Eigen::Vector3d::Zero();
  Eigen::Matrix3d inertia_com = Eigen::Matrix3d::Zero();  // about the CoM
};

/// Inverse of the inertial part of the virtual map. Requires mass >= 0 and
/// an inertia satisfying the triangle inequalities (up to roundoff).
LinkParams<double> inertial_virtual_params(const PhysicalBody& body);
PhysicalBody physical_body(const LinkParams<double>& p);

/// Roll/pitch/yaw such that rotation_from_rpy(rpy) == r.
Eigen::Vector3d rpy_from_rotation(const Eigen::Matrix3d& r);

struct PlausibilityReport {
  double mass = 0.0;
  Eigen::Vector3d principal = Eigen::Vector3d::Zero();
  /// min over J_x + J_y - J_z and permutations; >= 0 means plausible.
  double triangle_slack = 0.0;
  double min_spatial_eigenvalue = 0.0;
  bool plausible(double tol = 1e-12) const;
};

PlausibilityReport check_plausibility(const LinkParams<double>& p);

struct Link {
  std::string name;
  int parent = -1;
  JointKind joint = JointKind::kRevolute;
  LinkParams<double> params;
  bool freeze_kinematics = true;
  bool freeze_inertia = false;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RobotModel {
  std::string name = "robot";
  std::vector<Link> links;
  Eigen::Vector3d gravity{0.0, 0.0, -9.81};
  ActuatorModel actuator;
  /// false for the learn-all variant: kinematic parameters are trainable.
  bool kinematics_known = true;

  int dof() const { return static_cast<int>(links.size()); }

  /// Parents precede children and there is exactly one root.
  void validate() const;

  Eigen::VectorXd link_parameters() const;
  void set_link_parameters(const Eigen::VectorXd& v);
};

/// Per-link quantities the recursions need, evaluated for one scalar type.
template <typename S>
struct BodyTree {
  std::vector<int> parent;
  std::vector<JointKind> joint;
  std::vector<SpatialTransform<S>> fixed;  // T_O of each link
  std::vector<Mat6<S>> inertia;            // spatial inertia about the link frame
  Vec3<S> gravity = Vec3<S>::Zero();

  int size() const { return static_cast<int>(parent.size()); }
};

template <typename S>
BodyTree<S> instantiate(const RobotModel& model, std::span<const S> link_params) {
  if (static_cast<int>(link_params.size()) != kLinkParamCount * model.dof()) {
    throw ModelError("instantiate: expected " + std::to_string(kLinkParamCount * model.dof()) +
                     " link parameters, got " + std::to_string(link_params.size()));
  }
  BodyTree<S> tree;
  const auto n = static_cast<std::size_t>(model.dof());
  tree.parent.reserve(n);
  tree.joint.reserve(n);
  tree.fixed.reserve(n);
  tree.inertia.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = LinkParams<S>::unpack(link_params.subspan(i * kLinkParamCount, kLinkParamCount));
    tree.parent.push_back(model.links[i].parent);
    tree.joint.push_back(model.links[i].joint);
    tree.fixed.push_back(fixed_transform(p));
    tree.inertia.push_back(link_inertia(p).matrix());
  }
  tree.gravity = model.gravity.template cast<S>();
  return tree;
}

BodyTree<double> instantiate(const RobotModel& model);

/// Initialisation without prior: sqrt_m ~ U(0.1, 1), theta_L ~ U(0.01, 0.3),
/// com and inertia angles ~ U(-0.1, 0.1). Kinematic parameters are redrawn
/// from U(-0.1, 0.1) only when `randomize_kinematics` is set.
void randomize_link_parameters(RobotModel& model, std::uint64_t seed, bool randomize_kinematics);

void save_model(const RobotModel& model, const std::filesystem::path& path);
RobotModel load_model(const std::filesystem::path& path);
std::string model_to_string(const RobotModel& model);
RobotModel model_from_string(const std::string& text);

}  // namespace dnea

#endif  // DNEA_MODEL_HPP_
