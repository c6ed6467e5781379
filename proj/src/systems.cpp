#include "dnea/systems.hpp"

#include <numbers>

namespace dnea {

namespace {

constexpr double kPi = std::numbers::pi;

LinkParams<double> body(double mass, const Eigen::Vector3d& com, const Eigen::Vector3d& inertia_diag) {
  PhysicalBody b;
  b.mass = mass;
  b.com = com;
  b.inertia_com = inertia_diag.asDiagonal();
  return inertial_virtual_params(b);
}

Link make_link(std::string name, int parent, JointKind joint, const Eigen::Vector3d& rpy,
               const Eigen::Vector3d& offset, LinkParams<double> inertial) {
  Link l;
  l.name = std::move(name);
  l.parent = parent;
  l.joint = joint;
  l.params = inertial;
  l.params.rpy = rpy;
  l.params.offset = offset;
  return l;
}

}  // namespace

RobotModel make_pendulum(const PendulumParams& p) {
  RobotModel m;
  m.name = "pendulum";
  // R_x(pi/2) turns the joint axis horizontal; local -y points down.
  const double i = p.inertia;
  m.links.push_back(make_link("pendulum", -1, JointKind::kRevolute, {kPi / 2, 0, 0}, {0, 0, 0},
                              body(p.mass, {0, -p.length, 0}, {i, 0.5 * i, i})));
  m.actuator = ActuatorModel::identity(1);
  return m;
}

RobotModel make_cartpole(const CartpoleParams& p) {
  RobotModel m;
  m.name = "cartpole";
  // R_y(pi/2): prismatic axis along world x, local x points down.
  m.links.push_back(make_link("cart", -1, JointKind::kPrismatic, {0, kPi / 2, 0}, {0, 0, 0},
                              body(p.cart_mass, {0, 0, 0}, {1e-3, 1e-3, 1e-3})));
  // R_x(-pi/2): pole axis along world y, local x still points down.
  const double i = p.pole_inertia;
  m.links.push_back(make_link("pole", 0, JointKind::kRevolute, {-kPi / 2, 0, 0}, {0, 0, 0},
                              body(p.pole_mass, {p.pole_com, 0, 0}, {1e-2 * i, i, i})));
  m.actuator = ActuatorModel::identity(2);
  return m;
}

RobotModel make_furuta(const FurutaParams& p) {
  RobotModel m;
  m.name = "furuta";
  const double ia = p.arm_mass * p.arm_length * p.arm_length / 12.0;
  m.links.push_back(make_link("arm", -1, JointKind::kRevolute, {0, 0, 0}, {0, 0, 0},
                              body(p.arm_mass, {p.arm_length / 2, 0, 0}, {1e-2 * ia, ia, ia})));
  // Pendulum hinge on the arm tip, axis along the arm; local x points down.
  const double ip = p.pendulum_mass * p.pendulum_length * p.pendulum_length / 12.0;
  m.links.push_back(make_link("pendulum", 0, JointKind::kRevolute, {0, kPi / 2, 0},
                              {p.arm_length, 0, 0},
                              body(p.pendulum_mass, {p.pendulum_length / 2, 0, 0},
                                   {1e-2 * ip, ip, ip})));
  m.actuator = ActuatorModel::identity(2);
  return m;
}

RobotModel make_two_link_arm(const TwoLinkParams& p) {
  RobotModel m;
  m.name = "two_link";
  m.links.push_back(make_link("upper", -1, JointKind::kRevolute, {kPi / 2, 0, 0}, {0, 0, 0},
                              body(p.m1, {0, -p.c1, 0}, {p.i1, 1e-2 * p.i1, p.i1})));
  m.links.push_back(make_link("lower", 0, JointKind::kRevolute, {0, 0, 0}, {0, -p.l1, 0},
                              body(p.m2, {0, -p.c2, 0}, {p.i2, 1e-2 * p.i2, p.i2})));
  m.actuator = ActuatorModel::identity(2);
  return m;
}

SystemId system_from_string(std::string_view name) {
  if (name == "pendulum") return SystemId::kPendulum;
  if (name == "cartpole") return SystemId::kCartpole;
  if (name == "furuta") return SystemId::kFuruta;
  if (name == "two_link") return SystemId::kTwoLink;
  throw std::invalid_argument("unknown system '" + std::string(name) + "'");
}

std::string_view to_string(SystemId id) {
  switch (id) {
    case SystemId::kPendulum: return "pendulum";
    case SystemId::kCartpole: return "cartpole";
    case SystemId::kFuruta: return "furuta";
    case SystemId::kTwoLink: return "two_link";
  }
  return "pendulum";
}

RobotModel make_system(SystemId id) {
  switch (id) {
    case SystemId::kPendulum: return make_pendulum();
    case SystemId::kCartpole: return make_cartpole();
    case SystemId::kFuruta: return make_furuta();
    case SystemId::kTwoLink: return make_two_link_arm();
  }
  return make_pendulum();
}

ActuatorModel ground_truth_friction(SystemId id) {
  using V = Eigen::VectorXd;
  switch (id) {
    case SystemId::kPendulum:
      return ActuatorModel::stribeck(V::Constant(1, 0.05), V::Constant(1, 0.05),
                                     V::Constant(1, 20.0), V::Constant(1, 0.05));
    case SystemId::kCartpole:
      return ActuatorModel::stribeck(V{{0.3, 1e-4}}, V{{0.3, 1e-4}}, V{{25.0, 10.0}},
                                     V{{2.0, 2e-4}});
    case SystemId::kFuruta:
      return ActuatorModel::stribeck(V{{2e-4, 1e-5}}, V{{2e-4, 1e-5}}, V{{10.0, 10.0}},
                                     V{{5e-4, 1e-5}});
    case SystemId::kTwoLink:
      return ActuatorModel::stribeck(V::Constant(2, 0.1), V::Constant(2, 0.1),
                                     V::Constant(2, 20.0), V::Constant(2, 0.1));
  }
  return ActuatorModel::identity(1);
}

}  // namespace dnea
