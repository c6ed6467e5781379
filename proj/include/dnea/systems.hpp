#ifndef DNEA_SYSTEMS_HPP_
#define DNEA_SYSTEMS_HPP_

// Benchmark systems with documented synthetic desk-scale parameters. None of
// these are manufacturer values; they are chosen to be of the same order as
// small educational platforms.
//
// Frames: gravity is (0, 0, -9.81). All pendulum angles are zero when the
// pendulum hangs straight down.

#include <string>
#include <string_view>

#include "dnea/model.hpp"

namespace dnea {

struct PendulumParams {
  double mass = 1.0;
  double length = 1.0;   // joint to centre of mass
  double inertia = 0.0;  // about the centre of mass, along the joint axis
};

/// Single revolute joint about a horizontal axis.
RobotModel make_pendulum(const PendulumParams& p = {});

struct CartpoleParams {
  double cart_mass = 0.6;
  double pole_mass = 0.13;
  double pole_com = 0.18;                      // pivot to pole centre of mass
  double pole_inertia = 0.13 * 0.36 * 0.36 / 12.0;  // about the pole CoM
};

/// Prismatic cart along world x, passive pole about world y. The pole centre
/// of mass sits at (x - l sin(phi), 0, -l cos(phi)).
RobotModel make_cartpole(const CartpoleParams& p = {});

struct FurutaParams {
  double arm_mass = 0.095;
  double arm_length = 0.085;
  double pendulum_mass = 0.024;
  double pendulum_length = 0.129;
};

/// Rotary arm about world z with a pendulum hinged on the arm axis.
RobotModel make_furuta(const FurutaParams& p = {});

struct TwoLinkParams {
  double m1 = 1.0, m2 = 0.8;
  double l1 = 1.0;           // first link length (joint to joint)
  double c1 = 0.5, c2 = 0.4; // joint to centre of mass
  double i1 = 0.08, i2 = 0.05;  // about the CoM along the joint axes
};

/// Planar two-link arm swinging in a vertical plane.
RobotModel make_two_link_arm(const TwoLinkParams& p = {});

enum class SystemId { kPendulum, kCartpole, kFuruta, kTwoLink };

SystemId system_from_string(std::string_view name);
std::string_view to_string(SystemId id);
RobotModel make_system(SystemId id);

/// Stribeck friction used as ground truth for the synthetic trajectory data.
ActuatorModel ground_truth_friction(SystemId id);

}  // namespace dnea

#endif  // DNEA_SYSTEMS_HPP_
