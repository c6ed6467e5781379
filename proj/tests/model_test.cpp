#include "dnea/model.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "dnea/dynamics.hpp"
#include "dnea/systems.hpp"

namespace dnea {
namespace {

constexpr double kPi = std::numbers::pi;

LinkParams<double> random_params(std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<double> v(kLinkParamCount);
  for (auto& x : v) x = u(rng);
  return LinkParams<double>::unpack(v);
}

Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Eigen::Vector3d& p) {
  Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
  h.topLeftCorner<3, 3>() = r;
  h.topRightCorner<3, 1>() = p;
  return h;
}

TEST(PrincipalInertia, SymmetricBody) {
  EXPECT_EQ(principal_inertia<double>({1, 1, 1}), Eigen::Matrix3d(Eigen::Vector3d(2, 2, 2).asDiagonal()));
}

TEST(PrincipalInertia, DegenerateRodIsTight) {
  const Eigen::Matrix3d j = principal_inertia<double>({1, 0, 0});
  EXPECT_EQ(j, Eigen::Matrix3d(Eigen::Vector3d(0, 1, 1).asDiagonal()));
  EXPECT_EQ(j(1, 1) + j(2, 2) - j(0, 0), 2.0);
  EXPECT_EQ(j(0, 0) + j(2, 2) - j(1, 1), 0.0);
}

TEST(PrincipalInertia, ArithmeticExample) {
  const Eigen::Matrix3d j = principal_inertia<double>({0.3, 0.4, 0.5});
  EXPECT_NEAR(j(0, 0), 0.41, 1e-15);
  EXPECT_NEAR(j(1, 1), 0.34, 1e-15);
  EXPECT_NEAR(j(2, 2), 0.25, 1e-15);
  EXPECT_LE(j(0, 0), j(1, 1) + j(2, 2));
  EXPECT_LE(j(1, 1), j(0, 0) + j(2, 2));
  EXPECT_LE(j(2, 2), j(0, 0) + j(1, 1));
  EXPECT_EQ(j(0, 1), 0.0);
}

TEST(LinkInertia, PointMassAtOrigin) {
  LinkParams<double> p;
  p.sqrt_mass = 2.0;
  const SpatialInertia<double> s = link_inertia(p);
  EXPECT_EQ(s.mass, 4.0);
  EXPECT_EQ(s.inertia, Eigen::Matrix3d::Zero());
}

TEST(LinkInertia, MassIsSignInvariant) {
  LinkParams<double> p;
  p.sqrt_mass = -3.0;
  EXPECT_EQ(link_inertia(p).mass, 9.0);
}

TEST(LinkInertia, OffsetPointMassMatchesParallelAxisOracle) {
  // A point mass m at c has rotational inertia m (|c|^2 I - c c^T) about the origin.
  LinkParams<double> p;
  p.sqrt_mass = 1.5;
  p.com = {0.3, -0.2, 0.7};
  const double m = 2.25;
  const Eigen::Matrix3d oracle =
      m * (p.com.squaredNorm() * Eigen::Matrix3d::Identity() - p.com * p.com.transpose());
  EXPECT_LT((link_inertia(p).inertia - oracle).cwiseAbs().maxCoeff(), 1e-14);

  // Kinetic energy of the point for an arbitrary twist.
  Vec6<double> v;
  v << 0.1, -0.4, 0.2, 1.0, 0.5, -0.3;
  const Eigen::Vector3d vel = v.head<3>() + v.tail<3>().cross(p.com);
  EXPECT_NEAR(0.5 * v.dot(link_inertia(p).matrix() * v), 0.5 * m * vel.squaredNorm(), 1e-13);
}

TEST(LinkInertia, RandomParamsGivePsdSpatialInertia) {
  std::mt19937_64 rng(21);
  double worst = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const auto p = random_params(rng, 2.0);
    const Mat6<double> m = link_inertia(p).matrix();
    EXPECT_LT((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat6<double>> eig(m, Eigen::EigenvaluesOnly);
    worst = std::min(worst, eig.eigenvalues().minCoeff() / std::max(1.0, m.norm()));
  }
  EXPECT_GE(worst, -1e-10);
}

TEST(LinkInertia, PositiveDefiniteWhenNonDegenerate) {
  LinkParams<double> p;
  p.sqrt_mass = 0.7;
  p.sqrt_moments = {0.2, 0.3, 0.4};
  p.com = {0.1, 0.2, -0.1};
  p.inertia_rpy = {0.3, 0.2, 0.1};
  Eigen::SelfAdjointEigenSolver<Mat6<double>> eig(link_inertia(p).matrix(), Eigen::EigenvaluesOnly);
  EXPECT_GT(eig.eigenvalues().minCoeff(), 0.0);
}

TEST(Plausibility, HoldsForRandomVirtualParameters) {
  std::mt19937_64 rng(42);
  for (int k = 0; k < 100000; ++k) {
    const auto r = check_plausibility(random_params(rng, 3.0));
    ASSERT_GE(r.mass, 0.0);
    ASSERT_GE(r.principal.minCoeff(), 0.0);
    ASSERT_GE(r.triangle_slack, -1e-12);
    ASSERT_TRUE(r.plausible());
  }
}

TEST(VirtualParams, InverseMapRecoversPhysicalBody) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> mass(0.1, 5.0), lam(0.01, 1.0), ang(-kPi, kPi),
      off(-0.5, 0.5);
  for (int k = 0; k < 500; ++k) {
    // Build a plausible body from second moments so the triangle inequality holds.
    const Eigen::Vector3d l(lam(rng), lam(rng), lam(rng));
    const Eigen::Vector3d jp(l[1] + l[2], l[0] + l[2], l[0] + l[1]);
    const Eigen::Matrix3d r = rotation_from_rpy<double>({ang(rng), ang(rng) / 2, ang(rng)});
    PhysicalBody target;
    target.mass = mass(rng);
    target.com = {off(rng), off(rng), off(rng)};
    target.inertia_com = r * jp.asDiagonal() * r.transpose();
    const PhysicalBody back = physical_body(inertial_virtual_params(target));
    EXPECT_NEAR(back.mass, target.mass, 1e-12);
    EXPECT_LT((back.com - target.com).norm(), 1e-15);
    EXPECT_LT((back.inertia_com - target.inertia_com).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(VirtualParams, ExplicitSquareRootFormula) {
  PhysicalBody b;
  b.mass = 2.0;
  b.inertia_com = Eigen::Vector3d(0.5, 0.4, 0.3).asDiagonal();
  const auto p = inertial_virtual_params(b);
  const Eigen::Matrix3d jp = principal_inertia(p.sqrt_moments);
  Eigen::Vector3d sorted = jp.diagonal();
  std::sort(sorted.data(), sorted.data() + 3);
  EXPECT_NEAR(sorted[0], 0.3, 1e-14);
  EXPECT_NEAR(sorted[1], 0.4, 1e-14);
  EXPECT_NEAR(sorted[2], 0.5, 1e-14);
  EXPECT_NEAR(p.sqrt_mass, std::sqrt(2.0), 1e-15);
}

TEST(VirtualParams, RejectsImplausibleBody) {
  PhysicalBody b;
  b.mass = 1.0;
  b.inertia_com = Eigen::Vector3d(1.0, 0.1, 0.1).asDiagonal();
  EXPECT_THROW(inertial_virtual_params(b), ModelError);
}

TEST(JointTransform, RevoluteAtZeroIsIdentity) {
  const auto t = joint_transform<double>(JointKind::kRevolute, 0.0);
  EXPECT_EQ(t.rotation, Eigen::Matrix3d::Identity());
  EXPECT_EQ(t.translation, Eigen::Vector3d::Zero());
}

TEST(JointTransform, PrismaticTranslatesAlongZ) {
  const auto t = joint_transform<double>(JointKind::kPrismatic, 0.5);
  EXPECT_EQ(t.rotation, Eigen::Matrix3d::Identity());
  EXPECT_EQ(t.translation, Eigen::Vector3d(0, 0, 0.5));
}

TEST(JointTransform, RevoluteHalfTurn) {
  const auto t = joint_transform<double>(JointKind::kRevolute, kPi);
  EXPECT_LT((t.rotation - Eigen::Matrix3d(Eigen::Vector3d(-1, -1, 1).asDiagonal())).norm(), 1e-15);
}

TEST(JointSpec, MotionVectorsAreUnitAndPure) {
  const Vec6<double> r = motion_vector<double>(JointKind::kRevolute);
  const Vec6<double> p = motion_vector<double>(JointKind::kPrismatic);
  EXPECT_EQ(r.norm(), 1.0);
  EXPECT_EQ(p.norm(), 1.0);
  EXPECT_EQ(r.head<3>().norm(), 0.0);
  EXPECT_EQ(p.tail<3>().norm(), 0.0);
}

TEST(LinkTransform, ZeroParamsAndPureOffset) {
  LinkParams<double> p;
  auto t = link_transform<double>(p, JointKind::kRevolute, 0.0);
  EXPECT_EQ(t.rotation, Eigen::Matrix3d::Identity());
  EXPECT_EQ(t.translation, Eigen::Vector3d::Zero());
  p.offset = {0.1, -0.2, 0.3};
  t = link_transform<double>(p, JointKind::kRevolute, 0.0);
  EXPECT_EQ(t.translation, p.offset);
}

TEST(LinkTransform, TwoLinkChainMatchesHandComposition) {
  const RobotModel m = make_two_link_arm();
  const BodyTree<double> tree = instantiate(m);
  const Eigen::Vector2d q(0.4, -1.1);
  const auto poses = link_poses<double>(tree, q);

  auto rz = [](double a) {
    Eigen::Matrix3d r;
    r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
    return r;
  };
  Eigen::Matrix3d rx;
  rx << 1, 0, 0, 0, 0, -1, 0, 1, 0;  // R_x(pi/2)
  const Eigen::Matrix4d h1 = homogeneous(rx, Eigen::Vector3d::Zero()) *
                             homogeneous(rz(q[0]), Eigen::Vector3d::Zero());
  const Eigen::Matrix4d h2 = h1 * homogeneous(Eigen::Matrix3d::Identity(), {0, -1.0, 0}) *
                             homogeneous(rz(q[1]), Eigen::Vector3d::Zero());
  EXPECT_LT((homogeneous(poses[0].rotation, poses[0].translation) - h1).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((homogeneous(poses[1].rotation, poses[1].translation) - h2).cwiseAbs().maxCoeff(), 1e-15);

  // Elbow sits at (sin q1, 0, -cos q1) for l1 = 1 when angles are measured from hanging down.
  EXPECT_NEAR(poses[1].translation.x(), std::sin(q[0]), 1e-15);
  EXPECT_NEAR(poses[1].translation.z(), -std::cos(q[0]), 1e-15);
}

TEST(LinkParamsPacking, RoundTrip) {
  std::mt19937_64 rng(3);
  const auto p = random_params(rng, 1.0);
  std::vector<double> v(kLinkParamCount);
  p.pack(v);
  const auto back = LinkParams<double>::unpack(v);
  EXPECT_EQ(back.rpy, p.rpy);
  EXPECT_EQ(back.offset, p.offset);
  EXPECT_EQ(back.sqrt_moments, p.sqrt_moments);
  EXPECT_EQ(back.sqrt_mass, p.sqrt_mass);
  EXPECT_EQ(back.inertia_rpy, p.inertia_rpy);
  EXPECT_EQ(back.com, p.com);
  EXPECT_EQ(v[9], p.sqrt_mass);
}

TEST(RobotModel, ValidateRejectsBadTopology) {
  RobotModel m = make_cartpole();
  m.links[1].parent = 1;
  EXPECT_THROW(m.validate(), ModelError);
  m.links[1].parent = -1;
  EXPECT_THROW(m.validate(), ModelError);
}

TEST(RobotModel, DefaultGravity) {
  EXPECT_EQ(RobotModel{}.gravity, Eigen::Vector3d(0, 0, -9.81));
}

TEST(ModelFile, RoundTripIsExact) {
  RobotModel m = make_furuta();
  m.actuator = ActuatorModel::stribeck(Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(0.05, 0.1),
                                       Eigen::Vector2d(10, 20), Eigen::Vector2d(0.3, 0.4));
  m.links[1].freeze_kinematics = false;
  m.kinematics_known = false;
  const RobotModel back = model_from_string(model_to_string(m));
  EXPECT_EQ(back.name, m.name);
  EXPECT_EQ(back.link_parameters(), m.link_parameters());
  EXPECT_EQ(back.actuator.kind, m.actuator.kind);
  EXPECT_EQ(back.actuator.params, m.actuator.params);
  EXPECT_EQ(back.links[1].joint, m.links[1].joint);
  EXPECT_FALSE(back.links[1].freeze_kinematics);
  EXPECT_FALSE(back.kinematics_known);
  EXPECT_EQ(back.gravity, m.gravity);
}

TEST(ModelFile, MalformedInputIsReported) {
  EXPECT_THROW(model_from_string("{not json"), ModelError);
  EXPECT_THROW(model_from_string(R"({"links":[{"joint":"helical"}]})"), ModelError);
  EXPECT_THROW(model_from_string(R"({"links":[{"joint":"revolute","rpy":[0,0]}]})"), ModelError);
}

TEST(Randomize, KeepsKinematicsUnlessAsked) {
  RobotModel m = make_cartpole();
  const auto before = m.links[1].params;
  randomize_link_parameters(m, 9, false);
  EXPECT_EQ(m.links[1].params.rpy, before.rpy);
  EXPECT_NE(m.links[1].params.sqrt_mass, before.sqrt_mass);
  EXPECT_GE(m.links[1].params.sqrt_mass, 0.1);
  EXPECT_LE(m.links[1].params.sqrt_mass, 1.0);
  randomize_link_parameters(m, 9, true);
  EXPECT_NE(m.links[1].params.rpy, before.rpy);
}

}  // namespace
}  // namespace dnea
