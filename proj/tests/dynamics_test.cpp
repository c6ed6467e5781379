#include "dnea/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "dnea/integrate.hpp"
#include "dnea/systems.hpp"

namespace dnea {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kG = 9.81;

Eigen::VectorXd uniform(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

// Lagrangian equations of motion for the planar arm, angles from hanging down,
// second angle relative to the first.
Eigen::Vector2d two_link_oracle(const TwoLinkParams& p, const Eigen::Vector2d& q,
                                const Eigen::Vector2d& qd, const Eigen::Vector2d& qdd) {
  const double c2 = std::cos(q[1]), s2 = std::sin(q[1]);
  const double m11 = p.m1 * p.c1 * p.c1 + p.i1 + p.i2 +
                     p.m2 * (p.l1 * p.l1 + p.c2 * p.c2 + 2 * p.l1 * p.c2 * c2);
  const double m12 = p.m2 * (p.c2 * p.c2 + p.l1 * p.c2 * c2) + p.i2;
  const double m22 = p.m2 * p.c2 * p.c2 + p.i2;
  const double h = p.m2 * p.l1 * p.c2 * s2;
  const double g1 = (p.m1 * p.c1 + p.m2 * p.l1) * kG * std::sin(q[0]) +
                    p.m2 * p.c2 * kG * std::sin(q[0] + q[1]);
  const double g2 = p.m2 * p.c2 * kG * std::sin(q[0] + q[1]);
  return {m11 * qdd[0] + m12 * qdd[1] - h * (2 * qd[0] * qd[1] + qd[1] * qd[1]) + g1,
          m12 * qdd[0] + m22 * qdd[1] + h * qd[0] * qd[0] + g2};
}

// Cart position x, pole angle phi from hanging down, pole CoM at
// (x - l sin phi, -l cos phi).
Eigen::Vector2d cartpole_oracle(const CartpoleParams& p, const Eigen::Vector2d& q,
                                const Eigen::Vector2d& qd, const Eigen::Vector2d& tau) {
  const double m = p.pole_mass, l = p.pole_com, s = std::sin(q[1]), c = std::cos(q[1]);
  Eigen::Matrix2d mass;
  mass << p.cart_mass + m, -m * l * c, -m * l * c, m * l * l + p.pole_inertia;
  const Eigen::Vector2d bias(m * l * s * qd[1] * qd[1], m * kG * l * s);
  return mass.ldlt().solve(tau - bias);
}

TEST(Rnea, PendulumAtEquilibriumNeedsNoTorque) {
  const RobotModel m = make_pendulum();
  EXPECT_NEAR(rnea(m, vec1(0), vec1(0), vec1(0))[0], 0.0, 1e-15);
}

TEST(Rnea, PendulumHorizontalHoldingTorque) {
  const RobotModel m = make_pendulum();
  EXPECT_NEAR(rnea(m, vec1(kPi / 2), vec1(0), vec1(0))[0], 9.81, 1e-12);
}

TEST(Rnea, PendulumMatchesAnalyticTorque) {
  const RobotModel m = make_pendulum({2.0, 0.7, 0.0});
  std::mt19937_64 rng(1);
  for (int k = 0; k < 100; ++k) {
    const auto s = uniform(rng, 3, -4, 4);
    const double tau = rnea(m, vec1(s[0]), vec1(s[1]), vec1(s[2]))[0];
    EXPECT_NEAR(tau, 2.0 * 0.49 * s[2] + 2.0 * kG * 0.7 * std::sin(s[0]), 1e-12);
  }
}

TEST(Rnea, TwoLinkArmMatchesLagrangianOracle) {
  const TwoLinkParams p;
  const RobotModel m = make_two_link_arm(p);
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector2d q = uniform(rng, 2, -kPi, kPi), qd = uniform(rng, 2, -5, 5),
                          qdd = uniform(rng, 2, -10, 10);
    const Eigen::VectorXd tau = rnea(m, q, qd, qdd);
    worst = std::max(worst, (tau - two_link_oracle(p, q, qd, qdd)).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Rnea, AffineInAcceleration) {
  const RobotModel m = make_furuta();
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto q = uniform(rng, 2, -kPi, kPi), qd = uniform(rng, 2, -5, 5);
    const auto a = uniform(rng, 2, -10, 10), b = uniform(rng, 2, -10, 10);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd t0 = rnea(m, q, qd, zero);
    const Eigen::VectorXd lhs = rnea(m, q, qd, Eigen::VectorXd(2.0 * a + 3.0 * b)) - t0;
    const Eigen::VectorXd rhs = 2.0 * (rnea(m, q, qd, a) - t0) + 3.0 * (rnea(m, q, qd, b) - t0);
    EXPECT_LT((lhs - rhs).norm(), 1e-12);
  }
}

TEST(Rnea, DimensionMismatchThrows) {
  const RobotModel m = make_cartpole();
  EXPECT_THROW(rnea(m, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)),
               DimensionError);
  EXPECT_THROW(aba(m, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)),
               DimensionError);
}

TEST(Aba, PendulumHorizontalFallsAtG) {
  const RobotModel m = make_pendulum();
  EXPECT_NEAR(aba(m, vec1(kPi / 2), vec1(0), vec1(0))[0], -9.81, 1e-12);
}

TEST(Aba, PendulumMatchesAnalyticAcceleration) {
  const RobotModel m = make_pendulum({1.0, 0.5, 0.0});
  for (double q : {-2.0, -0.3, 0.1, 1.2, 3.0}) {
    EXPECT_NEAR(aba(m, vec1(q), vec1(0.7), vec1(0))[0], -kG / 0.5 * std::sin(q), 1e-12);
  }
}

TEST(Aba, CartpoleMatchesTextbookOde) {
  const CartpoleParams p;
  const RobotModel m = make_cartpole(p);
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Eigen::Vector2d q = uniform(rng, 2, -kPi, kPi), qd = uniform(rng, 2, -5, 5),
                          tau = uniform(rng, 2, -3, 3);
    const Eigen::VectorXd qdd = aba(m, q, qd, tau);
    worst = std::max(worst, (qdd - cartpole_oracle(p, q, qd, tau)).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Aba, RoundTripWithRneaOnBenchmarkSystems) {
  for (const SystemId id : {SystemId::kPendulum, SystemId::kCartpole, SystemId::kFuruta,
                            SystemId::kTwoLink}) {
    const RobotModel m = make_system(id);
    const BodyTree<double> tree = instantiate(m);
    const Eigen::Index n = m.dof();
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const auto q = uniform(rng, n, -kPi, kPi), qd = uniform(rng, n, -5, 5),
                 qdd = uniform(rng, n, -10, 10);
      const Eigen::VectorXd back = aba<double>(tree, q, qd, rnea<double>(tree, q, qd, qdd));
      worst = std::max(worst, (back - qdd).norm() / qdd.norm());
    }
    EXPECT_LT(worst, 1e-9) << to_string(id);
  }
}

TEST(Aba, RoundTripWithRandomizedKinematics) {
  RobotModel m = make_furuta();
  randomize_link_parameters(m, 17, true);
  const BodyTree<double> tree = instantiate(m);
  std::mt19937_64 rng(6);
  for (int k = 0; k < 200; ++k) {
    const auto q = uniform(rng, 2, -kPi, kPi), qd = uniform(rng, 2, -5, 5),
               qdd = uniform(rng, 2, -10, 10);
    const Eigen::VectorXd back = aba<double>(tree, q, qd, rnea<double>(tree, q, qd, qdd));
    EXPECT_LT((back - qdd).norm() / qdd.norm(), 1e-9);
  }
}

TEST(Aba, DegenerateInertiaNamesTheLink) {
  RobotModel m = make_cartpole();
  m.links[1].params.sqrt_mass = 0.0;
  m.links[1].params.sqrt_moments.setZero();
  try {
    (void)aba(m, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
    FAIL() << "degenerate pole accepted";
  } catch (const DegenerateInertiaError& e) {
    EXPECT_EQ(e.link(), 1);
  }
}

TEST(Energy, PendulumAtRest) {
  const RobotModel m = make_pendulum();
  const Energy<double> e = system_energy(m, vec1(0), vec1(0));
  EXPECT_EQ(e.kinetic, 0.0);
  EXPECT_NEAR(e.potential, -9.81, 1e-12);  // bob 1 m below the reference
}

TEST(Energy, KineticIsQuadraticInVelocity) {
  const RobotModel m = make_two_link_arm();
  const Eigen::Vector2d q(0.3, -0.5), qd(1.2, -0.7);
  const double k1 = system_energy(m, q, qd).kinetic;
  const double k2 = system_energy(m, q, Eigen::VectorXd(2.0 * qd)).kinetic;
  EXPECT_NEAR(k2, 4.0 * k1, 1e-12);
}

TEST(Energy, MatchesMassMatrixQuadraticForm) {
  // The joint-space mass matrix is read off rnea columns with gravity removed.
  RobotModel m = make_furuta();
  m.gravity.setZero();
  const Eigen::Vector2d q(0.4, 1.3), qd(-0.8, 2.1);
  Eigen::Matrix2d mass;
  for (int j = 0; j < 2; ++j) {
    mass.col(j) = rnea(m, q, Eigen::VectorXd::Zero(2), Eigen::VectorXd(Eigen::Vector2d::Unit(j)));
  }
  EXPECT_NEAR(system_energy(m, q, qd).kinetic, 0.5 * qd.dot(mass * qd), 1e-14);
}

TEST(Energy, PotentialMatchesCartpoleGeometry) {
  const CartpoleParams p;
  const RobotModel m = make_cartpole(p);
  const Eigen::Vector2d q(0.4, 0.9);
  EXPECT_NEAR(system_energy(m, q, Eigen::VectorXd::Zero(2)).potential,
              -p.pole_mass * kG * p.pole_com * std::cos(q[1]), 1e-13);
}

double relative_drift(const RobotModel& m, const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                      int steps) {
  const std::vector<Eigen::VectorXd> u(steps, Eigen::VectorXd::Zero(m.dof()));
  const Trajectory t = rollout(m, q0, qd0, u, kDefaultDt);
  EXPECT_FALSE(t.diverged);
  const double e0 = system_energy(m, q0, qd0).total();
  double scale = std::abs(e0), drift = 0.0;
  for (const auto& s : t.states) scale = std::max(scale, system_energy(m, s.q, s.qd).kinetic);
  for (const auto& s : t.states) {
    drift = std::max(drift, std::abs(system_energy(m, s.q, s.qd).total() - e0));
  }
  return drift / scale;
}

TEST(Energy, ConservedByFrictionlessRollouts) {
  EXPECT_LT(relative_drift(make_pendulum(), vec1(kPi / 2), vec1(0), 2500), 1e-3);
  EXPECT_LT(relative_drift(make_cartpole(), Eigen::Vector2d(0, 2.5), Eigen::Vector2d(0.3, 0), 2500),
            1e-3);
  EXPECT_LT(relative_drift(make_furuta(), Eigen::Vector2d(0, 2.0), Eigen::Vector2d(1.0, 0), 2500),
            1e-3);
}

TEST(GenericScalar, LongDoubleAgreesWithDouble) {
  const RobotModel m = make_furuta();
  const Eigen::VectorXd v = m.link_parameters();
  std::vector<long double> pl(v.data(), v.data() + v.size());
  const BodyTree<long double> tl = instantiate<long double>(m, pl);
  const Eigen::Vector2d q(0.3, 2.0), qd(1.0, -2.0), tau(0.01, -0.002);
  const VecX<long double> a = aba<long double>(tl, q.cast<long double>(), qd.cast<long double>(),
                                               tau.cast<long double>());
  const Eigen::VectorXd b = aba(m, q, qd, tau);
  EXPECT_LT((a.cast<double>() - b).norm() / b.norm(), 1e-12);
}

}  // namespace
}  // namespace dnea
