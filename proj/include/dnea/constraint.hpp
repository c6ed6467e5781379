#ifndef DNEA_CONSTRAINT_HPP_
#define DNEA_CONSTRAINT_HPP_

// Ball on a string hanging from a cup held by the last robot link.
//
// The string is an inequality constraint |x_B - x_C| <= r. With
// Delta = x_B - x_C the constraint function is h = |Delta|^2 - r^2 and only
// its positive part (the taut string) produces force.

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnea/autodiff.hpp"
#include "dnea/spatial.hpp"

namespace dnea {

/// Positive-part map sigma applied to the constraint. ReLU is the default;
/// the softplus form sigma(h) = softplus(k h + c) / k is a smooth relaxation
/// that gives gradient signal while the string is slack.
struct Relaxation {
  enum class Kind { kReLU, kSoftplus };
  Kind kind = Kind::kReLU;
  double sharpness = 1.0;  // k
  double shift = 0.0;      // c
  double taut_tolerance = 1e-9;  // ReLU only: within this of the boundary counts as taut

  template <typename S>
  S value(const S& h) const {
    if (kind == Kind::kReLU) return ad::relu(h);
    using ad::softplus;
    return softplus(S(h * sharpness + shift)) / sharpness;
  }

  /// sigma'(h); for ReLU the step with sigma'(0) = 1 so a string at exactly
  /// its length is taut, with a roundoff-sized tolerance.
  template <typename S>
  S slope(const S& h) const {
    if (kind == Kind::kReLU) return ad::value(h) >= -taut_tolerance ? S(1) : S(0);
    using ad::sigmoid;
    return sigmoid(S(h * sharpness + shift));
  }
};

template <typename S>
struct StringParams {
  S length = S(0.4);                        // r
  Vec3<S> cup_offset = Vec3<S>::Zero();     // translation of T_E in the last-link frame
  Vec3<S> cup_rpy = Vec3<S>::Zero();        // rotation of T_E
  S ball_mass = S(0.05);                    // m_B
  double delta = 1e-6;
  double kp = 100.0;
  double kd = 20.0;
  double damping = 0.05;  // N s/m on the ball velocity
  Eigen::Vector3d gravity{0.0, 0.0, -9.81};
  Relaxation relaxation;

  SpatialTransform<S> cup_transform() const { return transform_from_rpy(cup_rpy, cup_offset); }

  void validate() const {
    if (!(ad::value(length) > 0.0)) throw std::invalid_argument("string length must be positive");
    if (!(ad::value(ball_mass) > 0.0)) throw std::invalid_argument("ball mass must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (kp < 0.0 || kd < 0.0) throw std::invalid_argument("stabilisation gains must be >= 0");
  }

  template <typename T>
  StringParams<T> cast() const {
    StringParams<T> p;
    p.length = T(ad::value(length));
    p.cup_offset = Vec3<T>(T(ad::value(cup_offset[0])), T(ad::value(cup_offset[1])),
                           T(ad::value(cup_offset[2])));
    p.cup_rpy = Vec3<T>(T(ad::value(cup_rpy[0])), T(ad::value(cup_rpy[1])),
                        T(ad::value(cup_rpy[2])));
    p.ball_mass = T(ad::value(ball_mass));
    p.delta = delta;
    p.kp = kp;
    p.kd = kd;
    p.damping = damping;
    p.gravity = gravity;
    p.relaxation = relaxation;
    return p;
  }
};

/// World-frame pose and motion of the last link frame (J4).
struct FrameState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular_acceleration = Eigen::Vector3d::Zero();
};

template <typename S>
struct BallState {
  Vec3<S> x_b = Vec3<S>::Zero(), xd_b = Vec3<S>::Zero();
  Vec3<S> x_c = Vec3<S>::Zero(), xd_c = Vec3<S>::Zero(), xdd_c = Vec3<S>::Zero();
};

/// One recorded sample: last-link frame motion plus the measured ball state.
struct BallSample {
  double t = 0.0;
  FrameState frame;
  Eigen::Vector3d x_b = Eigen::Vector3d::Zero();
  Eigen::Vector3d xd_b = Eigen::Vector3d::Zero();
  Eigen::Vector3d xdd_b = Eigen::Vector3d::Zero();
};

/// Cup position, velocity and acceleration, x_C = T_E x_J4, for the frame
/// motion and the ball state in `sample`.
template <typename S>
BallState<S> cup_state(const BallSample& sample, const StringParams<S>& p) {
  const FrameState& f = sample.frame;
  const Vec3<S> arm = f.rotation.cast<S>() * p.cup_offset;  // world-frame lever
  const Vec3<S> w = f.angular_velocity.cast<S>();
  BallState<S> s;
  s.x_b = sample.x_b.cast<S>();
  s.xd_b = sample.xd_b.cast<S>();
  s.x_c = f.position.cast<S>() + arm;
  s.xd_c = f.velocity.cast<S>() + w.cross(arm);
  s.xdd_c = f.acceleration.cast<S>() + f.angular_acceleration.cast<S>().cross(arm) +
            w.cross(Vec3<S>(w.cross(arm)));
  return s;
}

template <typename S>
struct ConstraintValues {
  S h = S(0);   // |Delta|^2 - r^2
  S g = S(0);   // sigma(h)
  S gd = S(0);  // d/dt g
};

template <typename S>
ConstraintValues<S> constraint_values(const BallState<S>& s, const StringParams<S>& p) {
  const Vec3<S> d = s.x_b - s.x_c;
  const Vec3<S> dd = s.xd_b - s.xd_c;
  ConstraintValues<S> c;
  c.h = d.dot(d) - p.length * p.length;
  c.g = p.relaxation.value(c.h);
  c.gd = p.relaxation.slope(c.h) * S(2) * d.dot(dd);
  return c;
}

namespace detail {

template <typename S>
S taut_slope(const Vec3<S>& d, const StringParams<S>& p) {
  using std::sqrt;
  return p.relaxation.slope(S(sqrt(d.dot(d)) - p.length));
}

}  // namespace detail

/// Ideal string force from virtual work, directed along Delta.
template <typename S>
Vec3<S> constraint_force(const BallState<S>& s, const StringParams<S>& p) {
  const Vec3<S> d = s.x_b - s.x_c;
  const Vec3<S> dd = s.xd_b - s.xd_c;
  const S slope = detail::taut_slope(d, p);
  if (ad::value(slope) == 0.0) return Vec3<S>::Zero();
  const Vec3<S> g = p.gravity.template cast<S>();
  const S num = d.dot(g) - d.dot(s.xdd_c) + dd.dot(dd);
  return d * S(-p.ball_mass * slope * num / (d.dot(d) + p.delta));
}

/// Extra force along Delta that turns the taut-branch constraint dynamics into
/// hdd = -kp h - kd hd and cancels the radial part of the ball damping.
template <typename S>
Vec3<S> stabilization_force(const BallState<S>& s, const StringParams<S>& p) {
  const Vec3<S> d = s.x_b - s.x_c;
  const Vec3<S> dd = s.xd_b - s.xd_c;
  const S slope = detail::taut_slope(d, p);
  if (ad::value(slope) == 0.0) return Vec3<S>::Zero();
  const S h = d.dot(d) - p.length * p.length;
  const S hd = S(2) * d.dot(dd);
  const S radial_damping = -p.damping * d.dot(s.xd_b) / p.ball_mass;
  const S num = radial_damping + S(0.5) * (p.kp * h + p.kd * hd);
  return d * S(-p.ball_mass * slope * num / (d.dot(d) + p.delta));
}

template <typename S>
Vec3<S> ball_dynamics(const BallState<S>& s, const StringParams<S>& p) {
  const Vec3<S> f = p.gravity.template cast<S>() * p.ball_mass - s.xd_b * S(p.damping) +
                    constraint_force(s, p) + stabilization_force(s, p);
  return f / p.ball_mass;
}

struct PenaltyWeights {
  double g = 1e2;
  double gd = 1e1;
  double gdd = 1e0;
};

/// (g, gd, gdd) for one recorded sample. gdd differentiates g twice along the
/// measured ball acceleration.
template <typename S>
Eigen::Matrix<S, 3, 1> constraint_derivatives(const BallSample& sample, const StringParams<S>& p) {
  const BallState<S> s = cup_state(sample, p);
  const ConstraintValues<S> c = constraint_values(s, p);
  const Vec3<S> d = s.x_b - s.x_c;
  const Vec3<S> dd = s.xd_b - s.xd_c;
  const S gdd = p.relaxation.slope(c.h) * S(2) *
                (dd.dot(dd) + d.dot(Vec3<S>(sample.xdd_b.cast<S>() - s.xdd_c)));
  return {c.g, c.gd, gdd};
}

template <typename S>
S constraint_penalty(std::span<const BallSample> samples, const StringParams<S>& p,
                     const PenaltyWeights& w = {}) {
  S acc(0);
  for (const auto& sample : samples) {
    const auto v = constraint_derivatives(sample, p);
    acc += S(w.g) * v[0] * v[0] + S(w.gd) * v[1] * v[1] + S(w.gdd) * v[2] * v[2];
  }
  return acc;
}

/// Motion of the last link frame as a function of time.
using FrameMotion = std::function<FrameState(double)>;

/// Frame held still at `position`.
FrameMotion static_frame(const Eigen::Vector3d& position);

/// Smooth default excitation: small sinusoidal translation around `centre`
/// and rotation about a fixed tilted axis.
FrameMotion wobbling_frame(const Eigen::Vector3d& centre);

/// Cartesian simulation of the ball under ball_dynamics, RK4 with the frame
/// motion sampled at the stage times. Returns steps + 1 samples.
std::vector<BallSample> simulate_ball(const StringParams<double>& p, const FrameMotion& motion,
                                      const Eigen::Vector3d& x0, const Eigen::Vector3d& v0,
                                      double dt, int steps);

/// Initial condition of the string direction in spherical coordinates:
/// polar angle from straight down and azimuth, with their rates.
struct SphericalStart {
  double polar = 0.5;
  double azimuth = 0.0;
  double polar_rate = 0.0;
  double azimuth_rate = 5.0;
};

/// Ball trajectories that satisfy the taut-string constraint exactly: the
/// spherical pendulum is integrated in its own angles relative to the moving
/// cup, including the ball damping, and mapped back to world coordinates.
std::vector<BallSample> spherical_pendulum_data(const StringParams<double>& p,
                                                const FrameMotion& motion,
                                                const SphericalStart& start, double dt, int steps);

struct StringFitConfig {
  int iterations = 200;
  double learning_rate = 1e-2;
  double final_lr_fraction = 0.05;
  PenaltyWeights penalty;
  /// Anneal a softplus relaxation of the taut-string switch from
  /// `initial_sharpness` up to `final_sharpness` (1/m); off means exact ReLU.
  bool anneal = true;
  double initial_sharpness = 10.0;
  double final_sharpness = 1e5;
  double shift = 10.0;
  int stride = 1;  // use every stride-th sample
  /// Levenberg-Marquardt refinement after the gradient phase: a few stages of
  /// increasing sharpness, then the exact (ReLU) loss.
  int refine_iterations = 15;  // per stage
  int refine_stages = 6;
};

struct StringFitResult {
  StringParams<double> params;
  std::vector<double> loss;  // per gradient iteration, then per refinement iteration
  int gradient_iterations = 0;
};

class IdentificationError : public std::runtime_error {
 public:
  IdentificationError(const std::string& what, int iteration, int sample)
      : std::runtime_error(what), iteration_(iteration), sample_(sample) {}
  int iteration() const { return iteration_; }
  int sample() const { return sample_; }

 private:
  int iteration_;
  int sample_;
};

/// Fits string length and cup transform to ball data by minimising the ball
/// acceleration error plus the constraint penalty. The ball mass is held fixed
/// (it cancels from the string force) and so is the rotation of T_E, which
/// does not move the cup point.
StringFitResult identify_string(std::span<const BallSample> data, const StringParams<double>& init,
                                const StringFitConfig& config = {});

}  // namespace dnea

#endif  // DNEA_CONSTRAINT_HPP_
