#include "dnea/constraint.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "dnea/integrate.hpp"
#include "dnea/optim.hpp"

namespace dnea {

FrameMotion static_frame(const Eigen::Vector3d& position) {
  return [position](double) {
    FrameState f;
    f.position = position;
    return f;
  };
}

FrameMotion wobbling_frame(const Eigen::Vector3d& centre) {
  return [centre](double t) {
    const Eigen::Vector3d amp(0.05, 0.04, 0.03), w(1.3, 0.9, 1.7), ph(0.0, 0.5, 0.0);
    FrameState f;
    for (int i = 0; i < 3; ++i) {
      const double s = std::sin(w[i] * t + ph[i]), c = std::cos(w[i] * t + ph[i]);
      f.position[i] = centre[i] + amp[i] * s;
      f.velocity[i] = amp[i] * w[i] * c;
      f.acceleration[i] = -amp[i] * w[i] * w[i] * s;
    }
    const Eigen::Vector3d axis = Eigen::Vector3d(0.3, 0.2, 1.0).normalized();
    const double a = 0.4, om = 0.8;
    const double psi = a * std::sin(om * t);
    f.rotation = Eigen::AngleAxisd(psi, axis).toRotationMatrix();
    f.angular_velocity = axis * (a * om * std::cos(om * t));
    f.angular_acceleration = axis * (-a * om * om * std::sin(om * t));
    return f;
  };
}

namespace {

BallSample make_sample(double t, const FrameState& frame, const Eigen::Vector3d& x,
                       const Eigen::Vector3d& v) {
  BallSample s;
  s.t = t;
  s.frame = frame;
  s.x_b = x;
  s.xd_b = v;
  return s;
}

}  // namespace

std::vector<BallSample> simulate_ball(const StringParams<double>& p, const FrameMotion& motion,
                                      const Eigen::Vector3d& x0, const Eigen::Vector3d& v0,
                                      double dt, int steps) {
  p.validate();
  auto accel = [&](const Eigen::VectorXd& y) {
    const BallSample s = make_sample(y[6], motion(y[6]), y.segment<3>(0), y.segment<3>(3));
    return ball_dynamics(cup_state(s, p), p);
  };
  auto field = [&](const Eigen::VectorXd& y, const Eigen::VectorXd&) {
    Eigen::VectorXd dy(7);
    dy << y.segment<3>(3), accel(y), 1.0;
    return dy;
  };
  Eigen::VectorXd y(7);
  y << x0, v0, 0.0;
  const Eigen::VectorXd none(0);
  std::vector<BallSample> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    const double t = k * dt;
    y[6] = t;  // keep the clock exact
    BallSample s = make_sample(t, motion(t), y.segment<3>(0), y.segment<3>(3));
    s.xdd_b = accel(y);
    out.push_back(s);
    if (k < steps) y = rk4_step<double>(field, y, none, dt);
  }
  return out;
}

namespace {

struct SphericalFrame {
  Eigen::Vector3d n, n_t, n_p, n_tt, n_tp, n_pp;
};

SphericalFrame spherical(double th, double ph) {
  const double st = std::sin(th), ct = std::cos(th), sp = std::sin(ph), cp = std::cos(ph);
  SphericalFrame f;
  f.n = {st * cp, st * sp, -ct};
  f.n_t = {ct * cp, ct * sp, st};
  f.n_p = {-st * sp, st * cp, 0.0};
  f.n_tt = -f.n;
  f.n_tp = {-ct * sp, ct * cp, 0.0};
  f.n_pp = {-st * cp, -st * sp, 0.0};
  return f;
}

}  // namespace

std::vector<BallSample> spherical_pendulum_data(const StringParams<double>& p,
                                                const FrameMotion& motion,
                                                const SphericalStart& start, double dt, int steps) {
  p.validate();
  const double r = p.length, m = p.ball_mass;

  struct Eval {
    BallSample sample;
    Eigen::Vector2d angle_acc;
  };
  auto evaluate = [&](const Eigen::VectorXd& y) {
    const double th = y[0], ph = y[1], thd = y[2], phd = y[3], t = y[4];
    const SphericalFrame sf = spherical(th, ph);
    BallSample s = make_sample(t, motion(t), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero());
    const BallState<double> cup = cup_state(s, p);
    const Eigen::Vector3d nd = sf.n_t * thd + sf.n_p * phd;
    s.x_b = cup.x_c + r * sf.n;
    s.xd_b = cup.xd_c + r * nd;
    const Eigen::Vector3d ge = p.gravity - cup.xdd_c - (p.damping / m) * s.xd_b;
    const double st = std::sin(th), ct = std::cos(th);
    if (std::abs(st) < 1e-6) throw std::runtime_error("spherical_pendulum_data: pole crossing");
    const double thdd = st * ct * phd * phd + ge.dot(sf.n_t) / r;
    const double phdd = (ge.dot(sf.n_p) / r - 2.0 * st * ct * thd * phd) / (st * st);
    const Eigen::Vector3d ndd = sf.n_t * thdd + sf.n_p * phdd + sf.n_tt * thd * thd +
                                2.0 * sf.n_tp * thd * phd + sf.n_pp * phd * phd;
    s.xdd_b = cup.xdd_c + r * ndd;
    return Eval{s, {thdd, phdd}};
  };
  auto field = [&](const Eigen::VectorXd& y, const Eigen::VectorXd&) {
    const Eval e = evaluate(y);
    Eigen::VectorXd dy(5);
    dy << y[2], y[3], e.angle_acc, 1.0;
    return dy;
  };

  Eigen::VectorXd y(5);
  y << start.polar, start.azimuth, start.polar_rate, start.azimuth_rate, 0.0;
  const Eigen::VectorXd none(0);
  std::vector<BallSample> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    y[4] = k * dt;
    out.push_back(evaluate(y).sample);
    if (k < steps) y = rk4_step<double>(field, y, none, dt);
  }
  return out;
}

namespace {

template <typename S>
StringParams<S> unpack_string(const StringParams<double>& base, std::span<const S> v) {
  StringParams<S> p = base.template cast<S>();
  p.length = v[0] * v[0];
  p.cup_offset = Vec3<S>(v[1], v[2], v[3]);
  return p;
}

// Residuals of one sample: acceleration error and weighted constraint values.
template <typename S>
Eigen::Matrix<S, 6, 1> sample_residual(const BallSample& s, const StringParams<S>& p,
                                       const StringParams<S>& exact, const PenaltyWeights& w) {
  const Vec3<S> err = s.xdd_b.template cast<S>() - ball_dynamics(cup_state(s, p), p);
  const auto c = constraint_derivatives(s, exact);
  Eigen::Matrix<S, 6, 1> r;
  r << err, c[0] * std::sqrt(w.g), c[1] * std::sqrt(w.gd), c[2] * std::sqrt(w.gdd);
  return r;
}

template <typename S>
S string_loss(std::span<const BallSample> data, const StringParams<double>& base,
              std::span<const S> v, const Relaxation& relax, const StringFitConfig& cfg) {
  StringParams<S> p = unpack_string(base, v);
  p.relaxation = relax;
  StringParams<S> exact = p;
  exact.relaxation = Relaxation{};
  S fit(0), pen(0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < data.size(); i += static_cast<std::size_t>(cfg.stride)) {
    const auto r = sample_residual(data[i], p, exact, cfg.penalty);
    fit += r.template head<3>().squaredNorm();
    pen += r.template tail<3>().squaredNorm();
    ++count;
  }
  return (fit + pen) / S(static_cast<double>(count));
}

int first_bad_sample(std::span<const BallSample> data, const StringParams<double>& p) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Eigen::Vector3d a = ball_dynamics(cup_state(data[i], p), p);
    if (!a.allFinite() || !data[i].xdd_b.allFinite()) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

StringFitResult identify_string(std::span<const BallSample> data, const StringParams<double>& init,
                                const StringFitConfig& cfg) {
  init.validate();
  if (data.empty()) throw std::invalid_argument("identify_string: empty dataset");
  if (cfg.stride < 1) throw std::invalid_argument("identify_string: stride must be >= 1");

  Eigen::VectorXd x(4);
  x << std::sqrt(init.length), init.cup_offset;
  Adam adam(Eigen::VectorXd::Constant(4, cfg.learning_rate));

  StringFitResult result;
  result.loss.reserve(static_cast<std::size_t>(cfg.iterations));
  const int n_iter = std::max(cfg.iterations, 1);
  for (int it = 0; it < cfg.iterations; ++it) {
    const double frac = n_iter > 1 ? static_cast<double>(it) / (n_iter - 1) : 1.0;
    Relaxation relax;
    if (cfg.anneal) {
      relax.kind = Relaxation::Kind::kSoftplus;
      relax.sharpness = cfg.initial_sharpness *
                        std::pow(cfg.final_sharpness / cfg.initial_sharpness, frac);
      relax.shift = cfg.shift;
    }
    const std::vector<double> xv(x.data(), x.data() + x.size());
    std::vector<double> g(xv.size());
    const double loss = ad::value_and_grad(
        [&](std::span<const ad::Var> v) { return string_loss<ad::Var>(data, init, v, relax, cfg); },
        xv, g);
    if (!std::isfinite(loss)) {
      StringParams<double> p = unpack_string<double>(init, xv);
      p.relaxation = relax;
      throw IdentificationError("identify_string: non-finite loss at iteration " +
                                    std::to_string(it),
                                it, first_bad_sample(data, p));
    }
    result.loss.push_back(loss);
    const double scale = std::pow(cfg.final_lr_fraction, frac);
    adam.step(x, Eigen::Map<const Eigen::VectorXd>(g.data(), 4), scale);
  }
  result.gradient_iterations = static_cast<int>(result.loss.size());

  if (cfg.refine_iterations > 0) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); i += static_cast<std::size_t>(cfg.stride)) rows.push_back(i);
    const double norm = 1.0 / std::sqrt(static_cast<double>(rows.size()));
    // Continuation: sharpen the relaxation stage by stage, then finish on the
    // exact model. A slack guess has no ReLU gradient, so starting sharp stalls.
    std::vector<Relaxation> stages;
    if (cfg.anneal) {
      const int n_stage = std::max(cfg.refine_stages, 1);
      for (int j = 0; j < n_stage; ++j) {
        Relaxation relax;
        relax.kind = Relaxation::Kind::kSoftplus;
        const double frac = n_stage > 1 ? static_cast<double>(j) / (n_stage - 1) : 1.0;
        relax.sharpness = cfg.initial_sharpness * std::pow(cfg.final_sharpness / cfg.initial_sharpness, frac);
        relax.shift = cfg.shift;
        stages.push_back(relax);
      }
    }
    stages.push_back(Relaxation{});
    LmConfig lm;
    lm.iterations = cfg.refine_iterations;
    for (const Relaxation& relax : stages) {
      const LmResult refined = levenberg_marquardt(
          [&](std::size_t b, std::span<const ad::Var> v) {
            StringParams<ad::Var> p = unpack_string(init, v);
            p.relaxation = relax;
            StringParams<ad::Var> exact = p;
            exact.relaxation = Relaxation{};
            return Eigen::Matrix<ad::Var, 6, 1>(sample_residual(data[rows[b]], p, exact, cfg.penalty) *
                                                ad::Var(norm));
          },
          rows.size(), x, lm);
      x = refined.x;
      for (std::size_t k = 1; k < refined.cost.size(); ++k) result.loss.push_back(2.0 * refined.cost[k]);
    }
  }

  const std::vector<double> xv(x.data(), x.data() + x.size());
  result.params = unpack_string<double>(init, xv);
  return result;
}

}  // namespace dnea
