// Acceptance checks, one line per criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dnea/bench.hpp"
#include "dnea/constraint.hpp"
#include "dnea/dynamics.hpp"
#include "dnea/integrate.hpp"
#include "dnea/sysid.hpp"

using namespace dnea;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kG = 9.81;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Eigen::VectorXd uniform(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

Eigen::VectorXd vec1(double x) { return Eigen::VectorXd::Constant(1, x); }

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Euler-Lagrange equations of the planar arm, angles from hanging down, the
// second relative to the first.
Eigen::Vector2d two_link_lagrangian(const TwoLinkParams& p, const Eigen::VectorXd& q,
                                    const Eigen::VectorXd& qd, const Eigen::VectorXd& qdd) {
  const double c2 = std::cos(q[1]), s2 = std::sin(q[1]);
  const double m11 = p.m1 * p.c1 * p.c1 + p.i1 + p.i2 +
                     p.m2 * (p.l1 * p.l1 + p.c2 * p.c2 + 2 * p.l1 * p.c2 * c2);
  const double m12 = p.m2 * (p.c2 * p.c2 + p.l1 * p.c2 * c2) + p.i2;
  const double m22 = p.m2 * p.c2 * p.c2 + p.i2;
  const double h = p.m2 * p.l1 * p.c2 * s2;
  const double g2 = p.m2 * p.c2 * kG * std::sin(q[0] + q[1]);
  const double g1 = (p.m1 * p.c1 + p.m2 * p.l1) * kG * std::sin(q[0]) + g2;
  return {m11 * qdd[0] + m12 * qdd[1] - h * (2 * qd[0] * qd[1] + qd[1] * qd[1]) + g1,
          m12 * qdd[0] + m22 * qdd[1] + h * qd[0] * qd[0] + g2};
}

Outcome algorithmic_correctness() {
  double worst_trip = 0.0;
  for (const SystemId id : {SystemId::kPendulum, SystemId::kCartpole, SystemId::kFuruta}) {
    const RobotModel m = make_system(id);
    const BodyTree<double> tree = instantiate(m);
    std::mt19937_64 rng(101);
    for (int k = 0; k < 1000; ++k) {
      const auto q = uniform(rng, m.dof(), -kPi, kPi), qd = uniform(rng, m.dof(), -5, 5),
                 qdd = uniform(rng, m.dof(), -10, 10);
      const Eigen::VectorXd back = aba<double>(tree, q, qd, rnea<double>(tree, q, qd, qdd));
      worst_trip = std::max(worst_trip, (back - qdd).norm() / qdd.norm());
    }
  }
  const TwoLinkParams p;
  const BodyTree<double> arm = instantiate(make_two_link_arm(p));
  std::mt19937_64 rng(102);
  double worst_oracle = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto q = uniform(rng, 2, -kPi, kPi), qd = uniform(rng, 2, -5, 5), qdd = uniform(rng, 2, -10, 10);
    const Eigen::VectorXd tau = rnea<double>(arm, q, qd, qdd);
    worst_oracle = std::max(worst_oracle, (tau - two_link_lagrangian(p, q, qd, qdd)).cwiseAbs().maxCoeff());
  }
  return {worst_trip < 1e-9 && worst_oracle < 1e-9,
          "round trip rel " + fmt(worst_trip) + ", two-link vs Lagrangian " + fmt(worst_oracle)};
}

template <typename S>
StringParams<S> string_from(std::span<const S> v) {
  StringParams<S> p;
  p.length = v[0];
  p.cup_offset = Vec3<S>(v[1], v[2], v[3]);
  p.cup_rpy = Vec3<S>(v[4], v[5], v[6]);
  p.ball_mass = v[7];
  return p;
}

Outcome gradient_integrity() {
  constexpr int kConfigs = 50;
  std::ostringstream detail;
  double overall = 0.0;
  auto note = [&](const std::string& name, double worst) {
    detail << name << " " << fmt(worst) << "; ";
    overall = std::max(overall, worst);
  };

  const std::vector<SystemId> systems = {SystemId::kPendulum, SystemId::kCartpole, SystemId::kFuruta,
                                         SystemId::kTwoLink};
  const std::vector<ActuatorKind> kinds = {ActuatorKind::kIdentity, ActuatorKind::kViscous,
                                           ActuatorKind::kStribeck, ActuatorKind::kNNFriction,
                                           ActuatorKind::kNNResidual, ActuatorKind::kFFNN};
  // Losses at physical scale: every system, both kinematics settings and the
  // analytic actuators, parameters 10% off the ground truth. The network
  // actuators are checked on their own below.
  std::mt19937_64 draw(112);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const LossKind loss : {LossKind::kForward, LossKind::kInverse}) {
    double worst = 0.0;
    for (int k = 0; k < 2 * kConfigs; ++k) {
      const SystemId id = systems[k % systems.size()];
      const ActuatorKind kind = kinds[(k / 4) % 3];
      const RobotModel truth =
          bench_truth(id, kind == ActuatorKind::kStribeck ? DatasetKind::kStribeckTrajectory : DatasetKind::kUniform);
      const auto data = gen_uniform(truth, default_ranges(id), 4, 500 + k);
      RobotModel m = truth;
      if (kind == ActuatorKind::kIdentity) m.actuator = ActuatorModel::identity(static_cast<int>(m.dof()));
      m.kinematics_known = (k / 12) % 2 == 0;
      Eigen::VectorXd theta = model_parameters(m);
      for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] += 0.1 * (std::abs(theta[i]) + 0.1) * gauss(draw);
      // frozen coordinates are dropped, as in identify's own check
      const std::vector<std::uint8_t> mask = trainable_mask(m);
      std::vector<double> free;
      for (Eigen::Index i = 0; i < theta.size(); ++i) {
        if (mask[i]) free.push_back(theta[i]);
      }
      auto f = [&](auto v) {
        using S = std::remove_cv_t<typename decltype(v)::element_type>;
        std::vector<S> full(theta.size());
        for (Eigen::Index i = 0, j = 0; i < theta.size(); ++i) full[i] = mask[i] ? v[j++] : S(theta[i]);
        const std::span<const S> all(full);
        return loss == LossKind::kForward ? forward_loss<S>(m, all, data.samples) : inverse_loss<S>(m, all, data.samples);
      };
      worst = std::max(worst, ad::check_gradient(f, std::span<const double>(free)));
    }
    note(loss == LossKind::kForward ? "forward_loss" : "inverse_loss", worst);
  }

  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst_force = 0.0, worst_penalty = 0.0;
  for (int k = 0; k < kConfigs; ++k) {
    const std::vector<double> v{0.35 + 0.05 * u(rng), 0.05 * u(rng), 0.05 * u(rng), 0.05 * u(rng),
                                u(rng), u(rng), u(rng), 0.5 + 0.3 * u(rng)};
    std::vector<BallSample> samples(3);
    for (auto& s : samples) {
      s.frame.position = {0.1 * u(rng), 0.1 * u(rng), 1.0};
      s.frame.rotation = rotation_from_rpy<double>({0.3 * u(rng), 0.3 * u(rng), u(rng)});
      s.frame.velocity = {u(rng), u(rng), u(rng)};
      s.frame.angular_velocity = {u(rng), u(rng), u(rng)};
      s.frame.acceleration = {u(rng), u(rng), u(rng)};
      s.frame.angular_acceleration = {u(rng), u(rng), u(rng)};
      // past the string length so every probe sits on the taut branch
      const Eigen::Vector3d dir = Eigen::Vector3d(0.4 * u(rng), 0.4 * u(rng), -1).normalized();
      const Eigen::Vector3d cup = s.frame.position + s.frame.rotation * Eigen::Vector3d(v[1], v[2], v[3]);
      s.x_b = cup + (v[0] + 0.02 + 0.01 * std::abs(u(rng))) * dir;
      s.xd_b = {u(rng), u(rng), u(rng)};
      s.xdd_b = {u(rng), u(rng), u(rng) - kG};
    }
    const Eigen::Vector3d w(u(rng), u(rng), u(rng));
    worst_force = std::max(worst_force, ad::check_gradient(
                                            [&](auto x) {
                                              using S = std::remove_cv_t<typename decltype(x)::value_type>;
                                              const StringParams<S> p = string_from<S>(x);
                                              return S(w.cast<S>().dot(constraint_force(cup_state(samples[0], p), p)));
                                            },
                                            v));
    worst_penalty = std::max(worst_penalty, ad::check_gradient(
                                                [&](auto x) {
                                                  using S = std::remove_cv_t<typename decltype(x)::value_type>;
                                                  return constraint_penalty<S>(samples, string_from<S>(x));
                                                },
                                                v));
  }
  note("constraint_force", worst_force);
  note("constraint_penalty", worst_penalty);

  for (const ActuatorKind kind : kinds) {
    double worst = 0.0;
    for (int k = 0; k < kConfigs; ++k) {
      ActuatorModel a = ActuatorModel::initial(kind, 2, {6}, 800 + k);
      if (a.params.size() == 0) break;
      a.params = uniform(rng, a.params.size(), -1, 1);
      const auto tau = uniform(rng, 2, -2, 2), q = uniform(rng, 2, -2, 2), qd = uniform(rng, 2, -2, 2),
                 w = uniform(rng, 2, 0.5, 1.5);
      const std::vector<double> p(a.params.data(), a.params.data() + a.params.size());
      worst = std::max(worst, ad::check_gradient(
                                  [&](auto x) {
                                    using S = std::remove_cv_t<typename decltype(x)::value_type>;
                                    const VecX<S> out = apply_actuator<S>(a, x, tau.cast<S>(), q.cast<S>(), qd.cast<S>());
                                    S acc(0);
                                    for (Eigen::Index i = 0; i < out.size(); ++i) acc += S(w[i]) * out[i] * out[i];
                                    return acc;
                                  },
                                  p));
    }
    note(std::string(to_string(kind)), worst);
  }
  std::string d = detail.str();
  return {overall < 1e-4, "max rel error " + fmt(overall) + " (" + d.substr(0, d.size() - 2) + ")"};
}

Outcome physical_plausibility() {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  int bad = 0;
  double min_mass = INFINITY, min_principal = INFINITY, min_slack = INFINITY;
  for (int k = 0; k < 100000; ++k) {
    std::vector<double> v(kLinkParamCount);
    for (auto& x : v) x = u(rng);
    const PlausibilityReport r = check_plausibility(LinkParams<double>::unpack(v));
    min_mass = std::min(min_mass, r.mass);
    min_principal = std::min(min_principal, r.principal.minCoeff());
    min_slack = std::min(min_slack, r.triangle_slack);
    if (!(r.mass >= 0.0 && r.principal.minCoeff() >= -1e-12 && r.triangle_slack >= -1e-12 && r.plausible(1e-12))) ++bad;
  }

  // every iterate of two identifications
  int checks = 0, failures = 0;
  for (const SystemId id : {SystemId::kPendulum, SystemId::kFuruta}) {
    const auto data = gen_uniform(bench_truth(id, DatasetKind::kUniform), default_ranges(id), 50, 105);
    RobotModel m = make_system(id);
    m.actuator = ActuatorModel::initial(ActuatorKind::kStribeck, m.dof(), {}, 106);
    m.kinematics_known = id == SystemId::kPendulum;
    OptimConfig cfg;
    cfg.iterations = 300;
    cfg.plausibility_every = 1;
    cfg.seed = 107;
    FitOptions opt;
    opt.init = InitKind::kRandom;
    const FitReport r = identify(data, m, cfg, opt);
    checks += r.plausibility_checks;
    failures += r.plausibility_failures;
  }
  return {bad == 0 && failures == 0 && checks >= 600,
          std::to_string(bad) + "/100000 draws implausible (min m " + fmt(min_mass) + ", min J_p " +
              fmt(min_principal) + ", min triangle slack " + fmt(min_slack) + "); " + std::to_string(failures) +
              "/" + std::to_string(checks) + " identify iterates implausible"};
}

Outcome passivity() {
  std::mt19937_64 rng(108);
  std::uniform_int_distribution<int> dofs(1, 4);
  std::uniform_int_distribution<std::uint64_t> seeds;
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst_power = -INFINITY;
  for (auto kind : {ActuatorKind::kViscous, ActuatorKind::kStribeck, ActuatorKind::kNNFriction}) {
    for (int k = 0; k < 100000; ++k) {
      const int n = dofs(rng);
      ActuatorModel a = ActuatorModel::initial(kind, n, {8}, seeds(rng));
      for (Eigen::Index i = 0; i < a.params.size(); ++i) a.params[i] = 2.0 * gauss(rng);
      const auto tau = uniform(rng, n, -5, 5), q = uniform(rng, n, -4, 4), qd = uniform(rng, n, -6, 6);
      worst_power = std::max(worst_power, (apply_actuator(a, tau, q, qd) - tau).dot(qd));
    }
  }

  // 10 s at 250 Hz; drift relative to the largest kinetic energy reached
  double worst_drift = 0.0;
  int increases = 0;
  for (const SystemId id : {SystemId::kPendulum, SystemId::kCartpole, SystemId::kFuruta, SystemId::kTwoLink}) {
    RobotModel m = make_system(id);
    m.actuator = ActuatorModel::identity(static_cast<int>(m.dof()));
    const Eigen::Index n = m.dof();
    std::mt19937_64 r(109);
    const Eigen::VectorXd q0 = uniform(r, n, -1.5, 1.5), qd0 = uniform(r, n, -1, 1);
    const std::vector<Eigen::VectorXd> u(2500, Eigen::VectorXd::Zero(n));
    Trajectory t = rollout(m, q0, qd0, u, 1.0 / 250);
    const double e0 = system_energy(m, t.states[0].q, t.states[0].qd).total();
    double drift = 0.0, peak = 0.0;
    for (const auto& s : t.states) {
      const auto e = system_energy(m, s.q, s.qd);
      drift = std::max(drift, std::abs(e.total() - e0));
      peak = std::max(peak, e.kinetic);
    }
    worst_drift = std::max(worst_drift, t.diverged ? INFINITY : drift / peak);

    m.actuator = ActuatorModel::viscous(ground_truth_friction(id).viscous_coefficients());
    t = rollout(m, q0, qd0, u, 1.0 / 250);
    double prev = INFINITY;
    for (const auto& s : t.states) {
      const double e = system_energy(m, s.q, s.qd).total();
      if (e > prev) ++increases;
      prev = e;
    }
  }
  return {worst_power <= 1e-12 && worst_drift < 1e-3 && increases == 0,
          "max (tau_out - tau) . qd " + fmt(worst_power) + ", frictionless energy drift " + fmt(worst_drift) +
              ", viscous energy increases " + std::to_string(increases)};
}

Outcome figure_ordering() {
  const int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::ostringstream detail;
  bool pass = true;

  // uniform data: DiffNEA with viscous friction
  for (const auto& [id, iters] : std::vector<std::pair<SystemId, int>>{
           {SystemId::kPendulum, 2000}, {SystemId::kCartpole, 5000}, {SystemId::kTwoLink, 2000}}) {
    BenchConfig cfg;
    cfg.systems = {id};
    cfg.datasets = {DatasetKind::kUniform};
    cfg.variants = {Variant::kDiffNEA};
    cfg.actuators = {ActuatorKind::kViscous};
    cfg.optim.iterations = iters;
    cfg.probe.starts = 0;
    cfg.threads = threads;
    const auto rows = run_bench(cfg);
    const double mse = rows.at(0).error.empty() ? rows[0].one_step_mse : INFINITY;
    pass = pass && mse < 1e-8;
    detail << to_string(id) << " uniform 1-step " << fmt(mse) << "; ";
  }

  // Stribeck trajectories over ten seeds
  BenchConfig cfg;
  cfg.systems = {SystemId::kPendulum};
  cfg.datasets = {DatasetKind::kStribeckTrajectory};
  cfg.variants = {Variant::kDiffNEA, Variant::kNoKin, Variant::kBlackBox};
  cfg.actuators = {ActuatorKind::kViscous, ActuatorKind::kStribeck, ActuatorKind::kNNFriction};
  cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  cfg.optim.iterations = 1000;
  cfg.threads = threads;
  int bounded = 0, blackbox = 0, errors = 0;
  for (const BenchRow& r : run_bench(cfg)) {
    if (!r.error.empty()) ++errors;
    (r.variant == Variant::kBlackBox ? blackbox : bounded) += r.ood.divergences;
  }
  pass = pass && errors == 0 && bounded == 0 && blackbox >= 1;
  detail << "Stribeck trajectories: energy-bounded divergences " << bounded << ", black box " << blackbox;
  if (errors) detail << ", failed cells " << errors;
  return {pass, detail.str()};
}

Outcome parameter_recovery() {
  const auto data = gen_uniform(make_pendulum(), default_ranges(SystemId::kPendulum), 200, 110);
  const double truth = 1.0;  // m l^2 of the default pendulum
  const NeaResult nea = nea_linear_regression(data, make_pendulum());
  const double nea_err = std::abs(nea.standard[9] - truth) / truth;
  OptimConfig cfg;
  cfg.iterations = 2000;
  cfg.seed = 111;
  FitOptions opt;
  opt.init = InitKind::kRandom;
  const FitReport fit = identify(data, make_pendulum(), cfg, opt);
  const double diff_err = std::abs(standard_parameters(fit.model.links[0].params)[9] - truth) / truth;

  StringParams<double> ball;
  ball.length = 0.4;
  ball.cup_offset = {0.0, 0.0, 0.05};
  const auto samples = spherical_pendulum_data(ball, wobbling_frame({0, 0, 1.0}), SphericalStart{}, 1.0 / 250, 1250);
  StringParams<double> init = ball;
  init.length = ball.length + 0.2;
  init.cup_offset = ball.cup_offset + Eigen::Vector3d(0, 0, 0.2);
  StringFitConfig sc;
  sc.stride = 2;
  const StringFitResult sf = identify_string(samples, init, sc);
  const double r_err = std::abs(sf.params.length - ball.length);
  const double t_err = (sf.params.cup_offset - ball.cup_offset).norm();
  return {nea_err < 1e-4 && diff_err < 1e-4 && r_err < 1e-3 && t_err < 1e-3,
          "m l^2 rel error NEA " + fmt(nea_err) + ", DiffNEA " + fmt(diff_err) + "; string r error " + fmt(r_err) +
              " m, T_E translation error " + fmt(t_err) + " m"};
}

Outcome constraint_fidelity() {
  StringParams<double> p;
  p.length = 0.4;
  p.ball_mass = 0.05;
  const auto traj = simulate_ball(p, wobbling_frame({0, 0, 1.0}), Eigen::Vector3d(0.2, 0, 1.0 - std::sqrt(0.16 - 0.04)),
                                  Eigen::Vector3d(0, 1.2, 0), 1.0 / 250, 2500);
  double worst = 0.0;
  for (const auto& s : traj) {
    const BallState<double> c = cup_state(s, p);
    worst = std::max(worst, std::abs((c.x_b - c.x_c).norm() - p.length));
  }
  const auto data = spherical_pendulum_data(p, wobbling_frame({0, 0, 1.0}), SphericalStart{}, 1.0 / 250, 500);
  const double satisfied = constraint_penalty<double>(data, p);
  StringParams<double> wrong = p;
  wrong.length = p.length - 0.05;
  const double misspecified = constraint_penalty<double>(data, wrong);
  return {worst < 5e-3 * p.length && satisfied < 1e-10 && misspecified > 0.0,
          "max | |Delta| - r | " + fmt(worst) + " m over 10 s, penalty on exact data " + fmt(satisfied) +
              ", with r - 5 cm " + fmt(misspecified)};
}

double pendulum_endpoint(double dt) {
  const RobotModel m = make_pendulum();
  const int steps = static_cast<int>(std::lround(2.0 / dt));
  return rollout(m, vec1(kPi / 2), vec1(0.0), std::vector<Eigen::VectorXd>(steps, vec1(0.0)), dt).states.back().q[0];
}

Outcome integrator_order() {
  const double dt = 0.02, ref = pendulum_endpoint(dt / 64);
  const double factor = std::abs(pendulum_endpoint(dt) - ref) / std::abs(pendulum_endpoint(dt / 2) - ref);
  return {factor >= 12.0 && factor <= 20.0, "error ratio " + fmt(factor)};
}

}  // namespace

// With arguments, only the listed criteria run (e.g. `acceptance_test 2 7`).
int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"algorithmic correctness", algorithmic_correctness},
      {"gradient integrity", gradient_integrity},
      {"physical plausibility", physical_plausibility},
      {"passivity and energy", passivity},
      {"uniform exactness and divergence ordering", figure_ordering},
      {"parameter recovery", parameter_recovery},
      {"constraint fidelity", constraint_fidelity},
      {"integrator order", integrator_order},
  };
  int failed = 0;
  std::vector<bool> selected(criteria.size(), argc == 1);
  for (int a = 1; a < argc; ++a) {
    const int k = std::atoi(argv[a]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s criterion %zu (%s): %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), s);
    std::fflush(stdout);
  }
  return failed;
}
