#include "dnea/sysid.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <thread>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <json.hpp>

#include "dnea/optim.hpp"

namespace dnea {

using nlohmann::json;

std::string_view to_string(LossKind k) { return k == LossKind::kForward ? "forward" : "inverse"; }

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kNEA: return "nea";
    case Variant::kDiffNEA: return "diffnea";
    case Variant::kNoKin: return "nokin";
    case Variant::kBlackBox: return "blackbox";
  }
  return "diffnea";
}

std::string_view to_string(InitKind i) { return i == InitKind::kRandom ? "random" : "prior"; }

LossKind loss_kind_from_string(std::string_view s) {
  if (s == "forward") return LossKind::kForward;
  if (s == "inverse") return LossKind::kInverse;
  throw std::invalid_argument("unknown loss kind '" + std::string(s) + "'");
}

Variant variant_from_string(std::string_view s) {
  if (s == "nea") return Variant::kNEA;
  if (s == "diffnea") return Variant::kDiffNEA;
  if (s == "nokin") return Variant::kNoKin;
  if (s == "blackbox") return Variant::kBlackBox;
  throw std::invalid_argument("unknown variant '" + std::string(s) + "'");
}

InitKind init_kind_from_string(std::string_view s) {
  if (s == "random") return InitKind::kRandom;
  if (s == "prior") return InitKind::kPrior;
  throw std::invalid_argument("unknown init '" + std::string(s) + "'");
}

void OptimConfig::validate() const {
  if (!(lr_physical > 0.0) || !(lr_network > 0.0)) {
    throw std::invalid_argument("optimizer: learning rates must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("optimizer: betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("optimizer: epsilon must be positive");
  if (iterations < 1) throw std::invalid_argument("optimizer: iterations must be >= 1");
  if (batch_size < 0) throw std::invalid_argument("optimizer: negative batch size");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw std::invalid_argument("optimizer: final_lr_fraction must lie in (0, 1]");
  }
  if (!(actuator_regularization >= 0.0)) {
    throw std::invalid_argument("optimizer: negative regularisation weight");
  }
  if (!(inverse_warmup >= 0.0 && inverse_warmup < 1.0)) {
    throw std::invalid_argument("optimizer: inverse_warmup must lie in [0, 1)");
  }
  if (threads < 1) throw std::invalid_argument("optimizer: threads must be >= 1");
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, Adam& state, double scale) {
  for (Eigen::Index i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::domain_error("adam_step: non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  state.step(params, grads, scale);
}

int link_parameter_count(const RobotModel& model) { return kLinkParamCount * model.dof(); }

Eigen::VectorXd model_parameters(const RobotModel& model) {
  const Eigen::VectorXd links = model.link_parameters();
  Eigen::VectorXd theta(links.size() + model.actuator.params.size());
  theta << links, model.actuator.params;
  return theta;
}

void set_model_parameters(RobotModel& model, const Eigen::VectorXd& theta) {
  const int nl = link_parameter_count(model);
  if (theta.size() != nl + model.actuator.params.size()) {
    throw DimensionError("set_model_parameters: expected " +
                         std::to_string(nl + model.actuator.params.size()) + " entries");
  }
  model.set_link_parameters(theta.head(nl));
  model.actuator.params = theta.tail(theta.size() - nl);
}

std::vector<std::uint8_t> trainable_mask(const RobotModel& model) {
  std::vector<std::uint8_t> mask;
  for (const Link& l : model.links) {
    const bool kin = !model.kinematics_known || !l.freeze_kinematics;
    for (int i = 0; i < kKinematicParamCount; ++i) mask.push_back(kin ? 1 : 0);
    for (int i = kKinematicParamCount; i < kLinkParamCount; ++i) mask.push_back(l.freeze_inertia ? 0 : 1);
  }
  mask.insert(mask.end(), static_cast<std::size_t>(model.actuator.params.size()), 1);
  return mask;
}

double forward_loss(const RobotModel& model, std::span<const JointState> data) {
  const Eigen::VectorXd theta = model_parameters(model);
  return forward_loss<double>(model, std::span<const double>(theta.data(), theta.size()), data);
}

double inverse_loss(const RobotModel& model, std::span<const JointState> data) {
  const Eigen::VectorXd theta = model_parameters(model);
  return inverse_loss<double>(model, std::span<const double>(theta.data(), theta.size()), data);
}

namespace {

constexpr std::size_t kChunk = 32;

// Sum over samples of term(theta, i), with its gradient. Each sample is taped
// on its own; chunks are reduced in index order, so the result is independent
// of the number of threads.
template <typename Term>
double summed_value_and_grad(std::size_t samples, const Eigen::VectorXd& theta, double weight,
                             int threads, const Term& term, Eigen::VectorXd& gradient) {
  const auto p = static_cast<std::size_t>(theta.size());
  const std::size_t chunks = (samples + kChunk - 1) / kChunk;
  std::vector<double> values(chunks, 0.0);
  std::vector<Eigen::VectorXd> grads(chunks);
  std::vector<std::string> errors(chunks);

  auto run = [&](std::size_t c) {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    std::vector<ad::Var> vars(p);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    double v = 0.0;
    const std::size_t end = std::min(samples, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      tape.clear();
      for (std::size_t k = 0; k < p; ++k) vars[k] = ad::Var::independent(theta[static_cast<Eigen::Index>(k)]);
      const ad::Var r = term(std::span<const ad::Var>(vars), i);
      v += r.value();
      if (r.recorded()) tape.accumulate(r.index(), weight, p, std::span<double>(g.data(), p));
    }
    values[c] = v;
    grads[c] = std::move(g);
  };
  auto guarded = [&](std::size_t c) {
    try {
      run(c);
    } catch (const std::exception& e) {
      errors[c] = e.what();
      values[c] = std::numeric_limits<double>::quiet_NaN();
      grads[c] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    }
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) guarded(c);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t c = t; c < chunks; c += workers) guarded(c);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t c = 0; c < chunks; ++c) {
    if (!errors[c].empty()) throw std::runtime_error(errors[c]);
  }

  gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  double total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    total += values[c];
    gradient += grads[c];
  }
  return total * weight;
}

}  // namespace

double loss_and_gradient(const RobotModel& model, const Eigen::VectorXd& theta,
                         std::span<const JointState> data, LossKind kind, double weight,
                         double actuator_regularization, int threads, Eigen::VectorXd& gradient) {
  const auto nl = static_cast<std::size_t>(link_parameter_count(model));
  if (static_cast<std::size_t>(theta.size()) != nl + static_cast<std::size_t>(model.actuator.params.size())) {
    throw DimensionError("loss_and_gradient: parameter vector has wrong length");
  }
  auto term = [&](std::span<const ad::Var> v, std::size_t i) {
    const BodyTree<ad::Var> tree = instantiate<ad::Var>(model, v.subspan(0, nl));
    return kind == LossKind::kForward
               ? forward_residual_norm<ad::Var>(model, tree, v.subspan(nl), data[i])
               : inverse_residual_norm<ad::Var>(model, tree, v.subspan(nl), data[i]);
  };
  double value = summed_value_and_grad(data.size(), theta, weight, threads, term, gradient);
  if (actuator_regularization > 0.0 && model.actuator.has_network()) {
    const Eigen::Index na = theta.size() - static_cast<Eigen::Index>(nl);
    const auto act = theta.tail(na);
    value += actuator_regularization * act.squaredNorm();
    gradient.tail(na) += 2.0 * actuator_regularization * act;
  }
  return value;
}

RolloutEvaluation evaluate_rollouts(const AccelerationFn& f, const TrajectoryDataset& truth,
                                    const std::vector<int>& horizons, int stride,
                                    const RolloutOptions& options) {
  if (!truth.dt) throw DataError("evaluate_rollouts: validation data must be trajectory-ordered");
  if (stride < 1) throw std::invalid_argument("evaluate_rollouts: stride must be >= 1");
  RolloutEvaluation out;
  out.horizons = horizons;
  const int n = truth.dof();
  const auto len = static_cast<int>(truth.size());
  const int hmax = horizons.empty() ? 0 : *std::max_element(horizons.begin(), horizons.end());
  if (hmax < 0) throw std::invalid_argument("evaluate_rollouts: negative horizon");

  // variance of every state dimension over the trajectory
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2 * n), var = Eigen::VectorXd::Zero(2 * n);
  auto state = [&](int k) {
    Eigen::VectorXd x(2 * n);
    x << truth.samples[static_cast<std::size_t>(k)].q, truth.samples[static_cast<std::size_t>(k)].qd;
    return x;
  };
  for (int k = 0; k < len; ++k) mean += state(k);
  mean /= std::max(len, 1);
  for (int k = 0; k < len; ++k) var += (state(k) - mean).cwiseAbs2();
  var /= std::max(len, 1);

  // A model that fails to evaluate (e.g. degenerate inertia) counts as divergent.
  const AccelerationFn guarded = [&f, n](const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                                        const Eigen::VectorXd& tau) {
    try {
      return f(q, qd, tau);
    } catch (const std::exception&) {
      return Eigen::VectorXd(Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN()));
    }
  };

  std::vector<Eigen::VectorXd> sse(horizons.size(), Eigen::VectorXd::Zero(2 * n));
  std::vector<int> count(horizons.size(), 0);
  for (int s = 0; s + hmax < len; s += stride) {
    std::vector<Eigen::VectorXd> u;
    for (int k = 0; k < hmax; ++k) u.push_back(truth.samples[static_cast<std::size_t>(s + k)].tau);
    const JointState& x0 = truth.samples[static_cast<std::size_t>(s)];
    const Trajectory t = rollout(guarded, x0.q, x0.qd, u, *truth.dt, options);
    ++out.rollouts;
    if (t.diverged) ++out.divergences;
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const auto idx = static_cast<std::size_t>(horizons[h]);
      if (idx >= t.size()) continue;
      Eigen::VectorXd pred(2 * n);
      pred << t.states[idx].q, t.states[idx].qd;
      sse[h] += (pred - state(s + horizons[h])).cwiseAbs2();
      ++count[h];
    }
  }
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    if (count[h] == 0) {
      out.nmse.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double acc = 0.0;
    int dims = 0;
    for (int d = 0; d < 2 * n; ++d) {
      if (!(var[d] > 1e-12)) continue;  // constant signal, no scale
      acc += sse[h][d] / count[h] / var[d];
      ++dims;
    }
    out.nmse.push_back(dims ? acc / dims : 0.0);
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

double gradient_check(const RobotModel& model, const Eigen::VectorXd& theta,
                      const std::vector<std::uint8_t>& mask, std::span<const JointState> data,
                      LossKind kind, double reg) {
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) free.push_back(i);
  }
  if (free.empty() || data.empty()) return 0.0;
  std::vector<double> x0;
  for (const std::size_t i : free) x0.push_back(theta[static_cast<Eigen::Index>(i)]);
  auto f = [&](auto v) {
    using S = std::remove_cv_t<typename decltype(v)::element_type>;
    std::vector<S> full(static_cast<std::size_t>(theta.size()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) full[static_cast<std::size_t>(i)] = S(theta[i]);
    for (std::size_t k = 0; k < free.size(); ++k) full[free[k]] = v[k];
    const std::span<const S> s(full);
    return kind == LossKind::kForward ? forward_loss<S>(model, s, data, reg)
                                      : inverse_loss<S>(model, s, data, reg);
  };
  return ad::check_gradient(f, std::span<const double>(x0));
}

}  // namespace

FitReport identify(const TrajectoryDataset& data, const RobotModel& model_template,
                   const OptimConfig& cfg, const FitOptions& options) {
  const auto start = Clock::now();
  cfg.validate();
  data.validate();
  if (options.variant != Variant::kDiffNEA && options.variant != Variant::kNoKin) {
    throw std::invalid_argument("identify: only the diffnea and nokin variants are fitted here");
  }
  if (data.empty()) throw DataError("identify: empty dataset");
  if (data.dof() != model_template.dof()) {
    throw DimensionError("identify: dataset has " + std::to_string(data.dof()) +
                         " joints, model has " + std::to_string(model_template.dof()));
  }
  model_template.validate();

  FitReport report;
  report.system = model_template.name;
  report.variant = options.variant;
  report.init = options.init;
  report.actuator = model_template.actuator.kind;
  report.config = cfg;

  RobotModel model = model_template;
  model.kinematics_known = options.variant == Variant::kDiffNEA;
  if (options.init == InitKind::kRandom) {
    randomize_link_parameters(model, cfg.seed, !model.kinematics_known);
    const auto& a = model.actuator;
    model.actuator = ActuatorModel::initial(a.kind, a.dof, a.hidden, cfg.seed + 1);
  }

  Eigen::VectorXd theta = model_parameters(model);
  const std::vector<std::uint8_t> mask = trainable_mask(model);
  const Eigen::Index nl = link_parameter_count(model);
  const double act_lr = model.actuator.has_network() ? cfg.lr_network : cfg.lr_physical;
  Eigen::VectorXd lr(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    lr[i] = mask[static_cast<std::size_t>(i)] ? (i < nl ? cfg.lr_physical : act_lr) : 0.0;
  }
  Adam adam(lr, AdamConfig{cfg.beta1, cfg.beta2, cfg.epsilon});

  const std::span<const JointState> all(data.samples);
  const int checked = std::min<int>(options.gradient_check_samples, static_cast<int>(all.size()));
  report.gradient_check_initial =
      gradient_check(model, theta, mask, all.first(static_cast<std::size_t>(checked)), cfg.loss,
                     cfg.actuator_regularization);

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  const bool minibatch = cfg.batch_size > 0 && static_cast<std::size_t>(cfg.batch_size) < all.size();
  std::size_t cursor = order.size();
  std::vector<JointState> batch;

  auto spot_check = [&] {
    set_model_parameters(model, theta);
    for (const Link& l : model.links) {
      ++report.plausibility_checks;
      if (!check_plausibility(l.params).plausible()) ++report.plausibility_failures;
    }
  };

  const int warmup_iterations =
      cfg.loss == LossKind::kForward ? static_cast<int>(cfg.inverse_warmup * cfg.iterations) : 0;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd grad;
  for (int it = 0; it < cfg.iterations; ++it) {
    std::span<const JointState> used = all;
    if (minibatch) {
      batch.clear();
      for (int b = 0; b < cfg.batch_size; ++b) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        batch.push_back(all[order[cursor++]]);
      }
      used = batch;
    }
    const bool warmup = it < warmup_iterations;
    if (it == warmup_iterations && it > 0) {
      adam = Adam(lr, AdamConfig{cfg.beta1, cfg.beta2, cfg.epsilon});
      best = std::numeric_limits<double>::infinity();
    }
    const LossKind kind = warmup ? LossKind::kInverse : cfg.loss;
    const double loss = loss_and_gradient(model, theta, used, kind, 1.0 / static_cast<double>(used.size()),
                                          cfg.actuator_regularization, cfg.threads, grad);
    if (!std::isfinite(loss)) {
      throw IdentificationError("identify: non-finite loss at iteration " + std::to_string(it), it, -1);
    }
    report.loss_curve.push_back(loss);
    best = std::min(best, loss);
    report.best_loss.push_back(best);

    if (cfg.staged && it < cfg.iterations / 2) grad.tail(theta.size() - nl).setZero();
    const double frac = cfg.iterations > 1 ? static_cast<double>(it) / (cfg.iterations - 1) : 1.0;
    try {
      adam_step(theta, grad, adam, std::pow(cfg.final_lr_fraction, frac));
    } catch (const std::domain_error& e) {
      throw IdentificationError(std::string(e.what()) + " at iteration " + std::to_string(it), it, -1);
    }
    if (cfg.plausibility_every > 0 && it % cfg.plausibility_every == 0) spot_check();
  }
  spot_check();

  set_model_parameters(model, theta);
  report.model = model;
  for (const Link& l : model.links) {
    report.physical.push_back(physical_body(l.params));
    report.plausibility.push_back(check_plausibility(l.params));
  }
  report.gradient_check_final =
      gradient_check(model, theta, mask, all.first(static_cast<std::size_t>(checked)), cfg.loss,
                     cfg.actuator_regularization);
  const double fwd = forward_loss(model, all);
  report.final_loss = cfg.loss == LossKind::kForward ? fwd : inverse_loss(model, all);
  report.one_step_mse = fwd / static_cast<double>(all.size());
  if (options.validation) {
    report.validation = evaluate_rollouts(model_dynamics(model), *options.validation, options.horizons,
                                          options.validation_stride, options.rollout);
  }
  report.wall_clock_s = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

Eigen::Matrix<double, 10, 1> standard_parameters(const LinkParams<double>& p) {
  const SpatialInertia<double> si = link_inertia(p);
  Eigen::Matrix<double, 10, 1> pi;
  const Eigen::Vector3d h = si.com * si.mass;
  const Eigen::Matrix3d& j = si.inertia;
  pi << si.mass, h, j(0, 0), j(0, 1), j(0, 2), j(1, 1), j(1, 2), j(2, 2);
  return pi;
}

Mat6<double> spatial_inertia_from_standard(const Eigen::Matrix<double, 10, 1>& pi) {
  const Eigen::Vector3d h = pi.segment<3>(1);
  Eigen::Matrix3d j;
  j << pi[4], pi[5], pi[6], pi[5], pi[7], pi[8], pi[6], pi[8], pi[9];
  const Eigen::Matrix3d hx = skew(h);
  Mat6<double> m;
  m.topLeftCorner<3, 3>() = Eigen::Matrix3d::Identity() * pi[0];
  m.topRightCorner<3, 3>() = hx.transpose();
  m.bottomLeftCorner<3, 3>() = hx;
  m.bottomRightCorner<3, 3>() = j;
  return m;
}

AccelerationFn NeaResult::dynamics() const {
  auto t = std::make_shared<const BodyTree<double>>(tree);
  return [t](const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& tau) {
    return aba<double>(*t, q, qd, tau);
  };
}

NeaResult nea_linear_regression(const TrajectoryDataset& data, const RobotModel& kinematics,
                                double rank_tolerance) {
  data.validate();
  const int n = kinematics.dof();
  if (data.dof() != n) throw DimensionError("nea_linear_regression: dataset does not match model");
  if (data.empty()) throw DataError("nea_linear_regression: empty dataset");
  NeaResult out;
  out.tree = instantiate(kinematics);
  out.columns = 10 * n;

  // one tree per unit standard parameter
  std::vector<BodyTree<double>> basis;
  for (int l = 0; l < n; ++l) {
    for (int k = 0; k < 10; ++k) {
      BodyTree<double> t = out.tree;
      for (auto& m : t.inertia) m.setZero();
      Eigen::Matrix<double, 10, 1> e = Eigen::Matrix<double, 10, 1>::Zero();
      e[k] = 1.0;
      t.inertia[static_cast<std::size_t>(l)] = spatial_inertia_from_standard(e);
      basis.push_back(std::move(t));
    }
  }
  const auto rows = static_cast<Eigen::Index>(data.size()) * n;
  Eigen::MatrixXd y(rows, out.columns);
  Eigen::VectorXd b(rows);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const JointState& s = data.samples[i];
    const auto r0 = static_cast<Eigen::Index>(i) * n;
    for (int c = 0; c < out.columns; ++c) {
      y.block(r0, c, n, 1) = rnea<double>(basis[static_cast<std::size_t>(c)], s.q, s.qd, s.qdd);
    }
    b.segment(r0, n) = s.tau;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(y);
  cod.setThreshold(rank_tolerance);
  out.rank = static_cast<int>(cod.rank());
  out.standard = cod.solve(b);
  out.residual = (y * out.standard - b).squaredNorm();
  for (int l = 0; l < n; ++l) {
    const Mat6<double> m = spatial_inertia_from_standard(out.standard.segment<10>(10 * l));
    out.tree.inertia[static_cast<std::size_t>(l)] = m;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Mat6<double>> es(m);
    if (m(0, 0) < 0.0 || es.eigenvalues().minCoeff() < -1e-12 * scale) out.plausible = false;
  }
  return out;
}

Eigen::VectorXd BlackBoxModel::operator()(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                                          const Eigen::VectorXd& tau) const {
  return predict<double>(std::span<const double>(weights.data(), weights.size()), q, qd, tau);
}

AccelerationFn BlackBoxModel::dynamics() const {
  auto self = std::make_shared<const BlackBoxModel>(*this);
  return [self](const Eigen::VectorXd& q, const Eigen::VectorXd& qd, const Eigen::VectorXd& tau) {
    return (*self)(q, qd, tau);
  };
}

BlackBoxFit blackbox_fit(const TrajectoryDataset& data, const OptimConfig& cfg, std::vector<int> hidden) {
  cfg.validate();
  data.validate();
  if (data.empty()) throw DataError("blackbox_fit: empty dataset");
  const int n = data.dof();
  const auto count = static_cast<double>(data.size());

  BlackBoxFit fit;
  BlackBoxModel& m = fit.model;
  m.dof = n;
  m.layout.sizes = {3 * n};
  m.layout.sizes.insert(m.layout.sizes.end(), hidden.begin(), hidden.end());
  m.layout.sizes.push_back(n);

  Eigen::VectorXd in_sum = Eigen::VectorXd::Zero(3 * n), in_sq = Eigen::VectorXd::Zero(3 * n);
  Eigen::VectorXd out_sum = Eigen::VectorXd::Zero(n), out_sq = Eigen::VectorXd::Zero(n);
  for (const JointState& s : data.samples) {
    Eigen::VectorXd x(3 * n);
    x << s.q, s.qd, s.tau;
    in_sum += x;
    in_sq += x.cwiseAbs2();
    out_sum += s.qdd;
    out_sq += s.qdd.cwiseAbs2();
  }
  auto scale_of = [&](const Eigen::VectorXd& sum, const Eigen::VectorXd& sq) {
    Eigen::VectorXd sd = (sq / count - (sum / count).cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index i = 0; i < sd.size(); ++i) {
      if (!(sd[i] > 1e-12)) sd[i] = 1.0;
    }
    return sd;
  };
  m.input_mean = in_sum / count;
  m.input_scale = scale_of(in_sum, in_sq);
  m.output_mean = out_sum / count;
  m.output_scale = scale_of(out_sum, out_sq);
  m.weights = init_mlp(m.layout, cfg.seed, 1.0);

  Adam adam(Eigen::VectorXd::Constant(m.weights.size(), cfg.lr_network),
            AdamConfig{cfg.beta1, cfg.beta2, cfg.epsilon});
  auto term = [&](std::span<const ad::Var> w, std::size_t i) {
    const JointState& s = data.samples[i];
    const VecX<ad::Var> e = s.qdd.cast<ad::Var>() - m.predict<ad::Var>(w, s.q, s.qd, s.tau);
    return e.squaredNorm();
  };
  Eigen::VectorXd grad;
  for (int it = 0; it < cfg.iterations; ++it) {
    const double loss = summed_value_and_grad(data.size(), m.weights, 1.0 / count, cfg.threads, term, grad);
    if (!std::isfinite(loss)) {
      throw IdentificationError("blackbox_fit: non-finite loss at iteration " + std::to_string(it), it, -1);
    }
    fit.loss_curve.push_back(loss);
    const double frac = cfg.iterations > 1 ? static_cast<double>(it) / (cfg.iterations - 1) : 1.0;
    adam_step(m.weights, grad, adam, std::pow(cfg.final_lr_fraction, frac));
  }
  return fit;
}

namespace {

json vec_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json config_json(const OptimConfig& c) {
  return {{"lr_physical", c.lr_physical},
          {"lr_network", c.lr_network},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"iterations", c.iterations},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"actuator_regularization", c.actuator_regularization},
          {"loss", std::string(to_string(c.loss))},
          {"final_lr_fraction", c.final_lr_fraction},
          {"staged", c.staged},
          {"inverse_warmup", c.inverse_warmup},
          {"plausibility_every", c.plausibility_every}};
}

}  // namespace

std::string report_to_json(const FitReport& r) {
  json j;
  j["notes"] = {
      {"loss_curve", "mean data loss per sample plus actuator regulariser, per iteration; "
                     "inverse loss during the warm-up iterations"},
      {"nmse", "per-dimension rollout MSE over starts divided by the variance of that dimension "
               "over the validation trajectory, averaged over the 2n state dimensions"}};
  j["system"] = r.system;
  j["variant"] = std::string(to_string(r.variant));
  j["init"] = std::string(to_string(r.init));
  j["actuator"] = std::string(to_string(r.actuator));
  j["config"] = config_json(r.config);
  j["iterations"] = r.loss_curve.size();
  j["initial_loss"] = r.loss_curve.empty() ? 0.0 : r.loss_curve.front();
  j["best_loss"] = r.best_loss.empty() ? 0.0 : r.best_loss.back();
  j["final_loss"] = r.final_loss;
  j["one_step_mse"] = r.one_step_mse;
  j["gradient_check"] = {{"initial", r.gradient_check_initial}, {"final", r.gradient_check_final}};
  j["plausibility"] = {{"checks", r.plausibility_checks}, {"failures", r.plausibility_failures}};
  json links = json::array();
  for (std::size_t i = 0; i < r.model.links.size(); ++i) {
    const Link& l = r.model.links[i];
    Eigen::VectorXd v(kLinkParamCount);
    l.params.pack(std::span<double>(v.data(), kLinkParamCount));
    json lj;
    lj["name"] = l.name;
    lj["virtual"] = vec_json(v);
    if (i < r.physical.size()) {
      const PhysicalBody& b = r.physical[i];
      lj["mass"] = b.mass;
      lj["com"] = vec_json(b.com);
      lj["inertia_com"] = vec_json(Eigen::Map<const Eigen::VectorXd>(b.inertia_com.data(), 9));
      lj["standard"] = vec_json(standard_parameters(l.params));
    }
    if (i < r.plausibility.size()) {
      lj["triangle_slack"] = r.plausibility[i].triangle_slack;
      lj["plausible"] = r.plausibility[i].plausible();
    }
    links.push_back(lj);
  }
  j["links"] = links;
  j["actuator_params"] = vec_json(r.model.actuator.params);
  if (r.validation) {
    json v;
    v["horizons"] = r.validation->horizons;
    json nm = json::array();
    for (const double x : r.validation->nmse) nm.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    v["nmse"] = nm;
    v["rollouts"] = r.validation->rollouts;
    v["divergences"] = r.validation->divergences;
    j["validation"] = v;
  }
  return j.dump(2) + "\n";
}

void save_report(const FitReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
  };
  write(dir / "report.json", report_to_json(r));
  std::string csv = "iteration,loss,best_loss\n";
  for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
    csv += std::to_string(i) + "," + format_double(r.loss_curve[i]) + "," +
           format_double(r.best_loss[i]) + "\n";
  }
  write(dir / "metrics.csv", csv);
  write(dir / "timing.json", json{{"wall_clock_s", r.wall_clock_s}}.dump(2) + "\n");
}

}  // namespace dnea
