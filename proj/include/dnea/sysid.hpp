#ifndef DNEA_SYSID_HPP_
#define DNEA_SYSID_HPP_

// Parameter identification: forward and inverse dynamics losses, the
// Adam-driven fit over virtual parameters, the NEA regression baseline, the
// black-box forward model and rollout evaluation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dnea/actuation.hpp"
#include "dnea/constraint.hpp"
#include "dnea/data.hpp"
#include "dnea/dynamics.hpp"
#include "dnea/integrate.hpp"
#include "dnea/model.hpp"
#include "dnea/optim.hpp"

namespace dnea {

enum class LossKind { kForward, kInverse };
enum class Variant { kNEA, kDiffNEA, kNoKin, kBlackBox };
enum class InitKind { kRandom, kPrior };

std::string_view to_string(LossKind k);
std::string_view to_string(Variant v);
std::string_view to_string(InitKind i);
LossKind loss_kind_from_string(std::string_view s);
Variant variant_from_string(std::string_view s);
InitKind init_kind_from_string(std::string_view s);

struct OptimConfig {
  double lr_physical = 5e-3;  // link and friction parameters
  double lr_network = 1e-3;   // network weights
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int iterations = 5000;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  double actuator_regularization = 1e-3;  // weight decay on network weights
  LossKind loss = LossKind::kForward;
  PenaltyWeights penalty;
  /// Learning rates decay geometrically to this fraction by the last
  /// iteration.
  double final_lr_fraction = 1e-2;
  /// Links alone for the first half of the iterations, then everything.
  bool staged = false;
  /// With the forward loss, this fraction of the iterations first descends
  /// the inverse loss. Same minimiser on noiseless data, far better
  /// conditioned from a random start.
  double inverse_warmup = 0.2;
  int plausibility_every = 100;
  int threads = 1;

  void validate() const;
};

/// Adam step with bias correction. Throws std::domain_error naming the
/// coordinate if a gradient entry is not finite.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, Adam& state,
               double scale = 1.0);

// Parameter vector layout: [link parameters (16 per link) | actuator].
Eigen::VectorXd model_parameters(const RobotModel& model);
void set_model_parameters(RobotModel& model, const Eigen::VectorXd& theta);
int link_parameter_count(const RobotModel& model);

/// 1 where a coordinate is optimised: kinematic parameters only when they are
/// unknown (or the link is marked unfrozen), inertial ones unless frozen, and
/// every actuator parameter.
std::vector<std::uint8_t> trainable_mask(const RobotModel& model);

template <typename S>
S forward_residual_norm(const RobotModel& model, const BodyTree<S>& tree,
                        std::span<const S> actuator_params, const JointState& s) {
  const VecX<S> q = s.q.template cast<S>(), qd = s.qd.template cast<S>();
  const VecX<S> tau = apply_actuator<S>(model.actuator, actuator_params, s.tau.template cast<S>(), q, qd);
  const VecX<S> e = s.qdd.template cast<S>() - aba<S>(tree, q, qd, tau);
  return e.squaredNorm();
}

template <typename S>
S inverse_residual_norm(const RobotModel& model, const BodyTree<S>& tree,
                        std::span<const S> actuator_params, const JointState& s) {
  const VecX<S> q = s.q.template cast<S>(), qd = s.qd.template cast<S>();
  const VecX<S> tau = apply_actuator<S>(model.actuator, actuator_params, s.tau.template cast<S>(), q, qd);
  const VecX<S> e = tau - rnea<S>(tree, q, qd, VecX<S>(s.qdd.template cast<S>()));
  return e.squaredNorm();
}

/// w * |network weights|^2 for the network actuator kinds, zero otherwise.
template <typename S>
S actuator_regularizer(const RobotModel& model, std::span<const S> actuator_params, double weight) {
  S r(0);
  if (weight == 0.0 || !model.actuator.has_network()) return r;
  for (const S& w : actuator_params) r += w * w;
  return r * S(weight);
}

/// sum_i |qdd_i - aba(q_i, qd_i, act(tau_i))|^2 (+ regulariser), theta laid
/// out as in model_parameters.
template <typename S>
S forward_loss(const RobotModel& model, std::span<const S> theta, std::span<const JointState> data,
               double actuator_regularization = 0.0) {
  const auto nl = static_cast<std::size_t>(link_parameter_count(model));
  const BodyTree<S> tree = instantiate<S>(model, theta.subspan(0, nl));
  const std::span<const S> act = theta.subspan(nl);
  S sum(0);
  for (const JointState& s : data) sum += forward_residual_norm<S>(model, tree, act, s);
  return sum + actuator_regularizer<S>(model, act, actuator_regularization);
}

/// sum_i |act(tau_i) - rnea(q_i, qd_i, qdd_i)|^2 (+ regulariser).
template <typename S>
S inverse_loss(const RobotModel& model, std::span<const S> theta, std::span<const JointState> data,
               double actuator_regularization = 0.0) {
  const auto nl = static_cast<std::size_t>(link_parameter_count(model));
  const BodyTree<S> tree = instantiate<S>(model, theta.subspan(0, nl));
  const std::span<const S> act = theta.subspan(nl);
  S sum(0);
  for (const JointState& s : data) sum += inverse_residual_norm<S>(model, tree, act, s);
  return sum + actuator_regularizer<S>(model, act, actuator_regularization);
}

// Convenience on the model's own parameters.
double forward_loss(const RobotModel& model, std::span<const JointState> data);
double inverse_loss(const RobotModel& model, std::span<const JointState> data);

/// Loss and gradient w.r.t. the full theta, summed over samples in a fixed
/// order so the result does not depend on the thread count. `weight` scales
/// the data term (the regulariser is added unscaled).
double loss_and_gradient(const RobotModel& model, const Eigen::VectorXd& theta,
                         std::span<const JointState> data, LossKind kind, double weight,
                         double actuator_regularization, int threads, Eigen::VectorXd& gradient);

/// Normalised MSE of rollouts against a recorded trajectory: from every
/// `stride`-th start, integrate with the recorded torques and compare the
/// state (q, qd) h steps ahead. Per-dimension MSE over starts is divided by
/// the variance of that dimension over the trajectory and averaged over
/// dimensions. Diverged rollouts are counted and left out of the averages of
/// the horizons they did not reach.
struct RolloutEvaluation {
  std::vector<int> horizons;
  std::vector<double> nmse;
  int rollouts = 0;
  int divergences = 0;
};

RolloutEvaluation evaluate_rollouts(const AccelerationFn& f, const TrajectoryDataset& truth,
                                    const std::vector<int>& horizons, int stride,
                                    const RolloutOptions& options = {});

struct FitOptions {
  Variant variant = Variant::kDiffNEA;
  InitKind init = InitKind::kPrior;
  std::optional<TrajectoryDataset> validation;
  std::vector<int> horizons = {1, 25, 50, 125, 250};
  int validation_stride = 50;
  RolloutOptions rollout;
  /// Samples used by the gradient checks at the start and the end.
  int gradient_check_samples = 8;
};

struct FitReport {
  std::string system;
  Variant variant = Variant::kDiffNEA;
  InitKind init = InitKind::kPrior;
  ActuatorKind actuator = ActuatorKind::kIdentity;
  OptimConfig config;
  std::vector<double> loss_curve;  // mean data loss per sample, per iteration
  std::vector<double> best_loss;   // best so far
  RobotModel model;                // fitted
  std::vector<PhysicalBody> physical;
  std::vector<PlausibilityReport> plausibility;
  int plausibility_checks = 0;
  int plausibility_failures = 0;
  double gradient_check_initial = 0.0;
  double gradient_check_final = 0.0;
  double final_loss = 0.0;      // forward or inverse loss summed over the training set
  double one_step_mse = 0.0;    // mean over samples of |qdd error|^2
  std::optional<RolloutEvaluation> validation;
  double wall_clock_s = 0.0;    // kept out of the report file
};

/// Fits the virtual parameters (and actuator parameters) of `model_template`
/// to the data. DiffNEA keeps the kinematic parameters fixed; no-Kin learns
/// them too. Random initialisation redraws the trainable link parameters
/// from the seed; prior keeps the template values.
FitReport identify(const TrajectoryDataset& data, const RobotModel& model_template,
                   const OptimConfig& config, const FitOptions& options = {});

/// Standard inertial parameters of one link about its frame origin:
/// [m, m c_x, m c_y, m c_z, Ixx, Ixy, Ixz, Iyy, Iyz, Izz].
Eigen::Matrix<double, 10, 1> standard_parameters(const LinkParams<double>& p);
Mat6<double> spatial_inertia_from_standard(const Eigen::Matrix<double, 10, 1>& pi);

struct NeaResult {
  BodyTree<double> tree;          // kinematics of the template, regressed inertias
  Eigen::VectorXd standard;       // 10 per link
  int rank = 0;
  int columns = 0;                // 10 per link
  double residual = 0.0;          // sum of squared torque residuals
  bool plausible = true;          // every link has m >= 0 and a PSD spatial inertia
  AccelerationFn dynamics() const;
};

/// Least squares on the inverse dynamics regressor tau = Y(q, qd, qdd) pi.
/// Columns are rnea evaluated with unit standard parameters; the
/// minimum-norm solution is returned with the numerical rank.
NeaResult nea_linear_regression(const TrajectoryDataset& data, const RobotModel& kinematics,
                                double rank_tolerance = 1e-10);

struct BlackBoxModel {
  MlpLayout layout;
  Eigen::VectorXd weights;
  Eigen::VectorXd input_mean, input_scale, output_mean, output_scale;
  int dof = 0;

  template <typename S>
  VecX<S> predict(std::span<const S> w, const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                  const Eigen::VectorXd& tau) const {
    VecX<S> in(3 * dof);
    for (int i = 0; i < dof; ++i) {
      in[i] = S((q[i] - input_mean[i]) / input_scale[i]);
      in[dof + i] = S((qd[i] - input_mean[dof + i]) / input_scale[dof + i]);
      in[2 * dof + i] = S((tau[i] - input_mean[2 * dof + i]) / input_scale[2 * dof + i]);
    }
    VecX<S> out = mlp_forward<S>(layout, w, in);
    for (int i = 0; i < dof; ++i) out[i] = out[i] * S(output_scale[i]) + S(output_mean[i]);
    return out;
  }

  Eigen::VectorXd operator()(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                             const Eigen::VectorXd& tau) const;
  AccelerationFn dynamics() const;
};

struct BlackBoxFit {
  BlackBoxModel model;
  std::vector<double> loss_curve;  // mean |qdd error|^2 in data units
};

/// Trains an MLP (q, qd, tau) -> qdd with Adam on standardised inputs and
/// outputs.
BlackBoxFit blackbox_fit(const TrajectoryDataset& data, const OptimConfig& config,
                         std::vector<int> hidden = {32, 32});

/// Report as JSON (no wall clock, so identical runs give identical files).
std::string report_to_json(const FitReport& report);
/// Writes report.json, metrics.csv (iteration, loss, best) and timing.json.
void save_report(const FitReport& report, const std::filesystem::path& directory);

}  // namespace dnea

#endif  // DNEA_SYSID_HPP_
