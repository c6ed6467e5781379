#ifndef DNEA_BENCH_HPP_
#define DNEA_BENCH_HPP_

// Benchmark grid: model variants x actuator kinds x datasets x seeds, scored
// by one-step error, rollout nMSE per horizon and divergence counts.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dnea/sysid.hpp"

namespace dnea {

enum class DatasetKind {
  kUniform,             // i.i.d. states, viscous ground truth
  kTrajectory,          // swing-up trajectory, viscous ground truth
  kStribeckTrajectory,  // swing-up trajectory, Stribeck ground truth
};

std::string_view to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(std::string_view s);

/// Ground truth behind a dataset kind: the benchmark system with viscous
/// (first two) or Stribeck friction.
RobotModel bench_truth(SystemId id, DatasetKind kind);

/// Rollouts from states outside the training data: positions drawn from the
/// training range, speeds `speed_lo..speed_hi` times the largest training
/// speed with random sign, driven by the training torques in order (zero
/// torque for unordered data, which has no sequence to replay). A rollout
/// diverges once any |qd| passes `velocity_factor` times the largest
/// training speed or the state stops being finite.
struct OodProbe {
  int starts = 20;
  int steps = 15000;  // 60 s at 250 Hz
  double speed_lo = 1.5;
  double speed_hi = 3.0;
  double velocity_factor = 10.0;
};

struct OodResult {
  int rollouts = 0;
  int divergences = 0;
};

OodResult probe_divergence(const AccelerationFn& f, const TrajectoryDataset& train, double dt,
                           const OodProbe& probe, std::uint64_t seed);

struct BenchConfig {
  std::vector<SystemId> systems = {SystemId::kPendulum};
  std::vector<DatasetKind> datasets = {DatasetKind::kUniform, DatasetKind::kStribeckTrajectory};
  std::vector<Variant> variants = {Variant::kNEA, Variant::kDiffNEA, Variant::kNoKin,
                                   Variant::kBlackBox};
  /// Used by the DiffNEA variants; NEA and the black box have none.
  std::vector<ActuatorKind> actuators = {ActuatorKind::kViscous, ActuatorKind::kStribeck};
  std::vector<std::uint64_t> seeds = {0};
  InitKind init = InitKind::kRandom;
  OptimConfig optim;  // iterations, rates and seed offset for every fit
  std::vector<int> network_hidden = {16, 16};
  std::vector<int> blackbox_hidden = {32, 32};
  int uniform_samples = 200;
  int trajectory_stride = 5;  // keep every 5th non-edge sample for training
  SimTrajectoryConfig simulation;
  std::vector<int> horizons = {1, 25, 50, 125, 250};
  int validation_stride = 50;
  OodProbe probe;
  int threads = 1;  // cells evaluated in parallel

  void validate() const;
};

struct BenchRow {
  std::string system;
  DatasetKind dataset = DatasetKind::kUniform;
  Variant variant = Variant::kDiffNEA;
  std::string actuator;  // "-" for NEA and the black box
  std::uint64_t seed = 0;
  std::size_t training_samples = 0;
  double one_step_mse = 0.0;  // mean |qdd error|^2 over the training set
  RolloutEvaluation validation;
  OodResult ood;
  double wall_clock_s = 0.0;
  std::string error;  // non-empty if the cell failed
};

std::vector<BenchRow> run_bench(const BenchConfig& config);

/// One line per cell.
std::string bench_rows_csv(const std::vector<BenchRow>& rows);
/// Mean nMSE per horizon over seeds and summed divergence counts, one line
/// per (system, dataset, variant, actuator).
std::string bench_summary_csv(const std::vector<BenchRow>& rows);
/// nMSE against horizon, one panel per (system, dataset).
std::string bench_svg(const std::vector<BenchRow>& rows);

}  // namespace dnea

#endif  // DNEA_BENCH_HPP_
