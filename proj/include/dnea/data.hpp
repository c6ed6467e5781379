#ifndef DNEA_DATA_HPP_
#define DNEA_DATA_HPP_

// Datasets: uniform samples, simulated swing-up trajectories, offline
// zero-phase differentiation and the delimited-text trajectory format.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dnea/constraint.hpp"
#include "dnea/dynamics.hpp"
#include "dnea/integrate.hpp"
#include "dnea/model.hpp"
#include "dnea/systems.hpp"

namespace dnea {

enum class Provenance { kUniform, kSimTrajectory, kExternal };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view name);

/// Malformed file or inconsistent dataset.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrajectoryDataset {
  std::string system;  // model name, informational
  Provenance provenance = Provenance::kExternal;
  std::optional<double> dt;  // only for trajectory-ordered data
  std::vector<double> time;  // empty for uniform data
  std::vector<JointState> samples;
  std::vector<BallSample> ball;  // empty or one per sample

  std::size_t size() const { return samples.empty() ? ball.size() : samples.size(); }
  bool empty() const { return size() == 0; }
  int dof() const { return samples.empty() ? 0 : static_cast<int>(samples.front().q.size()); }
  bool has_ball() const { return !ball.empty(); }

  /// Throws DataError on inconsistent dimensions, a uniform dataset with a
  /// time step, or a trajectory whose time stamps are not increasing.
  void validate() const;
};

TrajectoryDataset to_dataset(const Trajectory& traj);

struct SampleRanges {
  Eigen::VectorXd q_lo, q_hi, qd_lo, qd_hi, tau_lo, tau_hi;

  int dof() const { return static_cast<int>(q_lo.size()); }
  void validate() const;
};

/// Joint, velocity and torque boxes used for uniform sampling. Passive joints
/// get a zero torque range.
SampleRanges default_ranges(SystemId id);

/// i.i.d. uniform (q, qd, tau) with qdd from the model's forward dynamics
/// (including its actuator).
TrajectoryDataset gen_uniform(const RobotModel& truth, const SampleRanges& ranges, std::size_t n,
                              std::uint64_t seed);

/// tau_d = controller(t, q, qd)
using Controller = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& q,
                                                 const Eigen::VectorXd& qd)>;

struct EnergyPumpingConfig {
  int actuated = 0;  // joint receiving the torque
  int swinging = 0;  // joint whose swing is pumped (may equal `actuated`)
  double gain = 2.0;
  double limit = 5.0;  // smooth saturation level of the pumping torque
  double coupling = 1.0;  // sign of the cos(q_s) weight when actuated != swinging
  /// PD terms on the actuated joint, keeping carts and arms near zero when
  /// it is not the swinging joint.
  double position_gain = 0.0;
  double velocity_gain = 0.0;
};

/// Swing-up analogue: tau = limit * tanh(k (E* - E) w(q) qd_s / limit) - PD,
/// E* being the energy at rest with the swinging joint upright and
/// w = 1 (same joint) or coupling * cos(q_s) (driven through another joint).
Controller energy_pumping(const RobotModel& model, const EnergyPumpingConfig& config);

/// Sensible controller settings for each benchmark system.
EnergyPumpingConfig default_pumping(SystemId id);

struct NoiseLevels {
  double state = 1e-3;   // std. dev. added to measured positions
  double action = 1e-2;  // std. dev. added to the torque reaching the plant
};

struct SimTrajectoryConfig {
  double duration = 10.0;
  double dt = kDefaultDt;
  NoiseLevels noise;
  double cutoff_hz = 25.0;
  Eigen::VectorXd q0, qd0;  // empty: hanging at rest with a small offset
  std::uint64_t seed = 0;
  double bound = 1e6;
};

struct SimTrajectoryResult {
  TrajectoryDataset data;  // noisy positions, filtered derivatives, commanded torque
  Trajectory clean;        // noiseless simulator states
  std::vector<std::uint8_t> edge;  // 1 where the derivative estimate is an edge sample
  bool diverged = false;
};

/// RK4 rollout of the truth model under the controller. The recorded torque
/// is the command; action noise perturbs what the plant receives. Velocities
/// and accelerations are recomputed from the noisy positions.
SimTrajectoryResult gen_sim_trajectory(const RobotModel& truth, const Controller& controller,
                                       const SimTrajectoryConfig& config);

struct Derivatives {
  Eigen::MatrixXd qd, qdd;           // same shape as the positions (samples x dof)
  std::vector<std::uint8_t> edge;  // 1 for samples within the edge margin
  int edge_samples = 0;
};

/// Biquad coefficients (a0 normalised to 1).
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Fourth-order Butterworth low-pass as two biquads (bilinear transform with
/// prewarping at the cutoff).
std::vector<Biquad> butterworth_lowpass(double cutoff_hz, double sample_hz);

/// Forward-backward filtering with odd reflection padding and steady-state
/// initial conditions. Throws DataError if the signal is shorter than the
/// padding.
Eigen::VectorXd filtfilt(const std::vector<Biquad>& sections, const Eigen::VectorXd& x);

/// Padding length of filtfilt, also the minimum signal length.
int filtfilt_padding(const std::vector<Biquad>& sections);

/// Five-point central differences (one-sided five-point at the ends), then
/// zero-phase low-pass filtering. Rows are samples, columns joints.
Derivatives differentiate_zero_phase(const Eigen::MatrixXd& positions, double dt,
                                     double cutoff_hz = 25.0);

/// Element-wise mean of repeated trajectories of equal length and dimension.
TrajectoryDataset average_runs(const std::vector<TrajectoryDataset>& runs);

// Delimited text: '#'-prefixed key=value metadata lines, a header row
// (t, q0.., qd0.., qdd0.., tau0.., then optional ball and cup-frame columns)
// and one row per sample. Numbers are written in shortest round-trip form.
void save_dataset(const TrajectoryDataset& data, const std::filesystem::path& path);
TrajectoryDataset load_dataset(const std::filesystem::path& path);
std::string dataset_to_string(const TrajectoryDataset& data);
TrajectoryDataset dataset_from_string(const std::string& text);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double x);
/// Whole-string parse; throws DataError otherwise.
double parse_double(std::string_view text);

struct ManifestEntry {
  std::string path;
  std::string system;
  Provenance provenance = Provenance::kExternal;
  std::size_t samples = 0;
  std::optional<double> dt;
  std::optional<std::uint64_t> seed;
};

/// JSON list of dataset files and their provenance.
void save_dataset_manifest(const std::vector<ManifestEntry>& entries,
                           const std::filesystem::path& path);
std::vector<ManifestEntry> load_dataset_manifest(const std::filesystem::path& path);

}  // namespace dnea

#endif  // DNEA_DATA_HPP_
