#include "dnea/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

namespace dnea {

using nlohmann::json;

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::kUniform: return "uniform";
    case Provenance::kSimTrajectory: return "sim-trajectory";
    case Provenance::kExternal: return "external";
  }
  return "external";
}

Provenance provenance_from_string(std::string_view name) {
  if (name == "uniform") return Provenance::kUniform;
  if (name == "sim-trajectory") return Provenance::kSimTrajectory;
  if (name == "external") return Provenance::kExternal;
  throw DataError("unknown provenance '" + std::string(name) + "'");
}

void TrajectoryDataset::validate() const {
  const int n = dof();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const JointState& s = samples[i];
    if (s.q.size() != n || s.qd.size() != n || s.qdd.size() != n || s.tau.size() != n) {
      throw DataError("dataset: sample " + std::to_string(i) + " has inconsistent dimensions");
    }
  }
  if (!ball.empty() && !samples.empty() && ball.size() != samples.size()) {
    throw DataError("dataset: ball samples do not match joint samples");
  }
  if (provenance == Provenance::kUniform && dt) throw DataError("dataset: uniform data carries no dt");
  if (dt && !(*dt > 0.0)) throw DataError("dataset: dt must be positive");
  if (!time.empty()) {
    if (time.size() != size()) throw DataError("dataset: time stamps do not match samples");
    for (std::size_t i = 1; i < time.size(); ++i) {
      if (!(time[i] > time[i - 1])) throw DataError("dataset: time stamps must increase");
    }
  }
}

TrajectoryDataset to_dataset(const Trajectory& traj) {
  TrajectoryDataset d;
  d.system = traj.model_id;
  d.provenance = Provenance::kSimTrajectory;
  d.dt = traj.dt;
  d.time = traj.time;
  d.samples = traj.states;
  return d;
}

void SampleRanges::validate() const {
  const Eigen::Index n = q_lo.size();
  for (const auto* v : {&q_hi, &qd_lo, &qd_hi, &tau_lo, &tau_hi}) {
    if (v->size() != n) throw DataError("ranges: inconsistent dimensions");
  }
  auto check = [](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    if (!lo.allFinite() || !hi.allFinite() || (hi - lo).minCoeff() < 0.0) {
      throw DataError("ranges: bounds must be finite with lo <= hi");
    }
  };
  if (n == 0) return;
  check(q_lo, q_hi);
  check(qd_lo, qd_hi);
  check(tau_lo, tau_hi);
}

namespace {

SampleRanges symmetric(const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                       const Eigen::VectorXd& tau) {
  return {-q, q, -qd, qd, -tau, tau};
}

}  // namespace

SampleRanges default_ranges(SystemId id) {
  using V = Eigen::VectorXd;
  constexpr double pi = std::numbers::pi;
  switch (id) {
    case SystemId::kPendulum:
      return symmetric(V{{pi}}, V{{6.0}}, V{{10.0}});
    case SystemId::kCartpole:
      return symmetric(V{{0.5, pi}}, V{{2.0, 8.0}}, V{{5.0, 0.0}});
    case SystemId::kFuruta:
      return symmetric(V{{pi, pi}}, V{{10.0, 20.0}}, V{{0.01, 0.0}});
    case SystemId::kTwoLink:
      return symmetric(V{{pi, pi}}, V{{4.0, 4.0}}, V{{15.0, 15.0}});
  }
  return {};
}

TrajectoryDataset gen_uniform(const RobotModel& truth, const SampleRanges& ranges, std::size_t n,
                              std::uint64_t seed) {
  ranges.validate();
  if (ranges.dof() != truth.dof()) throw DimensionError("gen_uniform: ranges do not match model");
  TrajectoryDataset d;
  d.system = truth.name;
  d.provenance = Provenance::kUniform;
  d.samples.reserve(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    Eigen::VectorXd x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    return x;
  };
  const BodyTree<double> tree = instantiate(truth);
  for (std::size_t k = 0; k < n; ++k) {
    JointState s;
    s.q = draw(ranges.q_lo, ranges.q_hi);
    s.qd = draw(ranges.qd_lo, ranges.qd_hi);
    s.tau = draw(ranges.tau_lo, ranges.tau_hi);
    s.qdd = aba<double>(tree, s.q, s.qd, apply_actuator(truth.actuator, s.tau, s.q, s.qd));
    d.samples.push_back(std::move(s));
  }
  return d;
}

Controller energy_pumping(const RobotModel& model, const EnergyPumpingConfig& c) {
  const int n = model.dof();
  if (c.actuated < 0 || c.actuated >= n || c.swinging < 0 || c.swinging >= n) {
    throw DimensionError("energy_pumping: joint index out of range");
  }
  auto tree = std::make_shared<const BodyTree<double>>(instantiate(model));
  Eigen::VectorXd up = Eigen::VectorXd::Zero(n);
  up[c.swinging] = std::numbers::pi;
  const double target = system_energy<double>(*tree, up, Eigen::VectorXd::Zero(n)).total();
  return [tree, target, c, n](double, const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
    const double e = system_energy<double>(*tree, q, qd).total();
    const double w = c.actuated == c.swinging ? 1.0 : c.coupling * std::cos(q[c.swinging]);
    const double pump = c.limit * std::tanh(c.gain * (target - e) * w * qd[c.swinging] / c.limit);
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(n);
    tau[c.actuated] = pump - c.position_gain * q[c.actuated] - c.velocity_gain * qd[c.actuated];
    return tau;
  };
}

EnergyPumpingConfig default_pumping(SystemId id) {
  EnergyPumpingConfig c;
  switch (id) {
    case SystemId::kPendulum:
      c.gain = 0.1;
      c.limit = 3.0;
      break;
    case SystemId::kCartpole:
      c.actuated = 0;
      c.swinging = 1;
      c.gain = 20.0;
      c.limit = 4.0;
      c.coupling = 1.0;
      c.position_gain = 6.0;
      c.velocity_gain = 3.0;
      break;
    case SystemId::kFuruta:
      c.actuated = 0;
      c.swinging = 1;
      c.gain = 5.0;
      c.limit = 0.02;
      c.coupling = -1.0;
      c.position_gain = 0.005;
      c.velocity_gain = 0.001;
      break;
    case SystemId::kTwoLink:
      c.actuated = 0;
      c.swinging = 0;
      c.gain = 1.0;
      c.limit = 10.0;
      break;
  }
  return c;
}

SimTrajectoryResult gen_sim_trajectory(const RobotModel& truth, const Controller& controller,
                                       const SimTrajectoryConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("gen_sim_trajectory: dt must be positive");
  if (!(cfg.duration >= 0.0)) throw std::invalid_argument("gen_sim_trajectory: negative duration");
  const int n = truth.dof();
  SimTrajectoryResult out;
  out.data.system = truth.name;
  out.data.provenance = Provenance::kSimTrajectory;
  out.data.dt = cfg.dt;
  out.clean.dt = cfg.dt;
  out.clean.model_id = truth.name;
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
  if (steps == 0) return out;

  Eigen::VectorXd q0 = cfg.q0, qd0 = cfg.qd0;
  if (q0.size() == 0) q0 = Eigen::VectorXd::Constant(n, 0.1);
  if (qd0.size() == 0) qd0 = Eigen::VectorXd::Zero(n);
  if (q0.size() != n || qd0.size() != n) throw DimensionError("gen_sim_trajectory: bad initial state");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const AccelerationFn f = model_dynamics(truth);
  auto field = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd dx(2 * n);
    dx << x.tail(n), f(x.head(n), x.tail(n), u);
    return dx;
  };
  auto admissible = [&](const Eigen::VectorXd& x) {
    return x.allFinite() && x.cwiseAbs().maxCoeff() <= cfg.bound;
  };

  Eigen::VectorXd x(2 * n);
  x << q0, qd0;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    JointState s;
    s.q = x.head(n);
    s.qd = x.tail(n);
    s.tau = controller(t, s.q, s.qd);
    Eigen::VectorXd applied = s.tau;
    if (cfg.noise.action > 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) applied[i] += cfg.noise.action * normal(rng);
    }
    s.qdd = f(s.q, s.qd, applied);
    out.clean.time.push_back(t);
    out.clean.states.push_back(s);
    Eigen::VectorXd next;
    try {
      next = rk4_step<double>(field, x, applied, cfg.dt);
    } catch (const DivergenceError&) {
      out.diverged = true;
      break;
    }
    if (!admissible(next)) {
      out.diverged = true;
      break;
    }
    x = next;
  }
  out.clean.diverged = out.diverged;

  const auto m = static_cast<Eigen::Index>(out.clean.states.size());
  Eigen::MatrixXd pos(m, n);
  for (Eigen::Index k = 0; k < m; ++k) {
    pos.row(k) = out.clean.states[static_cast<std::size_t>(k)].q.transpose();
    if (cfg.noise.state > 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) pos(k, i) += cfg.noise.state * normal(rng);
    }
  }
  const Derivatives d = differentiate_zero_phase(pos, cfg.dt, cfg.cutoff_hz);
  out.edge = d.edge;
  out.data.time = out.clean.time;
  out.data.samples.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index k = 0; k < m; ++k) {
    JointState s;
    s.q = pos.row(k).transpose();
    s.qd = d.qd.row(k).transpose();
    s.qdd = d.qdd.row(k).transpose();
    s.tau = out.clean.states[static_cast<std::size_t>(k)].tau;
    out.data.samples.push_back(std::move(s));
  }
  return out;
}

std::vector<Biquad> butterworth_lowpass(double cutoff_hz, double sample_hz) {
  if (!(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * sample_hz)) {
    throw std::invalid_argument("butterworth_lowpass: cutoff must lie in (0, Nyquist)");
  }
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_hz;
  const double cw = std::cos(w0), sw = std::sin(w0);
  std::vector<Biquad> out;
  // pole-pair quality factors of the 4th-order prototype
  for (const double angle : {std::numbers::pi / 8.0, 3.0 * std::numbers::pi / 8.0}) {
    const double q = 1.0 / (2.0 * std::cos(angle));
    const double alpha = sw / (2.0 * q);
    const double a0 = 1.0 + alpha;
    out.push_back({(1.0 - cw) / 2.0 / a0, (1.0 - cw) / a0, (1.0 - cw) / 2.0 / a0, -2.0 * cw / a0,
                   (1.0 - alpha) / a0});
  }
  return out;
}

int filtfilt_padding(const std::vector<Biquad>& sections) {
  return 3 * (2 * static_cast<int>(sections.size()) + 1);
}

namespace {

// Transposed direct form II, states started at the steady state of `level`.
Eigen::VectorXd cascade(const std::vector<Biquad>& sections, Eigen::VectorXd x, double level) {
  for (const Biquad& s : sections) {
    const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double y0 = gain * level;
    double z2 = s.b2 * level - s.a2 * y0;
    double z1 = y0 - s.b0 * level;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double in = x[i];
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      x[i] = y;
    }
    level = y0;
  }
  return x;
}

}  // namespace

Eigen::VectorXd filtfilt(const std::vector<Biquad>& sections, const Eigen::VectorXd& x) {
  const Eigen::Index pad = filtfilt_padding(sections);
  const Eigen::Index n = x.size();
  if (n <= pad) {
    throw DataError("filtfilt: signal of " + std::to_string(n) + " samples is shorter than " +
                    std::to_string(pad + 1));
  }
  Eigen::VectorXd ext(n + 2 * pad);
  for (Eigen::Index i = 0; i < pad; ++i) {
    ext[i] = 2.0 * x[0] - x[pad - i];
    ext[n + pad + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  ext.segment(pad, n) = x;
  Eigen::VectorXd y = cascade(sections, ext, ext[0]);
  y.reverseInPlace();
  y = cascade(sections, y, y[0]);
  y.reverseInPlace();
  return y.segment(pad, n);
}

Derivatives differentiate_zero_phase(const Eigen::MatrixXd& positions, double dt, double cutoff_hz) {
  if (!(dt > 0.0)) throw std::invalid_argument("differentiate_zero_phase: dt must be positive");
  const auto sections = butterworth_lowpass(cutoff_hz, 1.0 / dt);
  const Eigen::Index m = positions.rows();
  const Eigen::Index min_len = std::max<Eigen::Index>(5, filtfilt_padding(sections) + 1);
  if (m < min_len) {
    throw DataError("differentiate_zero_phase: need at least " + std::to_string(min_len) +
                    " samples, got " + std::to_string(m));
  }
  Derivatives d;
  d.qd.resize(m, positions.cols());
  d.qdd.resize(m, positions.cols());
  const double h = dt, h2 = dt * dt;
  for (Eigen::Index j = 0; j < positions.cols(); ++j) {
    const auto x = positions.col(j);
    Eigen::VectorXd v(m), a(m);
    for (Eigen::Index i = 2; i + 2 < m; ++i) {
      v[i] = (-x[i + 2] + 8.0 * x[i + 1] - 8.0 * x[i - 1] + x[i - 2]) / (12.0 * h);
      a[i] = (-x[i + 2] + 16.0 * x[i + 1] - 30.0 * x[i] + 16.0 * x[i - 1] - x[i - 2]) / (12.0 * h2);
    }
    // one-sided five-point stencils at both ends
    const Eigen::Index e = m - 1;
    v[0] = (-25.0 * x[0] + 48.0 * x[1] - 36.0 * x[2] + 16.0 * x[3] - 3.0 * x[4]) / (12.0 * h);
    v[1] = (-3.0 * x[0] - 10.0 * x[1] + 18.0 * x[2] - 6.0 * x[3] + x[4]) / (12.0 * h);
    v[e] = (25.0 * x[e] - 48.0 * x[e - 1] + 36.0 * x[e - 2] - 16.0 * x[e - 3] + 3.0 * x[e - 4]) / (12.0 * h);
    v[e - 1] = (3.0 * x[e] + 10.0 * x[e - 1] - 18.0 * x[e - 2] + 6.0 * x[e - 3] - x[e - 4]) / (12.0 * h);
    a[0] = (35.0 * x[0] - 104.0 * x[1] + 114.0 * x[2] - 56.0 * x[3] + 11.0 * x[4]) / (12.0 * h2);
    a[1] = (11.0 * x[0] - 20.0 * x[1] + 6.0 * x[2] + 4.0 * x[3] - x[4]) / (12.0 * h2);
    a[e] = (35.0 * x[e] - 104.0 * x[e - 1] + 114.0 * x[e - 2] - 56.0 * x[e - 3] + 11.0 * x[e - 4]) / (12.0 * h2);
    a[e - 1] = (11.0 * x[e] - 20.0 * x[e - 1] + 6.0 * x[e - 2] + 4.0 * x[e - 3] - x[e - 4]) / (12.0 * h2);
    d.qd.col(j) = filtfilt(sections, v);
    d.qdd.col(j) = filtfilt(sections, a);
  }
  d.edge_samples = std::max(2, static_cast<int>(std::ceil(1.0 / (dt * cutoff_hz))));
  d.edge.assign(static_cast<std::size_t>(m), 0);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i < d.edge_samples || i >= m - d.edge_samples) d.edge[static_cast<std::size_t>(i)] = 1;
  }
  return d;
}

TrajectoryDataset average_runs(const std::vector<TrajectoryDataset>& runs) {
  if (runs.empty()) throw DataError("average_runs: no runs");
  TrajectoryDataset out = runs.front();
  const double w = 1.0 / static_cast<double>(runs.size());
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].size() != out.size() || runs[r].dof() != out.dof() ||
        runs[r].has_ball() != out.has_ball()) {
      throw DataError("average_runs: runs differ in length or dimension");
    }
  }
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    JointState& s = out.samples[i];
    for (std::size_t r = 1; r < runs.size(); ++r) {
      const JointState& o = runs[r].samples[i];
      s.q += o.q;
      s.qd += o.qd;
      s.qdd += o.qdd;
      s.tau += o.tau;
    }
    s.q *= w;
    s.qd *= w;
    s.qdd *= w;
    s.tau *= w;
  }
  for (std::size_t i = 0; i < out.ball.size(); ++i) {
    BallSample& b = out.ball[i];
    for (std::size_t r = 1; r < runs.size(); ++r) {
      b.x_b += runs[r].ball[i].x_b;
      b.xd_b += runs[r].ball[i].xd_b;
      b.xdd_b += runs[r].ball[i].xdd_b;
    }
    b.x_b *= w;
    b.xd_b *= w;
    b.xdd_b *= w;
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  double x = 0.0;
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, x);
  if (r.ec != std::errc() || r.ptr != end) {
    throw DataError("cannot parse number '" + std::string(text) + "'");
  }
  return x;
}

namespace {

const std::vector<std::string>& ball_columns() {
  static const std::vector<std::string> cols = [] {
    std::vector<std::string> c;
    auto add3 = [&](const std::string& base) {
      for (const char* ax : {"x", "y", "z"}) c.push_back(base + ax);
    };
    add3("ball_x_");
    add3("ball_v_");
    add3("ball_a_");
    add3("cup_p_");
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 3; ++k) c.push_back("cup_r" + std::to_string(r) + std::to_string(k));
    }
    add3("cup_v_");
    add3("cup_w_");
    add3("cup_a_");
    add3("cup_alpha_");
    return c;
  }();
  return cols;
}

void ball_values(const BallSample& b, std::vector<double>& out) {
  auto put = [&](const Eigen::Vector3d& v) { out.insert(out.end(), v.data(), v.data() + 3); };
  put(b.x_b);
  put(b.xd_b);
  put(b.xdd_b);
  put(b.frame.position);
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) out.push_back(b.frame.rotation(r, k));
  }
  put(b.frame.velocity);
  put(b.frame.angular_velocity);
  put(b.frame.acceleration);
  put(b.frame.angular_acceleration);
}

BallSample ball_from(const double* v, double t) {
  BallSample b;
  b.t = t;
  auto get = [&](int at) { return Eigen::Vector3d(v[at], v[at + 1], v[at + 2]); };
  b.x_b = get(0);
  b.xd_b = get(3);
  b.xdd_b = get(6);
  b.frame.position = get(9);
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) b.frame.rotation(r, k) = v[12 + 3 * r + k];
  }
  b.frame.velocity = get(21);
  b.frame.angular_velocity = get(24);
  b.frame.acceleration = get(27);
  b.frame.angular_acceleration = get(30);
  return b;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                      : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string dataset_to_string(const TrajectoryDataset& d) {
  d.validate();
  const int n = d.dof();
  std::ostringstream os;
  os << "# system=" << d.system << "\n# provenance=" << to_string(d.provenance) << "\n";
  if (d.dt) os << "# dt=" << format_double(*d.dt) << "\n";
  os << "# dof=" << n << "\n";

  std::vector<std::string> header;
  if (!d.time.empty()) header.emplace_back("t");
  for (const char* group : {"q", "qd", "qdd", "tau"}) {
    for (int i = 0; i < n; ++i) header.push_back(group + std::to_string(i));
  }
  if (d.has_ball()) header.insert(header.end(), ball_columns().begin(), ball_columns().end());
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << "\n";

  std::vector<double> row;
  for (std::size_t k = 0; k < d.size(); ++k) {
    row.clear();
    if (!d.time.empty()) row.push_back(d.time[k]);
    if (!d.samples.empty()) {
      const JointState& s = d.samples[k];
      for (const Eigen::VectorXd* v : {&s.q, &s.qd, &s.qdd, &s.tau}) {
        row.insert(row.end(), v->data(), v->data() + v->size());
      }
    }
    if (d.has_ball()) ball_values(d.ball[k], row);
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_double(row[c]);
    os << "\n";
  }
  return os.str();
}

TrajectoryDataset dataset_from_string(const std::string& text) {
  TrajectoryDataset d;
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> header;
  std::map<std::string, std::size_t> column;
  int line_no = 0;
  int n = -1, ball_at = -1, t_at = -1;
  bool saw_provenance = false;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string_view l = trim(line);
    if (l.empty()) continue;
    if (l.front() == '#') {
      const std::string_view body = trim(l.substr(1));
      const std::size_t eq = body.find('=');
      if (eq == std::string_view::npos) continue;  // free comment
      const std::string key(trim(body.substr(0, eq)));
      const std::string_view value = trim(body.substr(eq + 1));
      if (key == "system") d.system = std::string(value);
      if (key == "provenance") {
        d.provenance = provenance_from_string(value);
        saw_provenance = true;
      }
      if (key == "dt") d.dt = parse_double(value);
      continue;
    }
    const auto fields = split(l);
    if (header.empty()) {
      for (const auto f : fields) {
        header.emplace_back(trim(f));
        if (!column.emplace(header.back(), header.size() - 1).second) {
          throw DataError("line " + std::to_string(line_no) + ": duplicate column " + header.back());
        }
      }
      int count = 0;
      while (column.count("q" + std::to_string(count))) ++count;
      n = count;
      for (int i = 0; i < n; ++i) {
        for (const char* group : {"qd", "qdd", "tau"}) {
          if (!column.count(group + std::to_string(i))) {
            throw DataError(std::string("header: missing column ") + group + std::to_string(i));
          }
        }
      }
      if (column.count("t")) t_at = static_cast<int>(column["t"]);
      if (column.count(ball_columns().front())) {
        ball_at = static_cast<int>(column[ball_columns().front()]);
        for (std::size_t c = 0; c < ball_columns().size(); ++c) {
          const auto it = column.find(ball_columns()[c]);
          if (it == column.end() || it->second != static_cast<std::size_t>(ball_at) + c) {
            throw DataError("header: incomplete ball columns");
          }
        }
      }
      const std::size_t known = static_cast<std::size_t>(4 * n) + (t_at >= 0 ? 1 : 0) +
                                (ball_at >= 0 ? ball_columns().size() : 0);
      if (known != header.size()) throw DataError("header: unrecognised columns");
      continue;
    }
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    std::vector<double> v(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      try {
        v[c] = parse_double(fields[c]);
      } catch (const DataError& e) {
        throw DataError("line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    const double t = t_at >= 0 ? v[static_cast<std::size_t>(t_at)] : 0.0;
    if (t_at >= 0) d.time.push_back(t);
    if (n > 0) {
      JointState s;
      auto group = [&](const char* name) {
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x[i] = v[column.at(name + std::to_string(i))];
        return x;
      };
      s.q = group("q");
      s.qd = group("qd");
      s.qdd = group("qdd");
      s.tau = group("tau");
      d.samples.push_back(std::move(s));
    }
    if (ball_at >= 0) d.ball.push_back(ball_from(v.data() + ball_at, t));
  }
  if (header.empty()) throw DataError("dataset: missing header row");
  if (!saw_provenance) d.provenance = Provenance::kExternal;
  d.validate();
  return d;
}

void save_dataset(const TrajectoryDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << dataset_to_string(data);
  if (!out) throw DataError("write failed: " + path.string());
}

TrajectoryDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return dataset_from_string(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_dataset_manifest(const std::vector<ManifestEntry>& entries,
                           const std::filesystem::path& path) {
  json list = json::array();
  for (const ManifestEntry& e : entries) {
    json j;
    j["path"] = e.path;
    j["system"] = e.system;
    j["provenance"] = std::string(to_string(e.provenance));
    j["samples"] = e.samples;
    if (e.dt) j["dt"] = *e.dt;
    if (e.seed) j["seed"] = *e.seed;
    list.push_back(j);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << json{{"datasets", list}}.dump(2) << "\n";
}

std::vector<ManifestEntry> load_dataset_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<ManifestEntry> out;
  try {
    const json root = json::parse(in);
    for (const json& j : root.at("datasets")) {
      ManifestEntry e;
      e.path = j.at("path").get<std::string>();
      e.system = j.value("system", "");
      e.provenance = provenance_from_string(j.value("provenance", "external"));
      e.samples = j.value("samples", std::size_t{0});
      if (j.contains("dt")) e.dt = j["dt"].get<double>();
      if (j.contains("seed")) e.seed = j["seed"].get<std::uint64_t>();
      out.push_back(e);
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace dnea
