#include "dnea/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "dnea/bench.hpp"
#include "dnea/constraint.hpp"
#include "dnea/data.hpp"
#include "dnea/integrate.hpp"
#include "dnea/model.hpp"
#include "dnea/sysid.hpp"
#include "dnea/systems.hpp"

namespace dnea {

using nlohmann::json;
namespace fs = std::filesystem;

int threads_from_environment() {
  const char* v = std::getenv("DNEA_THREADS");
  if (!v || !*v) return 1;
  try {
    return std::max(1, std::stoi(v));
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string("DNEA_THREADS must be a positive integer, got '") + v + "'");
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

struct Args {
  std::string model = "pendulum";
  std::string dataset;
  std::string out;
  std::string validation;
  std::string torque;
  std::string q0, qd0;
  std::string actuator = "viscous";
  std::string variant = "diffnea";
  std::string init = "random";
  std::string loss = "forward";
  std::uint64_t seed = 0;
  double dt = kDefaultDt;
  int horizon = -1;
  double lr = 5e-3;
  int iters = 5000;
  int samples = 200;
  double duration = 10.0;
  int seeds = 1;
  int batch = 0;
  bool staged = false;
  double r0 = 0.6;
  std::string offset0 = "0,0,0.25";
};

std::string hex(std::uint64_t h) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

Eigen::VectorXd parse_vector(const std::string& s, const char* what) {
  const auto parts = split(s);
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    try {
      v[static_cast<Eigen::Index>(i)] = parse_double(parts[i]);
    } catch (const DataError&) {
      throw std::invalid_argument(std::string(what) + ": '" + parts[i] + "' is not a number");
    }
  }
  return v;
}

bool is_system_name(const std::string& s) {
  try {
    (void)system_from_string(s);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

RobotModel model_from_arg(const std::string& s) {
  if (is_system_name(s)) return make_system(system_from_string(s));
  if (!fs::exists(s)) throw DataError("model '" + s + "' is neither a system name nor a file");
  return load_model(s);
}

TrajectoryDataset dataset_from_arg(const std::string& path) {
  if (path.empty()) throw std::invalid_argument("--dataset is required");
  if (!fs::exists(path)) throw DataError("dataset file '" + path + "' does not exist");
  return load_dataset(path);
}

// Inputs are recorded with a content hash so a run can be checked against
// the exact files it read.
void write_manifest(const fs::path& path, const std::string& command,
                    const std::vector<std::string>& arguments, const std::vector<std::string>& inputs,
                    const json& config) {
  json m;
  m["command"] = command;
  m["arguments"] = arguments;
  json in = json::array();
  for (const std::string& p : inputs) {
    if (p.empty() || !fs::exists(p)) continue;
    const std::string bytes = read_file(p);
    in.push_back({{"path", p}, {"bytes", bytes.size()}, {"fnv1a", hex(fnv1a(bytes))}});
  }
  m["inputs"] = in;
  m["config"] = config;
  m["config_hash"] = hex(fnv1a(config.dump()));
  write_file(path, m.dump(2) + "\n");
}

json optim_json(const OptimConfig& c) {
  return {{"lr_physical", c.lr_physical}, {"lr_network", c.lr_network}, {"iterations", c.iterations},
          {"batch_size", c.batch_size},   {"seed", c.seed},             {"loss", std::string(to_string(c.loss))},
          {"staged", c.staged},           {"final_lr_fraction", c.final_lr_fraction},
          {"inverse_warmup", c.inverse_warmup},
          {"actuator_regularization", c.actuator_regularization}};
}

OptimConfig optim_from(const Args& a) {
  OptimConfig c;
  c.lr_physical = a.lr;
  c.iterations = a.iters;
  c.seed = a.seed;
  c.batch_size = a.batch;
  c.staged = a.staged;
  c.loss = loss_kind_from_string(a.loss);
  c.threads = threads_from_environment();
  return c;
}

int cmd_gen(const Args& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.out.empty()) throw std::invalid_argument("--out is required");
  const DatasetKind kind = dataset_kind_from_string(a.dataset.empty() ? "uniform" : a.dataset);
  RobotModel truth;
  std::optional<SystemId> id;
  if (is_system_name(a.model)) {
    id = system_from_string(a.model);
    truth = bench_truth(*id, kind);
  } else {
    truth = model_from_arg(a.model);
  }
  TrajectoryDataset data;
  json cfg{{"model", a.model}, {"dataset", std::string(to_string(kind))}, {"seed", a.seed}};
  if (kind == DatasetKind::kUniform) {
    if (!id) throw std::invalid_argument("uniform generation needs a benchmark system name for its ranges");
    if (a.samples < 0) throw std::invalid_argument("--samples must be >= 0");
    data = gen_uniform(truth, default_ranges(*id), static_cast<std::size_t>(a.samples), a.seed);
    cfg["samples"] = a.samples;
  } else {
    if (!id) throw std::invalid_argument("trajectory generation needs a benchmark system name for its controller");
    SimTrajectoryConfig sc;
    sc.duration = a.duration;
    sc.dt = a.dt;
    sc.seed = a.seed;
    const SimTrajectoryResult sim = gen_sim_trajectory(truth, energy_pumping(truth, default_pumping(*id)), sc);
    if (sim.diverged) throw std::runtime_error("gen: simulated trajectory diverged");
    data = sim.data;
    cfg["duration"] = a.duration;
    cfg["dt"] = a.dt;
    cfg["noise"] = {{"state", sc.noise.state}, {"action", sc.noise.action}};
    cfg["cutoff_hz"] = sc.cutoff_hz;
  }
  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_dataset(data, dir / "dataset.csv");
  save_model(truth, dir / "truth.json");
  ManifestEntry entry;
  entry.path = "dataset.csv";
  entry.system = truth.name;
  entry.provenance = data.provenance;
  entry.samples = data.size();
  entry.dt = data.dt;
  entry.seed = a.seed;
  save_dataset_manifest({entry}, dir / "datasets.json");
  write_manifest(dir / "run_manifest.json", "gen", argv, {is_system_name(a.model) ? "" : a.model}, cfg);
  out << "wrote " << data.size() << " samples to " << (dir / "dataset.csv").string() << "\n";
  return kExitOk;
}

json blackbox_json(const BlackBoxModel& m) {
  auto v = [](const Eigen::VectorXd& x) { return std::vector<double>(x.data(), x.data() + x.size()); };
  return {{"type", "blackbox"},       {"dof", m.dof},
          {"sizes", m.layout.sizes},  {"weights", v(m.weights)},
          {"input_mean", v(m.input_mean)},   {"input_scale", v(m.input_scale)},
          {"output_mean", v(m.output_mean)}, {"output_scale", v(m.output_scale)}};
}

BlackBoxModel blackbox_from_json(const json& j) {
  auto v = [&](const char* key) {
    const auto x = j.at(key).get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
  };
  BlackBoxModel m;
  m.dof = j.at("dof").get<int>();
  m.layout.sizes = j.at("sizes").get<std::vector<int>>();
  m.weights = v("weights");
  m.input_mean = v("input_mean");
  m.input_scale = v("input_scale");
  m.output_mean = v("output_mean");
  m.output_scale = v("output_scale");
  if (m.layout.sizes.size() < 2 || m.layout.sizes.front() != 3 * m.dof || m.layout.sizes.back() != m.dof ||
      m.input_mean.size() != 3 * m.dof || m.input_scale.size() != 3 * m.dof ||
      m.output_mean.size() != m.dof || m.output_scale.size() != m.dof ||
      m.weights.size() != m.layout.parameter_count()) {
    throw DataError("black-box model file has inconsistent sizes");
  }
  return m;
}

int cmd_identify(const Args& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.out.empty()) throw std::invalid_argument("--out is required");
  const TrajectoryDataset data = dataset_from_arg(a.dataset);
  RobotModel tmpl = model_from_arg(a.model);
  if (data.dof() != tmpl.dof()) {
    throw DimensionError("dataset has " + std::to_string(data.dof()) + " joints, model has " +
                         std::to_string(tmpl.dof()));
  }
  const Variant variant = variant_from_string(a.variant);
  const OptimConfig cfg = optim_from(a);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  json config{{"model", a.model}, {"dataset", a.dataset}, {"variant", a.variant}, {"optimizer", optim_json(cfg)}};
  std::vector<std::string> inputs{a.dataset, is_system_name(a.model) ? "" : a.model, a.validation};

  std::optional<TrajectoryDataset> validation;
  if (!a.validation.empty()) validation = dataset_from_arg(a.validation);

  if (variant == Variant::kNEA) {
    const NeaResult r = nea_linear_regression(data, tmpl);
    const AccelerationFn f = r.dynamics();
    double mse = 0.0;
    for (const JointState& s : data.samples) mse += (s.qdd - f(s.q, s.qd, s.tau)).squaredNorm();
    mse /= std::max<std::size_t>(data.size(), 1);
    json j{{"variant", "nea"}, {"rank", r.rank}, {"columns", r.columns}, {"residual", r.residual},
           {"plausible", r.plausible}, {"one_step_mse", mse},
           {"standard", std::vector<double>(r.standard.data(), r.standard.data() + r.standard.size())}};
    if (validation) {
      const RolloutEvaluation ev = evaluate_rollouts(f, *validation, {1, 25, 50, 125, 250}, 50);
      j["validation"] = {{"horizons", ev.horizons}, {"nmse", ev.nmse}, {"divergences", ev.divergences}};
    }
    write_file(dir / "report.json", j.dump(2) + "\n");
    out << "nea: rank " << r.rank << "/" << r.columns << ", one-step mse " << format_double(mse) << "\n";
  } else if (variant == Variant::kBlackBox) {
    OptimConfig bc = cfg;
    bc.lr_network = a.lr;
    const BlackBoxFit fit = blackbox_fit(data, bc);
    json j{{"variant", "blackbox"}, {"final_loss", fit.loss_curve.back()}, {"iterations", fit.loss_curve.size()}};
    if (validation) {
      const RolloutEvaluation ev = evaluate_rollouts(fit.model.dynamics(), *validation, {1, 25, 50, 125, 250}, 50);
      j["validation"] = {{"horizons", ev.horizons}, {"nmse", ev.nmse}, {"divergences", ev.divergences}};
    }
    write_file(dir / "report.json", j.dump(2) + "\n");
    write_file(dir / "blackbox.json", blackbox_json(fit.model).dump() + "\n");
    std::string csv = "iteration,loss\n";
    for (std::size_t i = 0; i < fit.loss_curve.size(); ++i) {
      csv += std::to_string(i) + "," + format_double(fit.loss_curve[i]) + "\n";
    }
    write_file(dir / "metrics.csv", csv);
    out << "blackbox: final loss " << format_double(fit.loss_curve.back()) << "\n";
  } else {
    tmpl.actuator = ActuatorModel::initial(actuator_kind_from_string(a.actuator), tmpl.dof(), {16, 16}, a.seed);
    FitOptions fo;
    fo.variant = variant;
    fo.init = init_kind_from_string(a.init);
    fo.validation = validation;
    config["actuator"] = a.actuator;
    config["init"] = a.init;
    const FitReport r = identify(data, tmpl, cfg, fo);
    save_report(r, dir);
    save_model(r.model, dir / "model.json");
    out << to_string(variant) << ": final loss " << format_double(r.final_loss) << ", one-step mse "
        << format_double(r.one_step_mse) << ", plausibility failures " << r.plausibility_failures << "\n";
  }
  write_manifest(dir / "run_manifest.json", "identify", argv, inputs, config);
  return kExitOk;
}

std::vector<Eigen::VectorXd> load_torques(const std::string& path, int dof) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::vector<Eigen::VectorXd> u;
  std::string line;
  int lineno = 0;
  std::vector<int> columns;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (columns.empty()) {
      // header: pick the tau<j> columns
      columns.assign(static_cast<std::size_t>(dof), -1);
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].rfind("tau", 0) != 0) continue;
        int j = -1;
        try {
          j = std::stoi(cells[i].substr(3));
        } catch (const std::exception&) {
          throw DataError(path + ":" + std::to_string(lineno) + ": bad column '" + cells[i] + "'");
        }
        if (j < 0 || j >= dof) {
          throw DimensionError(path + ": column '" + cells[i] + "' exceeds the model's " + std::to_string(dof) +
                               " joints");
        }
        columns[static_cast<std::size_t>(j)] = static_cast<int>(i);
      }
      if (std::find(columns.begin(), columns.end(), -1) != columns.end()) {
        throw DimensionError(path + ": expected columns tau0..tau" + std::to_string(dof - 1));
      }
      continue;
    }
    Eigen::VectorXd t(dof);
    for (int j = 0; j < dof; ++j) {
      const auto c = static_cast<std::size_t>(columns[static_cast<std::size_t>(j)]);
      if (c >= cells.size()) throw DataError(path + ":" + std::to_string(lineno) + ": missing torque value");
      try {
        t[j] = parse_double(cells[c]);
      } catch (const DataError& e) {
        throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    u.push_back(t);
  }
  if (columns.empty()) throw DataError(path + ": no header row");
  return u;
}

int cmd_rollout(const Args& a, const std::vector<std::string>& argv, std::ostream& out) {
  const std::string target = a.out.empty() ? "rollout.csv" : a.out;
  AccelerationFn f;
  int dof = 0;
  std::string name;
  if (!is_system_name(a.model) && fs::exists(a.model)) {
    json j;
    try {
      j = json::parse(read_file(a.model));
    } catch (const json::exception& e) {
      throw DataError("model file '" + a.model + "': " + e.what());
    }
    if (j.is_object() && j.value("type", "") == "blackbox") {
      const BlackBoxModel m = blackbox_from_json(j);
      dof = m.dof;
      f = m.dynamics();
      name = "blackbox";
    }
  }
  if (!f) {
    const RobotModel m = model_from_arg(a.model);
    dof = m.dof();
    f = model_dynamics(m);
    name = m.name;
  }
  Eigen::VectorXd q0 = a.q0.empty() ? Eigen::VectorXd::Zero(dof) : parse_vector(a.q0, "--q0");
  Eigen::VectorXd qd0 = a.qd0.empty() ? Eigen::VectorXd::Zero(dof) : parse_vector(a.qd0, "--qd0");
  if (q0.size() != dof || qd0.size() != dof) {
    throw DimensionError("initial state needs " + std::to_string(dof) + " positions and velocities");
  }
  if (!(a.dt > 0.0)) throw std::invalid_argument("--dt must be positive");
  std::vector<Eigen::VectorXd> u;
  if (!a.torque.empty()) {
    if (!fs::exists(a.torque)) throw DataError("torque file '" + a.torque + "' does not exist");
    u = load_torques(a.torque, dof);
    if (a.horizon >= 0) {
      if (static_cast<std::size_t>(a.horizon) > u.size()) {
        throw DataError("torque file has " + std::to_string(u.size()) + " rows, horizon is " +
                        std::to_string(a.horizon));
      }
      u.resize(static_cast<std::size_t>(a.horizon));
    }
  } else {
    if (a.horizon < 0) throw std::invalid_argument("rollout needs --horizon or --torque");
    u.assign(static_cast<std::size_t>(a.horizon), Eigen::VectorXd::Zero(dof));
  }
  Trajectory t = rollout(f, q0, qd0, u, a.dt);
  t.model_id = name;
  TrajectoryDataset d = to_dataset(t);
  d.system = name;
  save_dataset(d, target);
  write_manifest(fs::path(target).string() + ".manifest.json", "rollout", argv, {a.model, a.torque},
                 json{{"model", a.model}, {"dt", a.dt}, {"horizon", u.size()}, {"q0", a.q0}, {"qd0", a.qd0}});
  out << "rollout: " << t.size() << " states" << (t.diverged ? " (diverged)" : "") << " -> " << target << "\n";
  return t.diverged ? kExitNumerical : kExitOk;
}

int cmd_bench(const Args& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.out.empty()) throw std::invalid_argument("--out is required");
  BenchConfig c;
  c.systems.clear();
  for (const std::string& s : split(a.model)) c.systems.push_back(system_from_string(s));
  c.datasets.clear();
  for (const std::string& s : split(a.dataset.empty() ? "uniform,stribeck-trajectory" : a.dataset)) {
    c.datasets.push_back(dataset_kind_from_string(s));
  }
  c.variants.clear();
  for (const std::string& s : split(a.variant)) c.variants.push_back(variant_from_string(s));
  c.actuators.clear();
  for (const std::string& s : split(a.actuator)) c.actuators.push_back(actuator_kind_from_string(s));
  if (a.seeds < 1) throw std::invalid_argument("--seeds must be >= 1");
  c.seeds.clear();
  for (int k = 0; k < a.seeds; ++k) c.seeds.push_back(a.seed + static_cast<std::uint64_t>(k));
  c.init = init_kind_from_string(a.init);
  c.optim = optim_from(a);
  c.optim.seed = 0;
  c.optim.threads = 1;
  c.uniform_samples = a.samples;
  c.simulation.duration = a.duration;
  c.simulation.dt = a.dt;
  c.threads = threads_from_environment();
  const auto rows = run_bench(c);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_file(dir / "rows.csv", bench_rows_csv(rows));
  const std::string summary = bench_summary_csv(rows);
  write_file(dir / "summary.csv", summary);
  write_file(dir / "nmse.svg", bench_svg(rows));
  write_manifest(dir / "run_manifest.json", "bench", argv, {},
                 json{{"systems", a.model}, {"datasets", a.dataset}, {"variants", a.variant},
                      {"actuators", a.actuator}, {"seed", a.seed}, {"seeds", a.seeds}, {"init", a.init},
                      {"samples", a.samples}, {"duration", a.duration}, {"dt", a.dt},
                      {"optimizer", optim_json(c.optim)}});
  out << summary;
  int failed = 0;
  for (const BenchRow& r : rows) {
    if (!r.error.empty()) {
      ++failed;
      out << "cell failed: " << r.system << " " << to_string(r.dataset) << " " << to_string(r.variant) << " "
          << r.actuator << " seed " << r.seed << ": " << r.error << "\n";
    }
  }
  return failed ? kExitNumerical : kExitOk;
}

FrameMotion recorded_frames(std::vector<BallSample> samples) {
  return [s = std::move(samples)](double t) {
    auto it = std::upper_bound(s.begin(), s.end(), t, [](double x, const BallSample& b) { return x < b.t; });
    if (it != s.begin()) --it;
    return it->frame;
  };
}

int cmd_bic(const Args& a, const std::vector<std::string>& argv, std::ostream& out) {
  if (a.out.empty()) throw std::invalid_argument("--out is required");
  StringParams<double> truth;
  truth.length = 0.4;
  truth.cup_offset = {0.0, 0.0, 0.05};
  std::vector<BallSample> data;
  FrameMotion motion;
  const bool synthetic = a.dataset.empty();
  if (synthetic) {
    motion = wobbling_frame({0.0, 0.0, 1.0});
    const int steps = static_cast<int>(std::lround(a.duration / a.dt));
    data = spherical_pendulum_data(truth, motion, SphericalStart{}, a.dt, steps);
  } else {
    data = dataset_from_arg(a.dataset).ball;
    if (data.empty()) throw DataError("dataset '" + a.dataset + "' has no ball columns");
    motion = recorded_frames(data);
  }
  StringParams<double> init = truth;
  init.length = a.r0;
  const Eigen::VectorXd off = parse_vector(a.offset0, "--offset0");
  if (off.size() != 3) throw std::invalid_argument("--offset0 needs three components");
  init.cup_offset = off;
  StringFitConfig sc;
  if (a.iters >= 0) sc.iterations = a.iters;
  sc.stride = 2;
  const StringFitResult fit = identify_string(data, init, sc);

  // constrained simulation with the identified string from the first sample
  const double dt = data.size() > 1 ? data[1].t - data[0].t : a.dt;
  const int steps = a.horizon >= 0 ? a.horizon : static_cast<int>(data.size()) - 1;
  const auto sim = simulate_ball(fit.params, motion, data.front().x_b, data.front().xd_b, dt, steps);
  double worst = 0.0;
  for (const BallSample& s : sim) {
    const BallState<double> b = cup_state(s, fit.params);
    worst = std::max(worst, std::abs((b.x_b - b.x_c).norm() - fit.params.length));
  }
  const fs::path dir(a.out);
  fs::create_directories(dir);
  auto v3 = [](const Eigen::Vector3d& v) { return std::vector<double>{v[0], v[1], v[2]}; };
  json j{{"length", fit.params.length},
         {"cup_offset", v3(fit.params.cup_offset)},
         {"initial_length", init.length},
         {"initial_cup_offset", v3(init.cup_offset)},
         {"final_loss", fit.loss.back()},
         {"gradient_iterations", fit.gradient_iterations},
         {"max_taut_violation", worst},
         {"relative_taut_violation", worst / fit.params.length}};
  if (synthetic) {
    j["true_length"] = truth.length;
    j["true_cup_offset"] = v3(truth.cup_offset);
  }
  write_file(dir / "bic_report.json", j.dump(2) + "\n");
  TrajectoryDataset d;
  d.system = "ball-on-string";
  d.provenance = Provenance::kSimTrajectory;
  d.dt = dt;
  for (const BallSample& s : sim) d.time.push_back(s.t);
  d.ball = sim;
  save_dataset(d, dir / "ball_rollout.csv");
  write_manifest(dir / "run_manifest.json", "bic", argv, {a.dataset},
                 json{{"dataset", a.dataset}, {"r0", a.r0}, {"offset0", a.offset0}, {"iters", sc.iterations},
                      {"dt", a.dt}, {"duration", a.duration}, {"horizon", steps}});
  out << "bic: r = " << format_double(fit.params.length) << ", cup offset = (" << format_double(fit.params.cup_offset[0])
      << ", " << format_double(fit.params.cup_offset[1]) << ", " << format_double(fit.params.cup_offset[2])
      << "), max |‖Δ‖ - r| = " << format_double(worst) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differentiable Newton-Euler system identification"};
  app.require_subcommand(1);
  Args a;
  const std::vector<std::string> arguments(argv + std::min(argc, 1), argv + argc);

  auto common = [&](CLI::App* s) {
    s->add_option("--model", a.model, "system name (pendulum, cartpole, furuta, two_link) or model file");
    s->add_option("--out", a.out, "output directory (file for rollout)");
    s->add_option("--seed", a.seed, "random seed");
    s->add_option("--dt", a.dt, "time step [s]")->check(CLI::PositiveNumber);
  };

  CLI::App* gen = app.add_subcommand("gen", "generate a dataset");
  common(gen);
  gen->add_option("--dataset", a.dataset, "uniform, trajectory or stribeck-trajectory");
  gen->add_option("--samples", a.samples, "uniform sample count");
  gen->add_option("--duration", a.duration, "trajectory length [s]");

  CLI::App* ident = app.add_subcommand("identify", "fit a model and write a report");
  common(ident);
  ident->add_option("--dataset", a.dataset, "training data file")->required();
  ident->add_option("--validation", a.validation, "trajectory file for rollout scoring");
  ident->add_option("--actuator", a.actuator, "identity, viscous, stribeck, nn-friction, nn-residual, ff-nn");
  ident->add_option("--variant", a.variant, "nea, diffnea, nokin or blackbox");
  ident->add_option("--init", a.init, "random or prior");
  ident->add_option("--loss", a.loss, "forward or inverse");
  ident->add_option("--lr", a.lr, "learning rate")->check(CLI::PositiveNumber);
  ident->add_option("--iters", a.iters, "iterations")->check(CLI::PositiveNumber);
  ident->add_option("--batch", a.batch, "mini-batch size (0 = full batch)");
  ident->add_flag("--staged", a.staged, "links first, then actuator parameters");

  CLI::App* roll = app.add_subcommand("rollout", "integrate a model under a torque sequence");
  common(roll);
  roll->add_option("--torque", a.torque, "CSV with tau0.. columns, one row per step");
  roll->add_option("--horizon", a.horizon, "steps (zero torque without --torque)");
  roll->add_option("--q0", a.q0, "initial positions, comma separated");
  roll->add_option("--qd0", a.qd0, "initial velocities, comma separated");

  CLI::App* bench = app.add_subcommand("bench", "benchmark grid");
  common(bench);
  bench->add_option("--dataset", a.dataset, "comma-separated dataset kinds");
  bench->add_option("--variant", a.variant, "comma-separated variants");
  bench->add_option("--actuator", a.actuator, "comma-separated actuator kinds");
  bench->add_option("--init", a.init, "random or prior");
  bench->add_option("--lr", a.lr, "learning rate")->check(CLI::PositiveNumber);
  bench->add_option("--iters", a.iters, "iterations")->check(CLI::PositiveNumber);
  bench->add_option("--seeds", a.seeds, "number of seeds starting at --seed");
  bench->add_option("--samples", a.samples, "uniform sample count");
  bench->add_option("--duration", a.duration, "trajectory length [s]");

  CLI::App* bic = app.add_subcommand("bic", "ball-in-a-cup string identification and constrained simulation");
  common(bic);
  bic->add_option("--dataset", a.dataset, "file with ball columns (synthetic data when omitted)");
  bic->add_option("--iters", a.iters, "gradient iterations");
  bic->add_option("--horizon", a.horizon, "simulation steps");
  bic->add_option("--duration", a.duration, "synthetic data length [s]");
  bic->add_option("--r0", a.r0, "initial string length [m]");
  bic->add_option("--offset0", a.offset0, "initial cup offset x,y,z [m]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (*bench && a.variant == "diffnea") a.variant = "nea,diffnea,nokin,blackbox";
  if (*bench && a.actuator == "viscous") a.actuator = "viscous,stribeck";
  if (*bic && bic->count("--iters") == 0) a.iters = -1;
  if (*bench && bench->count("--iters") == 0) a.iters = 1000;
  if (*gen && gen->count("--duration") == 0) a.duration = 10.0;
  if (*bic && bic->count("--duration") == 0) a.duration = 5.0;

  try {
    if (*gen) return cmd_gen(a, arguments, out);
    if (*ident) return cmd_identify(a, arguments, out);
    if (*roll) return cmd_rollout(a, arguments, out);
    if (*bench) return cmd_bench(a, arguments, out);
    if (*bic) return cmd_bic(a, arguments, out);
  } catch (const DimensionError& e) {
    err << "dimension mismatch: " << e.what() << "\n";
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ModelError& e) {
    err << "model error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace dnea
