#include "dnea/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "dnea/data.hpp"

namespace dnea {

std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::kUniform: return "uniform";
    case DatasetKind::kTrajectory: return "trajectory";
    case DatasetKind::kStribeckTrajectory: return "stribeck-trajectory";
  }
  return "uniform";
}

DatasetKind dataset_kind_from_string(std::string_view s) {
  if (s == "uniform") return DatasetKind::kUniform;
  if (s == "trajectory") return DatasetKind::kTrajectory;
  if (s == "stribeck-trajectory") return DatasetKind::kStribeckTrajectory;
  throw std::invalid_argument("unknown dataset kind '" + std::string(s) + "'");
}

RobotModel bench_truth(SystemId id, DatasetKind kind) {
  RobotModel m = make_system(id);
  const ActuatorModel friction = ground_truth_friction(id);
  m.actuator = kind == DatasetKind::kStribeckTrajectory
                   ? friction
                   : ActuatorModel::viscous(friction.viscous_coefficients());
  return m;
}

OodResult probe_divergence(const AccelerationFn& f, const TrajectoryDataset& train, double dt,
                           const OodProbe& probe, std::uint64_t seed) {
  if (train.empty()) throw DataError("probe_divergence: empty training set");
  const int n = train.dof();
  Eigen::VectorXd q_lo = train.samples.front().q, q_hi = q_lo;
  double vmax = 0.0;
  for (const JointState& s : train.samples) {
    q_lo = q_lo.cwiseMin(s.q);
    q_hi = q_hi.cwiseMax(s.q);
    vmax = std::max(vmax, s.qd.cwiseAbs().maxCoeff());
  }
  if (!(vmax > 0.0)) vmax = 1.0;
  std::vector<Eigen::VectorXd> u;
  u.reserve(static_cast<std::size_t>(probe.steps));
  const bool ordered = !train.time.empty();
  for (int k = 0; k < probe.steps; ++k) {
    u.push_back(ordered ? train.samples[static_cast<std::size_t>(k) % train.size()].tau
                        : Eigen::VectorXd(Eigen::VectorXd::Zero(n)));
  }

  RolloutOptions options;
  options.velocity_bound = probe.velocity_factor * vmax;
  const AccelerationFn guarded = [&f, n](const Eigen::VectorXd& q, const Eigen::VectorXd& qd,
                                        const Eigen::VectorXd& tau) {
    try {
      return f(q, qd, tau);
    } catch (const std::exception&) {
      return Eigen::VectorXd(Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN()));
    }
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  OodResult out;
  for (int k = 0; k < probe.starts; ++k) {
    Eigen::VectorXd q(n), qd(n);
    for (int j = 0; j < n; ++j) {
      q[j] = q_lo[j] + (q_hi[j] - q_lo[j]) * unit(rng);
      const double speed = (probe.speed_lo + (probe.speed_hi - probe.speed_lo) * unit(rng)) * vmax;
      qd[j] = unit(rng) < 0.5 ? -speed : speed;
    }
    const Trajectory t = rollout(guarded, q, qd, u, dt, options);
    ++out.rollouts;
    if (t.diverged) ++out.divergences;
  }
  return out;
}

void BenchConfig::validate() const {
  optim.validate();
  if (systems.empty() || datasets.empty() || variants.empty() || seeds.empty()) {
    throw std::invalid_argument("bench: empty grid");
  }
  if (uniform_samples < 1) throw std::invalid_argument("bench: uniform_samples must be >= 1");
  if (trajectory_stride < 1) throw std::invalid_argument("bench: trajectory_stride must be >= 1");
  if (threads < 1) throw std::invalid_argument("bench: threads must be >= 1");
}

namespace {

struct Cell {
  SystemId system;
  DatasetKind dataset;
  Variant variant;
  std::optional<ActuatorKind> actuator;
  std::uint64_t seed;
};

struct Datasets {
  TrajectoryDataset train;
  TrajectoryDataset validation;
};

Datasets make_datasets(const BenchConfig& cfg, SystemId id, DatasetKind kind, std::uint64_t seed) {
  const RobotModel truth = bench_truth(id, kind);
  const Controller controller = energy_pumping(truth, default_pumping(id));
  Datasets d;
  if (kind == DatasetKind::kUniform) {
    d.train = gen_uniform(truth, default_ranges(id), static_cast<std::size_t>(cfg.uniform_samples), seed);
  } else {
    SimTrajectoryConfig sc = cfg.simulation;
    sc.seed = seed;
    const SimTrajectoryResult sim = gen_sim_trajectory(truth, controller, sc);
    d.train.system = sim.data.system;
    d.train.provenance = sim.data.provenance;
    for (std::size_t i = 0; i < sim.data.size(); i += static_cast<std::size_t>(cfg.trajectory_stride)) {
      if (sim.edge[i]) continue;
      d.train.samples.push_back(sim.data.samples[i]);
      d.train.time.push_back(sim.data.time[i]);
    }
  }
  // noiseless swing-up from a different start, scored against the clean states
  SimTrajectoryConfig vc = cfg.simulation;
  vc.seed = seed + 7919;
  vc.noise = NoiseLevels{0.0, 0.0};
  vc.q0 = Eigen::VectorXd::Constant(truth.dof(), -0.2);
  d.validation = to_dataset(gen_sim_trajectory(truth, controller, vc).clean);
  return d;
}

double one_step_mse(const AccelerationFn& f, const TrajectoryDataset& data) {
  double sum = 0.0;
  for (const JointState& s : data.samples) sum += (s.qdd - f(s.q, s.qd, s.tau)).squaredNorm();
  return data.empty() ? 0.0 : sum / static_cast<double>(data.size());
}

BenchRow run_cell(const BenchConfig& cfg, const Cell& cell) {
  const auto start = std::chrono::steady_clock::now();
  BenchRow row;
  row.system = std::string(to_string(cell.system));
  row.dataset = cell.dataset;
  row.variant = cell.variant;
  row.actuator = cell.actuator ? std::string(to_string(*cell.actuator)) : "-";
  row.seed = cell.seed;
  try {
    const Datasets d = make_datasets(cfg, cell.system, cell.dataset, cell.seed);
    row.training_samples = d.train.size();
    OptimConfig oc = cfg.optim;
    oc.seed = cfg.optim.seed + cell.seed;
    oc.threads = 1;
    RobotModel tmpl = make_system(cell.system);
    AccelerationFn f;
    switch (cell.variant) {
      case Variant::kNEA:
        f = nea_linear_regression(d.train, tmpl).dynamics();
        break;
      case Variant::kBlackBox:
        f = blackbox_fit(d.train, oc, cfg.blackbox_hidden).model.dynamics();
        break;
      case Variant::kDiffNEA:
      case Variant::kNoKin: {
        tmpl.actuator = ActuatorModel::initial(*cell.actuator, tmpl.dof(), cfg.network_hidden, oc.seed);
        FitOptions fo;
        fo.variant = cell.variant;
        fo.init = cfg.init;
        f = model_dynamics(identify(d.train, tmpl, oc, fo).model);
        break;
      }
    }
    row.one_step_mse = one_step_mse(f, d.train);
    double vmax = 0.0;
    for (const JointState& s : d.train.samples) vmax = std::max(vmax, s.qd.cwiseAbs().maxCoeff());
    RolloutOptions ro;
    ro.velocity_bound = cfg.probe.velocity_factor * std::max(vmax, 1e-12);
    row.validation = evaluate_rollouts(f, d.validation, cfg.horizons, cfg.validation_stride, ro);
    const double dt = d.validation.dt.value_or(kDefaultDt);
    row.ood = probe_divergence(f, d.train, dt, cfg.probe, cell.seed + 104729);
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::string fmt(double x) { return std::isfinite(x) ? format_double(x) : std::string("nan"); }

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<Cell> cells;
  for (const SystemId id : cfg.systems) {
    for (const DatasetKind dk : cfg.datasets) {
      for (const Variant v : cfg.variants) {
        const bool learned = v == Variant::kDiffNEA || v == Variant::kNoKin;
        if (learned && cfg.actuators.empty()) throw std::invalid_argument("bench: no actuator kinds");
        for (const std::uint64_t seed : cfg.seeds) {
          if (learned) {
            for (const ActuatorKind a : cfg.actuators) cells.push_back({id, dk, v, a, seed});
          } else {
            cells.push_back({id, dk, v, std::nullopt, seed});
          }
        }
      }
    }
  }
  std::vector<BenchRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) rows[i] = run_cell(cfg, cells[i]);
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), cells.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

std::string bench_rows_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "system,dataset,variant,actuator,seed,samples,one_step_mse";
  const std::vector<int> horizons = rows.empty() ? std::vector<int>{} : rows.front().validation.horizons;
  for (const int h : horizons) out << ",nmse_h" << h;
  out << ",rollouts,divergences,ood_rollouts,ood_divergences,error\n";
  for (const BenchRow& r : rows) {
    out << r.system << ',' << to_string(r.dataset) << ',' << to_string(r.variant) << ',' << r.actuator
        << ',' << r.seed << ',' << r.training_samples << ',' << fmt(r.one_step_mse);
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      out << ',' << (h < r.validation.nmse.size() ? fmt(r.validation.nmse[h]) : std::string("nan"));
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << ',' << r.validation.rollouts << ',' << r.validation.divergences << ',' << r.ood.rollouts << ','
        << r.ood.divergences << ',' << err << '\n';
  }
  return out.str();
}

namespace {

struct Group {
  std::vector<double> nmse_sum;
  std::vector<int> nmse_count;
  double mse_sum = 0.0;
  int cells = 0, failed = 0, divergences = 0, ood_rollouts = 0, ood_divergences = 0;
};

using GroupKey = std::tuple<std::string, std::string, std::string, std::string>;

std::map<GroupKey, Group> group_rows(const std::vector<BenchRow>& rows, std::size_t horizons,
                                     std::vector<GroupKey>& order) {
  std::map<GroupKey, Group> groups;
  for (const BenchRow& r : rows) {
    const GroupKey key{r.system, std::string(to_string(r.dataset)), std::string(to_string(r.variant)), r.actuator};
    auto [it, fresh] = groups.try_emplace(key);
    Group& g = it->second;
    if (fresh) {
      order.push_back(key);
      g.nmse_sum.assign(horizons, 0.0);
      g.nmse_count.assign(horizons, 0);
    }
    ++g.cells;
    if (!r.error.empty()) {
      ++g.failed;
      continue;
    }
    g.mse_sum += r.one_step_mse;
    for (std::size_t h = 0; h < horizons && h < r.validation.nmse.size(); ++h) {
      if (std::isfinite(r.validation.nmse[h])) {
        g.nmse_sum[h] += r.validation.nmse[h];
        ++g.nmse_count[h];
      }
    }
    g.divergences += r.validation.divergences;
    g.ood_rollouts += r.ood.rollouts;
    g.ood_divergences += r.ood.divergences;
  }
  return groups;
}

}  // namespace

std::string bench_summary_csv(const std::vector<BenchRow>& rows) {
  const std::vector<int> horizons = rows.empty() ? std::vector<int>{} : rows.front().validation.horizons;
  std::vector<GroupKey> order;
  const auto groups = group_rows(rows, horizons.size(), order);
  std::ostringstream out;
  out << "system,dataset,variant,actuator,cells,failed,mean_one_step_mse";
  for (const int h : horizons) out << ",mean_nmse_h" << h;
  out << ",divergences,ood_rollouts,ood_divergences\n";
  for (const GroupKey& key : order) {
    const Group& g = groups.at(key);
    const int ok = g.cells - g.failed;
    out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << std::get<3>(key)
        << ',' << g.cells << ',' << g.failed << ','
        << fmt(ok ? g.mse_sum / ok : std::numeric_limits<double>::quiet_NaN());
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      out << ',' << fmt(g.nmse_count[h] ? g.nmse_sum[h] / g.nmse_count[h]
                                        : std::numeric_limits<double>::quiet_NaN());
    }
    out << ',' << g.divergences << ',' << g.ood_rollouts << ',' << g.ood_divergences << '\n';
  }
  return out.str();
}

std::string bench_svg(const std::vector<BenchRow>& rows) {
  const std::vector<int> horizons = rows.empty() ? std::vector<int>{} : rows.front().validation.horizons;
  std::vector<GroupKey> order;
  const auto groups = group_rows(rows, horizons.size(), order);
  std::vector<std::pair<std::string, std::string>> panels;
  for (const GroupKey& k : order) {
    const std::pair<std::string, std::string> p{std::get<0>(k), std::get<1>(k)};
    if (std::find(panels.begin(), panels.end(), p) == panels.end()) panels.push_back(p);
  }
  const int w = 420, h = 300, pad = 50;
  const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w * std::max<std::size_t>(panels.size(), 1)
      << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const int x0 = static_cast<int>(p) * w;
    out << "<text x=\"" << x0 + pad << "\" y=\"18\">" << panels[p].first << " / " << panels[p].second
        << " (log10 nMSE vs horizon)</text>\n";
    out << "<rect x=\"" << x0 + pad << "\" y=\"" << 30 << "\" width=\"" << w - 2 * pad << "\" height=\""
        << h - 80 << "\" fill=\"none\" stroke=\"black\"/>\n";
    // shared log axes: 1e-10 .. 1e2
    auto px = [&](std::size_t i) {
      return x0 + pad + (horizons.size() > 1 ? (w - 2 * pad) * static_cast<double>(i) / (horizons.size() - 1) : 0.0);
    };
    auto py = [&](double v) {
      const double l = std::clamp(std::log10(std::max(v, 1e-10)), -10.0, 2.0);
      return 30 + (h - 80) * (2.0 - l) / 12.0;
    };
    for (std::size_t i = 0; i < horizons.size(); ++i) {
      out << "<text x=\"" << px(i) - 6 << "\" y=\"" << h - 36 << "\">" << horizons[i] << "</text>\n";
    }
    int c = 0;
    for (const GroupKey& k : order) {
      if (std::get<0>(k) != panels[p].first || std::get<1>(k) != panels[p].second) continue;
      const Group& g = groups.at(k);
      const char* colour = colours[c % 8];
      std::ostringstream pts;
      for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (!g.nmse_count[i]) continue;
        pts << px(i) << ',' << py(g.nmse_sum[i] / g.nmse_count[i]) << ' ';
      }
      out << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"" << pts.str() << "\"/>\n";
      out << "<text x=\"" << x0 + pad << "\" y=\"" << h - 20 + 0 * c << "\" dx=\"" << (c % 4) * 85 << "\" dy=\""
          << (c / 4) * 12 << "\" fill=\"" << colour << "\">" << std::get<2>(k)
          << (std::get<3>(k) == "-" ? "" : "+" + std::get<3>(k)) << "</text>\n";
      ++c;
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace dnea
