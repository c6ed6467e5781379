#include "dnea/actuation.hpp"

#include <cmath>
#include <random>

namespace dnea {

std::string_view to_string(ActuatorKind kind) {
  switch (kind) {
    case ActuatorKind::kIdentity: return "identity";
    case ActuatorKind::kViscous: return "viscous";
    case ActuatorKind::kStribeck: return "stribeck";
    case ActuatorKind::kNNFriction: return "nn-friction";
    case ActuatorKind::kNNResidual: return "nn-residual";
    case ActuatorKind::kFFNN: return "ff-nn";
  }
  return "identity";
}

ActuatorKind actuator_kind_from_string(std::string_view name) {
  for (auto k : {ActuatorKind::kIdentity, ActuatorKind::kViscous, ActuatorKind::kStribeck,
                 ActuatorKind::kNNFriction, ActuatorKind::kNNResidual, ActuatorKind::kFFNN}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown actuator kind '" + std::string(name) + "'");
}

bool is_passive(ActuatorKind kind) {
  return kind == ActuatorKind::kViscous || kind == ActuatorKind::kStribeck ||
         kind == ActuatorKind::kNNFriction;
}

int MlpLayout::parameter_count() const {
  int n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

Eigen::VectorXd init_mlp(const MlpLayout& layout, std::uint64_t seed, double output_scale) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd w(layout.parameter_count());
  Eigen::Index k = 0;
  const std::size_t layers = layout.sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = layout.sizes[l], out = layout.sizes[l + 1];
    double sd = std::sqrt(2.0 / (in + out));
    if (l + 1 == layers) sd *= output_scale;
    std::normal_distribution<double> normal(0.0, sd);
    for (int i = 0; i < in * out; ++i) w[k++] = normal(rng);
    for (int i = 0; i < out; ++i) w[k++] = 0.0;
  }
  return w;
}

int actuator_parameter_count(ActuatorKind kind, int dof, const std::vector<int>& hidden) {
  auto net = [&](int inputs) {
    MlpLayout layout{{inputs}};
    layout.sizes.insert(layout.sizes.end(), hidden.begin(), hidden.end());
    layout.sizes.push_back(dof);
    return layout.parameter_count();
  };
  switch (kind) {
    case ActuatorKind::kIdentity: return 0;
    case ActuatorKind::kViscous: return dof;
    case ActuatorKind::kStribeck: return 4 * dof;
    case ActuatorKind::kNNFriction:
    case ActuatorKind::kNNResidual: return net(2 * dof);
    case ActuatorKind::kFFNN: return net(3 * dof);
  }
  return 0;
}

ActuatorModel ActuatorModel::identity(int dof) {
  ActuatorModel a;
  a.kind = ActuatorKind::kIdentity;
  a.dof = dof;
  return a;
}

namespace {

Eigen::VectorXd checked_sqrt(const Eigen::VectorXd& c, const char* what) {
  Eigen::VectorXd out(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (!(c[i] >= 0.0) || !std::isfinite(c[i])) {
      throw std::invalid_argument(std::string("actuator: ") + what +
                                  " must be finite and non-negative");
    }
    out[i] = std::sqrt(c[i]);
  }
  return out;
}

}  // namespace

ActuatorModel ActuatorModel::viscous(const Eigen::VectorXd& mu_v) {
  ActuatorModel a;
  a.kind = ActuatorKind::kViscous;
  a.dof = static_cast<int>(mu_v.size());
  a.params = checked_sqrt(mu_v, "viscous coefficient");
  return a;
}

ActuatorModel ActuatorModel::stribeck(const Eigen::VectorXd& f_s, const Eigen::VectorXd& f_d,
                                      const Eigen::VectorXd& nu_s,
                                      const Eigen::VectorXd& mu_v) {
  const auto n = f_s.size();
  if (f_d.size() != n || nu_s.size() != n || mu_v.size() != n) {
    throw std::invalid_argument("actuator: stribeck coefficient vectors differ in length");
  }
  ActuatorModel a;
  a.kind = ActuatorKind::kStribeck;
  a.dof = static_cast<int>(n);
  a.params.resize(4 * n);
  a.params << checked_sqrt(f_s, "static friction"), checked_sqrt(f_d, "dynamic friction"),
      checked_sqrt(nu_s, "stribeck velocity"), checked_sqrt(mu_v, "viscous coefficient");
  return a;
}

ActuatorModel ActuatorModel::network(ActuatorKind kind, int dof, std::vector<int> hidden,
                                     std::uint64_t seed) {
  ActuatorModel a;
  a.kind = kind;
  a.dof = dof;
  a.hidden = std::move(hidden);
  if (!a.has_network()) throw std::invalid_argument("actuator: kind has no network");
  a.params = init_mlp(a.layout(), seed);
  return a;
}

ActuatorModel ActuatorModel::initial(ActuatorKind kind, int dof, std::vector<int> hidden,
                                     std::uint64_t seed) {
  ActuatorModel a;
  a.kind = kind;
  a.dof = dof;
  a.hidden = std::move(hidden);
  switch (kind) {
    case ActuatorKind::kIdentity:
      break;
    case ActuatorKind::kViscous:
      a.params = Eigen::VectorXd::Constant(dof, 0.1);
      break;
    case ActuatorKind::kStribeck:
      a.params = Eigen::VectorXd::Constant(4 * dof, 0.1);
      a.params.segment(2 * dof, dof).setConstant(1.0);
      break;
    default:
      a.params = init_mlp(a.layout(), seed);
  }
  return a;
}

int ActuatorModel::parameter_count() const {
  return actuator_parameter_count(kind, dof, hidden);
}

bool ActuatorModel::has_network() const {
  return kind == ActuatorKind::kNNFriction || kind == ActuatorKind::kNNResidual ||
         kind == ActuatorKind::kFFNN;
}

MlpLayout ActuatorModel::layout() const {
  MlpLayout layout{{kind == ActuatorKind::kFFNN ? 3 * dof : 2 * dof}};
  layout.sizes.insert(layout.sizes.end(), hidden.begin(), hidden.end());
  layout.sizes.push_back(dof);
  return layout;
}

Eigen::VectorXd ActuatorModel::viscous_coefficients() const {
  if (kind == ActuatorKind::kViscous) return params.array().square();
  if (kind == ActuatorKind::kStribeck) return params.segment(3 * dof, dof).array().square();
  return Eigen::VectorXd::Zero(dof);
}

Eigen::VectorXd ActuatorModel::static_friction() const {
  if (kind != ActuatorKind::kStribeck) return Eigen::VectorXd::Zero(dof);
  return params.segment(0, dof).array().square();
}

Eigen::VectorXd ActuatorModel::dynamic_friction() const {
  if (kind != ActuatorKind::kStribeck) return Eigen::VectorXd::Zero(dof);
  return params.segment(dof, dof).array().square();
}

Eigen::VectorXd ActuatorModel::stribeck_velocity() const {
  if (kind != ActuatorKind::kStribeck) return Eigen::VectorXd::Zero(dof);
  return params.segment(2 * dof, dof).array().square();
}

Eigen::VectorXd apply_actuator(const ActuatorModel& a, const Eigen::VectorXd& tau_d,
                               const Eigen::VectorXd& q, const Eigen::VectorXd& qd) {
  return apply_actuator<double>(a, std::span<const double>(a.params.data(), a.params.size()),
                                tau_d, q, qd);
}

}  // namespace dnea
