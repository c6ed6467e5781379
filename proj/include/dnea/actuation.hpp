#ifndef DNEA_ACTUATION_HPP_
#define DNEA_ACTUATION_HPP_

// Joint-independent actuator models mapping the desired torque tau_d to the
// torque applied at the joints.
//
//   Identity     tau = tau_d
//   Viscous      tau = tau_d - mu_v * qd
//   Stribeck     tau = tau_d - sign(qd) * (f_s + f_d * exp(-nu_s qd^2)) - mu_v * qd
//   NNFriction   tau = tau_d - sign(qd) * |f_NN(q, qd)|        (per joint)
//   NNResidual   tau = tau_d + f_NN(q, qd)
//   FFNN         tau = f_NN(tau_d, q, qd)
//
// Friction coefficients are stored as unrestricted virtual parameters whose
// squares are the physical coefficients, so every parameter vector yields a
// passive model for the first three kinds.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dnea/autodiff.hpp"
#include "dnea/spatial.hpp"

namespace dnea {

enum class ActuatorKind { kIdentity, kViscous, kStribeck, kNNFriction, kNNResidual, kFFNN };

std::string_view to_string(ActuatorKind kind);
/// Accepts the CLI spellings: identity, viscous, stribeck, nn-friction,
/// nn-residual, ff-nn.
ActuatorKind actuator_kind_from_string(std::string_view name);

/// True for the kinds that can only remove energy.
bool is_passive(ActuatorKind kind);

/// Fully connected tanh network; `sizes` includes input and output widths.
/// Parameters are packed per layer as a row-major weight matrix followed by
/// the bias.
struct MlpLayout {
  std::vector<int> sizes;

  int inputs() const { return sizes.front(); }
  int outputs() const { return sizes.back(); }
  int parameter_count() const;
};

/// Glorot-style initialisation, output layer scaled by `output_scale`.
Eigen::VectorXd init_mlp(const MlpLayout& layout, std::uint64_t seed,
                         double output_scale = 0.1);

template <typename S>
VecX<S> mlp_forward(const MlpLayout& layout, std::span<const S> weights,
                    const VecX<S>& input) {
  using ad::dot;
  using std::tanh;
  if (input.size() != layout.inputs()) {
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(input.size()) +
                                " entries, network expects " +
                                std::to_string(layout.inputs()));
  }
  if (static_cast<int>(weights.size()) != layout.parameter_count()) {
    throw std::invalid_argument("mlp_forward: weight vector has wrong length");
  }
  std::vector<S> x(input.data(), input.data() + input.size());
  std::vector<S> y;
  std::size_t offset = 0;
  const std::size_t layers = layout.sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(layout.sizes[l]);
    const auto out = static_cast<std::size_t>(layout.sizes[l + 1]);
    const std::span<const S> w = weights.subspan(offset, in * out);
    const std::span<const S> b = weights.subspan(offset + in * out, out);
    offset += in * out + out;
    y.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      S z = dot(w.subspan(o * in, in), std::span<const S>(x), b[o]);
      y[o] = (l + 1 < layers) ? S(tanh(z)) : z;
    }
    x.swap(y);
  }
  return Eigen::Map<const VecX<S>>(x.data(), static_cast<Eigen::Index>(x.size()));
}

struct ActuatorModel {
  ActuatorKind kind = ActuatorKind::kIdentity;
  int dof = 0;
  std::vector<int> hidden = {32, 32};
  /// Virtual parameters (see layout notes per kind).
  Eigen::VectorXd params;

  static ActuatorModel identity(int dof);
  /// Rejects negative coefficients.
  static ActuatorModel viscous(const Eigen::VectorXd& mu_v);
  static ActuatorModel stribeck(const Eigen::VectorXd& f_s, const Eigen::VectorXd& f_d,
                                const Eigen::VectorXd& nu_s, const Eigen::VectorXd& mu_v);
  static ActuatorModel network(ActuatorKind kind, int dof, std::vector<int> hidden,
                               std::uint64_t seed);
  /// Default-initialised parameters of any kind, used as optimisation start.
  static ActuatorModel initial(ActuatorKind kind, int dof, std::vector<int> hidden,
                               std::uint64_t seed);

  int parameter_count() const;
  MlpLayout layout() const;
  bool has_network() const;

  // Physical coefficients (squares of the virtual parameters).
  Eigen::VectorXd viscous_coefficients() const;
  Eigen::VectorXd static_friction() const;
  Eigen::VectorXd dynamic_friction() const;
  Eigen::VectorXd stribeck_velocity() const;
};

/// Number of virtual parameters per kind and joint count.
int actuator_parameter_count(ActuatorKind kind, int dof, const std::vector<int>& hidden);

template <typename S>
VecX<S> apply_actuator(const ActuatorModel& a, std::span<const S> params,
                       const VecX<S>& tau_d, const VecX<S>& q, const VecX<S>& qd) {
  using ad::sign;
  using ad::square;
  using std::abs;
  using std::exp;
  const Eigen::Index n = a.dof;
  if (tau_d.size() != n || q.size() != n || qd.size() != n) {
    throw std::invalid_argument("apply_actuator: dimension mismatch");
  }
  if (static_cast<int>(params.size()) != a.parameter_count()) {
    throw std::invalid_argument("apply_actuator: parameter vector has wrong length");
  }
  VecX<S> tau = tau_d;
  switch (a.kind) {
    case ActuatorKind::kIdentity:
      break;
    case ActuatorKind::kViscous:
      for (Eigen::Index i = 0; i < n; ++i) tau[i] -= square(params[i]) * qd[i];
      break;
    case ActuatorKind::kStribeck:
      for (Eigen::Index i = 0; i < n; ++i) {
        const S f_s = square(params[i]);
        const S f_d = square(params[n + i]);
        const S nu_s = square(params[2 * n + i]);
        const S mu_v = square(params[3 * n + i]);
        tau[i] -= sign(qd[i]) * (f_s + f_d * exp(-nu_s * qd[i] * qd[i])) + mu_v * qd[i];
      }
      break;
    case ActuatorKind::kNNFriction: {
      VecX<S> in(2 * n);
      in << q, qd;
      const VecX<S> f = mlp_forward<S>(a.layout(), params, in);
      for (Eigen::Index i = 0; i < n; ++i) tau[i] -= sign(qd[i]) * abs(f[i]);
      break;
    }
    case ActuatorKind::kNNResidual: {
      VecX<S> in(2 * n);
      in << q, qd;
      tau += mlp_forward<S>(a.layout(), params, in);
      break;
    }
    case ActuatorKind::kFFNN: {
      VecX<S> in(3 * n);
      in << tau_d, q, qd;
      tau = mlp_forward<S>(a.layout(), params, in);
      break;
    }
  }
  return tau;
}

/// Convenience for plain evaluation with the model's own parameters.
Eigen::VectorXd apply_actuator(const ActuatorModel& a, const Eigen::VectorXd& tau_d,
                               const Eigen::VectorXd& q, const Eigen::VectorXd& qd);

}  // namespace dnea

#endif  // DNEA_ACTUATION_HPP_
