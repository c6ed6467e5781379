#include "dnea/autodiff.hpp"

#include <algorithm>
#include <array>

namespace dnea::ad {

namespace {

thread_local Tape* g_active = nullptr;

std::string describe(const std::string& primitive, double argument) {
  return "autodiff: " + primitive + " evaluated outside its domain at " +
         std::to_string(argument);
}

Var unary(const Var& x, double value, double partial) {
  if (!x.recorded() || g_active == nullptr) return Var(value);
  return Var(value, g_active->push({x.index(), partial}));
}

Var binary(const Var& a, const Var& b, double value, double da, double db) {
  if (g_active == nullptr || (!a.recorded() && !b.recorded())) return Var(value);
  return Var(value, g_active->push({a.index(), da}, {b.index(), db}));
}

}  // namespace

DomainError::DomainError(std::string primitive, double argument)
    : std::domain_error(describe(primitive, argument)),
      primitive_(std::move(primitive)),
      argument_(argument) {}

Tape::Tape() { offsets_.push_back(0); }

std::int32_t Tape::new_variable() {
  offsets_.push_back(static_cast<std::uint32_t>(edges_.size()));
  return static_cast<std::int32_t>(size() - 1);
}

std::int32_t Tape::push(Edge a) {
  if (a.parent >= 0) edges_.push_back(a);
  offsets_.push_back(static_cast<std::uint32_t>(edges_.size()));
  return static_cast<std::int32_t>(size() - 1);
}

std::int32_t Tape::push(Edge a, Edge b) {
  if (a.parent >= 0) edges_.push_back(a);
  if (b.parent >= 0) edges_.push_back(b);
  offsets_.push_back(static_cast<std::uint32_t>(edges_.size()));
  return static_cast<std::int32_t>(size() - 1);
}

std::int32_t Tape::push(std::span<const Edge> edges) {
  for (const auto& e : edges) {
    if (e.parent >= 0) edges_.push_back(e);
  }
  offsets_.push_back(static_cast<std::uint32_t>(edges_.size()));
  return static_cast<std::int32_t>(size() - 1);
}

std::vector<double> Tape::adjoints(std::int32_t output) const {
  std::vector<double> adj(size(), 0.0);
  if (output < 0) return adj;
  adj[static_cast<std::size_t>(output)] = 1.0;
  for (std::int32_t i = output; i >= 0; --i) {
    const double a = adj[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    for (std::uint32_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
      adj[static_cast<std::size_t>(edges_[e].parent)] += a * edges_[e].partial;
    }
  }
  return adj;
}

void Tape::accumulate(std::int32_t output, double seed, std::size_t count,
                      std::span<double> out) {
  if (output < 0) return;
  scratch_.assign(static_cast<std::size_t>(output) + 1, 0.0);
  scratch_[static_cast<std::size_t>(output)] = seed;
  for (std::int32_t i = output; i >= 0; --i) {
    const double a = scratch_[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    for (std::uint32_t e = offsets_[i]; e < offsets_[i + 1]; ++e) {
      scratch_[static_cast<std::size_t>(edges_[e].parent)] += a * edges_[e].partial;
    }
  }
  const std::size_t n = std::min(count, scratch_.size());
  for (std::size_t i = 0; i < n; ++i) out[i] += scratch_[i];
}

void Tape::clear() {
  offsets_.assign(1, 0);
  edges_.clear();
}

Tape* active_tape() { return g_active; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active) { g_active = &tape; }
TapeScope::~TapeScope() { g_active = previous_; }

Var Var::independent(double value) {
  if (g_active == nullptr) {
    throw std::logic_error("autodiff: no active tape for independent variable");
  }
  return Var(value, g_active->new_variable());
}

Var operator+(const Var& a, const Var& b) {
  return binary(a, b, a.value() + b.value(), 1.0, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  return binary(a, b, a.value() - b.value(), 1.0, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  return binary(a, b, a.value() * b.value(), b.value(), a.value());
}

Var operator/(const Var& a, const Var& b) {
  if (b.value() == 0.0) throw DomainError("div", b.value());
  const double inv = 1.0 / b.value();
  const double q = a.value() * inv;
  return binary(a, b, q, inv, -q * inv);
}

Var operator-(const Var& a) { return unary(a, -a.value(), -1.0); }

Var sin(const Var& x) { return unary(x, std::sin(x.value()), std::cos(x.value())); }

Var cos(const Var& x) { return unary(x, std::cos(x.value()), -std::sin(x.value())); }

Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return unary(x, e, e);
}

Var log(const Var& x) {
  if (!(x.value() > 0.0)) throw DomainError("log", x.value());
  return unary(x, std::log(x.value()), 1.0 / x.value());
}

Var sqrt(const Var& x) {
  // The derivative is unbounded at 0, so a recorded 0 is also rejected.
  if (x.value() < 0.0 || (x.value() == 0.0 && x.recorded()) ||
      std::isnan(x.value())) {
    throw DomainError("sqrt", x.value());
  }
  const double s = std::sqrt(x.value());
  return unary(x, s, s > 0.0 ? 0.5 / s : 0.0);
}

Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return unary(x, t, 1.0 - t * t);
}

Var abs(const Var& x) {
  return unary(x, std::abs(x.value()), sign(x.value()));
}

Var relu(const Var& x) {
  return x.value() > 0.0 ? unary(x, x.value(), 1.0) : Var(0.0);
}

Var softplus(const Var& x) {
  return unary(x, softplus(x.value()), sigmoid(x.value()));
}

Var sigmoid(const Var& x) {
  const double s = sigmoid(x.value());
  return unary(x, s, s * (1.0 - s));
}

Var sign(const Var& x) { return Var(sign(x.value())); }

Var square(const Var& x) {
  return unary(x, x.value() * x.value(), 2.0 * x.value());
}

Var max(const Var& a, const Var& b) { return a.value() >= b.value() ? a : b; }
Var min(const Var& a, const Var& b) { return a.value() <= b.value() ? a : b; }

bool isfinite(const Var& x) { return std::isfinite(x.value()); }

Var dot(std::span<const Var> a, std::span<const Var> b, const Var& bias) {
  double s = bias.value();
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].value() * b[i].value();
  if (g_active == nullptr) return Var(s);
  thread_local std::vector<Tape::Edge> edges;
  edges.clear();
  if (bias.recorded()) edges.push_back({bias.index(), 1.0});
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].recorded()) edges.push_back({a[i].index(), b[i].value()});
    if (b[i].recorded()) edges.push_back({b[i].index(), a[i].value()});
  }
  if (edges.empty()) return Var(s);
  return Var(s, g_active->push(std::span<const Tape::Edge>(edges)));
}

double value_and_grad(const std::function<Var(std::span<const Var>)>& f,
                      std::span<const double> x, std::span<double> gradient) {
  Tape tape;
  TapeScope scope(tape);
  std::vector<Var> vars;
  vars.reserve(x.size());
  for (double xi : x) vars.push_back(Var::independent(xi));
  const Var y = f(vars);
  std::fill(gradient.begin(), gradient.end(), 0.0);
  tape.accumulate(y.index(), 1.0, x.size(), gradient);
  return y.value();
}

std::vector<double> grad(const std::function<Var(std::span<const Var>)>& f,
                         std::span<const double> x) {
  std::vector<double> g(x.size(), 0.0);
  value_and_grad(f, x, g);
  return g;
}

}  // namespace dnea::ad
