#ifndef DNEA_AUTODIFF_HPP_
#define DNEA_AUTODIFF_HPP_

// Reverse-mode scalar automatic differentiation.
//
// A Var is a value plus an index into the tape that is active on the calling
// thread. Vars created without an active tape, or from plain doubles, are
// constants (index -1) and never record anything. Every primitive that
// touches at least one recorded operand appends exactly one node holding the
// local partial derivatives w.r.t. its recorded parents.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#ifdef DNEA_HAVE_FLOAT128
#include <boost/multiprecision/eigen.hpp>
#include <boost/multiprecision/float128.hpp>
#endif

namespace dnea::ad {

/// Arithmetic of the finite-difference oracle in check_gradient.
#ifdef DNEA_HAVE_FLOAT128
using OracleReal = boost::multiprecision::float128;
#else
using OracleReal = long double;
#endif

/// Raised when a primitive is evaluated outside its domain during recording.
class DomainError : public std::domain_error {
 public:
  DomainError(std::string primitive, double argument);
  const std::string& primitive() const { return primitive_; }
  double argument() const { return argument_; }

 private:
  std::string primitive_;
  double argument_;
};

class Tape {
 public:
  struct Edge {
    std::int32_t parent;
    double partial;
  };

  Tape();

  std::int32_t new_variable();
  std::int32_t push(Edge a);
  std::int32_t push(Edge a, Edge b);
  /// Node with an arbitrary number of parents. Edges with parent < 0 are
  /// dropped.
  std::int32_t push(std::span<const Edge> edges);

  /// Adjoints of every node w.r.t. `output` (d output / d node).
  std::vector<double> adjoints(std::int32_t output) const;
  /// Same as adjoints() but accumulates `seed * d output / d node` for the
  /// first `count` nodes into `out`, reusing an internal buffer.
  void accumulate(std::int32_t output, double seed, std::size_t count,
                  std::span<double> out);

  std::size_t size() const { return offsets_.size() - 1; }
  void clear();

 private:
  std::vector<std::uint32_t> offsets_;
  std::vector<Edge> edges_;
  std::vector<double> scratch_;
};

/// The tape new nodes are recorded on, or nullptr.
Tape* active_tape();

/// Installs a tape as the active one for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT: implicit constants
  Var(int value) : value_(value) {}     // NOLINT
  Var(double value, std::int32_t index) : value_(value), index_(index) {}

  /// New independent variable on the active tape.
  static Var independent(double value);

  double value() const { return value_; }
  std::int32_t index() const { return index_; }
  bool recorded() const { return index_ >= 0; }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

  friend Var operator+(const Var& a, const Var& b);
  friend Var operator-(const Var& a, const Var& b);
  friend Var operator*(const Var& a, const Var& b);
  friend Var operator/(const Var& a, const Var& b);
  friend Var operator-(const Var& a);
  friend Var operator+(const Var& a) { return a; }

 private:
  double value_ = 0.0;
  std::int32_t index_ = -1;
};

// Mixed operations with doubles. The double is always a constant.
inline Var operator+(const Var& a, double b) { return a + Var(b); }
inline Var operator+(double a, const Var& b) { return Var(a) + b; }
inline Var operator-(const Var& a, double b) { return a - Var(b); }
inline Var operator-(double a, const Var& b) { return Var(a) - b; }
inline Var operator*(const Var& a, double b) { return a * Var(b); }
inline Var operator*(double a, const Var& b) { return Var(a) * b; }
inline Var operator/(const Var& a, double b) { return a / Var(b); }
inline Var operator/(double a, const Var& b) { return Var(a) / b; }

// Comparisons act on values; branching differentiates the taken branch.
inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }
inline bool operator==(const Var& a, const Var& b) { return a.value() == b.value(); }
inline bool operator!=(const Var& a, const Var& b) { return a.value() != b.value(); }

Var sin(const Var& x);
Var cos(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var sqrt(const Var& x);
Var tanh(const Var& x);
Var abs(const Var& x);
Var relu(const Var& x);
Var softplus(const Var& x);
Var sigmoid(const Var& x);
Var sign(const Var& x);
Var square(const Var& x);
Var max(const Var& a, const Var& b);
Var min(const Var& a, const Var& b);
bool isfinite(const Var& x);

/// sum_i a_i * b_i + bias as a single tape node.
Var dot(std::span<const Var> a, std::span<const Var> b, const Var& bias = {});

// Plain-number counterparts, so generic code can call these unqualified.
// Any real type with numeric_limits qualifies, extended-precision types included.
template <typename T>
concept PlainReal = !std::is_same_v<T, Var> && std::numeric_limits<T>::is_specialized &&
                    !std::numeric_limits<T>::is_integer;

template <typename T>
  requires PlainReal<T>
T relu(T x) {
  return x > T(0) ? x : T(0);
}
template <typename T>
  requires PlainReal<T>
T softplus(T x) {
  using std::exp;
  using std::log1p;
  return (x > T(0) ? x : T(0)) + log1p(exp(-(x < T(0) ? -x : x)));
}
template <typename T>
  requires PlainReal<T>
T sigmoid(T x) {
  using std::exp;
  return x >= T(0) ? T(1) / (T(1) + exp(-x)) : exp(x) / (T(1) + exp(x));
}
template <typename T>
  requires PlainReal<T>
T sign(T x) {
  return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0));
}
template <typename T>
  requires PlainReal<T>
T square(T x) {
  return x * x;
}
template <typename T>
  requires PlainReal<T>
T dot(std::span<const T> a, std::span<const T> b, T bias = T(0)) {
  T s = bias;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double value(const Var& x) { return x.value(); }
template <typename T>
  requires PlainReal<T>
double value(T x) {
  return static_cast<double>(x);
}

/// Gradient of a scalar function at x by one reverse sweep.
std::vector<double> grad(const std::function<Var(std::span<const Var>)>& f,
                         std::span<const double> x);

/// Value and gradient in one pass.
double value_and_grad(const std::function<Var(std::span<const Var>)>& f,
                      std::span<const double> x, std::span<double> gradient);

/// Max over coordinates of |AD - FD| / (|FD| + 1e-8), FD being the
/// Richardson-extrapolated central difference with step h, evaluated in
/// OracleReal (quad precision where available). Losses of order 1e4 leave
/// double or even 80-bit differences with cancellation noise above the 1e-8
/// floor on coordinates whose gradient vanishes.
template <typename F>
double check_gradient(F&& f, std::span<const double> x, double h = 1e-6) {
  using R = OracleReal;
  const std::function<Var(std::span<const Var>)> as_var =
      [&](std::span<const Var> v) { return f(v); };
  const auto ad = grad(as_var, x);
  std::vector<R> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const R x0 = probe[i];
    auto central = [&](R step) {
      probe[i] = x0 + step;
      const R up = f(std::span<const R>(probe));
      probe[i] = x0 - step;
      const R down = f(std::span<const R>(probe));
      probe[i] = x0;
      return R((up - down) / (R(2) * step));
    };
    // Richardson step: removes the h^2 term, which otherwise dominates near
    // stationary points.
    const R d1 = central(R(h)), d2 = central(R(h) / 2);
    const double fd = static_cast<double>(R((R(4) * d2 - d1) / R(3)));
    const double err = std::abs(ad[i] - fd) / (std::abs(fd) + 1e-8);
    if (!(err <= worst)) worst = err;  // NaN propagates as worst
  }
  return worst;
}

}  // namespace dnea::ad

namespace Eigen {

template <>
struct NumTraits<dnea::ad::Var> : NumTraits<double> {
  using Real = dnea::ad::Var;
  using NonInteger = dnea::ad::Var;
  using Nested = dnea::ad::Var;
  using Literal = dnea::ad::Var;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<dnea::ad::Var, double, BinaryOp> {
  using ReturnType = dnea::ad::Var;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, dnea::ad::Var, BinaryOp> {
  using ReturnType = dnea::ad::Var;
};

}  // namespace Eigen

#endif  // DNEA_AUTODIFF_HPP_
