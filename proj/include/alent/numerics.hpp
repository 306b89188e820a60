#pragma once

// Log-domain scalars and the entropy (expectation) semiring.
//
// Path weights are kept as natural logs. The accumulator sum(w * log w) can
// have either sign for unnormalized weights, so it is stored as a sign plus
// the log of its magnitude ("log-of-log" form). Nothing here underflows for
// long lattices, and every operation is total over -inf / zero inputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "alent/error.hpp"

namespace alent {

/// Natural log of a probability or path weight. kNegInf encodes zero.
using LogProb = double;

inline constexpr LogProb kNegInf = -std::numeric_limits<double>::infinity();

// Tolerances used throughout the library and its test suites.
inline constexpr double kSemiringAxiomTol = 1e-10;
inline constexpr double kDistributivityTol = 1e-9;
inline constexpr double kOracleTol = 1e-8;
inline constexpr double kEntropyClamp = 1e-9;
inline constexpr double kNormalizationTol = 1e-9;
inline constexpr double kSlvAssocTol = 1e-12;

/// log(e^x + e^y); kNegInf is the identity.
inline LogProb logprob_add(LogProb x, LogProb y) noexcept {
  if (x == kNegInf) return y;
  if (y == kNegInf) return x;
  const double hi = std::max(x, y);
  const double lo = std::min(x, y);
  return hi + std::log1p(std::exp(lo - hi));
}

/// A real number stored as sign and log magnitude. sign == 0 iff the value is
/// exactly zero, in which case log_mag is kNegInf.
struct SignedLogValue {
  std::int8_t sign = 0;
  double log_mag = kNegInf;

  static constexpr SignedLogValue zero() noexcept { return {}; }

  static SignedLogValue make(int sign, double log_mag) noexcept {
    if (sign == 0 || log_mag == kNegInf || std::isnan(log_mag)) return zero();
    return {static_cast<std::int8_t>(sign > 0 ? 1 : -1), log_mag};
  }

  /// Positive value whose log is `lp` (zero when lp is kNegInf).
  static SignedLogValue from_log(LogProb lp) noexcept { return make(1, lp); }

  static SignedLogValue from_real(double x) noexcept {
    if (x == 0.0 || std::isnan(x)) return zero();
    return make(x > 0 ? 1 : -1, std::log(std::fabs(x)));
  }

  double to_real() const noexcept {
    return sign == 0 ? 0.0 : sign * std::exp(log_mag);
  }

  bool is_zero() const noexcept { return sign == 0; }

  friend bool operator==(const SignedLogValue&, const SignedLogValue&) = default;
};

inline SignedLogValue slv_add(SignedLogValue x, SignedLogValue y) noexcept {
  if (x.is_zero()) return y;
  if (y.is_zero()) return x;
  if (x.log_mag < y.log_mag) std::swap(x, y);
  // |x| >= |y| from here on.
  const double diff = y.log_mag - x.log_mag;
  if (x.sign == y.sign) {
    return SignedLogValue::make(x.sign, x.log_mag + std::log1p(std::exp(diff)));
  }
  if (diff == 0.0) return SignedLogValue::zero();
  return SignedLogValue::make(x.sign, x.log_mag + std::log1p(-std::exp(diff)));
}

inline SignedLogValue slv_neg(SignedLogValue x) noexcept {
  return SignedLogValue::make(-x.sign, x.log_mag);
}

inline SignedLogValue slv_mul(SignedLogValue x, SignedLogValue y) noexcept {
  if (x.is_zero() || y.is_zero()) return SignedLogValue::zero();
  return SignedLogValue::make(x.sign * y.sign, x.log_mag + y.log_mag);
}

/// Element of the entropy semiring: alpha = sum of path weights (log domain),
/// a = sum over paths of w * log w.
struct EntropyWeight {
  LogProb alpha = kNegInf;
  SignedLogValue a{};

  /// Additive identity (no paths).
  static constexpr EntropyWeight zero() noexcept { return {}; }
  /// Multiplicative identity: the empty path, weight 1.
  static constexpr EntropyWeight one() noexcept { return {0.0, {}}; }
};

/// Lifts a single arc weight w = exp(omega_log) to (w, w log w). w == 1 and
/// w == 0 both give an exact zero accumulator.
inline EntropyWeight ew_arc(LogProb omega_log) noexcept {
  if (omega_log == kNegInf) return EntropyWeight::zero();
  if (omega_log == 0.0) return EntropyWeight::one();
  const int sign = omega_log > 0 ? 1 : -1;
  return {omega_log,
          SignedLogValue::make(sign, std::log(std::fabs(omega_log)) + omega_log)};
}

inline EntropyWeight ew_plus(const EntropyWeight& x, const EntropyWeight& y) noexcept {
  return {logprob_add(x.alpha, y.alpha), slv_add(x.a, y.a)};
}

inline EntropyWeight ew_times(const EntropyWeight& x, const EntropyWeight& y) noexcept {
  if (x.alpha == kNegInf || y.alpha == kNegInf) return EntropyWeight::zero();
  const SignedLogValue cross =
      slv_add(slv_mul(SignedLogValue::from_log(x.alpha), y.a),
              slv_mul(SignedLogValue::from_log(y.alpha), x.a));
  return {x.alpha + y.alpha, cross};
}

/// a / alpha as a plain real: the expected path log-weight.
inline double ew_mean_log_weight(const EntropyWeight& w) {
  if (w.alpha == kNegInf) throw Error(ErrorCode::EmptyLattice, "alpha is zero");
  if (w.a.is_zero()) return 0.0;
  return w.a.sign * std::exp(w.a.log_mag - w.alpha);
}

/// Shannon entropy of the normalized path distribution: H = log alpha - a/alpha.
/// Round-off down to -kEntropyClamp is clamped to zero.
inline double ew_entropy(const EntropyWeight& w) {
  if (w.alpha == kNegInf) throw Error(ErrorCode::EmptyLattice, "no paths carry weight");
  const double h = w.alpha - ew_mean_log_weight(w);
  if (h < 0.0 && h >= -kEntropyClamp) return 0.0;
  return h;
}

/// log C(n, k) via lgamma; kNegInf when k > n.
inline double log_binomial(double n, double k) {
  if (k < 0 || k > n) return kNegInf;
  return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

}  // namespace alent
