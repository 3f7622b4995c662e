#pragma once

// Scalar injection functions of the generalized super-twisting algorithm.
//
//   phi1(z) = mu1 |z|^{1/2} sign(z) + mu2 z
//   phi2(z) = mu1^2/2 sign(z) + 3/2 mu1 mu2 |z|^{1/2} sign(z) + mu2^2 z
//
// phi2 = phi1' * phi1 wherever phi1' exists. With mu1 = 0 both collapse to
// the linear high-gain injections mu2 z and mu2^2 z.

#include <cmath>

#include "gsto/errors.hpp"

namespace gsto {

struct MuPair {
  double mu1 = 0.0;  // |z|^{1/2} gain
  double mu2 = 0.0;  // linear gain

  /// True when the square-root term is absent (high-gain degeneration).
  constexpr bool is_hgo() const noexcept { return mu1 == 0.0; }
};

/// Throws DomainError unless both gains are finite and nonnegative.
inline void validate(const MuPair& mu) {
  if (!std::isfinite(mu.mu1) || !std::isfinite(mu.mu2) || mu.mu1 < 0.0 || mu.mu2 < 0.0) {
    throw DomainError("MuPair requires finite mu1 >= 0 and mu2 >= 0");
  }
}

namespace detail {
inline void require_finite(double z, const char* fn) {
  if (!std::isfinite(z)) throw DomainError(std::string(fn) + ": non-finite argument");
}
}  // namespace detail

/// Single-valued selection of the Filippov sign: sign(0) = 0.
inline int sign(double z) {
  detail::require_finite(z, "sign");
  return (z > 0.0) - (z < 0.0);
}

inline double phi1(double z, const MuPair& mu) {
  detail::require_finite(z, "phi1");
  const double s = sign(z);
  return mu.mu1 * std::sqrt(std::abs(z)) * s + mu.mu2 * z;
}

/// Derivative of phi1 away from the origin. Throws SingularityError at z = 0.
inline double phi1_prime(double z, const MuPair& mu) {
  detail::require_finite(z, "phi1_prime");
  if (z == 0.0) throw SingularityError("phi1_prime: singular at z = 0");
  return 0.5 * mu.mu1 / std::sqrt(std::abs(z)) + mu.mu2;
}

/// Diagnostic variant of phi1_prime that clamps |z| from below instead of throwing.
inline constexpr double kPhiPrimeClamp = 1e-12;
inline double phi1_prime_clamped(double z, const MuPair& mu, double clamp = kPhiPrimeClamp) {
  detail::require_finite(z, "phi1_prime_clamped");
  const double az = std::abs(z) < clamp ? clamp : std::abs(z);
  return 0.5 * mu.mu1 / std::sqrt(az) + mu.mu2;
}

inline double phi2(double z, const MuPair& mu) {
  detail::require_finite(z, "phi2");
  const double s = sign(z);
  const double r = std::sqrt(std::abs(z));
  return 0.5 * mu.mu1 * mu.mu1 * s + 1.5 * mu.mu1 * mu.mu2 * r * s + mu.mu2 * mu.mu2 * z;
}

}  // namespace gsto
