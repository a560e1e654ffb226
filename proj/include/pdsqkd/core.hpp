#pragma once

#include <stdexcept>
#include <string>

namespace pdsqkd {

/// Photon-number sums over emitted n are cut at this order by default.
/// Valid for mu <= 2, where the Poisson tail beyond 60 is ~1e-68.
inline constexpr int kDefaultTruncation = 60;

/// A truncated sum is accepted only if the neglected tail mass is below this.
inline constexpr double kTailBound = 1e-15;

/// Numerical tolerance for the PNS balance inequality.
inline constexpr double kPnsTolerance = 1e-12;

class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoRootError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PresetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Result of a quantity whose defining formula can leave its physical range.
/// `clamped` records that the raw value was pulled back to the boundary.
struct ClampedValue {
  double value;
  bool clamped;
};

namespace detail {

inline void check_domain(bool cond, const std::string& what) {
  if (!cond) throw std::domain_error(what);
}

}  // namespace detail

}  // namespace pdsqkd
