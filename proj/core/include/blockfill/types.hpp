#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace blockfill {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed arguments: out-of-range ranks, non-finite entries, shape mismatches.
class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what) : Error(what) {}
};

/// A matrix required to be SPD has an eigenvalue at or below the floor.
class IllConditioned : public Error {
 public:
  explicit IllConditioned(const std::string& what) : Error(what) {}
};

/// No rank satisfies the separated-rank conditions. Carries the spectrum
/// that was examined so callers can report it.
class NoAdmissibleRank : public Error {
 public:
  NoAdmissibleRank(const std::string& what, Vector spectrum)
      : Error(what), spectrum_(std::move(spectrum)) {}
  const Vector& spectrum() const { return spectrum_; }

 private:
  Vector spectrum_;
};

/// An embedding pair whose weighted covariance fails the full-rank floor.
class RankDeficient : public Error {
 public:
  explicit RankDeficient(const std::string& what) : Error(what) {}
};

/// Default tolerances: relative for identity checks, absolute for zero checks.
struct Tolerances {
  double rel = 1e-8;
  double abs = 1e-10;
};

/// Smallest admissible eigenvalue for SPD inputs.
inline constexpr double kEigFloor = 1e-12;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInput(msg);
}

inline void require_finite(const Matrix& m, const std::string& name) {
  if (!m.allFinite()) throw InvalidInput(name + ": non-finite entries");
}

}  // namespace blockfill
