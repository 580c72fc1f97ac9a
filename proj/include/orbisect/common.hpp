#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace orbisect {

using Cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorCode {
  NonUnitaryGenerator,
  GroupSizeCapExceeded,
  NotASubgroup,
  LatticeNotPreserved,
  BundleNotInvariant,
  PointNotInAnyStratum,
  DegenerateRadius,
  DimensionMismatch,
  IncompatibleRegions,
  EmptyStratumRegion,
  CenterOutsideDomain,
  ActionDoesNotPreserveDomain,
  EmptyRegion,
  NoAdmissibleValue,
  ScheduleInfeasible,
  TransversalityNotAchieved,
  NewtonDivergence,
  NotCertified,
  ResolutionTooCoarse,
  NoCriticalPointFound,
  DegenerateHessian,
  ConfigInvalid,
  MissingUpstreamArtifact,
};

const char* to_string(ErrorCode code);

/// Domain error carrying a machine-readable code and the module it came from.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& what)
      : std::runtime_error(module + ": " + to_string(code) + ": " + what),
        code_(code),
        module_(std::move(module)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

// Real coordinates on C^n are interleaved: (x_1, y_1, ..., x_n, y_n).
inline RVector to_real(const CVector& z) {
  RVector r(2 * z.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    r(2 * j) = z(j).real();
    r(2 * j + 1) = z(j).imag();
  }
  return r;
}

inline CVector to_complex(const RVector& r) {
  CVector z(r.size() / 2);
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = Cplx(r(2 * j), r(2 * j + 1));
  return z;
}

/// Real 2n x 2n form of a complex n x n matrix in interleaved coordinates.
inline RMatrix realify(const CMatrix& u) {
  const auto n = u.rows();
  RMatrix m(2 * n, 2 * n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      const Cplx v = u(a, b);
      m(2 * a, 2 * b) = v.real();
      m(2 * a, 2 * b + 1) = -v.imag();
      m(2 * a + 1, 2 * b) = v.imag();
      m(2 * a + 1, 2 * b + 1) = v.real();
    }
  return m;
}

}  // namespace orbisect
