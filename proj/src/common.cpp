#include "orbisect/common.hpp"

namespace orbisect {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonUnitaryGenerator: return "NonUnitaryGenerator";
    case ErrorCode::GroupSizeCapExceeded: return "GroupSizeCapExceeded";
    case ErrorCode::NotASubgroup: return "NotASubgroup";
    case ErrorCode::LatticeNotPreserved: return "LatticeNotPreserved";
    case ErrorCode::BundleNotInvariant: return "BundleNotInvariant";
    case ErrorCode::PointNotInAnyStratum: return "PointNotInAnyStratum";
    case ErrorCode::DegenerateRadius: return "DegenerateRadius";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IncompatibleRegions: return "IncompatibleRegions";
    case ErrorCode::EmptyStratumRegion: return "EmptyStratumRegion";
    case ErrorCode::CenterOutsideDomain: return "CenterOutsideDomain";
    case ErrorCode::ActionDoesNotPreserveDomain: return "ActionDoesNotPreserveDomain";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::NoAdmissibleValue: return "NoAdmissibleValue";
    case ErrorCode::ScheduleInfeasible: return "ScheduleInfeasible";
    case ErrorCode::TransversalityNotAchieved: return "TransversalityNotAchieved";
    case ErrorCode::NewtonDivergence: return "NewtonDivergence";
    case ErrorCode::NotCertified: return "NotCertified";
    case ErrorCode::ResolutionTooCoarse: return "ResolutionTooCoarse";
    case ErrorCode::NoCriticalPointFound: return "NoCriticalPointFound";
    case ErrorCode::DegenerateHessian: return "DegenerateHessian";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingUpstreamArtifact: return "MissingUpstreamArtifact";
  }
  return "Unknown";
}

}  // namespace orbisect
