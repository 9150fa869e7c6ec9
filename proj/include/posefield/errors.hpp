#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace posefield {

// Root of the library's exception hierarchy. Everything thrown on purpose
// derives from this, so callers can catch posefield::Error and map it to an
// exit code without enumerating the concrete types.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument/shape problems.
struct DimensionMismatch : Error { using Error::Error; };
struct InvalidParams : Error { using Error::Error; };

// SO(3) domain errors.
struct NotARotation : Error { using Error::Error; };
struct NearPiSingularity : Error { using Error::Error; };

// Robot description problems.
struct ParseError : Error { using Error::Error; };
struct TopologyError : Error { using Error::Error; };
struct LimitError : Error { using Error::Error; };

// Corpus construction and queries.
struct EmptyCorpus : Error { using Error::Error; };
struct TooFewRows : Error { using Error::Error; };
struct CorpusTooSmall : Error { using Error::Error; };

// Row/joint coordinates of the offending entry, when known.
struct LimitViolation : Error {
  LimitViolation(const std::string& what, std::ptrdiff_t row_, std::ptrdiff_t joint_)
      : Error(what), row(row_), joint(joint_) {}
  std::ptrdiff_t row = -1;
  std::ptrdiff_t joint = -1;
};

// Field construction and training.
struct ArchMismatch : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct DivergedLoss : Error { using Error::Error; };
struct NonFiniteParameters : Error { using Error::Error; };

// Persistence.
struct IoError : Error { using Error::Error; };
struct FormatVersionError : Error { using Error::Error; };
struct RobotMismatch : Error { using Error::Error; };

// Trajectory tooling and IK.
struct EmptyTrajectory : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct BadTargetIndex : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };

}  // namespace posefield
