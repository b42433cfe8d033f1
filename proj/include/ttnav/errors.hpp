#pragma once

#include <stdexcept>
#include <string>

namespace ttnav {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegeneratePolygon : Error { using Error::Error; };
struct NonConvex : Error { using Error::Error; };
struct InvalidPenalty : Error { using Error::Error; };
struct EmptyCloud : Error { using Error::Error; };
struct SteeringSingularity : Error { using Error::Error; };
struct SolverFailure : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct CorruptWeights : Error { using Error::Error; };
struct DegenerateWeights : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct EncoderMissing : Error { using Error::Error; };

}  // namespace ttnav
