#pragma once

#include <stdexcept>

namespace hnplan {

inline constexpr int kHorizonSteps = 8;             // waypoints per planned trajectory
inline constexpr double kWaypointDt = 0.5;          // seconds between waypoints
inline constexpr double kSimTick = 0.1;             // internal simulation tick, seconds
inline constexpr int kSubTicksPerStep = 5;          // kWaypointDt / kSimTick
inline constexpr int kDiffDim = 4 * kHorizonSteps;  // flattened differential width

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class DegenerateHeading : public Error {
 public:
  using Error::Error;
};
class StandardizationMismatch : public Error {
 public:
  using Error::Error;
};
class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};
class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};
class ExpertSynthesisFailed : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hnplan
