#pragma once

#include <stdexcept>
#include <string>

namespace wlp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid system configuration (non-positive sizes, SNR or noise power).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// The requested precoder does not exist for this channel (rank bound or
/// numerically singular Gram matrix).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A user whose detector row or channel row vanished.
class DegenerateUserError : public Error {
 public:
  using Error::Error;
};

/// Uplink/downlink power transfer broke down (singular system or negative
/// powers).
class DualityInfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Polynomial order above the supported cap or moment matrix too
/// ill-conditioned to solve.
class OrderTooHighError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a closed-form expression.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace wlp
