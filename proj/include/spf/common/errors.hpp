#pragma once

#include <stdexcept>
#include <string>

namespace spf {

// Root of every error this library throws. Callers that only care about
// "something in spf failed" catch this; everything else is for tests and
// the CLI exit-code mapping.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Backward invoked twice on the same graph, or on a non-scalar loss.
class IndexError : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class InfeasibleRegionError : public GeometryError {
 public:
  using GeometryError::GeometryError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class CryptoParameterError : public Error {
 public:
  using Error::Error;
};

class AuthenticationError : public Error {
 public:
  using Error::Error;
};

class PayloadFormatError : public Error {
 public:
  using Error::Error;
};

class NonceReuseError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

class ConnectionError : public Error {
 public:
  using Error::Error;
};

}  // namespace spf
