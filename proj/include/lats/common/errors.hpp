#pragma once

#include <stdexcept>
#include <string>

namespace lats {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// net-model
class SchemaError : public Error {
 public:
  using Error::Error;
};
class TopologyError : public Error {
 public:
  using Error::Error;
};
class VersionError : public Error {
 public:
  using Error::Error;
};
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// microsim / obs-encoder
class PhaseUnavailable : public Error {
 public:
  using Error::Error;
};
class UnknownIntersection : public Error {
 public:
  using Error::Error;
};

// numerics
class ShapeError : public Error {
 public:
  using Error::Error;
};

// teacher-student
class ProviderError : public Error {
 public:
  using Error::Error;
};

// trainer
class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(const std::string& what, std::string dump_path)
      : Error(what), dump_path_(std::move(dump_path)) {}
  const std::string& dump_path() const { return dump_path_; }

 private:
  std::string dump_path_;
};

}  // namespace lats
