#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tempspy {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model or run configuration. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config error in '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Raised when an enrollment step has fewer candidate indicator cells than requested.
class InsufficientCandidatesError : public InsufficientDataError {
 public:
  InsufficientCandidatesError(std::size_t step, double temp_lo, double temp_hi, std::size_t found,
                              std::size_t wanted)
      : InsufficientDataError(
            "only " + std::to_string(found) + " candidate indicator cells between " +
            std::to_string(temp_lo) + " C and " + std::to_string(temp_hi) + " C (step " +
            std::to_string(step) + "), need " + std::to_string(wanted) +
            "; a larger DRAM region or a longer decay time t should be used"),
        step_(step),
        found_(found),
        wanted_(wanted) {}
  std::size_t step() const noexcept { return step_; }
  std::size_t found() const noexcept { return found_; }
  std::size_t wanted() const noexcept { return wanted_; }

 private:
  std::size_t step_;
  std::size_t found_;
  std::size_t wanted_;
};

class UndefinedBerError : public Error {
 public:
  using Error::Error;
};

/// The known-temperature calibration produced no flips.
class DegenerateCalibrationError : public Error {
 public:
  using Error::Error;
};

/// Malformed wire line. `offset()` is the byte offset of the first bad character.
class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error("parse error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace tempspy
