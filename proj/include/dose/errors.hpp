#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dose {

// Broad failure classes; the CLI maps each to an exit code.
enum class ErrorClass {
  Config,      // bad parameters or budgets
  Io,          // unreadable/unwritable files, malformed input files
  Bridge,      // scoring service unreachable or misbehaving
  Degenerate,  // data that cannot support the requested computation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), class_(cls) {}
  [[nodiscard]] ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(std::string id)
      : Error(ErrorClass::Io, "duplicate id: " + id), id_(std::move(id)) {}
  [[nodiscard]] const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class NonFiniteScore : public Error {
 public:
  NonFiniteScore(std::string id, std::string axis)
      : Error(ErrorClass::Io, "non-finite " + axis + " score for id: " + id),
        id_(std::move(id)),
        axis_(std::move(axis)) {}
  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] const std::string& axis() const noexcept { return axis_; }

 private:
  std::string id_;
  std::string axis_;
};

class EmptyDataset : public Error {
 public:
  EmptyDataset() : Error(ErrorClass::Degenerate, "empty dataset") {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line_no, const std::string& detail)
      : Error(ErrorClass::Io, "parse error at line " + std::to_string(line_no) + ": " + detail),
        line_no_(line_no) {}
  [[nodiscard]] std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class MissingField : public Error {
 public:
  MissingField(std::size_t line_no, std::string field)
      : Error(ErrorClass::Io,
              "missing field '" + field + "' at line " + std::to_string(line_no)),
        line_no_(line_no),
        field_(std::move(field)) {}
  [[nodiscard]] std::size_t line_no() const noexcept { return line_no_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_no_;
  std::string field_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorClass::Io, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorClass::Config, what) {}
};

class NonPositiveBandwidth : public Error {
 public:
  explicit NonPositiveBandwidth(double h)
      : Error(ErrorClass::Config, "bandwidth must be > 0, got " + std::to_string(h)) {}
};

class DegenerateData : public Error {
 public:
  explicit DegenerateData(const std::string& what) : Error(ErrorClass::Degenerate, what) {}
};

class DegenerateSigma : public Error {
 public:
  DegenerateSigma() : Error(ErrorClass::Degenerate, "sigma_data is zero; Gaussian plan undefined") {}
};

class BudgetTooLarge : public Error {
 public:
  BudgetTooLarge(std::size_t requested, std::size_t available)
      : Error(ErrorClass::Config, "budget " + std::to_string(requested) + " exceeds " +
                                      std::to_string(available) + " available items") {}
};

class InsufficientSupport : public Error {
 public:
  InsufficientSupport(std::size_t requested, std::size_t positive)
      : Error(ErrorClass::Degenerate, "requested " + std::to_string(requested) +
                                          " items but only " + std::to_string(positive) +
                                          " have positive weight") {}
};

class BridgeUnavailable : public Error {
 public:
  explicit BridgeUnavailable(const std::string& what)
      : Error(ErrorClass::Bridge, "scoring bridge unavailable: " + what) {}
};

class InvalidSpec : public Error {
 public:
  explicit InvalidSpec(const std::string& what) : Error(ErrorClass::Config, "invalid corpus spec: " + what) {}
};

}  // namespace dose
