#pragma once

#include <stdexcept>
#include <string>

namespace lobsurv {

// Failure categories map one-to-one onto CLI exit codes (1 usage, 2 data, 3 numeric).
enum class ErrorKind { Usage = 1, Data = 2, Numeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

// Malformed input file; carries the 1-based row and the offending field name.
class ParseError : public DataError {
 public:
  ParseError(std::size_t row, std::string field, const std::string& detail)
      : DataError("row " + std::to_string(row) + ", field '" + field + "': " + detail),
        row_(row),
        field_(std::move(field)) {}
  std::size_t row() const noexcept { return row_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t row_;
  std::string field_;
};

}  // namespace lobsurv
