#pragma once

#include <stdexcept>
#include <string>

namespace scd {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind : int {
    Usage = 2,
    Validation = 3,
    Io = 4,
    Numeric = 5,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

  private:
    ErrorKind kind_;
};

class UsageError : public Error {
  public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class ValidationError : public Error {
  public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class IoError : public Error {
  public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class NumericError : public Error {
  public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

class ShapeError : public ValidationError {
  public:
    explicit ShapeError(const std::string& what) : ValidationError("shape mismatch: " + what) {}
};

// Binary container failures (SCDF, SCDM). Each cause is distinguishable.
enum class FormatFault { BadMagic, BadVersion, Truncated, NonFinite, BadHeader };

class FormatError : public ValidationError {
  public:
    FormatError(FormatFault fault, const std::string& what)
        : ValidationError(what), fault_(fault) {}
    FormatFault fault() const noexcept { return fault_; }

  private:
    FormatFault fault_;
};

}  // namespace scd
