#pragma once

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace selconv {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file header, bad magic, unparseable text.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File body disagrees with its own header.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Data violates a domain invariant (non-finite values, dangling ids, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad hyperparameter or not enough data for the requested fit.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition (dimension mismatch, out-of-range coordinate).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Input has no usable signal (e.g. every embedded vector is zero).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

using WarningHandler = std::function<void(std::string_view)>;

inline WarningHandler& warning_handler() {
  static WarningHandler handler = [](std::string_view msg) {
    std::cerr << "warning: " << msg << '\n';
  };
  return handler;
}

inline void warn(std::string_view msg) {
  if (auto& h = warning_handler()) h(msg);
}

// Swaps the process-wide warning handler for the lifetime of the guard.
class ScopedWarningHandler {
 public:
  explicit ScopedWarningHandler(WarningHandler h)
      : saved_(std::exchange(warning_handler(), std::move(h))) {}
  ~ScopedWarningHandler() { warning_handler() = std::move(saved_); }
  ScopedWarningHandler(const ScopedWarningHandler&) = delete;
  ScopedWarningHandler& operator=(const ScopedWarningHandler&) = delete;

 private:
  WarningHandler saved_;
};

}  // namespace selconv
