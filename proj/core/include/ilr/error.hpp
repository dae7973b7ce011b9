#pragma once

#include <stdexcept>
#include <string>

namespace ilr {

enum class ErrorKind {
  Io,         // file missing, unreadable or unwritable
  Parse,      // malformed text input
  Format,     // malformed binary container
  Config,     // bad configuration or missing required input
  Numeric,    // non-finite loss or value
  Argument,   // violated precondition on an operation argument
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit code for a given error kind: 2 I/O, 3 configuration or
// missing input, 4 numeric failure.
int exit_code_for(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace ilr
