#include "ilr/error.hpp"

namespace ilr {

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Io:
      return 2;
    case ErrorKind::Numeric:
      return 4;
    case ErrorKind::Parse:
    case ErrorKind::Format:
    case ErrorKind::Config:
    case ErrorKind::Argument:
      return 3;
  }
  return 1;
}

}  // namespace ilr
