#pragma once

#include <stdexcept>
#include <string>

namespace icelut {

enum class ErrorCode {
  IoFailure,
  UnsupportedFormat,
  CorruptFile,
  InvalidBins,
  DimensionMismatch,
  UnsupportedGroupLength,
  BadMagic,
  VersionMismatch,
  ChecksumMismatch,
  TooSmall,
  EmptyDataset,
  InvalidConfig,
};

const char* to_string(ErrorCode code);

// Single exception type carrying a machine-checkable code. The CLI maps
// codes onto exit statuses; tests assert on the code, not the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace icelut
