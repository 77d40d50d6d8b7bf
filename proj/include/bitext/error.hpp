#pragma once

#include <stdexcept>
#include <string>

namespace bitext {

// Exit-code classes used by the command-line tool: user errors map to 1,
// internal and provider failures to 2.
enum class ErrorKind {
  kInvalidInput,
  kIo,
  kProvider,
  kConflict,
  kNotFound,
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Remote provider failures that may succeed on a later attempt.
  bool retryable() const noexcept { return kind_ == ErrorKind::kProvider; }

 private:
  ErrorKind kind_;
};

inline Error InvalidInput(const std::string& message) {
  return Error(ErrorKind::kInvalidInput, message);
}
inline Error IoError(const std::string& message) {
  return Error(ErrorKind::kIo, message);
}
inline Error ProviderError(const std::string& message) {
  return Error(ErrorKind::kProvider, message);
}

}  // namespace bitext
