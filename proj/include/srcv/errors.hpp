#pragma once

#include <stdexcept>
#include <string>

namespace srcv {

enum class ErrorKind {
  Shape,
  NonFinite,
  Config,
  TokenizationEmpty,
  TapeEmpty,
  Index,
  NonFiniteGradient,
  NonFiniteLoss,
  DatasetTooSmall,
  MissingAnnotation,
  EmptyDataset,
  EmptyMatrix,
  Parse,
  DuplicateId,
  BadMagic,
  VersionMismatch,
  TruncatedPayload,
  Io,
  Incompatible,
};

const char* to_string(ErrorKind kind) noexcept;

// All library failures surface as srcv::Error; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace srcv
