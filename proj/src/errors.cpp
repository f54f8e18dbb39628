#include "srcv/errors.hpp"

namespace srcv {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Shape: return "ShapeError";
    case ErrorKind::NonFinite: return "NonFiniteValue";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::TokenizationEmpty: return "TokenizationEmpty";
    case ErrorKind::TapeEmpty: return "TapeEmpty";
    case ErrorKind::Index: return "IndexError";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::DatasetTooSmall: return "DatasetTooSmall";
    case ErrorKind::MissingAnnotation: return "MissingAnnotation";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::TruncatedPayload: return "TruncatedPayload";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Incompatible: return "Incompatible";
  }
  return "Error";
}

}  // namespace srcv
