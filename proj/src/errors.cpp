#include "rag/errors.hpp"

namespace rag {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NonScalarMetadata: return "NonScalarMetadata";
    case ErrorCode::ReservedMetadataKey: return "ReservedMetadataKey";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::InvalidEncoding: return "InvalidEncoding";
    case ErrorCode::UnsupportedExtension: return "UnsupportedExtension";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::StaleIndex: return "StaleIndex";
    case ErrorCode::CorruptStore: return "CorruptStore";
    case ErrorCode::IncompatibleVersion: return "IncompatibleVersion";
    case ErrorCode::InvalidFilter: return "InvalidFilter";
    case ErrorCode::EmbedderMismatch: return "EmbedderMismatch";
    case ErrorCode::InvalidBudget: return "InvalidBudget";
    case ErrorCode::QueryTooLarge: return "QueryTooLarge";
    case ErrorCode::GenerationTimeout: return "GenerationTimeout";
    case ErrorCode::InvalidName: return "InvalidName";
    case ErrorCode::CorpusExists: return "CorpusExists";
    case ErrorCode::CorpusNotFound: return "CorpusNotFound";
    case ErrorCode::WrongState: return "WrongState";
    case ErrorCode::SessionNotFound: return "SessionNotFound";
    case ErrorCode::CorpusNotReady: return "CorpusNotReady";
    case ErrorCode::JobNotFound: return "JobNotFound";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::EmptyNeedles: return "EmptyNeedles";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message,
             std::optional<std::uint64_t> position)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      position_(position) {}

}  // namespace rag
