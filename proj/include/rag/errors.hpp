#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rag {

enum class ErrorCode {
  // ingest
  MalformedLine,
  DuplicateId,
  NonScalarMetadata,
  ReservedMetadataKey,
  FileNotFound,
  InvalidEncoding,
  UnsupportedExtension,
  // chunker / embed
  InvalidParams,
  EmptyText,
  BackendUnavailable,
  DimensionMismatch,
  // vector_store
  LengthMismatch,
  EmptyStore,
  StaleIndex,
  CorruptStore,
  IncompatibleVersion,
  InvalidFilter,
  // rag_engine
  EmbedderMismatch,
  InvalidBudget,
  QueryTooLarge,
  GenerationTimeout,
  // service
  InvalidName,
  CorpusExists,
  CorpusNotFound,
  WrongState,
  SessionNotFound,
  CorpusNotReady,
  JobNotFound,
  Unauthorized,
  BadRequest,
  // eval_harness
  InvalidCounts,
  EmptyNeedles,
  InvalidConfig,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library. `position()` carries the line
/// number, byte offset or list index where the error names one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::uint64_t> position = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::uint64_t> position() const noexcept { return position_; }

 private:
  ErrorCode code_;
  std::optional<std::uint64_t> position_;
};

}  // namespace rag
