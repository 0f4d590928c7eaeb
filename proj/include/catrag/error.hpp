#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace catrag {

enum class ErrorCode {
  IoError,
  DuplicateDocument,
  EmptyCorpus,
  EmptyDocument,
  InvalidChunking,
  InvalidDictionary,
  EmptyText,
  DimMismatch,
  ZeroVector,
  ProviderUnavailable,
  ProviderContract,
  PersistenceError,
  EmptyTraining,
  DegenerateLabels,
  ModelVersionError,
  RelationParse,
  GenerationUnavailable,
  ChunkReattachment,
  UnknownChunk,
  ProvenanceViolation,
  GraphIntegrityError,
  EmptyQuery,
  EmptyEval,
  SplitInvalid,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the engine carries one of the codes above; the CLI
// maps them to exit codes and the service to HTTP statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace catrag
