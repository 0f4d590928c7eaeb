#include "catrag/error.hpp"

namespace catrag {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DuplicateDocument: return "DuplicateDocument";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::InvalidChunking: return "InvalidChunking";
    case ErrorCode::InvalidDictionary: return "InvalidDictionary";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::ProviderContract: return "ProviderContract";
    case ErrorCode::PersistenceError: return "PersistenceError";
    case ErrorCode::EmptyTraining: return "EmptyTraining";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::ModelVersionError: return "ModelVersionError";
    case ErrorCode::RelationParse: return "RelationParse";
    case ErrorCode::GenerationUnavailable: return "GenerationUnavailable";
    case ErrorCode::ChunkReattachment: return "ChunkReattachment";
    case ErrorCode::UnknownChunk: return "UnknownChunk";
    case ErrorCode::ProvenanceViolation: return "ProvenanceViolation";
    case ErrorCode::GraphIntegrityError: return "GraphIntegrityError";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::EmptyEval: return "EmptyEval";
    case ErrorCode::SplitInvalid: return "SplitInvalid";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace catrag
