#include "relsearch/error.hpp"

namespace relsearch {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingTable: return "MissingTable";
        case ErrorKind::MissingColumn: return "MissingColumn";
        case ErrorKind::CutoffViolation: return "CutoffViolation";
        case ErrorKind::ReadOnlyViolation: return "ReadOnlyViolation";
        case ErrorKind::SqlError: return "SqlError";
        case ErrorKind::Timeout: return "Timeout";
        case ErrorKind::JsonError: return "JsonError";
        case ErrorKind::DuplicateName: return "DuplicateName";
        case ErrorKind::EmptyProgram: return "EmptyProgram";
        case ErrorKind::DuplicateRowId: return "DuplicateRowId";
        case ErrorKind::ObjectiveMismatch: return "ObjectiveMismatch";
        case ErrorKind::DegenerateInput: return "DegenerateInput";
        case ErrorKind::TransformDomain: return "TransformDomain";
        case ErrorKind::TrainingError: return "TrainingError";
        case ErrorKind::SchemaMismatch: return "SchemaMismatch";
        case ErrorKind::SingleClass: return "SingleClass";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::KeyMismatch: return "KeyMismatch";
        case ErrorKind::NonpositiveBaseline: return "NonpositiveBaseline";
        case ErrorKind::DuplicateTrialId: return "DuplicateTrialId";
        case ErrorKind::NoSuccessfulTrial: return "NoSuccessfulTrial";
        case ErrorKind::DegenerateLabels: return "DegenerateLabels";
        case ErrorKind::PolicyTimeout: return "PolicyTimeout";
        case ErrorKind::TransportError: return "TransportError";
        case ErrorKind::ConfigError: return "ConfigError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Error";
}

}  // namespace relsearch
