#pragma once

#include <stdexcept>
#include <string>

namespace relsearch {

enum class ErrorKind {
    // relstore
    MissingTable,
    MissingColumn,
    CutoffViolation,
    ReadOnlyViolation,
    SqlError,
    Timeout,
    // featprog
    JsonError,
    DuplicateName,
    EmptyProgram,
    DuplicateRowId,
    // learner
    ObjectiveMismatch,
    DegenerateInput,
    TransformDomain,
    TrainingError,
    SchemaMismatch,
    // metrics
    SingleClass,
    EmptyInput,
    KeyMismatch,
    NonpositiveBaseline,
    // workspace
    DuplicateTrialId,
    // select
    NoSuccessfulTrial,
    // synthbench
    DegenerateLabels,
    // agent / transport
    PolicyTimeout,
    TransportError,
    // operator input
    ConfigError,
    IoError,
};

const char* to_string(ErrorKind kind);

/// Single exception type for all domain failures; `kind` carries the category.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace relsearch
