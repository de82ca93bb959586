#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace biaslens {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- corpus ingestion -------------------------------------------------------

enum class RecordErrorKind {
    MalformedRecord,  // unparseable line, missing field, empty label list
    SchemeViolation,  // label outside the scheme, or label count violates the setting
    DuplicateId,
};

struct RecordError {
    std::size_t line = 0;  // 1-based line number in the source file
    RecordErrorKind kind = RecordErrorKind::MalformedRecord;
    std::string message;
};

// Aggregates every rejected record of one load attempt.
class CorpusLoadError : public Error {
public:
    CorpusLoadError(std::string summary, std::vector<RecordError> records)
        : Error(std::move(summary)), records_(std::move(records)) {}

    const std::vector<RecordError>& records() const { return records_; }

private:
    std::vector<RecordError> records_;
};

class UnmappedLabelError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// --- topic discovery --------------------------------------------------------

class CorpusTooSmallError : public Error {
public:
    using Error::Error;
};

class UnknownTopicError : public Error {
public:
    using Error::Error;
};

class OutlierTopicHasNoWordsError : public Error {
public:
    using Error::Error;
};

class UnknownInstanceError : public Error {
public:
    using Error::Error;
};

// --- association analysis ---------------------------------------------------

class MissingTopicAssignmentError : public Error {
public:
    using Error::Error;
};

class EmptyTableError : public Error {
public:
    using Error::Error;
};

// --- learner ----------------------------------------------------------------

class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

class NonFiniteLossError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class LengthMismatchError : public Error {
public:
    using Error::Error;
};

// --- experiment harness -----------------------------------------------------

class TooFewTopicsError : public Error {
public:
    using Error::Error;
};

class FoldMismatchError : public Error {
public:
    using Error::Error;
};

// --- synthetic benchmark ----------------------------------------------------

class InvalidSpecError : public Error {
public:
    using Error::Error;
};

// --- pipeline ---------------------------------------------------------------

class ConfigError : public Error {
public:
    using Error::Error;
};

// Propagates a stage failure with the stage name attached.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& msg)
        : Error("[" + stage + "] " + msg), stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

}  // namespace biaslens
