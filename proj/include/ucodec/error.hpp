#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ucodec {

enum class ErrorKind {
    Configuration,
    InputTooShort,
    NumericDegeneracy,
    Index,
    Usage,
    Alignment,
    Format,
    CorruptStream,
    SequenceLength,
    TrainingDivergence,
    Dataset,
    Compatibility,
    UndefinedMetric,
    Io,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this one exception type; callers
// branch on kind() rather than on a class hierarchy.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) {
        throw Error(kind, message);
    }
}

}  // namespace ucodec
