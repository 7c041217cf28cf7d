#pragma once

#include <stdexcept>
#include <string>

namespace hierrec {

/// Base class of every error raised by the library. `kind()` is a stable
/// identifier used by the CLI and the Python bindings.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define HIERREC_DEFINE_ERROR(Name)                                             \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& what) : Error(#Name, what) {}         \
    }

HIERREC_DEFINE_ERROR(OutOfRangeId);
HIERREC_DEFINE_ERROR(OrphanQuestion);
HIERREC_DEFINE_ERROR(EmptyCandidateSet);
HIERREC_DEFINE_ERROR(MalformedRow);
HIERREC_DEFINE_ERROR(StepLimitExceeded);
HIERREC_DEFINE_ERROR(InsufficientData);
HIERREC_DEFINE_ERROR(ElementNotInSet);
HIERREC_DEFINE_ERROR(EmptySet);
HIERREC_DEFINE_ERROR(DimensionMismatch);
HIERREC_DEFINE_ERROR(EmptyActionSet);
HIERREC_DEFINE_ERROR(KTooLarge);
HIERREC_DEFINE_ERROR(AlreadyMastered);
HIERREC_DEFINE_ERROR(DivergenceDetected);
HIERREC_DEFINE_ERROR(CheckpointMismatch);
HIERREC_DEFINE_ERROR(ConfigError);
HIERREC_DEFINE_ERROR(InvalidArgument);

#undef HIERREC_DEFINE_ERROR

}  // namespace hierrec
