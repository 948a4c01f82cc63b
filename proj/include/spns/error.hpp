#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spns {

enum class ErrorCode {
    InvalidArgument,
    Malformed,
    CryptoFailure,
    Io,
    // crypto
    DegenerateHalfKey,
    DecryptionFailure,
    // cells
    BadLength,
    UnknownCommand,
    NonzeroReserved,
    BodyOverflow,
    MissingFragment,
    // nsi
    TooManyHops,
    MalformedUrn,
    // directory
    InvalidDescriptor,
    StaleEpoch,
    InsufficientRans,
    // circuit
    StateError,
    KeyConfirmMismatch,
    CircuitNotEstablished,
    DigestMismatch,
    MalformedInfo,
    ReplayRejected,
    // nodes
    DuplicateLink,
    UnknownNextHop,
    LinkExhaustion,
    EpochMismatch,
    AttestationFailure,
    SingleRanRejected,
    UnknownLink,
    UnknownSession,
    // simnet
    UnknownEndpoint,
    LivelockDetected,
    // harness
    MalformedLog,
    ScenarioFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception type carrying a protocol error code. Every failure the library
/// reports is one of these; callers switch on code() rather than message text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace spns
