#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace medledger {

// Every failure the library reports. The names double as the machine-readable
// API error codes, so each enumerator maps to exactly one wire string.
enum class ErrorCode {
    // codec
    DuplicateKey,
    MalformedEncoding,
    // crypto
    BadSeedLength,
    BadHex,
    // records
    MissingField,
    WrongType,
    InvariantViolation,
    UnknownField,
    BadSaltLength,
    // acl
    ElevationTooLow,
    KeyMismatch,
    UnknownPatient,
    // ledger
    TxIdMismatch,
    UnknownSigner,
    DuplicateId,
    UnknownTarget,
    BadHeight,
    BadLink,
    BadCertificate,
    InvalidTxInBlock,
    // consensus / simnet
    StaleMessage,
    EquivocationDetected,
    InvalidScenario,
    // query
    InvalidRange,
    UnknownBloodGroup,
    // workflows
    UnknownVisit,
    PhoneMismatch,
    NoInsuranceOnFile,
    PermissionDenied,
    UnknownClaim,
    IllegalTransition,
    // blobstore
    TooLarge,
    UnsupportedMediaType,
    NotFound,
    CorruptBlob,
    EmptyBlob,
    // node
    Unauthenticated,
    BadRequest,
    IoError,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> error_code_from_string(std::string_view name);

// Exception carrying a structured error. `subject` names the offending field,
// node or id where one exists; `index`/`cause` are set for InvalidTxInBlock.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string subject = {}, std::string detail = {});

    static Error in_block(std::size_t index, const Error& cause);

    ErrorCode code() const noexcept { return code_; }
    const std::string& subject() const noexcept { return subject_; }
    const std::string& detail() const noexcept { return detail_; }
    std::optional<std::size_t> index() const noexcept { return index_; }
    std::optional<ErrorCode> cause() const noexcept { return cause_; }

private:
    ErrorCode code_;
    std::string subject_;
    std::string detail_;
    std::optional<std::size_t> index_;
    std::optional<ErrorCode> cause_;
};

} // namespace medledger
