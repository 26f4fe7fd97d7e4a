#include "medledger/error.hpp"

#include <array>
#include <utility>

namespace medledger {
namespace {

constexpr std::array kNames = {
    std::pair{ErrorCode::DuplicateKey, "DuplicateKey"},
    std::pair{ErrorCode::MalformedEncoding, "MalformedEncoding"},
    std::pair{ErrorCode::BadSeedLength, "BadSeedLength"},
    std::pair{ErrorCode::BadHex, "BadHex"},
    std::pair{ErrorCode::MissingField, "MissingField"},
    std::pair{ErrorCode::WrongType, "WrongType"},
    std::pair{ErrorCode::InvariantViolation, "InvariantViolation"},
    std::pair{ErrorCode::UnknownField, "UnknownField"},
    std::pair{ErrorCode::BadSaltLength, "BadSaltLength"},
    std::pair{ErrorCode::ElevationTooLow, "ElevationTooLow"},
    std::pair{ErrorCode::KeyMismatch, "KeyMismatch"},
    std::pair{ErrorCode::UnknownPatient, "UnknownPatient"},
    std::pair{ErrorCode::TxIdMismatch, "TxIdMismatch"},
    std::pair{ErrorCode::UnknownSigner, "UnknownSigner"},
    std::pair{ErrorCode::DuplicateId, "DuplicateId"},
    std::pair{ErrorCode::UnknownTarget, "UnknownTarget"},
    std::pair{ErrorCode::BadHeight, "BadHeight"},
    std::pair{ErrorCode::BadLink, "BadLink"},
    std::pair{ErrorCode::BadCertificate, "BadCertificate"},
    std::pair{ErrorCode::InvalidTxInBlock, "InvalidTxInBlock"},
    std::pair{ErrorCode::StaleMessage, "StaleMessage"},
    std::pair{ErrorCode::EquivocationDetected, "EquivocationDetected"},
    std::pair{ErrorCode::InvalidScenario, "InvalidScenario"},
    std::pair{ErrorCode::InvalidRange, "InvalidRange"},
    std::pair{ErrorCode::UnknownBloodGroup, "UnknownBloodGroup"},
    std::pair{ErrorCode::UnknownVisit, "UnknownVisit"},
    std::pair{ErrorCode::PhoneMismatch, "PhoneMismatch"},
    std::pair{ErrorCode::NoInsuranceOnFile, "NoInsuranceOnFile"},
    std::pair{ErrorCode::PermissionDenied, "PermissionDenied"},
    std::pair{ErrorCode::UnknownClaim, "UnknownClaim"},
    std::pair{ErrorCode::IllegalTransition, "IllegalTransition"},
    std::pair{ErrorCode::TooLarge, "TooLarge"},
    std::pair{ErrorCode::UnsupportedMediaType, "UnsupportedMediaType"},
    std::pair{ErrorCode::NotFound, "NotFound"},
    std::pair{ErrorCode::CorruptBlob, "CorruptBlob"},
    std::pair{ErrorCode::EmptyBlob, "EmptyBlob"},
    std::pair{ErrorCode::Unauthenticated, "Unauthenticated"},
    std::pair{ErrorCode::BadRequest, "BadRequest"},
    std::pair{ErrorCode::IoError, "IoError"},
};

std::string compose(ErrorCode code, const std::string& subject, const std::string& detail) {
    std::string msg{to_string(code)};
    if (!subject.empty()) msg += "(" + subject + ")";
    if (!detail.empty()) msg += ": " + detail;
    return msg;
}

} // namespace

std::string_view to_string(ErrorCode code) {
    for (const auto& [c, name] : kNames)
        if (c == code) return name;
    return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) {
    for (const auto& [c, n] : kNames)
        if (name == n) return c;
    return std::nullopt;
}

Error::Error(ErrorCode code, std::string subject, std::string detail)
    : std::runtime_error(compose(code, subject, detail)),
      code_(code),
      subject_(std::move(subject)),
      detail_(std::move(detail)) {}

Error Error::in_block(std::size_t index, const Error& cause) {
    Error e(ErrorCode::InvalidTxInBlock, std::to_string(index), cause.what());
    e.index_ = index;
    e.cause_ = cause.code();
    return e;
}

} // namespace medledger
