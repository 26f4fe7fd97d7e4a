#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "medledger/acl.hpp"
#include "medledger/codec.hpp"
#include "medledger/crypto.hpp"

namespace medledger {

inline constexpr std::array<std::string_view, 8> kBloodGroups = {"A+", "A-", "B+", "B-", "AB+", "AB-", "O+", "O-"};

bool is_valid_phone(std::string_view phone);
bool is_valid_blood_group(std::string_view group);

struct PatientRecord {
    std::string db_identifier;
    std::string name;
    std::string gender;
    std::int64_t age = 0;
    Timestamp dob;
    std::string phone;
    std::string photo; // hex blob digest or empty
    std::string bloodgroup;
    ElevationLevel superset = ElevationLevel::Patient;
    Map docdetails;
    std::string allergies;
    std::string insurance;

    bool operator==(const PatientRecord&) const = default;
};

struct PrescriptionRecord {
    std::string visit_id;
    std::string docname;
    std::string patientnum;
    std::string problem;
    std::string prescription;
    std::int64_t billamt = 0; // minor currency units
    std::string attachment;   // hex blob digest or empty

    bool operator==(const PrescriptionRecord&) const = default;
};

struct PasswordHash {
    std::string digest_hex;
    std::string salt_hex;

    bool operator==(const PasswordHash&) const = default;
};

struct LoginRecord {
    std::string user;
    PasswordHash pass;
    std::string mob;
    ElevationLevel superset = ElevationLevel::Patient;
    PublicKey key;

    bool operator==(const LoginRecord&) const = default;
};

enum class RecordKind { Patient, Prescription, Login };

using ValidatedRecord = std::variant<PatientRecord, PrescriptionRecord, LoginRecord>;

// Soft findings that do not reject a record (age/dob disagreement).
using Warnings = std::vector<std::string>;

ValidatedRecord validate_record(RecordKind kind, const Document& doc, Warnings* warnings = nullptr);

// `as_of` is the reference time for the age/dob consistency warning; without
// it no warning is produced.
PatientRecord validate_patient(const Document& doc, std::optional<Timestamp> as_of = std::nullopt,
                               Warnings* warnings = nullptr);
PrescriptionRecord validate_prescription(const Document& doc);
LoginRecord validate_login(const Document& doc);

Document to_document(const PatientRecord& r);
Document to_document(const PrescriptionRecord& r);
Document to_document(const LoginRecord& r);
Document to_document(const ValidatedRecord& r);

// Argon2id over (password, 16-byte salt); lowercase hex output.
std::string hash_password(std::string_view password, ByteView salt);
PasswordHash make_password_hash(std::string_view password);
PasswordHash make_password_hash(std::string_view password, ByteView salt);
bool check_password(const PasswordHash& stored, std::string_view password);

} // namespace medledger
