#include "medledger/records.hpp"

#include <sodium.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "medledger/error.hpp"

namespace medledger {
namespace {

constexpr std::int64_t kMsPerYear = 31'556'952'000; // 365.2425 days

// Reads a fixed field set out of a map. Presence and types are checked in
// declaration order; leftover keys are reported by finish().
class FieldReader {
public:
    explicit FieldReader(const Document& doc) {
        if (!doc.is_map()) throw Error(ErrorCode::WrongType, "<root>", "record must be a map");
        map_ = &doc.as_map();
    }

    const Value& field(const char* name) {
        auto it = map_->find(name);
        if (it == map_->end()) throw Error(ErrorCode::MissingField, name);
        seen_.insert(name);
        return it->second;
    }

    std::string str(const char* name) {
        const auto& v = field(name);
        if (!v.is_string()) throw Error(ErrorCode::WrongType, name, "expected string");
        return v.as_string();
    }

    std::int64_t integer(const char* name) {
        const auto& v = field(name);
        if (!v.is_int()) throw Error(ErrorCode::WrongType, name, "expected integer");
        return v.as_int();
    }

    Timestamp timestamp(const char* name) {
        const auto& v = field(name);
        if (!v.is_timestamp()) throw Error(ErrorCode::WrongType, name, "expected timestamp");
        return v.as_timestamp();
    }

    const Map& map(const char* name) {
        const auto& v = field(name);
        if (!v.is_map()) throw Error(ErrorCode::WrongType, name, "expected map");
        return v.as_map();
    }

    void finish() const {
        for (const auto& [k, _] : *map_)
            if (!seen_.contains(k)) throw Error(ErrorCode::UnknownField, k);
    }

private:
    const Map* map_ = nullptr;
    std::set<std::string, std::less<>> seen_;
};

bool is_lower_hex(std::string_view s, std::size_t len) {
    return s.size() == len && std::all_of(s.begin(), s.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

void require_digest_or_empty(std::string_view value, const char* name) {
    if (!value.empty() && !is_lower_hex(value, 64))
        throw Error(ErrorCode::InvariantViolation, name, "must be empty or a 64-char lowercase hex digest");
}

void require_phone(std::string_view value, const char* name) {
    if (!is_valid_phone(value)) throw Error(ErrorCode::InvariantViolation, name, "must be 10-15 digits");
}

ElevationLevel require_elevation(std::string_view value, const char* name) {
    auto level = elevation_from_string(value);
    if (!level) throw Error(ErrorCode::InvariantViolation, name, "undefined elevation level '" + std::string(value) + "'");
    return *level;
}

} // namespace

bool is_valid_phone(std::string_view phone) {
    return phone.size() >= 10 && phone.size() <= 15 &&
           std::all_of(phone.begin(), phone.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_valid_blood_group(std::string_view group) {
    return std::find(kBloodGroups.begin(), kBloodGroups.end(), group) != kBloodGroups.end();
}

PatientRecord validate_patient(const Document& doc, std::optional<Timestamp> as_of, Warnings* warnings) {
    FieldReader r(doc);
    PatientRecord p;
    p.db_identifier = r.str("dbIdentifier");
    p.name = r.str("name");
    p.gender = r.str("gender");
    p.age = r.integer("age");
    p.dob = r.timestamp("dob");
    p.phone = r.str("phone");
    p.photo = r.str("photo");
    p.bloodgroup = r.str("bloodgroup");
    auto superset = r.str("superset");
    p.docdetails = r.map("docdetails");
    p.allergies = r.str("allergies");
    p.insurance = r.str("insurance");
    r.finish();

    if (p.db_identifier.empty()) throw Error(ErrorCode::InvariantViolation, "dbIdentifier", "must be non-empty");
    if (p.age < 0 || p.age > 150) throw Error(ErrorCode::InvariantViolation, "age", "must be in [0,150]");
    require_phone(p.phone, "phone");
    require_digest_or_empty(p.photo, "photo");
    if (!is_valid_blood_group(p.bloodgroup))
        throw Error(ErrorCode::InvariantViolation, "bloodgroup", "not one of the 8 ABO/Rh groups");
    p.superset = require_elevation(superset, "superset");
    auto type = p.docdetails.find("type");
    if (type == p.docdetails.end()) throw Error(ErrorCode::MissingField, "docdetails.type");
    if (!type->second.is_string()) throw Error(ErrorCode::WrongType, "docdetails.type", "expected string");

    if (as_of && warnings) {
        auto derived = (as_of->ms - p.dob.ms) / kMsPerYear;
        if (std::llabs(derived - p.age) > 1)
            warnings->push_back("age " + std::to_string(p.age) + " disagrees with dob (derived " +
                                std::to_string(derived) + ")");
    }
    return p;
}

PrescriptionRecord validate_prescription(const Document& doc) {
    FieldReader r(doc);
    PrescriptionRecord p;
    p.visit_id = r.str("visitId");
    p.docname = r.str("docname");
    p.patientnum = r.str("patientnum");
    p.problem = r.str("problem");
    p.prescription = r.str("prescription");
    p.billamt = r.integer("billamt");
    p.attachment = r.str("attachment");
    r.finish();

    if (p.visit_id.empty()) throw Error(ErrorCode::InvariantViolation, "visitId", "must be non-empty");
    require_phone(p.patientnum, "patientnum");
    if (p.billamt < 0) throw Error(ErrorCode::InvariantViolation, "billamt", "must be >= 0");
    require_digest_or_empty(p.attachment, "attachment");
    return p;
}

LoginRecord validate_login(const Document& doc) {
    FieldReader r(doc);
    LoginRecord l;
    l.user = r.str("user");
    const auto& pass = r.field("pass");
    if (!pass.is_map()) throw Error(ErrorCode::WrongType, "pass", "expected map");
    l.mob = r.str("mob");
    auto superset = r.str("superset");
    auto key = r.str("key");
    r.finish();

    FieldReader pr(pass);
    l.pass.digest_hex = pr.str("digest");
    l.pass.salt_hex = pr.str("salt");
    pr.finish();

    if (l.user.empty()) throw Error(ErrorCode::InvariantViolation, "user", "must be non-empty");
    if (!is_lower_hex(l.pass.digest_hex, 64))
        throw Error(ErrorCode::InvariantViolation, "pass.digest", "must be 64 lowercase hex chars");
    if (!is_lower_hex(l.pass.salt_hex, 32))
        throw Error(ErrorCode::InvariantViolation, "pass.salt", "must be 32 lowercase hex chars");
    require_phone(l.mob, "mob");
    l.superset = require_elevation(superset, "superset");
    if (!is_lower_hex(key, 64)) throw Error(ErrorCode::InvariantViolation, "key", "must be a 64-char hex public key");
    l.key = PublicKey::from_hex(key);
    return l;
}

ValidatedRecord validate_record(RecordKind kind, const Document& doc, Warnings* warnings) {
    switch (kind) {
    case RecordKind::Patient: return validate_patient(doc, std::nullopt, warnings);
    case RecordKind::Prescription: return validate_prescription(doc);
    case RecordKind::Login: return validate_login(doc);
    }
    throw Error(ErrorCode::BadRequest, "kind");
}

Document to_document(const PatientRecord& r) {
    return Map{
        {"dbIdentifier", r.db_identifier},
        {"name", r.name},
        {"gender", r.gender},
        {"age", r.age},
        {"dob", r.dob},
        {"phone", r.phone},
        {"photo", r.photo},
        {"bloodgroup", r.bloodgroup},
        {"superset", to_string(r.superset)},
        {"docdetails", r.docdetails},
        {"allergies", r.allergies},
        {"insurance", r.insurance},
    };
}

Document to_document(const PrescriptionRecord& r) {
    return Map{
        {"visitId", r.visit_id},       {"docname", r.docname}, {"patientnum", r.patientnum},
        {"problem", r.problem},         {"prescription", r.prescription},
        {"billamt", r.billamt},         {"attachment", r.attachment},
    };
}

Document to_document(const LoginRecord& r) {
    return Map{
        {"user", r.user},
        {"pass", Map{{"digest", r.pass.digest_hex}, {"salt", r.pass.salt_hex}}},
        {"mob", r.mob},
        {"superset", to_string(r.superset)},
        {"key", r.key.hex()},
    };
}

Document to_document(const ValidatedRecord& r) {
    return std::visit([](const auto& rec) { return to_document(rec); }, r);
}

std::string hash_password(std::string_view password, ByteView salt) {
    if (salt.size() != crypto_pwhash_SALTBYTES)
        throw Error(ErrorCode::BadSaltLength, {}, "salt must be 16 bytes, got " + std::to_string(salt.size()));
    if (sodium_init() < 0) throw Error(ErrorCode::IoError, "libsodium");
    std::array<std::uint8_t, 32> out{};
    if (crypto_pwhash(out.data(), out.size(), password.data(), password.size(), salt.data(), 2, 64 * 1024,
                      crypto_pwhash_ALG_ARGON2ID13) != 0)
        throw Error(ErrorCode::IoError, "crypto_pwhash", "out of memory");
    return to_hex(out);
}

PasswordHash make_password_hash(std::string_view password, ByteView salt) {
    return {hash_password(password, salt), to_hex(salt)};
}

PasswordHash make_password_hash(std::string_view password) {
    std::array<std::uint8_t, 16> salt{};
    random_bytes(salt);
    return make_password_hash(password, salt);
}

bool check_password(const PasswordHash& stored, std::string_view password) {
    Bytes salt;
    try {
        salt = from_hex(stored.salt_hex);
    } catch (const Error&) {
        return false;
    }
    if (salt.size() != crypto_pwhash_SALTBYTES) return false;
    auto computed = hash_password(password, salt);
    return computed.size() == stored.digest_hex.size() &&
           sodium_memcmp(computed.data(), stored.digest_hex.data(), computed.size()) == 0;
}

} // namespace medledger
