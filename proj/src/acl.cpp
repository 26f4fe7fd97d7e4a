#include "medledger/acl.hpp"

#include "medledger/ledger.hpp"
#include "medledger/records.hpp"

namespace medledger {

std::string_view to_string(ElevationLevel level) {
    switch (level) {
    case ElevationLevel::Patient: return "PATIENT";
    case ElevationLevel::Doctor: return "DOCTOR";
    case ElevationLevel::HospitalAdmin: return "HOSPITAL_ADMIN";
    case ElevationLevel::InsuranceAdmin: return "INSURANCE_ADMIN";
    case ElevationLevel::SystemAdmin: return "SYSTEM_ADMIN";
    }
    return "UNKNOWN";
}

std::optional<ElevationLevel> elevation_from_string(std::string_view name) {
    for (auto level : kElevationLevels)
        if (to_string(level) == name) return level;
    return std::nullopt;
}

std::string_view to_string(Permission action) {
    switch (action) {
    case Permission::CreatePatient: return "CreatePatient";
    case Permission::AmendPatient: return "AmendPatient";
    case Permission::CreatePrescription: return "CreatePrescription";
    case Permission::CreateLogin: return "CreateLogin";
    case Permission::SubmitClaim: return "SubmitClaim";
    case Permission::ReviewClaim: return "ReviewClaim";
    case Permission::ResearchQuery: return "ResearchQuery";
    case Permission::DonorSearch: return "DonorSearch";
    case Permission::PutBlob: return "PutBlob";
    }
    return "Unknown";
}

ElevationLevel minimum_elevation(Permission action) {
    switch (action) {
    case Permission::SubmitClaim: return ElevationLevel::Patient;
    case Permission::AmendPatient:
    case Permission::CreatePrescription:
    case Permission::ResearchQuery:
    case Permission::DonorSearch:
    case Permission::PutBlob: return ElevationLevel::Doctor;
    case Permission::CreatePatient:
    case Permission::CreateLogin: return ElevationLevel::HospitalAdmin;
    case Permission::ReviewClaim: return ElevationLevel::InsuranceAdmin;
    }
    return ElevationLevel::SystemAdmin;
}

bool authorize(ElevationLevel level, Permission action) { return level >= minimum_elevation(action); }

bool authorize(const LoginRecord& login, Permission action) { return authorize(login.superset, action); }

std::vector<ErrorCode> CheckReport::failures() const {
    std::vector<ErrorCode> out;
    if (!elevation_ok) out.push_back(ErrorCode::ElevationTooLow);
    if (!key_ok) out.push_back(ErrorCode::KeyMismatch);
    if (!patient_ok) out.push_back(ErrorCode::UnknownPatient);
    return out;
}

std::optional<ErrorCode> CheckReport::first_failure() const {
    auto f = failures();
    if (f.empty()) return std::nullopt;
    return f.front();
}

CheckReport check_prescription(const LedgerState& state, const Transaction& tx) {
    CheckReport report;
    const auto* login = state.login(tx.signer_user);
    report.elevation_ok = login && login->superset >= ElevationLevel::Doctor;
    report.key_ok = login && login->key == tx.signer_key && verify(login->key, tx.signing_bytes(), tx.signature);
    const auto* patientnum = tx.payload.find("patientnum");
    report.patient_ok = patientnum && patientnum->is_string() && state.latest_patient(patientnum->as_string());
    return report;
}

} // namespace medledger
