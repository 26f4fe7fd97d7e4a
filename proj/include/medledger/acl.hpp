#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medledger/error.hpp"

namespace medledger {

struct LoginRecord;
struct LedgerState;
struct Transaction;

// Ordered permission tiers, stored in the "superset" field of logins and
// patient records.
enum class ElevationLevel : int {
    Patient = 0,
    Doctor = 1,
    HospitalAdmin = 2,
    InsuranceAdmin = 3,
    SystemAdmin = 4,
};

inline constexpr std::array kElevationLevels = {
    ElevationLevel::Patient,       ElevationLevel::Doctor,      ElevationLevel::HospitalAdmin,
    ElevationLevel::InsuranceAdmin, ElevationLevel::SystemAdmin,
};

std::string_view to_string(ElevationLevel level);
std::optional<ElevationLevel> elevation_from_string(std::string_view name);

enum class Permission {
    CreatePatient,
    AmendPatient,
    CreatePrescription,
    CreateLogin,
    SubmitClaim,
    ReviewClaim,
    ResearchQuery,
    DonorSearch,
    PutBlob,
};

inline constexpr std::array kPermissions = {
    Permission::CreatePatient, Permission::AmendPatient, Permission::CreatePrescription,
    Permission::CreateLogin,   Permission::SubmitClaim,  Permission::ReviewClaim,
    Permission::ResearchQuery, Permission::DonorSearch,  Permission::PutBlob,
};

std::string_view to_string(Permission action);

// Static policy table, identical on every node.
ElevationLevel minimum_elevation(Permission action);

bool authorize(ElevationLevel level, Permission action);
bool authorize(const LoginRecord& login, Permission action);

// Outcome of the prescription gate: signer elevation, signer key, patient
// existence, evaluated and reported in that order.
struct CheckReport {
    bool elevation_ok = false;
    bool key_ok = false;
    bool patient_ok = false;

    bool passed() const { return elevation_ok && key_ok && patient_ok; }
    // Error codes of the failed checks, in check order.
    std::vector<ErrorCode> failures() const;
    std::optional<ErrorCode> first_failure() const;
};

// Requires tx.payload to be a validated prescription document.
CheckReport check_prescription(const LedgerState& state, const Transaction& tx);

} // namespace medledger
