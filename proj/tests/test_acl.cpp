#include <doctest.h>

#include "medledger/acl.hpp"
#include "medledger/ledger.hpp"
#include "support/fixtures.hpp"

using namespace medledger;
using namespace medledger::testing;

TEST_CASE("minimum elevation table") {
    CHECK(minimum_elevation(Permission::CreatePrescription) == ElevationLevel::Doctor);
    CHECK(minimum_elevation(Permission::ReviewClaim) == ElevationLevel::InsuranceAdmin);
    CHECK(minimum_elevation(Permission::SubmitClaim) == ElevationLevel::Patient);
    CHECK(minimum_elevation(Permission::CreatePatient) == ElevationLevel::HospitalAdmin);
    CHECK(minimum_elevation(Permission::DonorSearch) == ElevationLevel::Doctor);
}

TEST_CASE("authorize") {
    auto doctor = login_record("dr", ElevationLevel::Doctor, "9123456789");
    auto patient = login_record("pt", ElevationLevel::Patient, "9123456788");
    auto admin = login_record("sys", ElevationLevel::SystemAdmin, "9123456787");
    CHECK(authorize(doctor, Permission::CreatePrescription));
    CHECK_FALSE(authorize(patient, Permission::CreatePrescription));
    for (auto action : kPermissions) CHECK(authorize(admin, action));
}

TEST_CASE("authorization is monotone in elevation") {
    for (auto action : kPermissions)
        for (auto low : kElevationLevels)
            for (auto high : kElevationLevels)
                if (high >= low && authorize(low, action)) CHECK(authorize(high, action));
}

TEST_CASE("elevation names round trip") {
    for (auto level : kElevationLevels) CHECK(elevation_from_string(to_string(level)) == level);
    CHECK_FALSE(elevation_from_string("ADMIN"));
    CHECK(ElevationLevel::InsuranceAdmin > ElevationLevel::HospitalAdmin);
}

TEST_CASE("three-check prescription truth table") {
    auto genesis = test_genesis();
    auto base = genesis_state(genesis);
    const std::string phone = "9876543210";
    auto state = run_txs(base, {
        tx_as("root", TxKind::CreateLogin, login_doc("doc", ElevationLevel::Doctor, "9111111111")),
        tx_as("root", TxKind::CreateLogin, login_doc("nurse", ElevationLevel::Patient, "9111111112")),
        tx_as("root", TxKind::CreatePatient, patient_doc(phone, "ananya")),
    });

    for (int mask = 0; mask < 8; ++mask) {
        bool elevation_ok = mask & 1, key_ok = mask & 2, patient_ok = mask & 4;
        CAPTURE(mask);
        std::string signer = elevation_ok ? "doc" : "nurse";
        auto keys = key_ok ? key_for(signer) : key_for("impostor");
        auto tx = make_transaction(TxKind::CreatePrescription,
                                   prescription_doc("V-" + std::to_string(mask), patient_ok ? phone : "9000000001"),
                                   signer, keys, Timestamp{kBaseTime});
        auto report = check_prescription(state, tx);
        CHECK(report.elevation_ok == elevation_ok);
        CHECK(report.key_ok == key_ok);
        CHECK(report.patient_ok == patient_ok);
        CHECK(report.passed() == (mask == 7));
        CHECK(report.failures().size() == static_cast<std::size_t>(3 - __builtin_popcount(mask)));
        if (mask != 7) {
            auto expected = !elevation_ok ? ErrorCode::ElevationTooLow
                            : !key_ok     ? ErrorCode::KeyMismatch
                                          : ErrorCode::UnknownPatient;
            CHECK(report.first_failure() == expected);
        }
    }
}

TEST_CASE("key check fails when the signing key is valid but not the registered one") {
    auto state = run_txs(genesis_state(test_genesis()),
                         {tx_as("root", TxKind::CreateLogin, login_doc("doc", ElevationLevel::Doctor, "9111111111")),
                          tx_as("root", TxKind::CreatePatient, patient_doc("9876543210", "ananya"))});
    auto tx = make_transaction(TxKind::CreatePrescription, prescription_doc("V-1", "9876543210"), "doc",
                               key_for("someone-else"), Timestamp{kBaseTime});
    auto report = check_prescription(state, tx);
    CHECK(report.elevation_ok);
    CHECK_FALSE(report.key_ok);
    CHECK(report.first_failure() == ErrorCode::KeyMismatch);
}
