#include <doctest.h>

#include <random>

#include "medledger/error.hpp"
#include "medledger/ledger.hpp"
#include "medledger/workflows.hpp"
#include "support/fixtures.hpp"
#include "support/replay_oracle.hpp"

using namespace medledger;
using namespace medledger::testing;

namespace {

const std::string kPhone = "9876543210";
const std::string kUninsured = "9876543211";

std::vector<Transaction> setup_txs() {
    return {
        tx_as("root", TxKind::CreateLogin, login_doc("admin", ElevationLevel::HospitalAdmin, "9111111110")),
        tx_as("root", TxKind::CreateLogin, login_doc("doc", ElevationLevel::Doctor, "9111111111")),
        tx_as("root", TxKind::CreateLogin, login_doc("insurer", ElevationLevel::InsuranceAdmin, "9111111112")),
        tx_as("root", TxKind::CreateLogin, login_doc("ananya", ElevationLevel::Patient, kPhone)),
        tx_as("root", TxKind::CreateLogin, login_doc("bhavna", ElevationLevel::Patient, kUninsured)),
        tx_as("admin", TxKind::CreatePatient, patient_doc(kPhone, "ananyasharma", 30, "B+", "POL-77")),
        tx_as("admin", TxKind::CreatePatient, patient_doc(kUninsured, "bhavnaiyer", 40, "O-", "")),
        tx_as("doc", TxKind::CreatePrescription, prescription_doc("V-1", kPhone, 2500)),
        tx_as("doc", TxKind::CreatePrescription, prescription_doc("V-2", kUninsured, 900)),
    };
}

Error error_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e;
    }
    FAIL("expected an Error");
    return Error(ErrorCode::IoError);
}

Document submit(const std::string& visit, const std::string& phone) {
    return to_document(SubmitClaimRequest{visit, phone});
}

Document review(const Digest& id, Verdict v) { return to_document(ReviewClaimRequest{id, v}); }

} // namespace

TEST_CASE("transition table") {
    using S = ClaimStatus;
    CHECK(is_legal_transition(S::Pending, S::Approved));
    CHECK(is_legal_transition(S::Pending, S::Revoked));
    CHECK(is_legal_transition(S::Approved, S::Revoked));
    CHECK_FALSE(is_legal_transition(S::Revoked, S::Revoked));
    CHECK_FALSE(is_legal_transition(S::Revoked, S::Approved));
    CHECK_FALSE(is_legal_transition(S::Approved, S::Approved));
    CHECK_FALSE(is_legal_transition(S::Pending, S::Pending));
}

TEST_CASE("submit claim") {
    auto genesis = test_genesis();
    auto setup = setup_txs();
    auto state = run_txs(genesis_state(genesis), setup);

    SUBCASE("patient submits for an insured visit") {
        auto tx = tx_as("ananya", TxKind::SubmitClaim, submit("V-1", kPhone), 10);
        auto claim = submit_claim(state, tx);
        CHECK(claim.status == ClaimStatus::Pending);
        CHECK(claim.amount == 2500);
        CHECK(claim.insurer == "POL-77");
        CHECK(claim.claim_id == tx.tx_id);

        auto next = run_txs(state, {tx});
        ReplayOracle oracle(genesis);
        for (const auto& t : setup) oracle.apply(t);
        oracle.apply(tx);
        CHECK(next.state_hash == oracle.state_hash(next.height));
        CHECK(next.claims.at(tx.tx_id) == claim);
    }
    SUBCASE("doctor may submit on the patient's behalf") {
        CHECK(submit_claim(state, tx_as("doc", TxKind::SubmitClaim, submit("V-1", kPhone))).amount == 2500);
    }
    SUBCASE("errors") {
        CHECK(error_of([&] { submit_claim(state, tx_as("bhavna", TxKind::SubmitClaim, submit("V-2", kUninsured))); })
                  .code() == ErrorCode::NoInsuranceOnFile);
        CHECK(error_of([&] { submit_claim(state, tx_as("ananya", TxKind::SubmitClaim, submit("V-9", kPhone))); })
                  .code() == ErrorCode::UnknownVisit);
        CHECK(error_of([&] { submit_claim(state, tx_as("ananya", TxKind::SubmitClaim, submit("V-1", kUninsured))); })
                  .code() == ErrorCode::PhoneMismatch);
        // another patient's visit
        CHECK(error_of([&] { submit_claim(state, tx_as("bhavna", TxKind::SubmitClaim, submit("V-1", kPhone))); })
                  .code() == ErrorCode::PermissionDenied);
    }
    SUBCASE("an open claim blocks a second claim for the visit") {
        auto first = tx_as("ananya", TxKind::SubmitClaim, submit("V-1", kPhone), 1);
        auto s = run_txs(state, {first});
        auto second = tx_as("ananya", TxKind::SubmitClaim, submit("V-1", kPhone), 2);
        CHECK(error_of([&] { validate_tx(s, second); }).code() == ErrorCode::DuplicateId);
    }
}

TEST_CASE("review claim") {
    auto state = run_txs(genesis_state(test_genesis()), setup_txs());
    auto submit_tx = tx_as("ananya", TxKind::SubmitClaim, submit("V-1", kPhone), 10);
    state = run_txs(state, {submit_tx});
    const auto id = submit_tx.tx_id;

    SUBCASE("insurance admin approves a pending claim") {
        auto tx = tx_as("insurer", TxKind::ReviewClaim, review(id, Verdict::Approve), 20);
        auto c = review_claim(state, tx);
        CHECK(c.status == ClaimStatus::Approved);
        CHECK(c.reviewer == "insurer");
        CHECK(c.review_timestamp == Timestamp{kBaseTime + 20});
        auto s = run_txs(state, {tx});
        CHECK(s.claims.at(id).status == ClaimStatus::Approved);
        // fraud reversal
        auto revoke = tx_as("insurer", TxKind::ReviewClaim, review(id, Verdict::Revoke), 21);
        auto s2 = run_txs(s, {revoke});
        CHECK(s2.claims.at(id).status == ClaimStatus::Revoked);
        auto again = tx_as("insurer", TxKind::ReviewClaim, review(id, Verdict::Revoke), 22);
        CHECK(error_of([&] { validate_tx(s2, again); }).code() == ErrorCode::IllegalTransition);
    }
    SUBCASE("doctor cannot revoke") {
        auto tx = tx_as("doc", TxKind::ReviewClaim, review(id, Verdict::Revoke));
        CHECK(error_of([&] { validate_tx(state, tx); }).code() == ErrorCode::PermissionDenied);
        CHECK(error_of([&] { review_claim(state, tx); }).code() == ErrorCode::PermissionDenied);
    }
    SUBCASE("unknown claim") {
        auto tx = tx_as("insurer", TxKind::ReviewClaim, review(digest(std::string_view{"nope"}), Verdict::Approve));
        CHECK(error_of([&] { validate_tx(state, tx); }).code() == ErrorCode::UnknownClaim);
    }
}

TEST_CASE("claim documents round trip") {
    Claim c{digest(std::string_view{"x"}), "V-1", kPhone, 10, "POL", ClaimStatus::Approved, "insurer", Timestamp{5}};
    CHECK(claim_from_document(to_document(c)) == c);
    Claim pending{digest(std::string_view{"y"}), "V-2", kPhone, 0, "POL", ClaimStatus::Pending, {}, {}};
    CHECK(claim_from_document(to_document(pending)) == pending);
}
