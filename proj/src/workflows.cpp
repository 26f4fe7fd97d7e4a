#include "medledger/workflows.hpp"

#include "doc_util.hpp"
#include "medledger/ledger.hpp"

namespace medledger {

using namespace detail;

std::string_view to_string(ClaimStatus s) {
    switch (s) {
    case ClaimStatus::Pending: return "Pending";
    case ClaimStatus::Approved: return "Approved";
    case ClaimStatus::Revoked: return "Revoked";
    }
    return "Unknown";
}

std::optional<ClaimStatus> claim_status_from_string(std::string_view s) {
    for (auto c : {ClaimStatus::Pending, ClaimStatus::Approved, ClaimStatus::Revoked})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

std::string_view to_string(Verdict v) { return v == Verdict::Approve ? "Approve" : "Revoke"; }

std::optional<Verdict> verdict_from_string(std::string_view s) {
    if (s == "Approve") return Verdict::Approve;
    if (s == "Revoke") return Verdict::Revoke;
    return std::nullopt;
}

bool is_legal_transition(ClaimStatus from, ClaimStatus to) {
    return (from == ClaimStatus::Pending && (to == ClaimStatus::Approved || to == ClaimStatus::Revoked)) ||
           (from == ClaimStatus::Approved && to == ClaimStatus::Revoked);
}

ClaimStatus target_status(Verdict v) { return v == Verdict::Approve ? ClaimStatus::Approved : ClaimStatus::Revoked; }

Document to_document(const Claim& c) {
    Map m{
        {"amount", c.amount}, {"claimId", c.claim_id.hex()}, {"insurer", c.insurer},
        {"phone", c.phone},   {"status", std::string(to_string(c.status))}, {"visitId", c.visit_id},
    };
    if (c.reviewer) m.emplace("reviewer", *c.reviewer);
    if (c.review_timestamp) m.emplace("reviewTimestamp", *c.review_timestamp);
    return m;
}

Claim claim_from_document(const Document& doc) {
    static constexpr const char* kKeys[] = {"amount", "claimId", "insurer", "phone",
                                            "status", "visitId", "reviewer", "reviewTimestamp"};
    only_keys(doc, kKeys);
    Claim c;
    c.amount = get_int(doc, "amount");
    c.claim_id = get_digest_hex(doc, "claimId");
    c.insurer = get_string(doc, "insurer");
    c.phone = get_string(doc, "phone");
    auto status = claim_status_from_string(get_string(doc, "status"));
    if (!status) throw Error(ErrorCode::WrongType, "status", "unknown claim status");
    c.status = *status;
    c.visit_id = get_string(doc, "visitId");
    if (doc.find("reviewer")) c.reviewer = get_string(doc, "reviewer");
    if (doc.find("reviewTimestamp")) c.review_timestamp = get_timestamp(doc, "reviewTimestamp");
    return c;
}

SubmitClaimRequest parse_submit_claim(const Document& payload) {
    static constexpr const char* kKeys[] = {"visitId", "phone"};
    only_keys(payload, kKeys);
    return {get_string(payload, "visitId"), get_string(payload, "phone")};
}

ReviewClaimRequest parse_review_claim(const Document& payload) {
    static constexpr const char* kKeys[] = {"claimId", "verdict"};
    only_keys(payload, kKeys);
    auto verdict = verdict_from_string(get_string(payload, "verdict"));
    if (!verdict) throw Error(ErrorCode::WrongType, "verdict", "expected Approve or Revoke");
    return {get_digest_hex(payload, "claimId"), *verdict};
}

Document to_document(const SubmitClaimRequest& r) { return Map{{"visitId", r.visit_id}, {"phone", r.phone}}; }

Document to_document(const ReviewClaimRequest& r) {
    return Map{{"claimId", r.claim_id.hex()}, {"verdict", std::string(to_string(r.verdict))}};
}

Claim submit_claim(const LedgerState& state, const Transaction& tx) {
    auto req = parse_submit_claim(tx.payload);
    auto it = state.prescriptions.find(req.visit_id);
    if (it == state.prescriptions.end()) throw Error(ErrorCode::UnknownVisit, req.visit_id);
    const auto& rx = it->second.record;
    if (rx.patientnum != req.phone) throw Error(ErrorCode::PhoneMismatch, req.phone);
    const auto* patient = state.latest_patient(req.phone);
    if (!patient) throw Error(ErrorCode::UnknownPatient, req.phone);
    if (patient->insurance.empty()) throw Error(ErrorCode::NoInsuranceOnFile, req.phone);

    const auto* signer = state.login(tx.signer_user);
    if (!signer || !(signer->mob == req.phone || signer->superset >= ElevationLevel::Doctor))
        throw Error(ErrorCode::PermissionDenied, tx.signer_user, "only the patient or a doctor+ may claim");

    for (const auto& [_, existing] : state.claims)
        if (existing.visit_id == req.visit_id && existing.status != ClaimStatus::Revoked)
            throw Error(ErrorCode::DuplicateId, "visitId", "an open claim already exists for this visit");

    Claim c;
    c.claim_id = tx.tx_id;
    c.visit_id = req.visit_id;
    c.phone = req.phone;
    c.amount = rx.billamt;
    c.insurer = patient->insurance;
    c.status = ClaimStatus::Pending;
    return c;
}

Claim review_claim(const LedgerState& state, const Transaction& tx) {
    auto req = parse_review_claim(tx.payload);
    auto it = state.claims.find(req.claim_id);
    if (it == state.claims.end()) throw Error(ErrorCode::UnknownClaim, req.claim_id.hex());
    const auto* signer = state.login(tx.signer_user);
    if (!signer || signer->superset < ElevationLevel::InsuranceAdmin)
        throw Error(ErrorCode::PermissionDenied, tx.signer_user, "ReviewClaim requires INSURANCE_ADMIN");
    auto to = target_status(req.verdict);
    if (!is_legal_transition(it->second.status, to))
        throw Error(ErrorCode::IllegalTransition, req.claim_id.hex(),
                    std::string(to_string(it->second.status)) + " -> " + std::string(to_string(to)));
    Claim c = it->second;
    c.status = to;
    c.reviewer = tx.signer_user;
    c.review_timestamp = tx.timestamp;
    return c;
}

} // namespace medledger
