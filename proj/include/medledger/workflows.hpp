#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "medledger/codec.hpp"

namespace medledger {

struct LedgerState;
struct Transaction;
struct LoginRecord;

enum class ClaimStatus { Pending, Approved, Revoked };
enum class Verdict { Approve, Revoke };

std::string_view to_string(ClaimStatus s);
std::optional<ClaimStatus> claim_status_from_string(std::string_view s);
std::string_view to_string(Verdict v);
std::optional<Verdict> verdict_from_string(std::string_view s);

// Pending->Approved, Pending->Revoked, Approved->Revoked. Revoked is terminal.
bool is_legal_transition(ClaimStatus from, ClaimStatus to);
ClaimStatus target_status(Verdict v);

struct Claim {
    Digest claim_id; // txId of the submitting transaction
    std::string visit_id;
    std::string phone;
    std::int64_t amount = 0;
    std::string insurer;
    ClaimStatus status = ClaimStatus::Pending;
    std::optional<std::string> reviewer;
    std::optional<Timestamp> review_timestamp;

    bool operator==(const Claim&) const = default;
};

Document to_document(const Claim& c);
Claim claim_from_document(const Document& doc);

struct SubmitClaimRequest {
    std::string visit_id;
    std::string phone;
};

struct ReviewClaimRequest {
    Digest claim_id;
    Verdict verdict = Verdict::Approve;
};

SubmitClaimRequest parse_submit_claim(const Document& payload);
ReviewClaimRequest parse_review_claim(const Document& payload);
Document to_document(const SubmitClaimRequest& r);
Document to_document(const ReviewClaimRequest& r);

// Both check every precondition against `state` and return the claim as it
// would be after the transaction. They do not mutate state.
Claim submit_claim(const LedgerState& state, const Transaction& tx);
Claim review_claim(const LedgerState& state, const Transaction& tx);

} // namespace medledger
