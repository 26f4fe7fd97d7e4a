#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "medledger/codec.hpp"
#include "medledger/ledger.hpp"
#include "medledger/records.hpp"

namespace medledger {

// Secondary indexes over LedgerState, updated block by block inside the
// single-writer apply path and rebuildable from scratch.
struct QueryIndex {
    std::map<std::string, std::set<std::string>> visits_by_phone; // patientnum -> visitIds
    std::map<std::string, std::set<std::string>> phones_by_group; // bloodgroup -> phones
    std::map<std::int64_t, std::set<std::string>> phones_by_age;  // latest age -> phones
    std::map<std::string, std::set<std::string>> users_by_mob;    // login mob -> users

    // Applies a block whose transactions have already been validated.
    void apply_block(const Block& block);

    bool operator==(const QueryIndex&) const = default;

private:
    friend QueryIndex build_index(const LedgerState& state);
    void set_patient(const std::string& phone, std::int64_t age, const std::string& group);
    std::map<std::string, std::pair<std::int64_t, std::string>> current_; // phone -> (age, group)
};

QueryIndex build_index(const LedgerState& state);
// Index as seeded from genesis (logins only).
QueryIndex build_index(const Genesis& genesis);

struct PatientHistory {
    PatientRecord patient;                       // latest version
    std::vector<PatientRecord> versions;         // prior versions, oldest first
    std::vector<PrescriptionEntry> prescriptions; // by timestamp, then txId
    bool login_present = false;
};

Document to_document(const PatientHistory& h);

// Throws UnknownPatient.
PatientHistory history_by_phone(const LedgerState& state, const QueryIndex& index, const std::string& phone);
PatientHistory history_by_phone(const LedgerState& state, const std::string& phone);

// Exactly these keys and nothing else.
struct AnonymizedRow {
    std::int64_t age = 0;
    std::string gender;
    std::string bloodgroup;
    std::string allergies;
    std::vector<std::string> problem_history;

    bool operator==(const AnonymizedRow&) const = default;
};

Document to_document(const AnonymizedRow& r);

struct ResearchResult {
    std::vector<AnonymizedRow> rows; // ordered by digest of the source patient record
    std::size_t count = 0;
};

Document to_document(const ResearchResult& r);

// Throws InvalidRange unless 0 <= age_min <= age_max <= 150.
void check_age_range(std::int64_t age_min, std::int64_t age_max);
ResearchResult research_query(const LedgerState& state, const QueryIndex& index, std::int64_t age_min,
                              std::int64_t age_max);
ResearchResult research_query(const LedgerState& state, std::int64_t age_min, std::int64_t age_max);

// digest(canonical bytes of the latest patient record)
Digest donor_token(const PatientRecord& p);

struct NotificationEvent {
    Digest token;
    std::string bloodgroup;
    std::string message;

    bool operator==(const NotificationEvent&) const = default;
};

Document to_document(const NotificationEvent& e);

struct DonorSearchResult {
    std::vector<Digest> tokens; // sorted
    std::vector<NotificationEvent> events;
};

// Throws UnknownBloodGroup.
DonorSearchResult donor_search(const LedgerState& state, const QueryIndex& index, const std::string& bloodgroup);
DonorSearchResult donor_search(const LedgerState& state, const std::string& bloodgroup);

// Server-side lookup used by the notification outbox.
std::optional<std::string> resolve_donor_token(const LedgerState& state, const Digest& token);

} // namespace medledger
