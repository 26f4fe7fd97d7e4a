#include "medledger/query.hpp"

#include <algorithm>

#include "medledger/error.hpp"

namespace medledger {
namespace {

void erase_from(std::map<std::string, std::set<std::string>>& m, const std::string& key, const std::string& v) {
    auto it = m.find(key);
    if (it == m.end()) return;
    it->second.erase(v);
    if (it->second.empty()) m.erase(it);
}

void erase_from(std::map<std::int64_t, std::set<std::string>>& m, std::int64_t key, const std::string& v) {
    auto it = m.find(key);
    if (it == m.end()) return;
    it->second.erase(v);
    if (it->second.empty()) m.erase(it);
}

std::vector<PrescriptionEntry> prescriptions_for(const LedgerState& state, const QueryIndex& index,
                                                 const std::string& phone) {
    std::vector<PrescriptionEntry> out;
    if (auto it = index.visits_by_phone.find(phone); it != index.visits_by_phone.end())
        for (const auto& visit : it->second) out.push_back(state.prescriptions.at(visit));
    std::sort(out.begin(), out.end(), [](const PrescriptionEntry& a, const PrescriptionEntry& b) {
        return std::tie(a.timestamp.ms, a.tx_id) < std::tie(b.timestamp.ms, b.tx_id);
    });
    return out;
}

Document prescription_entry_document(const PrescriptionEntry& e) {
    return Map{{"record", to_document(e.record)}, {"timestamp", e.timestamp}, {"txId", e.tx_id.hex()}};
}

} // namespace

void QueryIndex::set_patient(const std::string& phone, std::int64_t age, const std::string& group) {
    if (auto it = current_.find(phone); it != current_.end()) {
        erase_from(phones_by_age, it->second.first, phone);
        erase_from(phones_by_group, it->second.second, phone);
    }
    current_[phone] = {age, group};
    phones_by_age[age].insert(phone);
    phones_by_group[group].insert(phone);
}

void QueryIndex::apply_block(const Block& block) {
    for (const auto& tx : block.txs) {
        const auto& p = tx.payload;
        switch (tx.kind) {
        case TxKind::CreatePatient:
        case TxKind::AmendPatient:
            set_patient(p.find("phone")->as_string(), p.find("age")->as_int(), p.find("bloodgroup")->as_string());
            break;
        case TxKind::CreatePrescription:
            visits_by_phone[p.find("patientnum")->as_string()].insert(p.find("visitId")->as_string());
            break;
        case TxKind::CreateLogin: users_by_mob[p.find("mob")->as_string()].insert(p.find("user")->as_string()); break;
        default: break;
        }
    }
}

QueryIndex build_index(const LedgerState& state) {
    QueryIndex idx;
    for (const auto& [phone, versions] : state.patients) {
        const auto& latest = versions.back();
        idx.set_patient(phone, latest.age, latest.bloodgroup);
    }
    for (const auto& [visit, e] : state.prescriptions) idx.visits_by_phone[e.record.patientnum].insert(visit);
    for (const auto& [user, l] : state.logins) idx.users_by_mob[l.mob].insert(user);
    return idx;
}

QueryIndex build_index(const Genesis& genesis) {
    QueryIndex idx;
    for (const auto& l : genesis.logins) idx.users_by_mob[l.mob].insert(l.user);
    return idx;
}

PatientHistory history_by_phone(const LedgerState& state, const QueryIndex& index, const std::string& phone) {
    auto it = state.patients.find(phone);
    if (it == state.patients.end()) throw Error(ErrorCode::UnknownPatient, phone);
    PatientHistory h;
    h.patient = it->second.back();
    h.versions.assign(it->second.begin(), it->second.end() - 1);
    h.prescriptions = prescriptions_for(state, index, phone);
    h.login_present = index.users_by_mob.contains(phone);
    return h;
}

PatientHistory history_by_phone(const LedgerState& state, const std::string& phone) {
    return history_by_phone(state, build_index(state), phone);
}

Document to_document(const PatientHistory& h) {
    List versions, prescriptions;
    for (const auto& v : h.versions) versions.push_back(to_document(v));
    for (const auto& p : h.prescriptions) prescriptions.push_back(prescription_entry_document(p));
    return Map{{"patient", to_document(h.patient)},
               {"versions", std::move(versions)},
               {"prescriptions", std::move(prescriptions)},
               {"loginPresent", h.login_present}};
}

Document to_document(const AnonymizedRow& r) {
    List problems(r.problem_history.begin(), r.problem_history.end());
    return Map{{"age", r.age},
               {"gender", r.gender},
               {"bloodgroup", r.bloodgroup},
               {"allergies", r.allergies},
               {"problemHistory", std::move(problems)}};
}

Document to_document(const ResearchResult& r) {
    List rows;
    for (const auto& row : r.rows) rows.push_back(to_document(row));
    return Map{{"rows", std::move(rows)}, {"count", static_cast<std::int64_t>(r.count)}};
}

void check_age_range(std::int64_t age_min, std::int64_t age_max) {
    if (age_min < 0 || age_max > 150 || age_min > age_max)
        throw Error(ErrorCode::InvalidRange, {},
                    "need 0 <= ageMin <= ageMax <= 150, got [" + std::to_string(age_min) + ", " +
                        std::to_string(age_max) + "]");
}

ResearchResult research_query(const LedgerState& state, const QueryIndex& index, std::int64_t age_min,
                              std::int64_t age_max) {
    check_age_range(age_min, age_max);
    std::vector<std::pair<Digest, AnonymizedRow>> keyed;
    for (auto it = index.phones_by_age.lower_bound(age_min); it != index.phones_by_age.end() && it->first <= age_max;
         ++it) {
        for (const auto& phone : it->second) {
            const auto& p = *state.latest_patient(phone);
            AnonymizedRow row{p.age, p.gender, p.bloodgroup, p.allergies, {}};
            for (const auto& e : prescriptions_for(state, index, phone)) row.problem_history.push_back(e.record.problem);
            keyed.emplace_back(donor_token(p), std::move(row));
        }
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    ResearchResult r;
    for (auto& [_, row] : keyed) r.rows.push_back(std::move(row));
    r.count = r.rows.size();
    return r;
}

ResearchResult research_query(const LedgerState& state, std::int64_t age_min, std::int64_t age_max) {
    check_age_range(age_min, age_max);
    return research_query(state, build_index(state), age_min, age_max);
}

Digest donor_token(const PatientRecord& p) { return digest_of(to_document(p)); }

Document to_document(const NotificationEvent& e) {
    return Map{{"token", e.token.hex()}, {"bloodgroup", e.bloodgroup}, {"message", e.message}};
}

DonorSearchResult donor_search(const LedgerState& state, const QueryIndex& index, const std::string& bloodgroup) {
    if (!is_valid_blood_group(bloodgroup)) throw Error(ErrorCode::UnknownBloodGroup, bloodgroup);
    DonorSearchResult r;
    if (auto it = index.phones_by_group.find(bloodgroup); it != index.phones_by_group.end())
        for (const auto& phone : it->second) r.tokens.push_back(donor_token(*state.latest_patient(phone)));
    std::sort(r.tokens.begin(), r.tokens.end());
    for (const auto& t : r.tokens)
        r.events.push_back({t, bloodgroup, "A patient needs " + bloodgroup + " blood. Please contact the hospital."});
    return r;
}

DonorSearchResult donor_search(const LedgerState& state, const std::string& bloodgroup) {
    if (!is_valid_blood_group(bloodgroup)) throw Error(ErrorCode::UnknownBloodGroup, bloodgroup);
    return donor_search(state, build_index(state), bloodgroup);
}

std::optional<std::string> resolve_donor_token(const LedgerState& state, const Digest& token) {
    for (const auto& [phone, versions] : state.patients)
        if (donor_token(versions.back()) == token) return phone;
    return std::nullopt;
}

} // namespace medledger
