#pragma once

// Shared builders for tests: deterministic keys, a small genesis, record
// documents and signed transactions.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "medledger/codec.hpp"
#include "medledger/crypto.hpp"
#include "medledger/ledger.hpp"
#include "medledger/records.hpp"

namespace medledger::testing {

inline constexpr std::int64_t kBaseTime = 1'700'000'000'000;

inline KeyPair key_for(const std::string& name) {
    auto d = digest("medledger-test-key:" + name);
    return generate_key_pair(d.bytes);
}

// Fixed salt so fixture logins are deterministic and cheap to build.
inline PasswordHash fixture_password(const std::string& password) {
    std::array<std::uint8_t, 16> salt{};
    for (std::size_t i = 0; i < salt.size(); ++i) salt[i] = static_cast<std::uint8_t>(i + 1);
    return make_password_hash(password, salt);
}

inline LoginRecord login_record(const std::string& user, ElevationLevel level, const std::string& mob) {
    static const PasswordHash pass = fixture_password("correct horse");
    return LoginRecord{user, pass, mob, level, key_for(user).public_key};
}

inline Genesis test_genesis(int validators = 4) {
    Genesis g;
    g.chain_id = "medledger-test";
    for (int i = 0; i < validators; ++i) {
        auto id = "node" + std::to_string(i);
        g.validators.push_back({id, key_for(id).public_key});
    }
    g.logins.push_back(login_record("root", ElevationLevel::SystemAdmin, "9000000000"));
    return g;
}

inline Document patient_doc(const std::string& phone, const std::string& name, std::int64_t age = 30,
                            const std::string& bloodgroup = "O+", const std::string& insurance = "POL-1",
                            const std::string& db_id = "") {
    return Map{
        {"dbIdentifier", db_id.empty() ? "DB-" + phone : db_id},
        {"name", name},
        {"gender", "F"},
        {"age", age},
        {"dob", Timestamp{kBaseTime - age * 31'556'952'000}},
        {"phone", phone},
        {"photo", ""},
        {"bloodgroup", bloodgroup},
        {"superset", "PATIENT"},
        {"docdetails", Map{{"type", "aadhaar"}}},
        {"allergies", "none"},
        {"insurance", insurance},
    };
}

inline Document prescription_doc(const std::string& visit, const std::string& phone, std::int64_t billamt = 1500,
                                 const std::string& problem = "fever") {
    return Map{
        {"visitId", visit},  {"docname", "Dr. Rao"}, {"patientnum", phone}, {"problem", problem},
        {"prescription", "paracetamol"}, {"billamt", billamt}, {"attachment", ""},
    };
}

inline Document login_doc(const std::string& user, ElevationLevel level, const std::string& mob) {
    return to_document(login_record(user, level, mob));
}

// Signs a transaction as `user`, whose key is key_for(user).
inline Transaction tx_as(const std::string& user, TxKind kind, Document payload, std::int64_t tick = 0) {
    return make_transaction(kind, std::move(payload), user, key_for(user), Timestamp{kBaseTime + tick});
}

// Applies transactions one per block with a fake certificate-free execution.
inline LedgerState run_txs(LedgerState state, const std::vector<Transaction>& txs, const std::string& proposer = "node0") {
    for (const auto& tx : txs) {
        Block b;
        b.height = state.height + 1;
        b.prev_hash = state.last_block_hash;
        b.proposer = proposer;
        b.txs = {tx};
        state = execute_block(state, b);
    }
    return state;
}

// Signs a precommit certificate from the first `signers` fixture validators.
inline void certify(Block& b, int signers, std::int64_t round = 0) {
    auto hash = b.hash();
    b.commit_signatures.clear();
    for (int i = 0; i < signers; ++i) {
        auto id = "node" + std::to_string(i);
        b.commit_signatures.push_back(
            {id, round, sign(key_for(id).private_key, vote_signing_bytes("precommit", b.height, round, hash))});
    }
}

inline std::string random_phone(std::mt19937_64& rng) {
    std::string p = "9";
    for (int i = 0; i < 9; ++i) p += static_cast<char>('0' + rng() % 10);
    return p;
}

// Names of >= 8 lowercase letters, so substring leak checks are meaningful.
inline std::string random_name(std::mt19937_64& rng) {
    std::string n;
    auto len = 8 + rng() % 5;
    for (std::size_t i = 0; i < len; ++i) n += static_cast<char>('a' + rng() % 26);
    return n;
}

} // namespace medledger::testing
