#pragma once

// Single-process replay oracle. Rebuilds the state document straight from the
// committed transactions' payload documents, without going through the ledger's
// typed records or transition code, and hashes it. Transactions are assumed to
// be valid (the oracle does not re-check authorization).

#include <map>
#include <set>
#include <string>
#include <vector>

#include "medledger/codec.hpp"
#include "medledger/ledger.hpp"

namespace medledger::testing {

class ReplayOracle {
public:
    explicit ReplayOracle(const Genesis& g) : chain_id_(g.chain_id) {
        for (const auto& v : g.validators) validators_.push_back(Map{{"id", v.id}, {"key", v.key.hex()}});
        for (const auto& l : g.logins) logins_[l.user] = to_document(l);
    }

    void apply(const Transaction& tx) {
        const auto& p = tx.payload;
        auto str = [&](const char* k) { return p.find(k)->as_string(); };
        switch (tx.kind) {
        case TxKind::CreatePatient:
        case TxKind::AmendPatient: patients_[str("phone")].push_back(p); break;
        case TxKind::CreatePrescription:
            prescriptions_[str("visitId")] =
                Map{{"record", p}, {"timestamp", tx.timestamp}, {"txId", tx.tx_id.to_bytes()}};
            billamt_[str("visitId")] = p.find("billamt")->as_int();
            break;
        case TxKind::CreateLogin: logins_[str("user")] = p; break;
        case TxKind::SubmitClaim: {
            const auto& latest = patients_.at(str("phone")).back();
            claims_[tx.tx_id.hex()] = Map{
                {"amount", billamt_.at(str("visitId"))},
                {"claimId", tx.tx_id.hex()},
                {"insurer", latest.find("insurance")->as_string()},
                {"phone", str("phone")},
                {"status", "Pending"},
                {"visitId", str("visitId")},
            };
            break;
        }
        case TxKind::ReviewClaim: {
            auto& c = claims_.at(str("claimId")).as_map();
            c["status"] = str("verdict") == "Approve" ? "Approved" : "Revoked";
            c["reviewer"] = tx.signer_user;
            c["reviewTimestamp"] = tx.timestamp;
            break;
        }
        case TxKind::PutBlobRef: blobs_.insert(Digest::from_hex(str("hash")).to_bytes()); break;
        }
        tx_ids_.insert(tx.tx_id.to_bytes());
    }

    Digest state_hash(std::int64_t height) const {
        Map patients;
        for (const auto& [phone, versions] : patients_) patients[phone] = List(versions.begin(), versions.end());
        Map prescriptions(prescriptions_.begin(), prescriptions_.end());
        Map logins(logins_.begin(), logins_.end());
        Map claims(claims_.begin(), claims_.end());
        List blobs;
        for (const auto& b : blobs_) blobs.emplace_back(b);
        List ids;
        for (const auto& t : tx_ids_) ids.emplace_back(t);
        Value doc = Map{
            {"blobRefs", blobs},       {"chainId", chain_id_}, {"claims", claims},
            {"height", height},        {"logins", logins},     {"patients", patients},
            {"prescriptions", prescriptions}, {"txIds", ids},  {"validators", validators_},
        };
        return digest(encode_canonical(doc));
    }

private:
    std::string chain_id_;
    List validators_;
    std::map<std::string, std::vector<Value>> patients_;
    std::map<std::string, Value> prescriptions_;
    std::map<std::string, std::int64_t> billamt_;
    std::map<std::string, Value> logins_;
    std::map<std::string, Value> claims_;
    std::set<Bytes> blobs_;
    std::set<Bytes> tx_ids_;
};

} // namespace medledger::testing
