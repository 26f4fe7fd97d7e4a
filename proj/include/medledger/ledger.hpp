#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "medledger/acl.hpp"
#include "medledger/codec.hpp"
#include "medledger/crypto.hpp"
#include "medledger/records.hpp"
#include "medledger/workflows.hpp"

namespace medledger {

enum class TxKind {
    CreatePatient,
    AmendPatient,
    CreatePrescription,
    CreateLogin,
    SubmitClaim,
    ReviewClaim,
    PutBlobRef,
};

std::string_view to_string(TxKind kind);
std::optional<TxKind> tx_kind_from_string(std::string_view name);
Permission permission_for(TxKind kind);

// A signed envelope around one payload. There is deliberately no fee field.
struct Transaction {
    Digest tx_id;
    TxKind kind = TxKind::CreatePatient;
    Document payload;
    std::string signer_user;
    PublicKey signer_key;
    Signature signature;
    Timestamp timestamp;

    // Everything except txId and signature; txId = digest(encode(body)).
    Document body() const;
    Bytes signing_bytes() const { return encode_canonical(body()); }
    Digest compute_id() const { return digest(signing_bytes()); }

    bool operator==(const Transaction&) const = default;
};

Transaction make_transaction(TxKind kind, Document payload, std::string signer_user, const KeyPair& keys,
                             Timestamp timestamp);

// Full form including "txId" and "signature" (hex strings).
Document to_document(const Transaction& tx);
Transaction transaction_from_document(const Document& doc);

// Checks that need no ledger state: id, payload schema and signature against
// the embedded signer key.
void check_stateless(const Transaction& tx);

struct BlobRef {
    Digest hash;
    std::string media_type;
    std::int64_t size = 0;
};

Document to_document(const BlobRef& r);
BlobRef blob_ref_from_document(const Document& doc);

struct Validator {
    std::string id;
    PublicKey key;
    bool operator==(const Validator&) const = default;
};

struct CommitSignature {
    std::string node_id;
    std::int64_t round = 0;
    Signature signature;
    bool operator==(const CommitSignature&) const = default;
};

struct Block {
    std::int64_t height = 0;
    Digest prev_hash;
    std::vector<Transaction> txs;
    std::string proposer;
    // Quorum certificate: precommit signatures for this block's hash. Not
    // covered by hash(), so replicas holding different quorums agree on it.
    std::vector<CommitSignature> commit_signatures;

    Document header() const;
    Digest hash() const { return digest_of(header()); }

    bool operator==(const Block&) const = default;
};

Document to_document(const Block& b);
Block block_from_document(const Document& doc);

// Bytes a validator signs for a vote; `vote_type` is "prevote" or
// "precommit" and a missing hash is a vote for nil.
Bytes vote_signing_bytes(std::string_view vote_type, std::int64_t height, std::int64_t round,
                         const std::optional<Digest>& block_hash);

struct Genesis {
    std::string chain_id;
    std::vector<Validator> validators;
    std::vector<LoginRecord> logins;

    Document to_document() const;
    Digest digest() const { return digest_of(to_document()); }
    static Genesis from_document(const Document& doc);
};

// Reads a genesis file in either canonical binary or JSON text notation.
Genesis load_genesis(const std::string& path);
void save_genesis(const Genesis& g, const std::string& path);

struct PrescriptionEntry {
    PrescriptionRecord record;
    Timestamp timestamp;
    Digest tx_id;
    bool operator==(const PrescriptionEntry&) const = default;
};

struct LedgerState {
    std::string chain_id;
    std::vector<Validator> validators;
    std::int64_t height = 0;
    Digest last_block_hash;

    std::map<std::string, std::vector<PatientRecord>> patients; // phone -> versions, oldest first
    std::map<std::string, std::string> db_identifiers;          // dbIdentifier -> phone
    std::map<std::string, PrescriptionEntry> prescriptions;     // visitId
    std::map<std::string, LoginRecord> logins;                  // user
    std::map<Digest, Claim> claims;
    std::set<Digest> blob_refs;
    std::set<Digest> tx_ids;

    Digest state_hash;

    const PatientRecord* latest_patient(std::string_view phone) const;
    const LoginRecord* login(std::string_view user) const;
    const Validator* validator(std::string_view id) const;
};

Block genesis_block(const Genesis& g);
LedgerState genesis_state(const Genesis& g);

// The canonical document the state hash is computed over.
Document state_document(const LedgerState& state);
Digest compute_state_hash(const LedgerState& state);

struct ValidatedTx {
    Transaction tx;
    std::variant<PatientRecord, PrescriptionRecord, LoginRecord, Claim, BlobRef> effect;
    Warnings warnings;
};

ValidatedTx validate_tx(const LedgerState& state, const Transaction& tx);

// Applies an already-validated transaction in place.
void apply_validated(LedgerState& state, const ValidatedTx& vtx);

// Executes the block's transactions without checking its certificate.
// Throws BadHeight, BadLink or InvalidTxInBlock; `state` is never modified.
LedgerState execute_block(const LedgerState& state, const Block& block);

// Throws BadCertificate unless the block carries >= quorum distinct, valid
// precommit signatures from the state's validator set.
void verify_commit(const LedgerState& state, const Block& block);

// Committed-chain transition: verify_commit then execute_block.
LedgerState apply_block(const LedgerState& state, const Block& block);

std::int64_t quorum(std::int64_t n);

} // namespace medledger
