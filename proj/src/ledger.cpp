#include "medledger/ledger.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doc_util.hpp"

namespace medledger {
namespace {

using namespace detail;

constexpr std::array kTxKindNames = {
    std::pair{TxKind::CreatePatient, "CreatePatient"},
    std::pair{TxKind::AmendPatient, "AmendPatient"},
    std::pair{TxKind::CreatePrescription, "CreatePrescription"},
    std::pair{TxKind::CreateLogin, "CreateLogin"},
    std::pair{TxKind::SubmitClaim, "SubmitClaim"},
    std::pair{TxKind::ReviewClaim, "ReviewClaim"},
    std::pair{TxKind::PutBlobRef, "PutBlobRef"},
};

constexpr std::array kMediaTypes = {"pdf", "png", "jpg"};

Document validator_document(const Validator& v) { return Map{{"id", v.id}, {"key", v.key.hex()}}; }

Validator validator_from_document(const Document& doc) {
    static constexpr const char* kKeys[] = {"id", "key"};
    only_keys(doc, kKeys);
    return {get_string(doc, "id"), PublicKey::from_hex(get_string(doc, "key"))};
}

List digest_list(const std::set<Digest>& digests) {
    List out;
    out.reserve(digests.size());
    for (const auto& d : digests) out.emplace_back(d.to_bytes());
    return out;
}

const LoginRecord& require_signer(const LedgerState& state, const Transaction& tx) {
    const auto* login = state.login(tx.signer_user);
    if (!login) throw Error(ErrorCode::UnknownSigner, tx.signer_user);
    if (login->key != tx.signer_key || !verify(login->key, tx.signing_bytes(), tx.signature))
        throw Error(ErrorCode::KeyMismatch, tx.signer_user, "signature does not verify against the registered key");
    if (!authorize(*login, permission_for(tx.kind)))
        throw Error(ErrorCode::PermissionDenied, tx.signer_user,
                    std::string(to_string(tx.kind)) + " requires " +
                        std::string(to_string(minimum_elevation(permission_for(tx.kind)))));
    return *login;
}

} // namespace

std::string_view to_string(TxKind kind) {
    for (const auto& [k, name] : kTxKindNames)
        if (k == kind) return name;
    return "Unknown";
}

std::optional<TxKind> tx_kind_from_string(std::string_view name) {
    for (const auto& [k, n] : kTxKindNames)
        if (name == n) return k;
    return std::nullopt;
}

Permission permission_for(TxKind kind) {
    switch (kind) {
    case TxKind::CreatePatient: return Permission::CreatePatient;
    case TxKind::AmendPatient: return Permission::AmendPatient;
    case TxKind::CreatePrescription: return Permission::CreatePrescription;
    case TxKind::CreateLogin: return Permission::CreateLogin;
    case TxKind::SubmitClaim: return Permission::SubmitClaim;
    case TxKind::ReviewClaim: return Permission::ReviewClaim;
    case TxKind::PutBlobRef: return Permission::PutBlob;
    }
    return Permission::PutBlob;
}

// ---- Transaction ----

Document Transaction::body() const {
    return Map{
        {"kind", std::string(to_string(kind))},
        {"payload", payload},
        {"signerPublicKey", signer_key.hex()},
        {"signerUser", signer_user},
        {"timestamp", timestamp},
    };
}

Transaction make_transaction(TxKind kind, Document payload, std::string signer_user, const KeyPair& keys,
                             Timestamp timestamp) {
    Transaction tx;
    tx.kind = kind;
    tx.payload = std::move(payload);
    tx.signer_user = std::move(signer_user);
    tx.signer_key = keys.public_key;
    tx.timestamp = timestamp;
    auto body = tx.signing_bytes();
    tx.tx_id = digest(body);
    tx.signature = sign(keys.private_key, body);
    return tx;
}

Document to_document(const Transaction& tx) {
    auto doc = tx.body();
    doc.as_map().emplace("txId", tx.tx_id.hex());
    doc.as_map().emplace("signature", tx.signature.hex());
    return doc;
}

Transaction transaction_from_document(const Document& doc) {
    static constexpr const char* kKeys[] = {"kind",      "payload",   "signerPublicKey", "signerUser",
                                            "timestamp", "txId",      "signature"};
    only_keys(doc, kKeys);
    Transaction tx;
    auto kind = tx_kind_from_string(get_string(doc, "kind"));
    if (!kind) throw Error(ErrorCode::WrongType, "kind", "unknown transaction kind");
    tx.kind = *kind;
    tx.payload = get(doc, "payload");
    tx.signer_key = PublicKey::from_hex(get_string(doc, "signerPublicKey"));
    tx.signer_user = get_string(doc, "signerUser");
    tx.timestamp = get_timestamp(doc, "timestamp");
    tx.tx_id = get_digest_hex(doc, "txId");
    tx.signature = Signature::from_hex(get_string(doc, "signature"));
    return tx;
}

namespace {

void validate_payload_shape(const Transaction& tx) {
    switch (tx.kind) {
    case TxKind::CreatePatient:
    case TxKind::AmendPatient: validate_patient(tx.payload); break;
    case TxKind::CreatePrescription: validate_prescription(tx.payload); break;
    case TxKind::CreateLogin: validate_login(tx.payload); break;
    case TxKind::SubmitClaim: parse_submit_claim(tx.payload); break;
    case TxKind::ReviewClaim: parse_review_claim(tx.payload); break;
    case TxKind::PutBlobRef: blob_ref_from_document(tx.payload); break;
    }
}

} // namespace

void check_stateless(const Transaction& tx) {
    auto body = tx.signing_bytes();
    if (digest(body) != tx.tx_id) throw Error(ErrorCode::TxIdMismatch, tx.tx_id.hex());
    validate_payload_shape(tx);
    if (!verify(tx.signer_key, body, tx.signature))
        throw Error(ErrorCode::KeyMismatch, tx.signer_user, "signature does not verify");
}

// ---- BlobRef ----

Document to_document(const BlobRef& r) {
    return Map{{"hash", r.hash.hex()}, {"mediaType", r.media_type}, {"size", r.size}};
}

BlobRef blob_ref_from_document(const Document& doc) {
    static constexpr const char* kKeys[] = {"hash", "mediaType", "size"};
    only_keys(doc, kKeys);
    BlobRef r{get_digest_hex(doc, "hash"), get_string(doc, "mediaType"), get_int(doc, "size")};
    if (std::find(kMediaTypes.begin(), kMediaTypes.end(), r.media_type) == kMediaTypes.end())
        throw Error(ErrorCode::UnsupportedMediaType, r.media_type);
    if (r.size <= 0) throw Error(ErrorCode::InvariantViolation, "size", "must be positive");
    return r;
}

// ---- Block ----

Document Block::header() const {
    List ids;
    ids.reserve(txs.size());
    for (const auto& tx : txs) ids.emplace_back(tx.tx_id.to_bytes());
    return Map{
        {"height", height},
        {"prevHash", prev_hash.to_bytes()},
        {"proposer", proposer},
        {"txIds", std::move(ids)},
    };
}

Document to_document(const Block& b) {
    List txs;
    for (const auto& tx : b.txs) txs.push_back(to_document(tx));
    List sigs;
    for (const auto& cs : b.commit_signatures)
        sigs.push_back(Map{{"nodeId", cs.node_id}, {"round", cs.round}, {"signature", cs.signature.hex()}});
    return Map{
        {"height", b.height},          {"prevHash", b.prev_hash.hex()}, {"proposer", b.proposer},
        {"txs", std::move(txs)},       {"commitSignatures", std::move(sigs)},
    };
}

Block block_from_document(const Document& doc) {
    static constexpr const char* kKeys[] = {"height", "prevHash", "proposer", "txs", "commitSignatures"};
    only_keys(doc, kKeys);
    Block b;
    b.height = get_int(doc, "height");
    b.prev_hash = get_digest_hex(doc, "prevHash");
    b.proposer = get_string(doc, "proposer");
    for (const auto& tx : get_list(doc, "txs")) b.txs.push_back(transaction_from_document(tx));
    for (const auto& cs : get_list(doc, "commitSignatures"))
        b.commit_signatures.push_back(
            {get_string(cs, "nodeId"), get_int(cs, "round"), Signature::from_hex(get_string(cs, "signature"))});
    return b;
}

Bytes vote_signing_bytes(std::string_view vote_type, std::int64_t height, std::int64_t round,
                         const std::optional<Digest>& block_hash) {
    return encode_canonical(Map{
        {"blockHash", block_hash ? block_hash->to_bytes() : Bytes{}},
        {"height", height},
        {"round", round},
        {"type", std::string(vote_type)},
    });
}

std::int64_t quorum(std::int64_t n) { return 2 * ((n - 1) / 3) + 1; }

// ---- Genesis ----

Document Genesis::to_document() const {
    List vals;
    for (const auto& v : validators) vals.push_back(validator_document(v));
    List ls;
    for (const auto& l : logins) ls.push_back(medledger::to_document(l));
    return Map{{"chainId", chain_id}, {"validators", std::move(vals)}, {"logins", std::move(ls)}};
}

Genesis Genesis::from_document(const Document& doc) {
    static constexpr const char* kKeys[] = {"chainId", "validators", "logins"};
    only_keys(doc, kKeys);
    Genesis g;
    g.chain_id = get_string(doc, "chainId");
    for (const auto& v : get_list(doc, "validators")) g.validators.push_back(validator_from_document(v));
    for (const auto& l : get_list(doc, "logins")) g.logins.push_back(validate_login(l));
    if (g.validators.empty()) throw Error(ErrorCode::InvariantViolation, "validators", "must be non-empty");
    std::set<std::string> ids;
    for (const auto& v : g.validators)
        if (!ids.insert(v.id).second) throw Error(ErrorCode::DuplicateId, v.id);
    std::set<std::string> users;
    for (const auto& l : g.logins)
        if (!users.insert(l.user).second) throw Error(ErrorCode::DuplicateId, l.user);
    return g;
}

Genesis load_genesis(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, path, "cannot open genesis file");
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!raw.empty() && static_cast<std::uint8_t>(raw[0]) == static_cast<std::uint8_t>(Tag::Map))
        return Genesis::from_document(decode_canonical(as_bytes(raw)));
    try {
        return Genesis::from_document(from_json(nlohmann::json::parse(raw)));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedEncoding, path, e.what());
    }
}

void save_genesis(const Genesis& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, path, "cannot write genesis file");
    out << to_json(g.to_document()).dump(2) << "\n";
}

// ---- State ----

const PatientRecord* LedgerState::latest_patient(std::string_view phone) const {
    auto it = patients.find(std::string(phone));
    return it == patients.end() || it->second.empty() ? nullptr : &it->second.back();
}

const LoginRecord* LedgerState::login(std::string_view user) const {
    auto it = logins.find(std::string(user));
    return it == logins.end() ? nullptr : &it->second;
}

const Validator* LedgerState::validator(std::string_view id) const {
    for (const auto& v : validators)
        if (v.id == id) return &v;
    return nullptr;
}

Block genesis_block(const Genesis& g) {
    Block b;
    b.height = 0;
    b.prev_hash = g.digest();
    return b;
}

LedgerState genesis_state(const Genesis& g) {
    LedgerState s;
    s.chain_id = g.chain_id;
    s.validators = g.validators;
    s.height = 0;
    s.last_block_hash = genesis_block(g).hash();
    for (const auto& l : g.logins) s.logins.emplace(l.user, l);
    s.state_hash = compute_state_hash(s);
    return s;
}

Document state_document(const LedgerState& s) {
    List vals;
    for (const auto& v : s.validators) vals.push_back(validator_document(v));
    Map patients;
    for (const auto& [phone, versions] : s.patients) {
        List vs;
        for (const auto& p : versions) vs.push_back(to_document(p));
        patients.emplace(phone, std::move(vs));
    }
    Map prescriptions;
    for (const auto& [visit, e] : s.prescriptions)
        prescriptions.emplace(visit, Map{{"record", to_document(e.record)},
                                         {"timestamp", e.timestamp},
                                         {"txId", e.tx_id.to_bytes()}});
    Map logins;
    for (const auto& [user, l] : s.logins) logins.emplace(user, to_document(l));
    Map claims;
    for (const auto& [id, c] : s.claims) claims.emplace(id.hex(), to_document(c));
    return Map{
        {"blobRefs", digest_list(s.blob_refs)},
        {"chainId", s.chain_id},
        {"claims", std::move(claims)},
        {"height", s.height},
        {"logins", std::move(logins)},
        {"patients", std::move(patients)},
        {"prescriptions", std::move(prescriptions)},
        {"txIds", digest_list(s.tx_ids)},
        {"validators", std::move(vals)},
    };
}

Digest compute_state_hash(const LedgerState& state) { return digest_of(state_document(state)); }

// ---- Validation and transition ----

ValidatedTx validate_tx(const LedgerState& state, const Transaction& tx) {
    if (tx.compute_id() != tx.tx_id) throw Error(ErrorCode::TxIdMismatch, tx.tx_id.hex());
    if (state.tx_ids.contains(tx.tx_id)) throw Error(ErrorCode::DuplicateId, "txId", tx.tx_id.hex());

    ValidatedTx out{tx, BlobRef{}, {}};
    switch (tx.kind) {
    case TxKind::CreatePatient: {
        auto p = validate_patient(tx.payload, tx.timestamp, &out.warnings);
        require_signer(state, tx);
        if (state.db_identifiers.contains(p.db_identifier))
            throw Error(ErrorCode::DuplicateId, "dbIdentifier", p.db_identifier);
        if (state.patients.contains(p.phone)) throw Error(ErrorCode::DuplicateId, "phone", p.phone);
        out.effect = std::move(p);
        break;
    }
    case TxKind::AmendPatient: {
        auto p = validate_patient(tx.payload, tx.timestamp, &out.warnings);
        require_signer(state, tx);
        const auto* current = state.latest_patient(p.phone);
        if (!current) throw Error(ErrorCode::UnknownTarget, p.phone);
        if (current->db_identifier != p.db_identifier)
            throw Error(ErrorCode::InvariantViolation, "dbIdentifier", "amendment must keep the record id");
        out.effect = std::move(p);
        break;
    }
    case TxKind::CreatePrescription: {
        auto p = validate_prescription(tx.payload);
        auto report = check_prescription(state, tx);
        if (auto failure = report.first_failure()) throw Error(*failure, tx.signer_user);
        if (state.prescriptions.contains(p.visit_id)) throw Error(ErrorCode::DuplicateId, "visitId", p.visit_id);
        out.effect = std::move(p);
        break;
    }
    case TxKind::CreateLogin: {
        auto l = validate_login(tx.payload);
        const auto& signer = require_signer(state, tx);
        if (l.superset > signer.superset)
            throw Error(ErrorCode::PermissionDenied, tx.signer_user, "cannot grant an elevation above your own");
        if (state.logins.contains(l.user)) throw Error(ErrorCode::DuplicateId, "user", l.user);
        out.effect = std::move(l);
        break;
    }
    case TxKind::SubmitClaim:
        parse_submit_claim(tx.payload);
        require_signer(state, tx);
        out.effect = submit_claim(state, tx);
        break;
    case TxKind::ReviewClaim:
        parse_review_claim(tx.payload);
        require_signer(state, tx);
        out.effect = review_claim(state, tx);
        break;
    case TxKind::PutBlobRef: {
        auto r = blob_ref_from_document(tx.payload);
        require_signer(state, tx);
        if (state.blob_refs.contains(r.hash)) throw Error(ErrorCode::DuplicateId, "hash", r.hash.hex());
        out.effect = std::move(r);
        break;
    }
    }
    return out;
}

void apply_validated(LedgerState& state, const ValidatedTx& vtx) {
    const auto& tx = vtx.tx;
    std::visit(
        [&](const auto& effect) {
            using T = std::decay_t<decltype(effect)>;
            if constexpr (std::is_same_v<T, PatientRecord>) {
                state.db_identifiers.emplace(effect.db_identifier, effect.phone);
                state.patients[effect.phone].push_back(effect);
            } else if constexpr (std::is_same_v<T, PrescriptionRecord>) {
                state.prescriptions.emplace(effect.visit_id, PrescriptionEntry{effect, tx.timestamp, tx.tx_id});
            } else if constexpr (std::is_same_v<T, LoginRecord>) {
                state.logins.emplace(effect.user, effect);
            } else if constexpr (std::is_same_v<T, Claim>) {
                state.claims.insert_or_assign(effect.claim_id, effect);
            } else if constexpr (std::is_same_v<T, BlobRef>) {
                state.blob_refs.insert(effect.hash);
            }
        },
        vtx.effect);
    state.tx_ids.insert(tx.tx_id);
}

LedgerState execute_block(const LedgerState& state, const Block& block) {
    if (block.height != state.height + 1)
        throw Error(ErrorCode::BadHeight, std::to_string(block.height),
                    "expected " + std::to_string(state.height + 1));
    if (block.prev_hash != state.last_block_hash) throw Error(ErrorCode::BadLink, block.prev_hash.hex());
    if (!state.validator(block.proposer)) throw Error(ErrorCode::BadCertificate, block.proposer, "unknown proposer");

    LedgerState next = state;
    for (std::size_t i = 0; i < block.txs.size(); ++i) {
        try {
            apply_validated(next, validate_tx(next, block.txs[i]));
        } catch (const Error& e) {
            throw Error::in_block(i, e);
        }
    }
    next.height = block.height;
    next.last_block_hash = block.hash();
    next.state_hash = compute_state_hash(next);
    return next;
}

void verify_commit(const LedgerState& state, const Block& block) {
    auto hash = block.hash();
    std::set<std::string> signers;
    for (const auto& cs : block.commit_signatures) {
        const auto* v = state.validator(cs.node_id);
        if (!v) throw Error(ErrorCode::BadCertificate, cs.node_id, "not a validator");
        if (!verify(v->key, vote_signing_bytes("precommit", block.height, cs.round, hash), cs.signature))
            throw Error(ErrorCode::BadCertificate, cs.node_id, "invalid precommit signature");
        signers.insert(cs.node_id);
    }
    auto need = quorum(static_cast<std::int64_t>(state.validators.size()));
    if (static_cast<std::int64_t>(signers.size()) < need)
        throw Error(ErrorCode::BadCertificate, std::to_string(block.height),
                    std::to_string(signers.size()) + " distinct signatures, need " + std::to_string(need));
}

LedgerState apply_block(const LedgerState& state, const Block& block) {
    if (block.height != state.height + 1)
        throw Error(ErrorCode::BadHeight, std::to_string(block.height),
                    "expected " + std::to_string(state.height + 1));
    if (block.prev_hash != state.last_block_hash) throw Error(ErrorCode::BadLink, block.prev_hash.hex());
    verify_commit(state, block);
    return execute_block(state, block);
}

} // namespace medledger
