#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "medledger/crypto.hpp"
#include "medledger/error.hpp"
#include "medledger/ledger.hpp"

namespace medledger::consensus {

// Tendermint-style round-based BFT agreement as a pure state machine:
// propose -> prevote -> precommit -> commit with 2f+1 quorums.

using medledger::quorum;

enum class Step { Propose, Prevote, Precommit };
enum class VoteType { Prevote, Precommit };

std::string_view to_string(Step s);
std::string_view to_string(VoteType t);

struct Proposal {
    std::int64_t height = 0;
    std::int64_t round = 0;
    Block block;
    std::string proposer;
    Signature signature; // over vote_signing_bytes("proposal", height, round, block.hash())

    bool operator==(const Proposal&) const = default;
};

struct Vote {
    std::int64_t height = 0;
    std::int64_t round = 0;
    VoteType type = VoteType::Prevote;
    std::optional<Digest> block_hash; // nullopt = nil
    std::string voter;
    Signature signature;

    bool operator==(const Vote&) const = default;
};

// A committed block with its quorum certificate, sent to peers that are
// still voting on an older height so they can catch up.
struct Decision {
    Block block;
    bool operator==(const Decision&) const = default;
};

using Message = std::variant<Proposal, Vote, Decision>;

std::int64_t height_of(const Message& m);
std::string sender_of(const Message& m);

Document to_document(const Message& m);
Message message_from_document(const Document& doc);
Bytes encode_message(const Message& m);
Message decode_message(ByteView bytes);

Proposal make_proposal(std::int64_t height, std::int64_t round, Block block, const std::string& proposer,
                       const PrivateKey& key);
Vote make_vote(std::int64_t height, std::int64_t round, VoteType type, std::optional<Digest> block_hash,
               const std::string& voter, const PrivateKey& key);

// Signature check done by the host before handing a message to handle().
// Decisions are checked against the certificate rules of verify_commit.
bool verify_message(const LedgerState& state, const Message& m);

struct Timeout {
    Step step = Step::Propose;
    std::int64_t height = 0;
    std::int64_t round = 0;
    bool operator==(const Timeout&) const = default;
};

struct Start {};

struct SubmitTx {
    Transaction tx;
};

using Event = std::variant<Start, Message, Timeout, SubmitTx>;

struct Params {
    std::int64_t timeout_base = 10; // ticks in simnet, milliseconds live
    std::size_t max_block_txs = 500;
    // A pending tx skipped this many times by our own proposals is dropped.
    int max_skips = 5;
    // Hosts resend own_messages() when a height has not advanced for this long.
    std::int64_t resend_interval = 50;
    bool operator==(const Params&) const = default;
};

// timeout(r) = base * (1 + r)
std::int64_t timeout_for(const Params& p, std::int64_t round);

std::string proposer_for(const std::vector<Validator>& validators, std::int64_t height, std::int64_t round);

struct Locked {
    Block block;
    Digest hash;
    std::int64_t round = 0;
    bool operator==(const Locked&) const = default;
};

struct Evidence {
    std::string node_id;
    Message first;
    Message second;
    bool operator==(const Evidence&) const = default;
};

struct PendingTx {
    Transaction tx;
    int skips = 0;
    bool operator==(const PendingTx&) const = default;
};

struct NodeState {
    std::string node_id;
    PrivateKey key;
    Params params;

    // Last committed ledger state; readers may share the snapshot.
    std::shared_ptr<const LedgerState> ledger;

    std::int64_t height = 1;
    std::int64_t round = 0;
    Step step = Step::Propose;
    std::optional<Locked> locked;
    std::optional<Locked> valid; // most recent block with a prevote quorum

    // Message log for the current height.
    std::map<std::int64_t, Proposal> proposals;
    std::map<std::pair<std::int64_t, VoteType>, std::map<std::string, Vote>> votes;
    std::map<Digest, std::shared_ptr<const LedgerState>> executed; // nullptr = invalid block
    std::set<std::pair<std::int64_t, int>> fired;                  // (round, rule) one-shot triggers
    std::vector<Message> future;                                   // buffered for height + 1

    std::vector<Evidence> evidence;
    std::deque<PendingTx> pending;

    std::size_t validator_count() const { return ledger->validators.size(); }
    bool is_validator() const { return ledger->validator(node_id) != nullptr; }
    bool operator==(const NodeState&) const = default;
};

NodeState make_node(std::string node_id, PrivateKey key, std::shared_ptr<const LedgerState> ledger, Params params = {});

struct TimerRequest {
    Timeout timeout;
    std::int64_t delay = 0;
};

struct Outbound {
    std::optional<std::string> to; // nullopt = broadcast to all other validators
    Message message;
};

struct CommittedBlock {
    Block block; // carries its quorum certificate
    Digest state_hash;
};

struct Notice {
    ErrorCode code; // StaleMessage or EquivocationDetected
    std::string node_id;
    std::int64_t height = 0;
};

struct HandleResult {
    NodeState state;
    std::vector<Outbound> outbound;
    std::vector<TimerRequest> timers;
    std::vector<CommittedBlock> committed;
    std::vector<Notice> notices;
};

// This node's own proposals and votes for the current height. Hosts resend
// them periodically while a height is stuck, so peers that missed them (a
// healed partition, a late joiner) can still reach quorum.
std::vector<Message> own_messages(const NodeState& s);

// Pure transition. Message signatures must already be verified.
HandleResult handle(NodeState state, const Event& event);

} // namespace medledger::consensus
