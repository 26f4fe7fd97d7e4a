#include "medledger/consensus.hpp"

#include <algorithm>

#include "doc_util.hpp"

namespace medledger::consensus {
namespace {

using namespace medledger::detail;

constexpr std::size_t kMaxBuffered = 4096;

// One-shot trigger ids, keyed together with the round in NodeState::fired.
enum Rule : int { PrevoteTimer = 2, PolkaBlock = 3, PrecommitTimer = 5 };

std::string_view vote_label(VoteType t) { return t == VoteType::Prevote ? "prevote" : "precommit"; }

class Machine {
public:
    explicit Machine(NodeState s) { r_.state = std::move(s); }

    HandleResult run(const Event& event) {
        std::visit([this](const auto& e) { on(e); }, event);
        return std::move(r_);
    }

private:
    NodeState& s() { return r_.state; }
    std::int64_t n() { return static_cast<std::int64_t>(s().validator_count()); }
    std::int64_t q() { return quorum(n()); }
    std::int64_t f_plus_one() { return (n() - 1) / 3 + 1; }

    // ---- event entry points ----

    void on(const Start&) { start_round(0); }

    void on(const SubmitTx& e) {
        const auto& id = e.tx.tx_id;
        if (s().ledger->tx_ids.contains(id)) return;
        for (const auto& p : s().pending)
            if (p.tx.tx_id == id) return;
        s().pending.push_back({e.tx, 0});
    }

    void on(const Timeout& t) {
        if (t.height != s().height || t.round != s().round) return;
        switch (t.step) {
        case Step::Propose:
            if (s().step == Step::Propose) {
                cast_vote(VoteType::Prevote, std::nullopt);
                s().step = Step::Prevote;
            }
            break;
        case Step::Prevote:
            if (s().step == Step::Prevote) {
                cast_vote(VoteType::Precommit, std::nullopt);
                s().step = Step::Precommit;
            }
            break;
        case Step::Precommit: start_round(s().round + 1); return;
        }
        evaluate();
    }

    void on(const Message& m) {
        if (const auto* d = std::get_if<Decision>(&m)) {
            // Stale decisions are dropped silently so two hosts never bounce them back and forth.
            if (d->block.height == s().height)
                if (auto st = execute(d->block)) commit(d->block, st);
            return;
        }
        auto h = height_of(m);
        if (h < s().height) {
            r_.notices.push_back({ErrorCode::StaleMessage, sender_of(m), h});
            return;
        }
        if (h == s().height + 1) {
            if (s().future.size() < kMaxBuffered) s().future.push_back(m);
            return;
        }
        if (h != s().height) return;
        if (const auto* p = std::get_if<Proposal>(&m)) {
            if (record_proposal(*p)) evaluate();
        } else if (const auto* v = std::get_if<Vote>(&m)) {
            if (record_vote(*v)) evaluate();
        }
    }

    // ---- message log ----

    bool record_proposal(const Proposal& p) {
        if (p.proposer != proposer_for(s().ledger->validators, p.height, p.round)) return false;
        // A re-proposed valid block keeps the proposer that built it.
        if (p.block.height != p.height) return false;
        auto [it, inserted] = s().proposals.emplace(p.round, p);
        if (!inserted) {
            if (it->second.block.hash() != p.block.hash()) {
                s().evidence.push_back({p.proposer, it->second, p});
                r_.notices.push_back({ErrorCode::EquivocationDetected, p.proposer, p.height});
            }
            return false;
        }
        return true;
    }

    bool record_vote(const Vote& v) {
        if (!s().ledger->validator(v.voter)) return false;
        auto& bucket = s().votes[{v.round, v.type}];
        auto [it, inserted] = bucket.emplace(v.voter, v);
        if (!inserted) {
            if (it->second.block_hash != v.block_hash) {
                s().evidence.push_back({v.voter, it->second, v});
                r_.notices.push_back({ErrorCode::EquivocationDetected, v.voter, v.height});
            }
            return false;
        }
        return true;
    }

    std::int64_t count(std::int64_t round, VoteType type) {
        auto it = s().votes.find({round, type});
        return it == s().votes.end() ? 0 : static_cast<std::int64_t>(it->second.size());
    }

    std::int64_t count(std::int64_t round, VoteType type, const std::optional<Digest>& hash) {
        auto it = s().votes.find({round, type});
        if (it == s().votes.end()) return 0;
        return std::count_if(it->second.begin(), it->second.end(),
                             [&](const auto& kv) { return kv.second.block_hash == hash; });
    }

    // Block hash with a quorum of `type` votes in `round`, if any.
    std::optional<Digest> quorum_block(std::int64_t round, VoteType type) {
        auto it = s().votes.find({round, type});
        if (it == s().votes.end()) return std::nullopt;
        std::map<Digest, std::int64_t> tally;
        for (const auto& [_, v] : it->second)
            if (v.block_hash && ++tally[*v.block_hash] >= q()) return v.block_hash;
        return std::nullopt;
    }

    const Block* known_block(const Digest& hash) {
        for (const auto& [_, p] : s().proposals)
            if (p.block.hash() == hash) return &p.block;
        return nullptr;
    }

    // ---- ledger interaction ----

    std::shared_ptr<const LedgerState> execute(const Block& block) {
        auto hash = block.hash();
        if (auto it = s().executed.find(hash); it != s().executed.end()) return it->second;
        std::shared_ptr<const LedgerState> result;
        try {
            result = std::make_shared<const LedgerState>(execute_block(*s().ledger, block));
        } catch (const Error&) {
        }
        s().executed.emplace(hash, result);
        return result;
    }

    Block build_block() {
        Block b;
        b.height = s().height;
        b.prev_hash = s().ledger->last_block_hash;
        b.proposer = s().node_id;
        LedgerState running = *s().ledger;
        auto& pending = s().pending;
        for (auto it = pending.begin(); it != pending.end() && b.txs.size() < s().params.max_block_txs;) {
            try {
                apply_validated(running, validate_tx(running, it->tx));
                b.txs.push_back(it->tx);
                ++it;
            } catch (const Error& e) {
                bool replay = e.code() == ErrorCode::DuplicateId && e.subject() == "txId";
                if (replay || ++it->skips >= s().params.max_skips)
                    it = pending.erase(it);
                else
                    ++it;
            }
        }
        running.height = b.height;
        running.last_block_hash = b.hash();
        running.state_hash = compute_state_hash(running);
        s().executed.emplace(b.hash(), std::make_shared<const LedgerState>(std::move(running)));
        return b;
    }

    // ---- actions ----

    void broadcast(Message m) { r_.outbound.push_back({std::nullopt, std::move(m)}); }

    void cast_vote(VoteType type, std::optional<Digest> hash) {
        auto v = make_vote(s().height, s().round, type, hash, s().node_id, s().key);
        record_vote(v);
        broadcast(std::move(v));
    }

    void schedule(Step step) {
        r_.timers.push_back({{step, s().height, s().round}, timeout_for(s().params, s().round)});
    }

    bool fire_once(int rule) { return s().fired.insert({s().round, rule}).second; }

    void start_round(std::int64_t round) {
        s().round = round;
        s().step = Step::Propose;
        if (proposer_for(s().ledger->validators, s().height, round) == s().node_id) {
            Block block = s().valid ? s().valid->block : build_block();
            auto p = make_proposal(s().height, round, std::move(block), s().node_id, s().key);
            record_proposal(p);
            broadcast(std::move(p));
        } else {
            schedule(Step::Propose);
        }
        evaluate();
    }

    void commit(Block block, std::shared_ptr<const LedgerState> next) {
        if (block.commit_signatures.empty()) {
            auto hash = block.hash();
            for (const auto& [key, bucket] : s().votes) {
                if (key.second != VoteType::Precommit) continue;
                std::vector<CommitSignature> cert;
                for (const auto& [voter, v] : bucket)
                    if (v.block_hash == hash) cert.push_back({voter, v.round, v.signature});
                if (static_cast<std::int64_t>(cert.size()) >= q()) {
                    block.commit_signatures = std::move(cert);
                    break;
                }
            }
        }
        r_.committed.push_back({block, next->state_hash});

        auto& pending = s().pending;
        std::erase_if(pending, [&](const PendingTx& p) { return next->tx_ids.contains(p.tx.tx_id); });

        s().ledger = std::move(next);
        s().height += 1;
        s().round = 0;
        s().step = Step::Propose;
        s().locked.reset();
        s().valid.reset();
        s().proposals.clear();
        s().votes.clear();
        s().executed.clear();
        s().fired.clear();
        auto buffered = std::move(s().future);
        s().future.clear();

        start_round(0);
        for (const auto& m : buffered) {
            if (height_of(m) != s().height) continue;
            on(m);
        }
    }

    // Applies every enabled rule until none fires. Returns early after a
    // commit or round change, since those re-enter evaluate() themselves.
    void evaluate() {
        for (;;) {
            const auto round = s().round;

            // Unlock on a prevote quorum for a different block in a later round.
            if (s().locked) {
                for (auto r = s().locked->round + 1; r <= round; ++r) {
                    auto polka = quorum_block(r, VoteType::Prevote);
                    if (polka && *polka != s().locked->hash) {
                        s().locked.reset();
                        break;
                    }
                }
            }

            // Commit on a precommit quorum for a known, valid block in any round.
            for (const auto& [key, _] : s().votes) {
                if (key.second != VoteType::Precommit) continue;
                auto hash = quorum_block(key.first, VoteType::Precommit);
                if (!hash) continue;
                const Block* block = known_block(*hash);
                if (!block) continue;
                if (auto next = execute(*block)) {
                    commit(*block, next);
                    return;
                }
            }

            // Round skip: f+1 validators already at a later round.
            std::int64_t skip_to = -1;
            {
                std::map<std::int64_t, std::set<std::string>> senders;
                for (const auto& [r, p] : s().proposals)
                    if (r > round) senders[r].insert(p.proposer);
                for (const auto& [key, bucket] : s().votes)
                    if (key.first > round)
                        for (const auto& [voter, _] : bucket) senders[key.first].insert(voter);
                for (const auto& [r, who] : senders)
                    if (static_cast<std::int64_t>(who.size()) >= f_plus_one()) skip_to = std::max(skip_to, r);
            }
            if (skip_to > round) {
                start_round(skip_to);
                return;
            }

            if (s().step == Step::Propose) {
                if (auto it = s().proposals.find(round); it != s().proposals.end()) {
                    const auto& block = it->second.block;
                    auto hash = block.hash();
                    bool acceptable = execute(block) && (!s().locked || s().locked->hash == hash);
                    cast_vote(VoteType::Prevote, acceptable ? std::optional(hash) : std::nullopt);
                    s().step = Step::Prevote;
                    continue;
                }
            }

            if (s().step != Step::Propose) {
                auto polka = quorum_block(round, VoteType::Prevote);
                auto it = s().proposals.find(round);
                if (polka && it != s().proposals.end() && it->second.block.hash() == *polka &&
                    execute(it->second.block) && fire_once(PolkaBlock)) {
                    Locked l{it->second.block, *polka, round};
                    if (s().step == Step::Prevote) {
                        s().locked = l;
                        cast_vote(VoteType::Precommit, *polka);
                        s().step = Step::Precommit;
                    }
                    s().valid = std::move(l);
                    continue;
                }
            }

            if (s().step == Step::Prevote) {
                if (count(round, VoteType::Prevote, std::nullopt) >= q()) {
                    cast_vote(VoteType::Precommit, std::nullopt);
                    s().step = Step::Precommit;
                    continue;
                }
                if (count(round, VoteType::Prevote) >= q() && fire_once(PrevoteTimer)) {
                    schedule(Step::Prevote);
                    continue;
                }
            }

            if (count(round, VoteType::Precommit) >= q() && fire_once(PrecommitTimer)) {
                schedule(Step::Precommit);
                continue;
            }

            return;
        }
    }

    HandleResult r_;
};

Document vote_document(const Vote& v) {
    return Map{
        {"type", std::string(vote_label(v.type))},
        {"height", v.height},
        {"round", v.round},
        {"blockHash", v.block_hash ? v.block_hash->hex() : std::string()},
        {"voter", v.voter},
        {"signature", v.signature.hex()},
    };
}

} // namespace

std::string_view to_string(Step s) {
    switch (s) {
    case Step::Propose: return "propose";
    case Step::Prevote: return "prevote";
    case Step::Precommit: return "precommit";
    }
    return "unknown";
}

std::string_view to_string(VoteType t) { return vote_label(t); }

std::int64_t height_of(const Message& m) {
    return std::visit(
        [](const auto& x) -> std::int64_t {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Decision>)
                return x.block.height;
            else
                return x.height;
        },
        m);
}

std::string sender_of(const Message& m) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Proposal>)
                return x.proposer;
            else if constexpr (std::is_same_v<T, Vote>)
                return x.voter;
            else
                return x.block.proposer;
        },
        m);
}

Document to_document(const Message& m) {
    return std::visit(
        [](const auto& x) -> Document {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Proposal>) {
                return Map{{"type", "proposal"},   {"height", x.height},     {"round", x.round},
                           {"block", medledger::to_document(x.block)},       {"proposer", x.proposer},
                           {"signature", x.signature.hex()}};
            } else if constexpr (std::is_same_v<T, Vote>) {
                return vote_document(x);
            } else {
                return Map{{"type", "decision"}, {"block", medledger::to_document(x.block)}};
            }
        },
        m);
}

Message message_from_document(const Document& doc) {
    const auto& type = get_string(doc, "type");
    if (type == "proposal") {
        static constexpr const char* kKeys[] = {"type", "height", "round", "block", "proposer", "signature"};
        only_keys(doc, kKeys);
        return Proposal{get_int(doc, "height"), get_int(doc, "round"), block_from_document(get(doc, "block")),
                        get_string(doc, "proposer"), Signature::from_hex(get_string(doc, "signature"))};
    }
    if (type == "prevote" || type == "precommit") {
        static constexpr const char* kKeys[] = {"type", "height", "round", "blockHash", "voter", "signature"};
        only_keys(doc, kKeys);
        const auto& hash = get_string(doc, "blockHash");
        return Vote{get_int(doc, "height"),
                    get_int(doc, "round"),
                    type == "prevote" ? VoteType::Prevote : VoteType::Precommit,
                    hash.empty() ? std::nullopt : std::optional(Digest::from_hex(hash)),
                    get_string(doc, "voter"),
                    Signature::from_hex(get_string(doc, "signature"))};
    }
    if (type == "decision") {
        static constexpr const char* kKeys[] = {"type", "block"};
        only_keys(doc, kKeys);
        return Decision{block_from_document(get(doc, "block"))};
    }
    throw Error(ErrorCode::WrongType, "type", "unknown consensus message type '" + type + "'");
}

Bytes encode_message(const Message& m) { return encode_canonical(to_document(m)); }

Message decode_message(ByteView bytes) { return message_from_document(decode_canonical(bytes)); }

Proposal make_proposal(std::int64_t height, std::int64_t round, Block block, const std::string& proposer,
                       const PrivateKey& key) {
    auto sig = sign(key, vote_signing_bytes("proposal", height, round, block.hash()));
    return Proposal{height, round, std::move(block), proposer, sig};
}

Vote make_vote(std::int64_t height, std::int64_t round, VoteType type, std::optional<Digest> block_hash,
               const std::string& voter, const PrivateKey& key) {
    auto sig = sign(key, vote_signing_bytes(vote_label(type), height, round, block_hash));
    return Vote{height, round, type, block_hash, voter, sig};
}

bool verify_message(const LedgerState& state, const Message& m) {
    if (const auto* p = std::get_if<Proposal>(&m)) {
        const auto* v = state.validator(p->proposer);
        return v && verify(v->key, vote_signing_bytes("proposal", p->height, p->round, p->block.hash()), p->signature);
    }
    if (const auto* vote = std::get_if<Vote>(&m)) {
        const auto* v = state.validator(vote->voter);
        return v && verify(v->key, vote_signing_bytes(vote_label(vote->type), vote->height, vote->round, vote->block_hash),
                           vote->signature);
    }
    try {
        verify_commit(state, std::get<Decision>(m).block);
        return true;
    } catch (const Error&) {
        return false;
    }
}

std::int64_t timeout_for(const Params& p, std::int64_t round) { return p.timeout_base * (1 + round); }

std::string proposer_for(const std::vector<Validator>& validators, std::int64_t height, std::int64_t round) {
    auto n = static_cast<std::int64_t>(validators.size());
    return validators[static_cast<std::size_t>((height + round) % n)].id;
}

NodeState make_node(std::string node_id, PrivateKey key, std::shared_ptr<const LedgerState> ledger, Params params) {
    NodeState s;
    s.node_id = std::move(node_id);
    s.key = std::move(key);
    s.params = params;
    s.height = ledger->height + 1;
    s.ledger = std::move(ledger);
    return s;
}

std::vector<Message> own_messages(const NodeState& s) {
    std::vector<Message> out;
    for (const auto& [_, p] : s.proposals)
        if (p.proposer == s.node_id) out.emplace_back(p);
    for (const auto& [_, bucket] : s.votes)
        if (auto it = bucket.find(s.node_id); it != bucket.end()) out.emplace_back(it->second);
    return out;
}

HandleResult handle(NodeState state, const Event& event) { return Machine(std::move(state)).run(event); }

} // namespace medledger::consensus
