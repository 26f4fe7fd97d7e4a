#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "medledger/codec.hpp"
#include "medledger/consensus.hpp"
#include "medledger/ledger.hpp"

namespace medledger::simnet {

// Deterministic discrete-event simulator hosting N consensus nodes.

enum class ByzantineBehavior { EquivocateProposals, VoteBothWays, Silent };

std::string_view to_string(ByzantineBehavior b);
std::optional<ByzantineBehavior> byzantine_behavior_from_string(std::string_view s);

struct Crash {
    std::string node_id;
    std::int64_t at_tick = 0;
};

// Messages sent while fromTick <= tick <= toTick across the cut are dropped.
struct Partition {
    std::vector<std::string> group_a;
    std::vector<std::string> group_b;
    std::int64_t from_tick = 0;
    std::int64_t to_tick = 0;
};

struct Byzantine {
    std::string node_id;
    ByzantineBehavior behavior = ByzantineBehavior::Silent;
};

using Fault = std::variant<Crash, Partition, Byzantine>;

struct DelayModel {
    enum class Kind { Fixed, Uniform } kind = Kind::Fixed;
    std::int64_t min = 1; // fixed delay uses min
    std::int64_t max = 1;
};

struct Workload {
    std::int64_t tx_count = 0;
    std::string mix = "mixed"; // "mixed" or "patients"
};

struct Scenario {
    std::uint64_t seed = 0;
    int nodes = 4;
    std::vector<Fault> faults;
    DelayModel delay_model;
    Workload workload;
    std::int64_t max_ticks = 10'000;
    consensus::Params params;
};

// Throws InvalidScenario.
void validate(const Scenario& s);

// JSON scenario files. Keys: seed, nodes, faults[{type: Crash|Partition|Byzantine, ...}],
// delayModel{type: fixed|uniform, ticks | min,max}, workload{txCount, mix}, maxTicks,
// and optionally timeoutBase / maxBlockTxs.
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::string& path);

std::string node_name(int index);

// Deterministic keys and genesis used by every simulation.
KeyPair sim_key(const std::string& name);
Genesis sim_genesis(int nodes);

// Signed transactions that commit cleanly when applied in order on sim_genesis.
std::vector<Transaction> generate_workload(const Workload& w, std::uint64_t seed);

struct TraceEvent {
    std::int64_t tick = 0;
    std::string node;
    std::string kind; // proposal, prevote, precommit, decision, timeout, commit, crash, evidence, stale
    Digest digest;
    std::int64_t height = 0;
    std::int64_t round = 0;
};

struct NodeResult {
    bool honest = true;
    std::optional<std::int64_t> crashed_at;
    std::vector<Block> chain; // committed blocks from height 1
    std::vector<std::int64_t> commit_ticks;
    Digest state_hash;
    std::vector<consensus::Evidence> evidence;
};

struct Trace {
    std::vector<TraceEvent> events;
    std::map<std::string, NodeResult> nodes;
    std::int64_t end_tick = 0;
    std::size_t workload_size = 0;
    bool workload_committed = false;
};

Trace run(const Scenario& scenario);

// One line per event: "<tick> <node> <kind> <digest hex>".
std::string export_trace(const Trace& t);

struct Disagreement {
    std::int64_t height = 0;
    std::map<std::string, Digest> hashes; // honest node -> block hash
};

struct AgreementReport {
    bool pass = true;
    std::vector<Disagreement> disagreements;
    std::int64_t heights_checked = 0;
};

AgreementReport assert_agreement(const Trace& t);

// Fault-free run of a generated mixed workload, timed on the wall clock from
// workload generation until every node has committed it.
struct BenchResult {
    std::int64_t tx_count = 0;
    std::int64_t committed_txs = 0; // as seen by node0
    std::int64_t blocks = 0;
    double seconds = 0;
    double tx_per_sec = 0;
    bool agreement = false; // every node ended on the same state hash
    Digest state_hash;
};

BenchResult bench(std::int64_t tx_count, int nodes = 4, std::uint64_t seed = 1);

} // namespace medledger::simnet
