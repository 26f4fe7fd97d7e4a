#include "medledger/simnet.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "medledger/error.hpp"
#include "medledger/records.hpp"
#include "medledger/workflows.hpp"

namespace medledger::simnet {
namespace {

using nlohmann::json;
using consensus::HandleResult;
using consensus::Message;
using consensus::NodeState;

constexpr std::int64_t kWorkloadEpoch = 1'700'000'000'000;
constexpr std::int64_t kMsPerYear = 31'556'952'000;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidScenario, {}, what); }

// Uniform draw in [lo, hi] via plain modulo, so a seed replays identically
// on every standard library.
std::int64_t draw(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// ---- workload ----

class WorkloadBuilder {
public:
    WorkloadBuilder(std::uint64_t seed) : rng_(seed ^ 0x6d65646c65646765ULL) {}

    std::vector<Transaction> build(const Workload& w) {
        static const std::vector<std::pair<std::string, ElevationLevel>> staff = {
            {"admin", ElevationLevel::HospitalAdmin},
            {"doctor", ElevationLevel::Doctor},
            {"insurer", ElevationLevel::InsuranceAdmin},
        };
        for (const auto& [user, level] : staff) {
            if (static_cast<std::int64_t>(out_.size()) >= w.tx_count) return out_;
            emit("root", TxKind::CreateLogin, login(user, level, next_phone()));
        }
        while (static_cast<std::int64_t>(out_.size()) < w.tx_count) {
            if (w.mix == "patients" || patients_.empty()) {
                create_patient();
                continue;
            }
            auto r = rng_() % 100;
            bool done = false;
            if (r < 30) done = create_patient();
            else if (r < 45) done = create_prescription();
            else if (r < 55) done = amend_patient();
            else if (r < 65) done = submit_claim();
            else if (r < 75) done = review_claim();
            else if (r < 85) done = put_blob();
            else done = patient_login();
            if (!done) create_patient();
        }
        return out_;
    }

private:
    struct VisitInfo {
        std::string visit_id;
        std::string phone;
        bool insured = false;
    };

    void emit(const std::string& signer, TxKind kind, Document payload) {
        auto ts = Timestamp{kWorkloadEpoch + static_cast<std::int64_t>(out_.size()) * 1000};
        auto& keys = keys_.try_emplace(signer, sim_key(signer)).first->second;
        last_ = make_transaction(kind, std::move(payload), signer, keys, ts);
        out_.push_back(last_);
    }

    std::string next_phone() {
        for (;;) {
            auto phone = "9" + std::to_string(100'000'000 + draw(rng_, 0, 899'999'999));
            if (phones_.insert(phone).second) return phone;
        }
    }

    Document login(const std::string& user, ElevationLevel level, const std::string& mob) {
        static const PasswordHash pass = [] {
            std::array<std::uint8_t, 16> salt{};
            salt.fill(0x5a);
            return make_password_hash("simnet-password", salt);
        }();
        return to_document(LoginRecord{user, pass, mob, level, sim_key(user).public_key});
    }

    Document patient(const std::string& phone, const std::string& db_id, std::int64_t age, bool insured) {
        static const char* genders[] = {"F", "M", "O"};
        static const char* allergies[] = {"none", "penicillin", "peanuts", "latex", "dust"};
        return Map{
            {"dbIdentifier", db_id},
            {"name", "patient-" + phone},
            {"gender", genders[rng_() % 3]},
            {"age", age},
            {"dob", Timestamp{kWorkloadEpoch - age * kMsPerYear - draw(rng_, 0, kMsPerYear / 2)}},
            {"phone", phone},
            {"photo", ""},
            {"bloodgroup", std::string(kBloodGroups[rng_() % kBloodGroups.size()])},
            {"superset", "PATIENT"},
            {"docdetails", Map{{"type", "aadhaar"}, {"number", std::to_string(draw(rng_, 100'000'000'000, 999'999'999'999))}}},
            {"allergies", allergies[rng_() % 5]},
            {"insurance", insured ? "POL-" + std::to_string(draw(rng_, 1000, 9999)) : std::string()},
        };
    }

    bool create_patient() {
        auto phone = next_phone();
        bool insured = rng_() % 5 != 0;
        patients_.push_back({phone, "DB-" + phone, insured, false});
        emit("admin", TxKind::CreatePatient, patient(phone, "DB-" + phone, draw(rng_, 0, 90), insured));
        return true;
    }

    bool amend_patient() {
        auto& p = patients_[rng_() % patients_.size()];
        emit("doctor", TxKind::AmendPatient, patient(p.phone, p.db_id, draw(rng_, 0, 90), p.insured));
        return true;
    }

    bool create_prescription() {
        const auto& p = patients_[rng_() % patients_.size()];
        auto visit = "V-" + std::to_string(visits_.size() + 1);
        static const char* problems[] = {"fever", "fracture", "diabetes", "asthma", "migraine"};
        emit("doctor", TxKind::CreatePrescription,
             Map{{"visitId", visit},
                 {"docname", "Dr. Sim"},
                 {"patientnum", p.phone},
                 {"problem", problems[rng_() % 5]},
                 {"prescription", "rest"},
                 {"billamt", draw(rng_, 0, 50'000)},
                 {"attachment", ""}});
        visits_.push_back({visit, p.phone, p.insured});
        return true;
    }

    bool submit_claim() {
        std::vector<const VisitInfo*> open;
        for (const auto& v : visits_)
            if (v.insured && !claimed_.contains(v.visit_id)) open.push_back(&v);
        if (open.empty()) return false;
        const auto* v = open[rng_() % open.size()];
        emit("doctor", TxKind::SubmitClaim, to_document(SubmitClaimRequest{v->visit_id, v->phone}));
        claimed_.insert(v->visit_id);
        claims_.push_back({last_.tx_id, v->visit_id, ClaimStatus::Pending});
        return true;
    }

    bool review_claim() {
        std::vector<std::size_t> live;
        for (std::size_t i = 0; i < claims_.size(); ++i)
            if (claims_[i].status != ClaimStatus::Revoked) live.push_back(i);
        if (live.empty()) return false;
        auto& c = claims_[live[rng_() % live.size()]];
        auto verdict = c.status == ClaimStatus::Pending && rng_() % 3 != 0 ? Verdict::Approve : Verdict::Revoke;
        emit("insurer", TxKind::ReviewClaim, to_document(ReviewClaimRequest{c.id, verdict}));
        c.status = target_status(verdict);
        if (c.status == ClaimStatus::Revoked) claimed_.erase(c.visit_id);
        return true;
    }

    bool put_blob() {
        auto hash = digest("sim-blob:" + std::to_string(out_.size()) + ":" + std::to_string(rng_()));
        static const char* types[] = {"pdf", "png", "jpg"};
        emit("doctor", TxKind::PutBlobRef, to_document(BlobRef{hash, types[rng_() % 3], draw(rng_, 1, 1 << 20)}));
        return true;
    }

    bool patient_login() {
        for (auto& p : patients_) {
            if (p.has_login) continue;
            p.has_login = true;
            emit("admin", TxKind::CreateLogin, login("user-" + p.phone, ElevationLevel::Patient, p.phone));
            return true;
        }
        return false;
    }

    struct PatientInfo {
        std::string phone;
        std::string db_id;
        bool insured = false;
        bool has_login = false;
    };
    struct ClaimInfo {
        Digest id;
        std::string visit_id;
        ClaimStatus status;
    };

    std::mt19937_64 rng_;
    std::vector<Transaction> out_;
    Transaction last_;
    std::map<std::string, KeyPair> keys_;
    std::set<std::string> phones_;
    std::vector<PatientInfo> patients_;
    std::vector<VisitInfo> visits_;
    std::set<std::string> claimed_;
    std::vector<ClaimInfo> claims_;
};

// ---- simulator ----

struct Resend {};

struct Delivery {
    std::int64_t tick;
    std::string target;
    std::uint64_t seq;
    std::variant<Message, consensus::Timeout, Resend> payload;
    std::string from;
};

struct Later {
    bool operator()(const Delivery& a, const Delivery& b) const {
        return std::tie(a.tick, a.target, a.seq) > std::tie(b.tick, b.target, b.seq);
    }
};

struct SimNode {
    std::string id;
    NodeState state;
    std::optional<ByzantineBehavior> byzantine;
    std::optional<std::int64_t> crash_tick;
    std::set<std::pair<std::string, std::int64_t>> decisions_sent;
    std::int64_t height_at_last_resend = 0;
};

std::string message_kind(const Message& m) {
    if (std::holds_alternative<consensus::Proposal>(m)) return "proposal";
    if (const auto* v = std::get_if<consensus::Vote>(&m)) return std::string(consensus::to_string(v->type));
    return "decision";
}

std::int64_t message_round(const Message& m) {
    if (const auto* p = std::get_if<consensus::Proposal>(&m)) return p->round;
    if (const auto* v = std::get_if<consensus::Vote>(&m)) return v->round;
    return 0;
}

class Simulator {
public:
    explicit Simulator(const Scenario& sc) : sc_(sc), rng_(sc.seed) {
        auto genesis = sim_genesis(sc.nodes);
        auto ledger = std::make_shared<const LedgerState>(genesis_state(genesis));
        for (int i = 0; i < sc.nodes; ++i) {
            auto id = node_name(i);
            nodes_.push_back({id, consensus::make_node(id, sim_key(id).private_key, ledger, sc.params), {}, {}, {}});
            trace_.nodes[id].state_hash = ledger->state_hash;
        }
        for (const auto& f : sc.faults) {
            if (const auto* c = std::get_if<Crash>(&f)) {
                auto& n = node(c->node_id);
                n.crash_tick = n.crash_tick ? std::min(*n.crash_tick, c->at_tick) : c->at_tick;
            } else if (const auto* b = std::get_if<Byzantine>(&f)) {
                node(b->node_id).byzantine = b->behavior;
                trace_.nodes[b->node_id].honest = false;
            } else {
                partitions_.push_back(std::get<Partition>(f));
            }
        }
        auto workload = generate_workload(sc.workload, sc.seed);
        trace_.workload_size = workload.size();
        for (const auto& tx : workload) {
            check_stateless(tx);
            workload_ids_.insert(tx.tx_id);
        }
        for (auto& n : nodes_)
            for (const auto& tx : workload) n.state.pending.push_back({tx, 0});
    }

    Trace run() {
        for (auto& n : nodes_) {
            if (is_down(n, 0)) continue;
            step(n, 0, consensus::Start{});
            queue_.push({sc_.params.resend_interval, n.id, seq_++, Resend{}, n.id});
        }
        std::int64_t now = 0;
        while (!queue_.empty() && !workload_done()) {
            auto d = queue_.top();
            if (d.tick > sc_.max_ticks) break;
            queue_.pop();
            now = d.tick;
            auto& n = node(d.target);
            if (is_down(n, now)) continue;
            if (auto* m = std::get_if<Message>(&d.payload)) {
                if (!consensus::verify_message(*n.state.ledger, *m)) continue;
                step(n, now, *m);
            } else if (std::holds_alternative<Resend>(d.payload)) {
                resend(n, now);
            } else {
                const auto& t = std::get<consensus::Timeout>(d.payload);
                record(now, n.id, "timeout", digest_of(Map{{"step", std::string(consensus::to_string(t.step))},
                                                            {"height", t.height},
                                                            {"round", t.round}}),
                       t.height, t.round);
                step(n, now, t);
            }
        }
        for (auto& n : nodes_) {
            auto& r = trace_.nodes[n.id];
            r.crashed_at = n.crash_tick;
            r.evidence = n.state.evidence;
            if (n.crash_tick) record(*n.crash_tick, n.id, "crash", Digest{}, 0, 0);
        }
        std::stable_sort(trace_.events.begin(), trace_.events.end(),
                         [](const TraceEvent& a, const TraceEvent& b) { return a.tick < b.tick; });
        trace_.workload_committed = workload_done();
        trace_.end_tick = trace_.workload_committed ? now : sc_.max_ticks;
        return std::move(trace_);
    }

private:
    SimNode& node(const std::string& id) {
        for (auto& n : nodes_)
            if (n.id == id) return n;
        invalid("unknown node '" + id + "'");
    }

    bool is_down(const SimNode& n, std::int64_t tick) const {
        return (n.crash_tick && *n.crash_tick <= tick) || n.byzantine == ByzantineBehavior::Silent;
    }

    bool honest_live(const SimNode& n) const { return !n.byzantine && !n.crash_tick; }

    bool workload_done() const {
        for (const auto& n : nodes_) {
            if (!honest_live(n)) continue;
            const auto& ids = n.state.ledger->tx_ids;
            for (const auto& id : workload_ids_)
                if (!ids.contains(id)) return false;
        }
        return true;
    }

    bool cut(const std::string& a, const std::string& b, std::int64_t tick) const {
        for (const auto& p : partitions_) {
            if (tick < p.from_tick || tick > p.to_tick) continue;
            auto in = [](const std::vector<std::string>& g, const std::string& x) {
                return std::find(g.begin(), g.end(), x) != g.end();
            };
            if ((in(p.group_a, a) && in(p.group_b, b)) || (in(p.group_b, a) && in(p.group_a, b))) return true;
        }
        return false;
    }

    std::int64_t delay() {
        const auto& m = sc_.delay_model;
        return m.kind == DelayModel::Kind::Fixed ? m.min : draw(rng_, m.min, m.max);
    }

    void record(std::int64_t tick, const std::string& node, std::string kind, const Digest& d, std::int64_t h,
                std::int64_t r) {
        trace_.events.push_back({tick, node, std::move(kind), d, h, r});
    }

    void send(SimNode& from, const std::string& to, Message m, std::int64_t now) {
        if (cut(from.id, to, now)) return;
        queue_.push({now + delay(), to, seq_++, std::move(m), from.id});
    }

    std::vector<std::string> peers(const SimNode& self) const {
        std::vector<std::string> out;
        for (const auto& n : nodes_)
            if (n.id != self.id) out.push_back(n.id);
        return out;
    }

    void step(SimNode& n, std::int64_t now, const consensus::Event& ev) {
        HandleResult res = consensus::handle(std::move(n.state), ev);
        n.state = std::move(res.state);

        for (auto& t : res.timers)
            queue_.push({now + t.delay, n.id, seq_++, t.timeout, n.id});

        for (auto& out : res.outbound) {
            auto bytes = consensus::encode_message(out.message);
            record(now, n.id, message_kind(out.message), digest(bytes), consensus::height_of(out.message),
                   message_round(out.message));
            if (out.to) {
                send(n, *out.to, std::move(out.message), now);
                continue;
            }
            auto targets = peers(n);
            if (n.byzantine == ByzantineBehavior::EquivocateProposals &&
                std::holds_alternative<consensus::Proposal>(out.message)) {
                equivocate(n, std::get<consensus::Proposal>(out.message), targets, now);
            } else if (n.byzantine == ByzantineBehavior::VoteBothWays &&
                       std::holds_alternative<consensus::Vote>(out.message)) {
                vote_both_ways(n, std::get<consensus::Vote>(out.message), targets, now);
            } else {
                for (const auto& t : targets) send(n, t, out.message, now);
            }
        }

        for (const auto& c : res.committed) {
            auto& r = trace_.nodes[n.id];
            r.chain.push_back(c.block);
            r.commit_ticks.push_back(now);
            r.state_hash = c.state_hash;
            record(now, n.id, "commit", c.block.hash(), c.block.height,
                   c.block.commit_signatures.empty() ? 0 : c.block.commit_signatures.front().round);
        }

        for (const auto& notice : res.notices) {
            if (notice.code == ErrorCode::EquivocationDetected) {
                record(now, n.id, "evidence", digest(notice.node_id), notice.height, 0);
                continue;
            }
            // Peer is stuck on an older height: hand it the certified block.
            const auto& chain = trace_.nodes[n.id].chain;
            auto h = notice.height;
            if (h < 1 || h > static_cast<std::int64_t>(chain.size())) continue;
            if (!n.decisions_sent.insert({notice.node_id, h}).second) continue;
            consensus::Decision d{chain[static_cast<std::size_t>(h - 1)]};
            record(now, n.id, "decision", d.block.hash(), h, 0);
            send(n, notice.node_id, d, now);
        }
    }

    void resend(SimNode& n, std::int64_t now) {
        if (n.state.height == n.height_at_last_resend)
            for (const auto& m : consensus::own_messages(n.state))
                for (const auto& t : peers(n)) send(n, t, m, now);
        n.height_at_last_resend = n.state.height;
        queue_.push({now + sc_.params.resend_interval, n.id, seq_++, Resend{}, n.id});
    }

    // Sends the honest proposal to the first half of the peers and a second,
    // conflicting block to the rest.
    void equivocate(SimNode& n, const consensus::Proposal& p, const std::vector<std::string>& targets,
                    std::int64_t now) {
        Block alt = p.block;
        if (alt.txs.empty())
            alt.txs.push_back(make_transaction(TxKind::PutBlobRef,
                                               to_document(BlobRef{digest("equivocation"), "pdf", 1}), n.id,
                                               sim_key(n.id), Timestamp{now}));
        else
            alt.txs.pop_back();
        auto second = consensus::make_proposal(p.height, p.round, std::move(alt), p.proposer, n.state.key);
        for (std::size_t i = 0; i < targets.size(); ++i)
            send(n, targets[i], i < (targets.size() + 1) / 2 ? Message(p) : Message(second), now);
    }

    void vote_both_ways(SimNode& n, const consensus::Vote& v, const std::vector<std::string>& targets,
                        std::int64_t now) {
        std::optional<Digest> flipped;
        if (!v.block_hash) flipped = digest("vote-both-ways:" + std::to_string(v.height) + ":" + std::to_string(v.round));
        auto other = consensus::make_vote(v.height, v.round, v.type, flipped, v.voter, n.state.key);
        for (std::size_t i = 0; i < targets.size(); ++i)
            send(n, targets[i], i % 2 == 0 ? Message(v) : Message(other), now);
    }

    const Scenario& sc_;
    std::mt19937_64 rng_;
    std::vector<SimNode> nodes_;
    std::vector<Partition> partitions_;
    std::priority_queue<Delivery, std::vector<Delivery>, Later> queue_;
    std::uint64_t seq_ = 0;
    std::set<Digest> workload_ids_;
    Trace trace_;
};

json node_list(const std::vector<std::string>& v) { return json(v); }

} // namespace

std::string_view to_string(ByzantineBehavior b) {
    switch (b) {
    case ByzantineBehavior::EquivocateProposals: return "equivocateProposals";
    case ByzantineBehavior::VoteBothWays: return "voteBothWays";
    case ByzantineBehavior::Silent: return "silent";
    }
    return "silent";
}

std::optional<ByzantineBehavior> byzantine_behavior_from_string(std::string_view s) {
    for (auto b : {ByzantineBehavior::EquivocateProposals, ByzantineBehavior::VoteBothWays, ByzantineBehavior::Silent})
        if (to_string(b) == s) return b;
    return std::nullopt;
}

std::string node_name(int index) { return "node" + std::to_string(index); }

void validate(const Scenario& s) {
    if (s.nodes < 1) invalid("nodes must be >= 1");
    if (s.max_ticks <= 0) invalid("maxTicks must be > 0");
    if (s.workload.tx_count < 0) invalid("workload.txCount must be >= 0");
    if (s.workload.mix != "mixed" && s.workload.mix != "patients") invalid("workload.mix must be mixed or patients");
    const auto& d = s.delay_model;
    if (d.min < 0 || (d.kind == DelayModel::Kind::Uniform && d.max < d.min)) invalid("delayModel range is invalid");
    if (s.params.timeout_base <= 0) invalid("timeoutBase must be > 0");
    if (s.params.max_block_txs == 0) invalid("maxBlockTxs must be > 0");
    auto known = [&](const std::string& id) {
        for (int i = 0; i < s.nodes; ++i)
            if (node_name(i) == id) return true;
        return false;
    };
    auto need = [&](const std::string& id) {
        if (!known(id)) invalid("node id '" + id + "' out of range");
    };
    for (const auto& f : s.faults) {
        if (const auto* c = std::get_if<Crash>(&f)) {
            need(c->node_id);
            if (c->at_tick < 0) invalid("crash atTick must be >= 0");
        } else if (const auto* p = std::get_if<Partition>(&f)) {
            for (const auto& id : p->group_a) need(id);
            for (const auto& id : p->group_b) need(id);
            if (p->from_tick > p->to_tick) invalid("partition fromTick > toTick");
        } else {
            need(std::get<Byzantine>(f).node_id);
        }
    }
}

Scenario scenario_from_json(const std::string& text) {
    Scenario s;
    try {
        auto j = json::parse(text);
        static const std::set<std::string> keys = {"seed",     "nodes",    "faults",      "delayModel",
                                                   "workload", "maxTicks", "timeoutBase", "maxBlockTxs"};
        for (const auto& [k, _] : j.items())
            if (!keys.contains(k)) invalid("unknown key '" + k + "'");
        s.seed = j.at("seed").get<std::uint64_t>();
        s.nodes = j.at("nodes").get<int>();
        s.max_ticks = j.at("maxTicks").get<std::int64_t>();
        for (const auto& f : j.value("faults", json::array())) {
            auto type = f.at("type").get<std::string>();
            if (type == "Crash") {
                s.faults.push_back(Crash{f.at("nodeId").get<std::string>(), f.value("atTick", std::int64_t{0})});
            } else if (type == "Partition") {
                s.faults.push_back(Partition{f.at("groupA").get<std::vector<std::string>>(),
                                             f.at("groupB").get<std::vector<std::string>>(),
                                             f.at("fromTick").get<std::int64_t>(), f.at("toTick").get<std::int64_t>()});
            } else if (type == "Byzantine") {
                auto b = byzantine_behavior_from_string(f.at("behavior").get<std::string>());
                if (!b) invalid("unknown byzantine behavior");
                s.faults.push_back(Byzantine{f.at("nodeId").get<std::string>(), *b});
            } else {
                invalid("unknown fault type '" + type + "'");
            }
        }
        if (j.contains("delayModel")) {
            const auto& d = j["delayModel"];
            auto type = d.at("type").get<std::string>();
            if (type == "fixed") {
                s.delay_model = {DelayModel::Kind::Fixed, d.at("ticks").get<std::int64_t>(), d.at("ticks").get<std::int64_t>()};
            } else if (type == "uniform") {
                s.delay_model = {DelayModel::Kind::Uniform, d.at("min").get<std::int64_t>(), d.at("max").get<std::int64_t>()};
            } else {
                invalid("unknown delayModel type '" + type + "'");
            }
        }
        if (j.contains("workload")) {
            s.workload.tx_count = j["workload"].value("txCount", std::int64_t{0});
            s.workload.mix = j["workload"].value("mix", std::string("mixed"));
        }
        s.params.timeout_base = j.value("timeoutBase", s.params.timeout_base);
        s.params.max_block_txs = j.value("maxBlockTxs", s.params.max_block_txs);
    } catch (const json::exception& e) {
        invalid(e.what());
    }
    validate(s);
    return s;
}

std::string scenario_to_json(const Scenario& s) {
    json j;
    j["seed"] = s.seed;
    j["nodes"] = s.nodes;
    j["maxTicks"] = s.max_ticks;
    j["timeoutBase"] = s.params.timeout_base;
    j["maxBlockTxs"] = s.params.max_block_txs;
    json faults = json::array();
    for (const auto& f : s.faults) {
        if (const auto* c = std::get_if<Crash>(&f))
            faults.push_back({{"type", "Crash"}, {"nodeId", c->node_id}, {"atTick", c->at_tick}});
        else if (const auto* p = std::get_if<Partition>(&f))
            faults.push_back({{"type", "Partition"},
                              {"groupA", node_list(p->group_a)},
                              {"groupB", node_list(p->group_b)},
                              {"fromTick", p->from_tick},
                              {"toTick", p->to_tick}});
        else {
            const auto& b = std::get<Byzantine>(f);
            faults.push_back({{"type", "Byzantine"}, {"nodeId", b.node_id}, {"behavior", to_string(b.behavior)}});
        }
    }
    j["faults"] = faults;
    if (s.delay_model.kind == DelayModel::Kind::Fixed)
        j["delayModel"] = {{"type", "fixed"}, {"ticks", s.delay_model.min}};
    else
        j["delayModel"] = {{"type", "uniform"}, {"min", s.delay_model.min}, {"max", s.delay_model.max}};
    j["workload"] = {{"txCount", s.workload.tx_count}, {"mix", s.workload.mix}};
    return j.dump(2);
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, path, "cannot open scenario file");
    std::stringstream ss;
    ss << in.rdbuf();
    return scenario_from_json(ss.str());
}

KeyPair sim_key(const std::string& name) { return generate_key_pair(digest("medledger-sim:" + name).bytes); }

Genesis sim_genesis(int nodes) {
    Genesis g;
    g.chain_id = "medledger-sim";
    for (int i = 0; i < nodes; ++i) g.validators.push_back({node_name(i), sim_key(node_name(i)).public_key});
    std::array<std::uint8_t, 16> salt{};
    salt.fill(0x11);
    g.logins.push_back(
        {"root", make_password_hash("root", salt), "9000000000", ElevationLevel::SystemAdmin, sim_key("root").public_key});
    return g;
}

std::vector<Transaction> generate_workload(const Workload& w, std::uint64_t seed) {
    return WorkloadBuilder(seed).build(w);
}

Trace run(const Scenario& scenario) {
    validate(scenario);
    return Simulator(scenario).run();
}

std::string export_trace(const Trace& t) {
    std::string out;
    for (const auto& e : t.events)
        out += std::to_string(e.tick) + " " + e.node + " " + e.kind + " " + e.digest.hex() + "\n";
    return out;
}

BenchResult bench(std::int64_t tx_count, int nodes, std::uint64_t seed) {
    Scenario sc;
    sc.seed = seed;
    sc.nodes = nodes;
    sc.workload = {tx_count, "mixed"};
    sc.max_ticks = 10'000'000;
    auto t0 = std::chrono::steady_clock::now();
    auto trace = run(sc);
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    BenchResult r;
    r.tx_count = tx_count;
    const auto& first = trace.nodes.begin()->second;
    for (const auto& b : first.chain) r.committed_txs += static_cast<std::int64_t>(b.txs.size());
    r.blocks = static_cast<std::int64_t>(first.chain.size());
    r.seconds = secs;
    r.tx_per_sec = secs > 0 ? static_cast<double>(r.committed_txs) / secs : 0;
    r.state_hash = first.state_hash;
    r.agreement = trace.workload_committed && assert_agreement(trace).pass &&
                  std::all_of(trace.nodes.begin(), trace.nodes.end(),
                              [&](const auto& kv) { return kv.second.state_hash == first.state_hash; });
    return r;
}

AgreementReport assert_agreement(const Trace& t) {
    AgreementReport report;
    std::map<std::int64_t, std::map<std::string, Digest>> by_height;
    for (const auto& [id, n] : t.nodes) {
        if (!n.honest) continue;
        for (const auto& b : n.chain) by_height[b.height][id] = b.hash();
    }
    for (auto& [h, hashes] : by_height) {
        if (hashes.size() < 2) continue;
        ++report.heights_checked;
        const auto& first = hashes.begin()->second;
        bool agree = std::all_of(hashes.begin(), hashes.end(), [&](const auto& kv) { return kv.second == first; });
        if (!agree) {
            report.pass = false;
            report.disagreements.push_back({h, std::move(hashes)});
        }
    }
    return report;
}

} // namespace medledger::simnet
