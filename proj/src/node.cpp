#include "medledger/node.hpp"

#include <httplib.h>

#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "doc_util.hpp"
#include "medledger/acl.hpp"
#include "medledger/error.hpp"
#include "medledger/simnet.hpp"
#include "medledger/workflows.hpp"

namespace medledger::node {
namespace {

using namespace medledger::detail;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

[[noreturn]] void bad_request(const std::string& what) { throw Error(ErrorCode::BadRequest, {}, what); }

Timestamp now_ms() {
    return Timestamp{std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count()};
}

bool curable(ErrorCode c) {
    switch (c) {
    case ErrorCode::UnknownSigner:
    case ErrorCode::UnknownPatient:
    case ErrorCode::UnknownTarget:
    case ErrorCode::UnknownVisit:
    case ErrorCode::UnknownClaim: return true;
    default: return false;
    }
}

void reply(httplib::Response& res, int status, const Document& doc) {
    res.status = status;
    res.set_content(to_json(doc).dump(), "application/json");
}

void reply_error(httplib::Response& res, const Error& e) { reply(res, http_status(e.code()), error_document(e)); }

// Runs a handler, mapping every failure to a structured error body.
template <typename F>
auto guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            reply_error(res, e);
        } catch (const json::exception& e) {
            reply_error(res, Error(ErrorCode::BadRequest, {}, std::string("malformed JSON: ") + e.what()));
        } catch (const std::exception& e) {
            reply_error(res, Error(ErrorCode::IoError, {}, e.what()));
        }
    };
}

Document parse_body(const httplib::Request& req) { return from_json(json::parse(req.body)); }

std::int64_t parse_int(const std::string& s, const char* name) {
    try {
        std::size_t used = 0;
        auto v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::BadRequest, name, "expected an integer");
    }
}

const char* mime_for(const std::string& media_type) {
    if (media_type == "pdf") return "application/pdf";
    if (media_type == "png") return "image/png";
    return "image/jpeg";
}

} // namespace

// ---- config ----

NodeConfig config_from_json(const std::string& text) {
    NodeConfig c;
    try {
        auto j = json::parse(text);
        c.node_id = j.value("nodeId", c.node_id);
        c.listen = j.value("listen", c.listen);
        for (const auto& p : j.value("peers", json::array()))
            c.peers.push_back({p.at("id").get<std::string>(), p.at("url").get<std::string>()});
        c.genesis_path = j.value("genesis", c.genesis_path);
        c.blob_dir = j.value("blobDir", c.blob_dir);
        c.key_seed_hex = j.value("keySeed", c.key_seed_hex);
        c.timeout_base_ms = j.value("timeoutBase", c.timeout_base_ms);
        c.mode = j.value("mode", c.mode);
        c.sim_nodes = j.value("simNodes", c.sim_nodes);
        c.max_blob_bytes = j.value("maxBlobBytes", c.max_blob_bytes);
        c.token_ttl_seconds = j.value("tokenTtlSeconds", c.token_ttl_seconds);
    } catch (const json::exception& e) {
        bad_request(std::string("config: ") + e.what());
    }
    if (c.mode != "live" && c.mode != "sim") bad_request("config: mode must be live or sim");
    if (c.mode == "live" && c.genesis_path.empty()) bad_request("config: live mode needs genesis");
    if (c.mode == "live" && c.key_seed_hex.empty()) bad_request("config: live mode needs keySeed");
    if (c.timeout_base_ms <= 0) bad_request("config: timeoutBase must be positive");
    if (c.sim_nodes < 1) bad_request("config: simNodes must be >= 1");
    return c;
}

std::string config_to_json(const NodeConfig& c) {
    json peers = json::array();
    for (const auto& p : c.peers) peers.push_back({{"id", p.id}, {"url", p.url}});
    json j = {{"nodeId", c.node_id},       {"listen", c.listen},
              {"peers", peers},            {"genesis", c.genesis_path},
              {"blobDir", c.blob_dir},     {"keySeed", c.key_seed_hex},
              {"timeoutBase", c.timeout_base_ms}, {"mode", c.mode},
              {"simNodes", c.sim_nodes},   {"maxBlobBytes", c.max_blob_bytes},
              {"tokenTtlSeconds", c.token_ttl_seconds}};
    return j.dump(2);
}

NodeConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, path, "cannot open config");
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::optional<std::string> config_path(const std::optional<std::string>& flag) {
    if (flag) return flag;
    if (const char* env = std::getenv("MEDLEDGER_CONFIG"); env && *env) return std::string(env);
    return std::nullopt;
}

std::pair<std::string, int> split_host_port(const std::string& listen) {
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) bad_request("listen must be host:port");
    return {listen.substr(0, colon), static_cast<int>(parse_int(listen.substr(colon + 1), "listen"))};
}

int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::Unauthenticated: return 401;
    case ErrorCode::PermissionDenied:
    case ErrorCode::ElevationTooLow: return 403;
    case ErrorCode::NotFound:
    case ErrorCode::UnknownPatient:
    case ErrorCode::UnknownClaim:
    case ErrorCode::UnknownVisit:
    case ErrorCode::UnknownTarget: return 404;
    case ErrorCode::DuplicateId:
    case ErrorCode::IllegalTransition: return 409;
    case ErrorCode::TooLarge: return 413;
    case ErrorCode::UnsupportedMediaType: return 415;
    case ErrorCode::CorruptBlob:
    case ErrorCode::IoError: return 500;
    default: return 400;
    }
}

Document error_document(const Error& e) {
    Map err{{"code", std::string(to_string(e.code()))}, {"message", std::string(e.what())}};
    if (!e.subject().empty()) err.emplace("subject", e.subject());
    if (!e.detail().empty()) err.emplace("detail", e.detail());
    if (e.index()) err.emplace("index", static_cast<std::int64_t>(*e.index()));
    return Map{{"error", std::move(err)}};
}

// ---- envelopes and transports ----

Bytes encode_envelope(const Envelope& e) {
    return encode_canonical(
        Map{{"from", e.from}, {"genesis", e.genesis.to_bytes()}, {"payload", e.payload}, {"type", e.type}});
}

Envelope decode_envelope(ByteView bytes) {
    auto doc = decode_canonical(bytes);
    static constexpr const char* kKeys[] = {"from", "genesis", "payload", "type"};
    only_keys(doc, kKeys);
    return {get_string(doc, "from"), Digest::from_bytes(get_bytes(doc, "genesis")), get_string(doc, "type"),
            get_bytes(doc, "payload")};
}

void LocalHub::send(const std::string& peer, Bytes envelope) {
    auto it = peers_->find(peer);
    if (it != peers_->end() && it->first != self_) it->second->deliver(envelope);
}

struct HttpTransport::Lane {
    explicit Lane(const std::string& url) : client(url) {
        client.set_keep_alive(true);
        client.set_connection_timeout(std::chrono::milliseconds(500));
        client.set_read_timeout(std::chrono::seconds(2));
        worker = std::thread([this] { run(); });
    }
    ~Lane() { stop(); }

    void stop() {
        {
            std::lock_guard lk(mu);
            if (done) return;
            done = true;
        }
        cv.notify_all();
        if (worker.joinable()) worker.join();
    }

    void push(Bytes b) {
        {
            std::lock_guard lk(mu);
            if (queue.size() >= 10'000) queue.pop_front(); // resend covers anything dropped
            queue.push_back(std::move(b));
        }
        cv.notify_one();
    }

    void run() {
        for (;;) {
            Bytes b;
            {
                std::unique_lock lk(mu);
                cv.wait(lk, [&] { return done || !queue.empty(); });
                if (done) return;
                b = std::move(queue.front());
                queue.pop_front();
            }
            client.Post("/peer", std::string(b.begin(), b.end()), "application/octet-stream");
        }
    }

    httplib::Client client;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Bytes> queue;
    bool done = false;
    std::thread worker;
};

HttpTransport::HttpTransport(std::vector<PeerConfig> peers) {
    for (const auto& p : peers) lanes_.emplace(p.id, std::make_unique<Lane>(p.url));
}

HttpTransport::~HttpTransport() { stop(); }

void HttpTransport::send(const std::string& peer, Bytes envelope) {
    if (auto it = lanes_.find(peer); it != lanes_.end()) it->second->push(std::move(envelope));
}

void HttpTransport::stop() {
    for (auto& [_, lane] : lanes_) lane->stop();
}

// ---- replica ----

Replica::Replica(std::string node_id, PrivateKey key, const Genesis& genesis, consensus::Params params)
    : id_(std::move(node_id)), genesis_digest_(genesis.digest()), validators_(genesis.validators), params_(params) {
    auto state = std::make_shared<const LedgerState>(genesis_state(genesis));
    ns_ = consensus::make_node(id_, std::move(key), state, params);
    snap_ = {state, std::make_shared<const QueryIndex>(build_index(genesis))};
    status_ = {id_, state->height, 0, "propose", 0, state->state_hash, state->last_block_hash, 0};
}

Replica::~Replica() { stop(); }

void Replica::start() {
    {
        std::lock_guard lk(mu_);
        inbox_.push_back(consensus::Event(consensus::Start{}));
    }
    schedule(std::chrono::milliseconds(params_.resend_interval), Resend{});
    thread_ = std::thread([this] { loop(); });
}

void Replica::stop() {
    {
        std::lock_guard lk(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
}

void Replica::schedule(std::chrono::milliseconds delay, Timer t) {
    {
        std::lock_guard lk(mu_);
        timers_.emplace(Clock::now() + delay, std::move(t));
    }
    cv_.notify_all();
}

void Replica::deliver(ByteView bytes) {
    Envelope env;
    try {
        env = decode_envelope(bytes);
    } catch (const Error&) {
        return;
    }
    if (env.genesis != genesis_digest_) return; // peer runs a different chain
    std::optional<consensus::Event> ev;
    try {
        if (env.type == "consensus") {
            auto m = consensus::decode_message(env.payload);
            ev = consensus::Event(std::move(m));
        } else if (env.type == "tx") {
            auto tx = transaction_from_document(decode_canonical(env.payload));
            check_stateless(tx);
            ev = consensus::Event(consensus::SubmitTx{std::move(tx)});
        }
    } catch (const Error&) {
        return;
    }
    if (!ev) return;
    {
        std::lock_guard lk(mu_);
        if (inbox_.size() > 100'000) return;
        inbox_.push_back(std::move(*ev));
    }
    cv_.notify_all();
}

Admission Replica::submit(const Transaction& tx) {
    check_stateless(tx);
    auto snap = snapshot();
    if (snap.state->tx_ids.contains(tx.tx_id)) throw Error(ErrorCode::DuplicateId, "txId", tx.tx_id.hex());
    Admission a{tx.tx_id, {}};
    try {
        // The signer's own CreateLogin may still be pending; every later check depends on it.
        if (!snap.state->login(tx.signer_user)) throw Error(ErrorCode::UnknownSigner, tx.signer_user);
        a.warnings = validate_tx(*snap.state, tx).warnings;
    } catch (const Error& e) {
        if (!curable(e.code())) throw;
        a.warnings.push_back("deferred: " + std::string(to_string(e.code())) + " against the latest committed state");
    }
    {
        std::lock_guard lk(mu_);
        inbox_.push_back(consensus::Event(consensus::SubmitTx{tx}));
    }
    cv_.notify_all();
    if (transport_) {
        auto env = encode_envelope({id_, genesis_digest_, "tx", encode_canonical(to_document(tx))});
        for (const auto& v : validators_)
            if (v.id != id_) transport_->send(v.id, env);
    }
    return a;
}

Snapshot Replica::snapshot() const {
    std::lock_guard lk(snap_mu_);
    return snap_;
}

std::vector<Block> Replica::chain() const {
    std::lock_guard lk(snap_mu_);
    return chain_;
}

ReplicaStatus Replica::status() const {
    std::lock_guard lk(snap_mu_);
    return status_;
}

bool Replica::wait_until(const std::function<bool(const LedgerState&)>& pred, std::chrono::milliseconds timeout) const {
    std::unique_lock lk(snap_mu_);
    return snap_cv_.wait_for(lk, timeout, [&] { return pred(*snap_.state); });
}

void Replica::loop() {
    for (;;) {
        std::vector<Item> batch;
        {
            std::unique_lock lk(mu_);
            auto ready = [&] {
                return stopping_ || !inbox_.empty() || (!timers_.empty() && timers_.begin()->first <= Clock::now());
            };
            if (timers_.empty())
                cv_.wait(lk, ready);
            else
                cv_.wait_until(lk, timers_.begin()->first, ready);
            if (stopping_) return;
            while (!inbox_.empty()) {
                batch.push_back(std::move(inbox_.front()));
                inbox_.pop_front();
            }
            auto now = Clock::now();
            while (!timers_.empty() && timers_.begin()->first <= now) {
                batch.emplace_back(timers_.begin()->second);
                timers_.erase(timers_.begin());
            }
        }
        for (const auto& item : batch) process(item);
    }
}

void Replica::process(const Item& item) {
    if (const auto* ev = std::get_if<consensus::Event>(&item)) {
        if (const auto* m = std::get_if<consensus::Message>(ev); m && !consensus::verify_message(*ns_.ledger, *m))
            return;
        step(*ev);
        return;
    }
    const auto& timer = std::get<Timer>(item);
    if (const auto* t = std::get_if<consensus::Timeout>(&timer)) {
        step(*t);
        return;
    }
    if (ns_.height == height_at_last_resend_)
        for (const auto& m : consensus::own_messages(ns_)) send("", m);
    height_at_last_resend_ = ns_.height;
    schedule(std::chrono::milliseconds(params_.resend_interval), Resend{});
}

void Replica::send(const std::string& to, const consensus::Message& m) {
    if (!transport_) return;
    auto env = encode_envelope({id_, genesis_digest_, "consensus", consensus::encode_message(m)});
    if (!to.empty()) {
        transport_->send(to, std::move(env));
        return;
    }
    for (const auto& v : validators_)
        if (v.id != id_) transport_->send(v.id, env);
}

void Replica::step(const consensus::Event& ev) {
    auto res = consensus::handle(std::move(ns_), ev);
    ns_ = std::move(res.state);

    for (const auto& t : res.timers) schedule(std::chrono::milliseconds(t.delay), t.timeout);
    for (const auto& o : res.outbound) send(o.to.value_or(""), o.message);

    if (!res.committed.empty()) {
        std::lock_guard lk(snap_mu_);
        auto index = std::make_shared<QueryIndex>(*snap_.index);
        for (const auto& c : res.committed) {
            index->apply_block(c.block);
            chain_.push_back(c.block);
        }
        snap_ = {ns_.ledger, std::move(index)};
    }
    {
        std::lock_guard lk(snap_mu_);
        status_.height = ns_.ledger->height;
        status_.round = ns_.round;
        status_.step = std::string(consensus::to_string(ns_.step));
        status_.pending = ns_.pending.size();
        status_.state_hash = ns_.ledger->state_hash;
        status_.last_block_hash = ns_.ledger->last_block_hash;
        status_.evidence = ns_.evidence.size();
    }
    if (!res.committed.empty()) snap_cv_.notify_all();

    for (const auto& n : res.notices) {
        if (n.code == ErrorCode::EquivocationDetected) {
            std::cerr << "[" << id_ << "] equivocation by " << n.node_id << " at height " << n.height << "\n";
            continue;
        }
        Block block;
        {
            std::lock_guard lk(snap_mu_);
            if (n.height < 1 || n.height > static_cast<std::int64_t>(chain_.size())) continue;
            block = chain_[static_cast<std::size_t>(n.height - 1)];
        }
        if (!decisions_sent_.insert({n.node_id, n.height}).second) continue;
        send(n.node_id, consensus::Decision{std::move(block)});
    }
}

// ---- API ----

ApiServer::ApiServer(Replica& replica, BlobStore& blobs, std::int64_t token_ttl_seconds)
    : replica_(replica), blobs_(blobs), ttl_(token_ttl_seconds), server_(std::make_unique<httplib::Server>()) {
    routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) {
        int p = server_->bind_to_any_port(host);
        if (p <= 0) throw Error(ErrorCode::IoError, host, "cannot bind");
        return p;
    }
    if (!server_->bind_to_port(host, port)) throw Error(ErrorCode::IoError, host + ":" + std::to_string(port), "cannot bind");
    return port;
}

void ApiServer::start() {
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void ApiServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

std::vector<OutboxEvent> ApiServer::outbox() const {
    std::lock_guard lk(mu_);
    return outbox_;
}

Session ApiServer::require_session(const std::string& auth, std::optional<Permission> perm) {
    static const std::string kBearer = "Bearer ";
    if (auth.rfind(kBearer, 0) != 0) throw Error(ErrorCode::Unauthenticated, {}, "missing bearer token");
    auto token = auth.substr(kBearer.size());
    Session s;
    {
        std::lock_guard lk(mu_);
        auto it = sessions_.find(token);
        if (it == sessions_.end()) throw Error(ErrorCode::Unauthenticated, {}, "unknown token");
        if (it->second.expires < std::chrono::system_clock::now()) {
            sessions_.erase(it);
            throw Error(ErrorCode::Unauthenticated, {}, "token expired");
        }
        s = it->second;
    }
    if (perm && !authorize(s.login, *perm))
        throw Error(ErrorCode::PermissionDenied, s.login.user,
                    std::string(to_string(*perm)) + " requires " + std::string(to_string(minimum_elevation(*perm))));
    return s;
}

void ApiServer::routes() {
    auto& srv = *server_;
    srv.set_payload_max_length(64u << 20);
    // Idle peer connections would otherwise hold stop() for the default 5 s.
    srv.set_keep_alive_timeout(1);

    srv.Post("/peer", [this](const httplib::Request& req, httplib::Response& res) {
        replica_.deliver(as_bytes(req.body));
        res.status = 204;
    });

    srv.Get("/status", guarded([this](const httplib::Request&, httplib::Response& res) {
        auto st = replica_.status();
        List peers;
        for (const auto& v : replica_.validators())
            if (v.id != replica_.id()) peers.emplace_back(v.id);
        reply(res, 200,
              Map{{"nodeId", st.node_id},
                  {"chainId", replica_.snapshot().state->chain_id},
                  {"height", st.height},
                  {"round", st.round},
                  {"step", st.step},
                  {"pending", static_cast<std::int64_t>(st.pending)},
                  {"stateHash", st.state_hash.hex()},
                  {"lastBlockHash", st.last_block_hash.hex()},
                  {"genesis", replica_.genesis_digest().hex()},
                  {"evidence", static_cast<std::int64_t>(st.evidence)},
                  {"peers", std::move(peers)}});
    }));

    srv.Post("/login", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        const auto& user = get_string(body, "user");
        const auto& password = get_string(body, "password");
        auto snap = replica_.snapshot();
        const auto* login = snap.state->login(user);
        if (!login || !check_password(login->pass, password))
            throw Error(ErrorCode::Unauthenticated, user, "bad user or password");
        std::array<std::uint8_t, 32> raw{};
        random_bytes(raw);
        Session s{to_hex(raw), *login, std::chrono::system_clock::now() + std::chrono::seconds(ttl_)};
        auto expires_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(s.expires.time_since_epoch()).count();
        {
            std::lock_guard lk(mu_);
            sessions_[s.token] = s;
        }
        reply(res, 200,
              Map{{"token", s.token},
                  {"user", login->user},
                  {"elevation", std::string(to_string(login->superset))},
                  {"mob", login->mob},
                  {"expiresAt", Timestamp{expires_ms}}});
    }));

    auto admit = [this](const httplib::Request& req, std::optional<TxKind> kind) {
        auto tx = transaction_from_document(parse_body(req));
        if (kind && tx.kind != *kind)
            throw Error(ErrorCode::BadRequest, "kind", "expected " + std::string(to_string(*kind)));
        return std::pair{tx, replica_.submit(tx)};
    };
    auto accepted = [](httplib::Response& res, const Admission& a, Map extra = {}) {
        List warnings(a.warnings.begin(), a.warnings.end());
        extra.emplace("txId", a.tx_id.hex());
        extra.emplace("status", "accepted");
        extra.emplace("warnings", std::move(warnings));
        reply(res, 202, extra);
    };

    srv.Post("/tx", guarded([=](const httplib::Request& req, httplib::Response& res) {
        accepted(res, admit(req, std::nullopt).second);
    }));

    srv.Post("/claims", guarded([=](const httplib::Request& req, httplib::Response& res) {
        auto [tx, a] = admit(req, TxKind::SubmitClaim);
        accepted(res, a, Map{{"claimId", tx.tx_id.hex()}});
    }));

    srv.Post(R"(/claims/([0-9a-f]{64})/review)", guarded([=](const httplib::Request& req, httplib::Response& res) {
        auto tx = transaction_from_document(parse_body(req));
        if (tx.kind != TxKind::ReviewClaim) throw Error(ErrorCode::BadRequest, "kind", "expected ReviewClaim");
        if (parse_review_claim(tx.payload).claim_id.hex() != req.matches[1].str())
            throw Error(ErrorCode::BadRequest, "claimId", "payload claimId does not match the URL");
        accepted(res, replica_.submit(tx), Map{{"claimId", req.matches[1].str()}});
    }));

    srv.Get("/claims", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto s = require_session(req.get_header_value("Authorization"), std::nullopt);
        auto snap = replica_.snapshot();
        bool all = s.login.superset >= ElevationLevel::Doctor;
        auto status = req.has_param("status") ? std::optional(req.get_param_value("status")) : std::nullopt;
        List out;
        for (const auto& [_, c] : snap.state->claims) {
            if (!all && c.phone != s.login.mob) continue;
            if (status && to_string(c.status) != *status) continue;
            out.push_back(to_document(c));
        }
        reply(res, 200, Map{{"claims", std::move(out)}});
    }));

    srv.Get(R"(/patients/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto s = require_session(req.get_header_value("Authorization"), std::nullopt);
        auto phone = req.matches[1].str();
        if (!is_valid_phone(phone)) throw Error(ErrorCode::BadRequest, phone, "phone must be 10-15 digits");
        if (s.login.superset < ElevationLevel::Doctor && s.login.mob != phone)
            throw Error(ErrorCode::PermissionDenied, s.login.user, "patients may only read their own history");
        auto snap = replica_.snapshot();
        reply(res, 200, to_document(history_by_phone(*snap.state, *snap.index, phone)));
    }));

    srv.Get("/research", guarded([this](const httplib::Request& req, httplib::Response& res) {
        require_session(req.get_header_value("Authorization"), Permission::ResearchQuery);
        if (!req.has_param("min") || !req.has_param("max")) throw Error(ErrorCode::BadRequest, {}, "need min and max");
        auto lo = parse_int(req.get_param_value("min"), "min");
        auto hi = parse_int(req.get_param_value("max"), "max");
        auto snap = replica_.snapshot();
        reply(res, 200, to_document(research_query(*snap.state, *snap.index, lo, hi)));
    }));

    srv.Get(R"(/donors/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        require_session(req.get_header_value("Authorization"), Permission::DonorSearch);
        auto group = httplib::detail::decode_url(req.matches[1].str(), false);
        auto snap = replica_.snapshot();
        auto r = donor_search(*snap.state, *snap.index, group);
        List tokens, events;
        {
            std::lock_guard lk(mu_);
            for (const auto& e : r.events) {
                outbox_.push_back({static_cast<std::int64_t>(outbox_.size()) + 1, now_ms(), e});
                events.push_back(to_document(e));
            }
        }
        for (const auto& t : r.tokens) tokens.emplace_back(t.hex());
        reply(res, 200, Map{{"tokens", std::move(tokens)}, {"events", std::move(events)}});
    }));

    srv.Get("/notifications", guarded([this](const httplib::Request& req, httplib::Response& res) {
        require_session(req.get_header_value("Authorization"), Permission::DonorSearch);
        std::int64_t since = req.has_param("since") ? parse_int(req.get_param_value("since"), "since") : 0;
        List out;
        {
            std::lock_guard lk(mu_);
            for (const auto& o : outbox_) {
                if (o.seq <= since) continue;
                auto doc = to_document(o.event);
                doc.as_map().emplace("seq", o.seq);
                doc.as_map().emplace("queuedAt", o.queued_at);
                out.push_back(std::move(doc));
            }
        }
        reply(res, 200, Map{{"events", std::move(out)}});
    }));

    srv.Post("/blobs", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto s = require_session(req.get_header_value("Authorization"), std::nullopt);
        if (!req.has_param("mediaType")) throw Error(ErrorCode::BadRequest, "mediaType", "query parameter required");
        auto type = req.get_param_value("mediaType");
        auto now = now_ms();
        auto hash = blobs_.put(s.login, as_bytes(req.body), type, now);
        auto e = *blobs_.entry(hash);
        auto doc = to_document(e);
        doc.as_map().emplace("blobRef", to_document(BlobRef{hash, e.media_type, e.size}));
        reply(res, 201, doc);
    }));

    srv.Get(R"(/blobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
        auto s = require_session(req.get_header_value("Authorization"), std::nullopt);
        Digest hash;
        try {
            hash = Digest::from_hex(req.matches[1].str());
        } catch (const Error&) {
            throw Error(ErrorCode::BadRequest, req.matches[1].str(), "not a 64-char hex digest");
        }
        auto [bytes, type] = blobs_.get(s.login, *replica_.snapshot().state, hash);
        res.status = 200;
        res.set_header("X-Media-Type", type);
        res.set_content(std::string(bytes.begin(), bytes.end()), mime_for(type));
    }));
}

// ---- host ----

NodeHost::NodeHost(NodeConfig config) : config_(std::move(config)) {}

NodeHost::~NodeHost() { stop(); }

int NodeHost::start() {
    consensus::Params params;
    params.timeout_base = config_.timeout_base_ms;
    params.resend_interval = std::max<std::int64_t>(config_.timeout_base_ms * 5, 50);
    // Gossip may deliver a tx before the login or patient it depends on, and
    // empty heights go by quickly, so deferred txs get a longer grace period.
    params.max_skips = 50;
    blobs_ = std::make_unique<BlobStore>(config_.blob_dir, config_.max_blob_bytes);

    if (config_.mode == "sim") {
        auto genesis = config_.genesis_path.empty() ? simnet::sim_genesis(config_.sim_nodes) : load_genesis(config_.genesis_path);
        hub_ = std::make_shared<std::map<std::string, Replica*>>();
        for (const auto& v : genesis.validators) {
            auto key = simnet::sim_key(v.id);
            if (key.public_key != v.key)
                throw Error(ErrorCode::BadRequest, v.id, "sim mode needs validators keyed with the sim key scheme");
            replicas_.push_back(std::make_unique<Replica>(v.id, key.private_key, genesis, params));
            (*hub_)[v.id] = replicas_.back().get();
        }
        for (auto& r : replicas_) {
            transports_.push_back(std::make_unique<LocalHub>(r->id(), hub_));
            r->attach(transports_.back().get());
        }
    } else {
        auto genesis = load_genesis(config_.genesis_path);
        auto key = generate_key_pair_from_hex(config_.key_seed_hex);
        const auto* self = [&]() -> const Validator* {
            for (const auto& v : genesis.validators)
                if (v.id == config_.node_id) return &v;
            return nullptr;
        }();
        if (!self) throw Error(ErrorCode::BadRequest, config_.node_id, "node is not a genesis validator");
        if (self->key != key.public_key) throw Error(ErrorCode::KeyMismatch, config_.node_id, "keySeed does not match genesis");
        replicas_.push_back(std::make_unique<Replica>(config_.node_id, key.private_key, genesis, params));
        transports_.push_back(std::make_unique<HttpTransport>(config_.peers));
        replicas_[0]->attach(transports_[0].get());
    }

    api_ = std::make_unique<ApiServer>(*replicas_[0], *blobs_, config_.token_ttl_seconds);
    auto [host, port] = split_host_port(config_.listen);
    int bound = api_->bind(host, port);
    api_->start();
    for (auto& r : replicas_) r->start();
    return bound;
}

void NodeHost::stop() {
    for (auto& t : transports_) t->stop();
    for (auto& r : replicas_) r->stop();
    if (api_) api_->stop();
}

} // namespace medledger::node
