#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "medledger/blobstore.hpp"
#include "medledger/consensus.hpp"
#include "medledger/ledger.hpp"
#include "medledger/query.hpp"

namespace httplib {
class Server;
}

namespace medledger::node {

struct PeerConfig {
    std::string id;
    std::string url; // http://host:port
};

struct NodeConfig {
    std::string node_id = "node0";
    std::string listen = "127.0.0.1:7001"; // port 0 picks a free port
    std::vector<PeerConfig> peers;
    std::string genesis_path;
    std::string blob_dir = "blobs";
    std::string key_seed_hex; // 32-byte Ed25519 seed of this validator
    std::int64_t timeout_base_ms = 200;
    std::string mode = "live"; // live | sim
    int sim_nodes = 4;         // sim mode only
    std::size_t max_blob_bytes = kDefaultMaxBlobBytes;
    std::int64_t token_ttl_seconds = 3600;
};

// Throws BadRequest on malformed config.
NodeConfig config_from_json(const std::string& text);
std::string config_to_json(const NodeConfig& c);
NodeConfig load_config(const std::string& path);
// Explicit path if given, else $MEDLEDGER_CONFIG, else nullopt.
std::optional<std::string> config_path(const std::optional<std::string>& flag);

// HTTP status used for each error code.
int http_status(ErrorCode code);
Document error_document(const Error& e);

// ---- peer transport ----

// Envelope on the wire: encode({"from", "genesis": bytes, "payload": bytes, "type": "consensus"|"tx"}).
struct Envelope {
    std::string from;
    Digest genesis;
    std::string type;
    Bytes payload;
};

Bytes encode_envelope(const Envelope& e);
Envelope decode_envelope(ByteView bytes);

class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(const std::string& peer, Bytes envelope) = 0;
    virtual void stop() {}
};

class Replica;

// Direct in-process delivery between replicas of one process.
class LocalHub : public Transport {
public:
    explicit LocalHub(std::string self, std::shared_ptr<std::map<std::string, Replica*>> peers)
        : self_(std::move(self)), peers_(std::move(peers)) {}
    void send(const std::string& peer, Bytes envelope) override;

private:
    std::string self_;
    std::shared_ptr<std::map<std::string, Replica*>> peers_;
};

// One keep-alive HTTP client and sender thread per peer, POSTing envelopes to /peer.
class HttpTransport : public Transport {
public:
    explicit HttpTransport(std::vector<PeerConfig> peers);
    ~HttpTransport() override;
    void send(const std::string& peer, Bytes envelope) override;
    void stop() override;

private:
    struct Lane;
    std::map<std::string, std::unique_ptr<Lane>> lanes_;
};

// ---- replica: consensus + ledger on a single-writer event loop ----

struct Snapshot {
    std::shared_ptr<const LedgerState> state;
    std::shared_ptr<const QueryIndex> index;
};

struct ReplicaStatus {
    std::string node_id;
    std::int64_t height = 0; // committed
    std::int64_t round = 0;
    std::string step;
    std::size_t pending = 0;
    Digest state_hash;
    Digest last_block_hash;
    std::size_t evidence = 0;
};

struct Admission {
    Digest tx_id;
    std::vector<std::string> warnings;
};

class Replica {
public:
    Replica(std::string node_id, PrivateKey key, const Genesis& genesis, consensus::Params params);
    ~Replica();
    Replica(const Replica&) = delete;
    Replica& operator=(const Replica&) = delete;

    void attach(Transport* transport) { transport_ = transport; }
    void start();
    void stop();

    // Thread-safe entry points.
    void deliver(ByteView envelope);
    // Stateless checks plus validation against the latest committed state.
    // Errors a not-yet-committed transaction could cure (unknown signer,
    // patient, visit, target or claim) are accepted with a warning.
    Admission submit(const Transaction& tx);

    Snapshot snapshot() const;
    std::vector<Block> chain() const;
    ReplicaStatus status() const;
    bool wait_until(const std::function<bool(const LedgerState&)>& pred, std::chrono::milliseconds timeout) const;

    const std::string& id() const { return id_; }
    const Digest& genesis_digest() const { return genesis_digest_; }
    const std::vector<Validator>& validators() const { return validators_; }

private:
    struct Resend {};
    using Timer = std::variant<consensus::Timeout, Resend>;
    using Item = std::variant<consensus::Event, Timer>;

    void loop();
    void process(const Item& item);
    void step(const consensus::Event& ev);
    void send(const std::string& to, const consensus::Message& m);
    void schedule(std::chrono::milliseconds delay, Timer t);

    std::string id_;
    Digest genesis_digest_;
    std::vector<Validator> validators_;
    consensus::Params params_;
    Transport* transport_ = nullptr;

    // Loop-thread state.
    consensus::NodeState ns_;
    std::set<std::pair<std::string, std::int64_t>> decisions_sent_;
    std::int64_t height_at_last_resend_ = 0;

    mutable std::mutex mu_; // inbox and timers
    std::condition_variable cv_;
    std::deque<Item> inbox_;
    std::multimap<std::chrono::steady_clock::time_point, Timer> timers_;
    bool stopping_ = false;
    std::thread thread_;

    mutable std::mutex snap_mu_;
    mutable std::condition_variable snap_cv_;
    Snapshot snap_;
    std::vector<Block> chain_;
    ReplicaStatus status_;
};

// ---- HTTP API ----

struct Session {
    std::string token;
    LoginRecord login;
    std::chrono::system_clock::time_point expires;
};

struct OutboxEvent {
    std::int64_t seq = 0;
    Timestamp queued_at;
    NotificationEvent event;
};

class ApiServer {
public:
    ApiServer(Replica& replica, BlobStore& blobs, std::int64_t token_ttl_seconds);
    ~ApiServer();

    // Binds host:port (0 = any free port) and returns the bound port.
    int bind(const std::string& host, int port);
    void start(); // serves on a background thread
    void stop();

    std::vector<OutboxEvent> outbox() const;

private:
    void routes();
    Session require_session(const std::string& auth_header, std::optional<Permission> perm);

    Replica& replica_;
    BlobStore& blobs_;
    std::int64_t ttl_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;

    mutable std::mutex mu_;
    std::map<std::string, Session> sessions_;
    std::vector<OutboxEvent> outbox_;
};

// Wires config to replicas, transport, blob store and API.
class NodeHost {
public:
    explicit NodeHost(NodeConfig config);
    ~NodeHost();

    int start(); // returns the API port
    void stop();

    Replica& replica(std::size_t i = 0) { return *replicas_.at(i); }
    ApiServer& api() { return *api_; }
    const NodeConfig& config() const { return config_; }

private:
    NodeConfig config_;
    std::vector<std::unique_ptr<Replica>> replicas_;
    std::vector<std::unique_ptr<Transport>> transports_;
    std::shared_ptr<std::map<std::string, Replica*>> hub_;
    std::unique_ptr<BlobStore> blobs_;
    std::unique_ptr<ApiServer> api_;
};

// Splits "host:port".
std::pair<std::string, int> split_host_port(const std::string& listen);

} // namespace medledger::node
