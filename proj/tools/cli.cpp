#include "cli.hpp"

#include <httplib.h>

#include <CLI11.hpp>
#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "medledger/error.hpp"
#include "medledger/node.hpp"
#include "medledger/query.hpp"
#include "medledger/simnet.hpp"
#include "medledger/workflows.hpp"

namespace medledger::cli {
namespace {

using nlohmann::json;

std::atomic<bool> g_stop{false};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return v && *v ? v : fallback;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, path, "cannot open");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error(ErrorCode::IoError, path, "cannot write");
}

std::string media_type_for(const std::string& path) {
    auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".pdf") return "pdf";
    if (ext == ".png") return "png";
    if (ext == ".jpg" || ext == ".jpeg") return "jpg";
    return ext.empty() ? "" : ext.substr(1);
}

Timestamp now_ms() {
    return Timestamp{std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count()};
}

// Options shared by every command that talks to a node.
struct Remote {
    std::string node = env_or("MEDLEDGER_NODE", "http://127.0.0.1:7001");
    std::string token = env_or("MEDLEDGER_TOKEN", "");
    std::string user;
    std::string password;
    std::string seed = env_or("MEDLEDGER_SEED", "");

    void add_auth(CLI::App* c) {
        c->add_option("--node", node, "Node base URL (env MEDLEDGER_NODE)");
        c->add_option("--token", token, "Bearer token (env MEDLEDGER_TOKEN)");
        c->add_option("--user", user, "Log in as this user when no token is given");
        c->add_option("--password", password, "Password for --user");
    }
    void add_signer(CLI::App* c) {
        c->add_option("--node", node, "Node base URL (env MEDLEDGER_NODE)");
        c->add_option("--user", user, "Signing user")->required();
        c->add_option("--seed", seed, "Hex Ed25519 seed of the signing user (env MEDLEDGER_SEED)");
    }

    httplib::Client client() const {
        httplib::Client c(node);
        c.set_connection_timeout(std::chrono::seconds(5));
        c.set_read_timeout(std::chrono::seconds(30));
        return c;
    }

    // Decodes the node's reply; error bodies become an Error with the node's code.
    static json decode(const httplib::Result& r, const std::string& what) {
        if (!r) throw Error(ErrorCode::IoError, what, "request failed: " + httplib::to_string(r.error()));
        json body;
        if (r->get_header_value("Content-Type") == "application/json") body = json::parse(r->body);
        if (r->status >= 400) {
            const auto& e = body.contains("error") ? body["error"] : json::object();
            auto code = error_code_from_string(e.value("code", "IoError")).value_or(ErrorCode::IoError);
            throw Error(code, e.value("subject", ""), e.value("detail", "HTTP " + std::to_string(r->status)));
        }
        return body;
    }

    std::string bearer() {
        if (!token.empty()) return token;
        if (user.empty()) throw UsageError("this command needs --token or --user/--password");
        auto c = client();
        auto body = decode(c.Post("/login", json{{"user", user}, {"password", password}}.dump(), "application/json"),
                           "/login");
        token = body.at("token").get<std::string>();
        return token;
    }

    httplib::Headers auth() { return {{"Authorization", "Bearer " + bearer()}}; }

    json get(const std::string& path, bool with_auth = true) {
        auto c = client();
        return decode(with_auth ? c.Get(path, auth()) : c.Get(path), path);
    }

    json post_json(const std::string& path, const json& body) {
        auto c = client();
        return decode(c.Post(path, body.dump(), "application/json"), path);
    }

    Transaction sign(TxKind kind, Document payload, std::optional<std::int64_t> ts = std::nullopt) const {
        if (seed.empty()) throw UsageError("signing needs --seed or MEDLEDGER_SEED");
        auto keys = generate_key_pair_from_hex(seed);
        return make_transaction(kind, std::move(payload), user, keys, ts ? Timestamp{*ts} : now_ms());
    }
};

void print(std::ostream& out, const json& j) { out << j.dump(2) << "\n"; }

void on_signal(int) { g_stop = true; }

std::string sim_seed_hex(const std::string& name) { return digest("medledger-sim:" + name).hex(); }

} // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"medledger: replicated medical-records ledger node and client"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");
    Remote remote;
    std::function<void()> action;

    // keygen
    auto* keygen = app.add_subcommand("keygen", "Generate an Ed25519 key pair");
    std::string from_name, seed_hex;
    keygen->add_option("--from-name", from_name, "Derive the deterministic simulation key for this name");
    keygen->add_option("--seed", seed_hex, "Derive from an explicit 32-byte hex seed");
    keygen->callback([&] {
        action = [&] {
            if (!from_name.empty() && !seed_hex.empty()) throw UsageError("--from-name and --seed are exclusive");
            std::string seed = !from_name.empty() ? sim_seed_hex(from_name) : seed_hex;
            if (seed.empty()) {
                std::array<std::uint8_t, 32> raw{};
                random_bytes(raw);
                seed = to_hex(raw);
            }
            auto kp = generate_key_pair_from_hex(seed);
            print(out, {{"seed", seed}, {"publicKey", kp.public_key.hex()}});
        };
    });

    // genesis init
    auto* genesis = app.add_subcommand("genesis", "Genesis file tools");
    genesis->require_subcommand(1);
    auto* ginit = genesis->add_subcommand("init", "Write a genesis file");
    std::string g_out, g_chain = "medledger", g_root = "root", g_root_pw, g_root_mob = "9000000000", g_root_key;
    int g_sim_validators = 4;
    std::vector<std::string> g_validators;
    ginit->add_option("--out", g_out, "Output path (.json for text, anything else for canonical binary)")->required();
    ginit->add_option("--chain-id", g_chain, "Chain id");
    ginit->add_option("--validator", g_validators, "id=publicKeyHex, repeatable; default is simulation keys");
    ginit->add_option("--sim-validators", g_sim_validators, "Number of simulation-keyed validators node0..");
    ginit->add_option("--root-user", g_root, "Initial SYSTEM_ADMIN user");
    ginit->add_option("--root-password", g_root_pw, "Initial SYSTEM_ADMIN password")->required();
    ginit->add_option("--root-mob", g_root_mob, "Initial SYSTEM_ADMIN phone");
    ginit->add_option("--root-key", g_root_key, "Root public key hex; default is the simulation key for the root user");
    ginit->callback([&] {
        action = [&] {
            Genesis g;
            g.chain_id = g_chain;
            if (g_validators.empty()) {
                for (int i = 0; i < g_sim_validators; ++i) {
                    auto id = simnet::node_name(i);
                    g.validators.push_back({id, simnet::sim_key(id).public_key});
                }
            }
            for (const auto& v : g_validators) {
                auto eq = v.find('=');
                if (eq == std::string::npos) throw UsageError("--validator expects id=publicKeyHex");
                g.validators.push_back({v.substr(0, eq), PublicKey::from_hex(v.substr(eq + 1))});
            }
            auto root_key = g_root_key.empty() ? simnet::sim_key(g_root).public_key : PublicKey::from_hex(g_root_key);
            g.logins.push_back({g_root, make_password_hash(g_root_pw), g_root_mob, ElevationLevel::SystemAdmin, root_key});
            save_genesis(g, g_out);
            print(out, {{"genesis", g_out}, {"digest", g.digest().hex()}, {"validators", g.validators.size()}});
        };
    });

    // node start
    auto* nodecmd = app.add_subcommand("node", "Run a node");
    nodecmd->require_subcommand(1);
    auto* nstart = nodecmd->add_subcommand("start", "Start a node and serve until interrupted");
    std::optional<std::string> config_flag;
    nstart->add_option("--config", config_flag, "Config file (default $MEDLEDGER_CONFIG)");
    nstart->callback([&] {
        action = [&] {
            auto path = node::config_path(config_flag);
            if (!path) throw UsageError("node start needs --config or MEDLEDGER_CONFIG");
            node::NodeHost host(node::load_config(*path));
            int port = host.start();
            out << "node " << host.config().node_id << " (" << host.config().mode << ") listening on port " << port
                << std::endl;
            g_stop = false;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
            host.stop();
            out << "stopped at height " << host.replica().status().height << std::endl;
        };
    });

    // sim run
    auto* sim = app.add_subcommand("sim", "Deterministic network simulation");
    sim->require_subcommand(1);
    auto* simrun = sim->add_subcommand("run", "Run a scenario file");
    std::string scenario_path, trace_path;
    simrun->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    simrun->add_option("--trace", trace_path, "Write the event trace here");
    simrun->callback([&] {
        action = [&] {
            auto sc = simnet::load_scenario(scenario_path);
            auto trace = simnet::run(sc);
            if (!trace_path.empty()) write_text(trace_path, simnet::export_trace(trace));
            auto agreement = simnet::assert_agreement(trace);
            std::size_t committed = 0;
            for (const auto& [id, n] : trace.nodes) {
                if (n.honest) committed = std::max(committed, n.chain.size());
                out << id << (n.honest ? " honest" : " byzantine");
                if (n.crashed_at) out << " crashed@" << *n.crashed_at;
                out << " height=" << n.chain.size() << " stateHash=" << n.state_hash.hex() << "\n";
            }
            out << "committed blocks: " << committed << "\n";
            out << "workload: " << trace.workload_size << " txs, "
                << (trace.workload_committed ? "committed" : "not committed") << "\n";
            out << "end tick: " << trace.end_tick << "\n";
            out << "agreement: " << (agreement.pass ? "pass" : "FAIL") << " (" << agreement.heights_checked
                << " heights checked)\n";
            if (!agreement.pass) throw Error(ErrorCode::InvariantViolation, "agreement", "honest nodes disagree");
        };
    });

    // patient get
    auto* patient = app.add_subcommand("patient", "Patient records");
    patient->require_subcommand(1);
    auto* pget = patient->add_subcommand("get", "Print a patient's history");
    std::string phone;
    pget->add_option("phone", phone, "Patient phone")->required();
    remote.add_auth(pget);
    pget->callback([&] { action = [&] { print(out, remote.get("/patients/" + phone)); }; });

    // tx sign / submit
    auto* tx = app.add_subcommand("tx", "Transactions");
    tx->require_subcommand(1);
    auto* tsign = tx->add_subcommand("sign", "Sign a payload into a transaction");
    std::string kind_name, payload_path, tx_out;
    std::optional<std::int64_t> tx_ts;
    tsign->add_option("--kind", kind_name, "Transaction kind, e.g. CreatePatient")->required();
    tsign->add_option("--payload", payload_path, "Payload JSON file")->required();
    tsign->add_option("--timestamp", tx_ts, "Timestamp in ms (default now)");
    tsign->add_option("--out", tx_out, "Write the transaction here instead of stdout");
    remote.add_signer(tsign);
    tsign->callback([&] {
        action = [&] {
            auto kind = tx_kind_from_string(kind_name);
            if (!kind) throw UsageError("unknown transaction kind " + kind_name);
            auto t = remote.sign(*kind, from_json(json::parse(read_text(payload_path))), tx_ts);
            check_stateless(t);
            auto text = to_json(to_document(t)).dump(2) + "\n";
            if (tx_out.empty())
                out << text;
            else
                write_text(tx_out, text);
        };
    });
    auto* tsubmit = tx->add_subcommand("submit", "Submit a signed transaction file");
    std::string tx_file;
    tsubmit->add_option("file", tx_file, "Transaction JSON file")->required();
    tsubmit->add_option("--node", remote.node, "Node base URL (env MEDLEDGER_NODE)");
    tsubmit->callback([&] {
        action = [&] {
            auto t = transaction_from_document(from_json(json::parse(read_text(tx_file))));
            check_stateless(t);
            print(out, remote.post_json("/tx", to_json(to_document(t))));
        };
    });

    // research
    auto* research = app.add_subcommand("research", "Anonymized research query by age range");
    std::int64_t age_min = 0, age_max = 0;
    research->add_option("min", age_min, "Minimum age")->required();
    research->add_option("max", age_max, "Maximum age")->required();
    remote.add_auth(research);
    research->callback([&] {
        action = [&] {
            check_age_range(age_min, age_max);
            print(out, remote.get("/research?min=" + std::to_string(age_min) + "&max=" + std::to_string(age_max)));
        };
    });

    // donors
    auto* donors = app.add_subcommand("donors", "Donor search by blood group");
    std::string group;
    donors->add_option("bloodgroup", group, "Blood group, e.g. O-")->required();
    remote.add_auth(donors);
    donors->callback([&] {
        action = [&] {
            if (!is_valid_blood_group(group)) throw Error(ErrorCode::UnknownBloodGroup, group);
            print(out, remote.get("/donors/" + httplib::detail::encode_url(group)));
        };
    });

    auto* notifications = app.add_subcommand("notifications", "List queued donor notifications");
    std::int64_t since = 0;
    notifications->add_option("--since", since, "Only events after this sequence number");
    remote.add_auth(notifications);
    notifications->callback([&] {
        action = [&] { print(out, remote.get("/notifications?since=" + std::to_string(since))); };
    });

    // claims
    auto* claim = app.add_subcommand("claim", "Insurance claims");
    claim->require_subcommand(1);
    auto* csubmit = claim->add_subcommand("submit", "Submit a claim for a visit");
    std::string visit, claim_phone;
    csubmit->add_option("--visit", visit, "Visit id")->required();
    csubmit->add_option("--phone", claim_phone, "Patient phone")->required();
    remote.add_signer(csubmit);
    csubmit->callback([&] {
        action = [&] {
            auto t = remote.sign(TxKind::SubmitClaim, to_document(SubmitClaimRequest{visit, claim_phone}));
            print(out, remote.post_json("/claims", to_json(to_document(t))));
        };
    });
    auto* creview = claim->add_subcommand("review", "Approve or revoke a claim");
    std::string claim_id, verdict_name;
    creview->add_option("claimId", claim_id, "Claim id (hex)")->required();
    creview->add_option("--verdict", verdict_name, "approve or revoke")
        ->required()
        ->check(CLI::IsMember({"approve", "revoke"}));
    remote.add_signer(creview);
    creview->callback([&] {
        action = [&] {
            auto verdict = verdict_name == "approve" ? Verdict::Approve : Verdict::Revoke;
            auto t = remote.sign(TxKind::ReviewClaim, to_document(ReviewClaimRequest{Digest::from_hex(claim_id), verdict}));
            print(out, remote.post_json("/claims/" + claim_id + "/review", to_json(to_document(t))));
        };
    });
    auto* clist = claim->add_subcommand("list", "List claims visible to the session");
    remote.add_auth(clist);
    clist->callback([&] { action = [&] { print(out, remote.get("/claims")); }; });

    // blobs
    auto* blob = app.add_subcommand("blob", "Content-addressed documents");
    blob->require_subcommand(1);
    auto* bput = blob->add_subcommand("put", "Upload a pdf, png or jpg");
    std::string blob_file, blob_type, blob_hash, blob_out;
    bput->add_option("file", blob_file, "File to upload")->required();
    bput->add_option("--media-type", blob_type, "pdf, png or jpg (default from the extension)");
    remote.add_auth(bput);
    bput->callback([&] {
        action = [&] {
            auto type = blob_type.empty() ? media_type_for(blob_file) : blob_type;
            auto c = remote.client();
            auto path = "/blobs?mediaType=" + type;
            print(out, Remote::decode(c.Post(path, remote.auth(), read_text(blob_file), "application/octet-stream"), path));
        };
    });
    auto* bget = blob->add_subcommand("get", "Download a blob by hash");
    bget->add_option("hash", blob_hash, "Content hash")->required();
    bget->add_option("--out", blob_out, "Output file")->required();
    remote.add_auth(bget);
    bget->callback([&] {
        action = [&] {
            auto c = remote.client();
            auto path = "/blobs/" + blob_hash;
            auto r = c.Get(path, remote.auth());
            if (r && r->status == 200) {
                write_text(blob_out, r->body);
                out << "wrote " << r->body.size() << " bytes to " << blob_out << "\n";
                return;
            }
            Remote::decode(r, path);
        };
    });

    auto* status = app.add_subcommand("status", "Node status");
    status->add_option("--node", remote.node, "Node base URL (env MEDLEDGER_NODE)");
    status->callback([&] { action = [&] { print(out, remote.get("/status", false)); }; });

    // bench
    auto* benchcmd = app.add_subcommand("bench", "Throughput on an in-process simulated network");
    std::int64_t bench_txs = 10'000;
    int bench_nodes = 4;
    std::uint64_t bench_seed = 1;
    double min_tps = 0;
    benchcmd->add_option("--txs", bench_txs, "Workload size")->check(CLI::PositiveNumber);
    benchcmd->add_option("--nodes", bench_nodes, "Validators")->check(CLI::Range(1, 64));
    benchcmd->add_option("--seed", bench_seed, "Workload seed");
    benchcmd->add_option("--min-tps", min_tps, "Fail (exit 1) below this rate");
    benchcmd->callback([&] {
        action = [&] {
            auto r = simnet::bench(bench_txs, bench_nodes, bench_seed);
            out << std::fixed << std::setprecision(1);
            out << "nodes: " << bench_nodes << "\n";
            out << "transactions: " << r.committed_txs << " / " << r.tx_count << " committed in " << r.blocks
                << " blocks\n";
            out << "elapsed: " << std::setprecision(3) << r.seconds << " s\n";
            out << "throughput: " << std::setprecision(1) << r.tx_per_sec << " tx/s\n";
            out << "state agreement: " << (r.agreement ? "yes" : "no") << " " << r.state_hash.hex() << "\n";
            if (!r.agreement || r.committed_txs != r.tx_count)
                throw Error(ErrorCode::InvariantViolation, "bench", "workload not fully committed in agreement");
            if (r.tx_per_sec < min_tps)
                throw Error(ErrorCode::InvariantViolation, "bench", "below --min-tps");
        };
    });

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : 2;
    }
    try {
        if (action) action();
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << to_json(node::error_document(e))["error"].dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace medledger::cli
