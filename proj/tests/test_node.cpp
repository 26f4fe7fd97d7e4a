#include <doctest.h>

#include <arpa/inet.h>
#include <httplib.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <random>

#include "medledger/node.hpp"
#include "medledger/simnet.hpp"
#include "medledger/workflows.hpp"
#include "support/fixtures.hpp"

using namespace medledger;
using namespace medledger::node;
using namespace medledger::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int free_port() {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&a), sizeof a);
    socklen_t len = sizeof a;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&a), &len);
    ::close(fd);
    return ntohs(a.sin_port);
}

fs::path temp_dir(const std::string& tag) {
    std::array<std::uint8_t, 8> r{};
    random_bytes(r);
    auto p = fs::temp_directory_path() / ("medledger-" + tag + "-" + to_hex(r));
    fs::create_directories(p);
    return p;
}

struct Cluster {
    fs::path dir = temp_dir("cluster");
    std::vector<int> ports;
    std::vector<std::unique_ptr<NodeHost>> hosts;

    explicit Cluster(int n = 4) {
        save_genesis(test_genesis(n), (dir / "genesis.json").string());
        for (int i = 0; i < n; ++i) ports.push_back(free_port());
        for (int i = 0; i < n; ++i) {
            NodeConfig c;
            c.node_id = "node" + std::to_string(i);
            c.listen = "127.0.0.1:" + std::to_string(ports[i]);
            for (int j = 0; j < n; ++j)
                if (j != i) c.peers.push_back({"node" + std::to_string(j), "http://127.0.0.1:" + std::to_string(ports[j])});
            c.genesis_path = (dir / "genesis.json").string();
            c.blob_dir = (dir / ("blobs" + std::to_string(i))).string();
            c.key_seed_hex = digest("medledger-test-key:" + c.node_id).hex();
            c.timeout_base_ms = 50;
            hosts.push_back(std::make_unique<NodeHost>(c));
        }
        for (auto& h : hosts) h->start();
    }
    ~Cluster() {
        for (auto& h : hosts) h->stop();
        fs::remove_all(dir);
    }

    httplib::Client client(int i) { return httplib::Client("127.0.0.1", ports[i]); }

    bool wait_all(const std::function<bool(const LedgerState&)>& pred) {
        for (auto& h : hosts)
            if (!h->replica().wait_until(pred, std::chrono::seconds(20))) return false;
        return true;
    }
};

struct Reply {
    int status = 0;
    json body;
};

Reply as_reply(const httplib::Result& r) {
    REQUIRE(r);
    Reply out{r->status, json()};
    if (r->get_header_value("Content-Type") == "application/json") out.body = json::parse(r->body);
    return out;
}

httplib::Headers bearer(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }

Reply post_tx(httplib::Client& c, const std::string& path, const Transaction& tx) {
    return as_reply(c.Post(path, to_json(to_document(tx)).dump(), "application/json"));
}

Reply get(httplib::Client& c, const std::string& path, const std::string& token = "") {
    return as_reply(token.empty() ? c.Get(path) : c.Get(path, bearer(token)));
}

std::string login(httplib::Client& c, const std::string& user) {
    auto r = as_reply(c.Post("/login", json{{"user", user}, {"password", "correct horse"}}.dump(), "application/json"));
    REQUIRE(r.status == 200);
    return r.body["token"].get<std::string>();
}

std::string code(const Reply& r) { return r.body["error"]["code"].get<std::string>(); }

bool has_tx(const LedgerState& s, const Digest& id) { return s.tx_ids.contains(id); }

} // namespace

TEST_CASE("config parsing") {
    auto c = config_from_json(R"({"nodeId":"node2","listen":"0.0.0.0:7003","genesis":"g.json","keySeed":"00",
        "peers":[{"id":"node0","url":"http://a:1"}],"timeoutBase":100})");
    CHECK(c.node_id == "node2");
    CHECK(c.peers.size() == 1);
    CHECK(c.timeout_base_ms == 100);
    CHECK(c.max_blob_bytes == kDefaultMaxBlobBytes);
    CHECK(config_from_json(config_to_json(c)).listen == c.listen);

    auto bad = [](const std::string& text) {
        try {
            config_from_json(text);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    CHECK(bad(R"({"mode":"cloud"})") == ErrorCode::BadRequest);
    CHECK(bad(R"({"mode":"live"})") == ErrorCode::BadRequest);
    CHECK(bad("{") == ErrorCode::BadRequest);
    CHECK(bad(R"({"mode":"sim","timeoutBase":0})") == ErrorCode::BadRequest);

    ::setenv("MEDLEDGER_CONFIG", "/etc/medledger.json", 1);
    CHECK(config_path(std::nullopt) == "/etc/medledger.json");
    CHECK(config_path(std::string("x.json")) == "x.json");
    ::unsetenv("MEDLEDGER_CONFIG");
    CHECK_FALSE(config_path(std::nullopt));

    CHECK(split_host_port("127.0.0.1:7001") == std::pair<std::string, int>{"127.0.0.1", 7001});
}

TEST_CASE("every error code has a named wire form and an HTTP status") {
    std::set<std::string> names;
    for (int i = 0; i <= static_cast<int>(ErrorCode::IoError); ++i) {
        auto c = static_cast<ErrorCode>(i);
        auto doc = to_json(error_document(Error(c, "subj", "why")));
        auto name = doc["error"]["code"].get<std::string>();
        CHECK(error_code_from_string(name) == c);
        CHECK(names.insert(name).second);
        auto s = http_status(c);
        CHECK(s >= 400);
        CHECK(s < 600);
    }
    CHECK(http_status(ErrorCode::KeyMismatch) == 400);
    CHECK(http_status(ErrorCode::Unauthenticated) == 401);
    CHECK(http_status(ErrorCode::PermissionDenied) == 403);
    CHECK(http_status(ErrorCode::UnknownPatient) == 404);
    CHECK(http_status(ErrorCode::IllegalTransition) == 409);
    CHECK(http_status(ErrorCode::TooLarge) == 413);
    CHECK(http_status(ErrorCode::UnsupportedMediaType) == 415);
}

TEST_CASE("envelope round trip") {
    Envelope e{"node1", digest(std::string_view{"g"}), "consensus", Bytes{1, 2, 3}};
    auto back = decode_envelope(encode_envelope(e));
    CHECK(back.from == e.from);
    CHECK(back.genesis == e.genesis);
    CHECK(back.type == e.type);
    CHECK(back.payload == e.payload);
    CHECK_THROWS_AS(decode_envelope(Bytes{0x01, 0x00}), Error);
}

TEST_CASE("live four-node cluster over HTTP") {
    Cluster cl;
    auto c0 = cl.client(0);
    auto c2 = cl.client(2);
    const std::string phone = "9876500001", other = "9876500002";

    // Staff and one patient login, all signed by the genesis root.
    std::vector<Transaction> setup = {
        tx_as("root", TxKind::CreateLogin, login_doc("admin", ElevationLevel::HospitalAdmin, "9111111110"), 1),
        tx_as("root", TxKind::CreateLogin, login_doc("doc", ElevationLevel::Doctor, "9111111111"), 2),
        tx_as("root", TxKind::CreateLogin, login_doc("insurer", ElevationLevel::InsuranceAdmin, "9111111112"), 3),
        tx_as("root", TxKind::CreateLogin, login_doc("pat", ElevationLevel::Patient, phone), 4),
    };
    for (const auto& tx : setup) {
        auto r = post_tx(c0, "/tx", tx);
        REQUIRE(r.status == 202);
        CHECK(r.body["txId"] == tx.tx_id.hex());
    }

    auto create = tx_as("admin", TxKind::CreatePatient, patient_doc(phone, "alicewonder", 42, "AB+"), 10);
    auto create_other = tx_as("admin", TxKind::CreatePatient, patient_doc(other, "bobbuilder", 35, "AB+"), 11);

    SUBCASE("submission") {
        // Admin's login is not committed yet, so admission defers with a warning.
        auto r = post_tx(c0, "/tx", create);
        CHECK(r.status == 202);
        CHECK(r.body["txId"] == create.tx_id.hex());
        // Identical bodies yield identical ids on another node.
        auto r2 = post_tx(c2, "/tx", create);
        CHECK(r2.body["txId"] == r.body["txId"]);

        auto forged = create_other;
        forged.signature.bytes[0] ^= 1;
        auto bad = post_tx(c0, "/tx", forged);
        CHECK(bad.status == 400);
        CHECK(code(bad) == "KeyMismatch");

        auto garbage = as_reply(c0.Post("/tx", "{not json", "application/json"));
        CHECK(garbage.status == 400);
        CHECK(code(garbage) == "BadRequest");

        REQUIRE(cl.wait_all([&](const LedgerState& s) { return has_tx(s, create.tx_id); }));
        auto dup = post_tx(c2, "/tx", create);
        CHECK(dup.status == 409);
        CHECK(code(dup) == "DuplicateId");

        // Once the admin exists, a doctor-signed CreatePatient fails its elevation check.
        auto low = tx_as("doc", TxKind::CreatePatient, patient_doc("9876500099", "charliebrown"), 12);
        REQUIRE(cl.wait_all([&](const LedgerState& s) { return s.login("doc") != nullptr; }));
        auto denied = post_tx(c0, "/tx", low);
        CHECK(denied.status == 403);
        CHECK(code(denied) == "PermissionDenied");
    }

    SUBCASE("workflows end to end") {
        auto rx = prescription_doc("V-100", phone, 2400, "migraine");
        auto prescribe = tx_as("doc", TxKind::CreatePrescription, rx, 20);
        for (const auto& tx : {create, create_other, prescribe}) REQUIRE(post_tx(c0, "/tx", tx).status == 202);
        REQUIRE(cl.wait_all([&](const LedgerState& s) { return has_tx(s, prescribe.tx_id); }));

        auto doc_token = login(c2, "doc");
        auto pat_token = login(c2, "pat");

        // Patient history, visible on a node other than the one that took the txs.
        CHECK(get(c2, "/patients/" + phone).status == 401);
        CHECK(get(c2, "/patients/" + phone, "bogus").status == 401);
        auto h = get(c2, "/patients/" + phone, doc_token);
        REQUIRE(h.status == 200);
        CHECK(h.body["patient"]["phone"] == phone);
        CHECK(h.body["patient"]["name"] == "alicewonder");
        CHECK(h.body["versions"].empty());
        CHECK(h.body["prescriptions"].size() == 1);
        CHECK(h.body["loginPresent"] == true);
        CHECK(get(c2, "/patients/" + phone, pat_token).status == 200);
        auto foreign = get(c2, "/patients/" + other, pat_token);
        CHECK(foreign.status == 403);
        CHECK(code(foreign) == "PermissionDenied");
        CHECK(code(get(c2, "/patients/9000000123", doc_token)) == "UnknownPatient");
        CHECK(get(c2, "/patients/12", doc_token).status == 400);

        // Research.
        auto res = get(c2, "/research?min=30&max=50", doc_token);
        REQUIRE(res.status == 200);
        CHECK(res.body["count"] == 2);
        auto dumped = res.body.dump();
        for (const auto* leak : {"alicewonder", "bobbuilder", phone.c_str(), other.c_str(), "dbIdentifier"})
            CHECK(dumped.find(leak) == std::string::npos);
        auto inv = get(c2, "/research?min=40&max=30", doc_token);
        CHECK(inv.status == 400);
        CHECK(code(inv) == "InvalidRange");
        CHECK(get(c2, "/research?min=1&max=2", pat_token).status == 403);

        // Donors and notifications.
        auto d = get(c2, "/donors/AB%2B", doc_token);
        REQUIRE(d.status == 200);
        CHECK(d.body["tokens"].size() == 2);
        CHECK(d.body["events"].size() == 2);
        CHECK(code(get(c2, "/donors/Z", doc_token)) == "UnknownBloodGroup");
        auto n = get(c2, "/notifications", doc_token);
        REQUIRE(n.status == 200);
        CHECK(n.body["events"].size() == 2);
        CHECK(get(c2, "/notifications?since=1", doc_token).body["events"].size() == 1);
        CHECK(get(c2, "/notifications", pat_token).status == 403);

        // Claims.
        auto claim = tx_as("doc", TxKind::SubmitClaim, to_document(SubmitClaimRequest{"V-100", phone}), 30);
        auto cr = post_tx(c2, "/claims", claim);
        REQUIRE(cr.status == 202);
        CHECK(cr.body["claimId"] == claim.tx_id.hex());
        CHECK(code(post_tx(c2, "/claims", prescribe)) == "BadRequest");
        REQUIRE(cl.wait_all([&](const LedgerState& s) { return has_tx(s, claim.tx_id); }));

        auto review = tx_as("insurer", TxKind::ReviewClaim, to_document(ReviewClaimRequest{claim.tx_id, Verdict::Approve}), 31);
        CHECK(post_tx(c2, "/claims/" + std::string(64, 'a') + "/review", review).status == 400);
        REQUIRE(post_tx(c2, "/claims/" + claim.tx_id.hex() + "/review", review).status == 202);
        REQUIRE(cl.wait_all([&](const LedgerState& s) { return has_tx(s, review.tx_id); }));
        auto claims = get(c0, "/claims", login(c0, "pat"));
        REQUIRE(claims.status == 200);
        REQUIRE(claims.body["claims"].size() == 1);
        CHECK(claims.body["claims"][0]["status"] == "Approved");
        CHECK(claims.body["claims"][0]["amount"] == 2400);

        // Approved -> Approved is illegal once committed.
        auto again = tx_as("insurer", TxKind::ReviewClaim, to_document(ReviewClaimRequest{claim.tx_id, Verdict::Approve}), 32);
        auto ill = post_tx(c2, "/claims/" + claim.tx_id.hex() + "/review", again);
        CHECK(ill.status == 409);
        CHECK(code(ill) == "IllegalTransition");
    }

    SUBCASE("blobs") {
        REQUIRE(post_tx(c0, "/tx", create).status == 202);
        REQUIRE(cl.wait_all([&](const LedgerState& s) { return has_tx(s, create.tx_id); }));
        auto doc_token = login(c0, "doc");
        auto pat_token = login(c0, "pat");
        std::string pdf = "%PDF-1.4 test document";

        auto put = as_reply(c0.Post("/blobs?mediaType=pdf", bearer(doc_token), pdf, "application/octet-stream"));
        REQUIRE(put.status == 201);
        auto hash = put.body["contentHash"].get<std::string>();
        CHECK(hash == digest(std::string_view{pdf}).hex());
        CHECK(put.body["blobRef"]["hash"] == hash);
        CHECK(put.body["blobRef"]["size"] == static_cast<std::int64_t>(pdf.size()));

        auto got = c0.Get("/blobs/" + hash, bearer(doc_token));
        REQUIRE(got);
        CHECK(got->status == 200);
        CHECK(got->body == pdf);
        CHECK(got->get_header_value("Content-Type") == "application/pdf");

        CHECK(code(as_reply(c0.Get("/blobs/" + hash, bearer(pat_token)))) == "PermissionDenied");
        CHECK(as_reply(c0.Post("/blobs?mediaType=pdf", bearer(pat_token), pdf, "application/octet-stream")).status == 403);
        CHECK(as_reply(c0.Post("/blobs?mediaType=gif", bearer(doc_token), pdf, "application/octet-stream")).status == 415);
        CHECK(code(as_reply(c0.Get("/blobs/" + std::string(64, '0'), bearer(doc_token)))) == "NotFound");
        CHECK(as_reply(c0.Get("/blobs/xyz", bearer(doc_token))).status == 400);
    }

    auto st = get(c2, "/status");
    REQUIRE(st.status == 200);
    CHECK(st.body["nodeId"] == "node2");
    CHECK(st.body["peers"].size() == 3);
    CHECK(st.body.contains("stateHash"));

    // Every node converges on the same state.
    auto target = cl.hosts[0]->replica().status().height;
    REQUIRE(cl.wait_all([&](const LedgerState& s) { return s.height >= target; }));
    std::set<std::string> hashes;
    for (auto& h : cl.hosts) {
        auto chain = h->replica().chain();
        REQUIRE(chain.size() >= static_cast<std::size_t>(target));
        hashes.insert(chain[static_cast<std::size_t>(target - 1)].hash().hex());
    }
    CHECK(hashes.size() == 1);
}

TEST_CASE("sim mode hosts a full in-process network") {
    auto dir = temp_dir("simhost");
    NodeConfig c;
    c.mode = "sim";
    c.listen = "127.0.0.1:0";
    c.blob_dir = (dir / "blobs").string();
    c.timeout_base_ms = 50;
    {
        NodeHost host(c);
        int port = host.start();
        CHECK(port > 0);
        httplib::Client cli("127.0.0.1", port);
        auto st = get(cli, "/status");
        CHECK(st.body["chainId"] == "medledger-sim");
        CHECK(st.body["peers"].size() == 3);

        std::array<std::uint8_t, 16> salt{};
        salt.fill(0x11);
        auto admin = LoginRecord{"admin", make_password_hash("pw", salt), "9111111110", ElevationLevel::HospitalAdmin,
                                 simnet::sim_key("admin").public_key};
        auto tx = make_transaction(TxKind::CreateLogin, to_document(admin), "root", simnet::sim_key("root"),
                                   Timestamp{kBaseTime});
        REQUIRE(post_tx(cli, "/tx", tx).status == 202);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(host.replica(i).wait_until([&](const LedgerState& s) { return has_tx(s, tx.tx_id); },
                                             std::chrono::seconds(20)));
        std::set<std::string> hashes;
        for (std::size_t i = 0; i < 4; ++i) {
            host.replica(i).wait_until([](const LedgerState& s) { return s.height >= 1; }, std::chrono::seconds(5));
            hashes.insert(host.replica(i).chain().at(0).hash().hex());
        }
        CHECK(hashes.size() == 1);
        host.stop();
    }
    fs::remove_all(dir);
}
