#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "medledger/codec.hpp"
#include "medledger/error.hpp"
#include "support/generators.hpp"

using namespace medledger;
using namespace medledger::testing;

namespace {

nlohmann::json load_golden() {
    std::ifstream in(std::string(MEDLEDGER_GOLDEN_DIR) + "/digests.json");
    REQUIRE(in);
    return nlohmann::json::parse(in);
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::IoError;
}

} // namespace

TEST_CASE("empty map encodes to the fixed five-byte string") {
    auto bytes = encode_canonical(Map{});
    CHECK(to_hex(bytes) == "0100000000");
    CHECK(to_hex(bytes) == load_golden()["empty_map_bytes"].get<std::string>());
}

TEST_CASE("key insertion order does not affect the encoding") {
    auto ab = Value::map_from_entries({{"a", 1}, {"b", 2}});
    auto ba = Value::map_from_entries({{"b", 2}, {"a", 1}});
    CHECK(encode_canonical(ab) == encode_canonical(ba));
}

TEST_CASE("scalar layouts") {
    CHECK(to_hex(encode_canonical(Value(std::int64_t{-2}))) == "0400000008fffffffffffffffe");
    CHECK(to_hex(encode_canonical(Value(true))) == "050000000101");
    CHECK(to_hex(encode_canonical(Value(Timestamp{1}))) == "06000000080000000000000001");
    CHECK(to_hex(encode_canonical(Value(Bytes{0xab}))) == "0700000001ab");
    CHECK(to_hex(encode_canonical(Value("hi"))) == "03000000026869");
    CHECK(to_hex(encode_canonical(Value(List{}))) == "0200000000");
}

TEST_CASE("patient listing with empty fields matches the independent encoder") {
    auto golden = load_golden();
    Value listing = Map{
        {"dbIdentifier", ""}, {"name", ""},      {"gender", ""},    {"age", ""},
        {"dob", ""},          {"phone", ""},     {"photo", ""},     {"bloodgroup", ""},
        {"superset", ""},     {"docdetails", Map{{"type", ""}}},   {"allergies", ""},
        {"insurance", ""},
    };
    CHECK(to_hex(encode_canonical(listing)) == golden["patient_listing_bytes"].get<std::string>());
    CHECK(digest_of(listing).hex() == "875a9747eb59a781137e5a9aeccb1172e077974aed0d4bc47e8d97789131df12");
}

TEST_CASE("golden document digests are stable") {
    auto golden = load_golden();
    REQUIRE(golden["hash"] == "sha256");
    for (const auto& entry : golden["documents"]) {
        auto doc = from_json(entry["doc"]);
        CHECK(digest_of(doc).hex() == entry["hex"].get<std::string>());
    }
}

TEST_CASE("digest: published SHA-256 vectors and determinism") {
    CHECK(digest(std::string_view{}).hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(digest(std::string_view{"abc"}).hex() ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(digest(std::string_view{"x"}) == digest(std::string_view{"x"}));
    auto d = digest(std::string_view{"abc"});
    CHECK(d.hex().size() == 64);
    CHECK(Digest::from_hex(d.hex()) == d);
}

TEST_CASE("digest: one flipped bit changes the digest") {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        Bytes input(1 + rng() % 64);
        for (auto& b : input) b = static_cast<std::uint8_t>(rng());
        auto flipped = input;
        auto bit = rng() % (input.size() * 8);
        flipped[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        CHECK(digest(input) != digest(flipped));
    }
}

TEST_CASE("round trip over generated documents") {
    std::mt19937_64 rng(42);
    for (int i = 0; i < 500; ++i) {
        auto doc = random_document(rng);
        auto bytes = encode_canonical(doc);
        CHECK(decode_canonical(bytes) == doc);
        CHECK(from_json(to_json(doc)) == doc);
    }
}

TEST_CASE("permuted map construction yields identical bytes") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 200; ++i) {
        auto doc = random_document(rng);
        std::vector<std::pair<std::string, Value>> entries(doc.as_map().begin(), doc.as_map().end());
        std::shuffle(entries.begin(), entries.end(), rng);
        CHECK(encode_canonical(Value::map_from_entries(entries)) == encode_canonical(doc));
    }
}

TEST_CASE("duplicate keys are rejected") {
    CHECK(code_of([] { Value::map_from_entries({{"a", 1}, {"a", 2}}); }) == ErrorCode::DuplicateKey);
    // map with two entries, both key "a"
    auto dup = from_hex("01000000020300000001610400000008000000000000000103000000016104000000080000000000000002");
    CHECK(code_of([&] { decode_canonical(dup); }) == ErrorCode::DuplicateKey);
}

TEST_CASE("decoder rejects non-canonical input") {
    // keys out of order: "b" then "a"
    auto unsorted = from_hex("01000000020300000001620400000008000000000000000103000000016104000000080000000000000002");
    CHECK(code_of([&] { decode_canonical(unsorted); }) == ErrorCode::MalformedEncoding);
    CHECK(code_of([] { decode_canonical(from_hex("010000000000")); }) == ErrorCode::MalformedEncoding);
    CHECK(code_of([] { decode_canonical(from_hex("0300000005616263")); }) == ErrorCode::MalformedEncoding);
    CHECK(code_of([] { decode_canonical(from_hex("0400000004000000ff")); }) == ErrorCode::MalformedEncoding);
    CHECK(code_of([] { decode_canonical(from_hex("050000000102")); }) == ErrorCode::MalformedEncoding);
    CHECK(code_of([] { decode_canonical(from_hex("0900000000")); }) == ErrorCode::MalformedEncoding);
    CHECK(code_of([] { decode_canonical(Bytes{}); }) == ErrorCode::MalformedEncoding);
}

TEST_CASE("decoder never crashes on mutated encodings") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        auto bytes = encode_canonical(random_document(rng));
        bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
        try {
            auto v = decode_canonical(bytes);
            CHECK(encode_canonical(v) == bytes);
        } catch (const Error& e) {
            CHECK((e.code() == ErrorCode::MalformedEncoding || e.code() == ErrorCode::DuplicateKey));
        }
    }
}

TEST_CASE("text notation tags timestamps and bytes") {
    Value v = Map{{"t", Timestamp{5}}, {"b", Bytes{1, 2}}, {"n", std::int64_t{-3}}};
    auto j = to_json(v);
    CHECK(j["t"]["$ts"] == 5);
    CHECK(j["b"]["$bytes"] == "0102");
    CHECK(code_of([] { from_json(nlohmann::json::parse("{\"x\": 1.5}")); }) == ErrorCode::WrongType);
    CHECK(code_of([] { from_json(nlohmann::json::parse("{\"x\": null}")); }) == ErrorCode::WrongType);
}

TEST_CASE("hex helpers") {
    CHECK(to_hex(Bytes{0x00, 0xff, 0x10}) == "00ff10");
    CHECK(from_hex("00FF10") == Bytes{0x00, 0xff, 0x10});
    CHECK(code_of([] { from_hex("abc"); }) == ErrorCode::BadHex);
    CHECK(code_of([] { from_hex("zz"); }) == ErrorCode::BadHex);
    CHECK(code_of([] { Digest::from_hex("00"); }) == ErrorCode::BadHex);
}
