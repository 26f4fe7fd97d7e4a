#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace medledger {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// Milliseconds since the Unix epoch, UTC.
struct Timestamp {
    std::int64_t ms = 0;
    auto operator<=>(const Timestamp&) const = default;
};

class Value;
using Map = std::map<std::string, Value>;
using List = std::vector<Value>;

/// A Document node: string, int64, bool, timestamp, byte-string, map or list.
///
/// Maps are std::map so keys are unique and iterate in ascending byte order,
/// which is exactly the order the canonical encoding needs.
class Value {
public:
    using Storage = std::variant<Map, List, std::string, std::int64_t, bool, Timestamp, Bytes>;

    Value() : v_(Map{}) {}
    Value(Map m) : v_(std::move(m)) {}
    Value(List l) : v_(std::move(l)) {}
    Value(std::string s) : v_(std::move(s)) {}
    Value(std::string_view s) : v_(std::string(s)) {}
    Value(const char* s) : v_(std::string(s)) {}
    Value(std::int64_t i) : v_(i) {}
    Value(int i) : v_(static_cast<std::int64_t>(i)) {}
    Value(bool b) : v_(b) {}
    Value(Timestamp t) : v_(t) {}
    Value(Bytes b) : v_(std::move(b)) {}

    // Builds a map from (key, value) pairs; throws DuplicateKey on a repeat.
    static Value map_from_entries(std::vector<std::pair<std::string, Value>> entries);

    bool is_map() const { return std::holds_alternative<Map>(v_); }
    bool is_list() const { return std::holds_alternative<List>(v_); }
    bool is_string() const { return std::holds_alternative<std::string>(v_); }
    bool is_int() const { return std::holds_alternative<std::int64_t>(v_); }
    bool is_bool() const { return std::holds_alternative<bool>(v_); }
    bool is_timestamp() const { return std::holds_alternative<Timestamp>(v_); }
    bool is_bytes() const { return std::holds_alternative<Bytes>(v_); }

    const Map& as_map() const { return std::get<Map>(v_); }
    Map& as_map() { return std::get<Map>(v_); }
    const List& as_list() const { return std::get<List>(v_); }
    List& as_list() { return std::get<List>(v_); }
    const std::string& as_string() const { return std::get<std::string>(v_); }
    std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
    bool as_bool() const { return std::get<bool>(v_); }
    Timestamp as_timestamp() const { return std::get<Timestamp>(v_); }
    const Bytes& as_bytes() const { return std::get<Bytes>(v_); }

    // Map lookup; nullptr when this is not a map or the key is absent.
    const Value* find(std::string_view key) const;

    const Storage& storage() const { return v_; }
    bool operator==(const Value& other) const { return v_ == other.v_; }

private:
    Storage v_;
};

using Document = Value;

// Wire type tags.
enum class Tag : std::uint8_t {
    Map = 0x01,
    List = 0x02,
    String = 0x03,
    Int = 0x04,
    Bool = 0x05,
    Timestamp = 0x06,
    Bytes = 0x07,
};

Bytes encode_canonical(const Value& doc);
void encode_canonical_into(const Value& doc, Bytes& out);

// Strict decoder: rejects trailing bytes, unsorted or repeated map keys and
// non-canonical scalar lengths, so decode(b) succeeds only for canonical b.
Value decode_canonical(ByteView bytes);

/// SHA-256 digest.
struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    std::string hex() const;
    static Digest from_hex(std::string_view hex);
    static Digest from_bytes(ByteView b);
    Bytes to_bytes() const { return Bytes(bytes.begin(), bytes.end()); }

    auto operator<=>(const Digest&) const = default;
};

Digest digest(ByteView bytes);
Digest digest(std::string_view text);
inline Digest digest_of(const Value& doc) { return digest(encode_canonical(doc)); }

std::string to_hex(ByteView bytes);
Bytes from_hex(std::string_view hex);
inline ByteView as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Text notation: JSON with {"$ts": n} for timestamps and {"$bytes": "hex"} for
// byte strings. Floats and null are rejected.
nlohmann::json to_json(const Value& doc);
Value from_json(const nlohmann::json& j);

} // namespace medledger
