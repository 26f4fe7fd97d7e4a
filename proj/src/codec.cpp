#include "medledger/codec.hpp"

#include <sodium.h>

#include "medledger/error.hpp"

namespace medledger {
namespace {

constexpr char kHexChars[] = "0123456789abcdef";

void put_u32(Bytes& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_i64(Bytes& out, std::int64_t v) {
    auto u = static_cast<std::uint64_t>(v);
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(u >> shift));
}

void put_header(Bytes& out, Tag tag, std::size_t length) {
    if (length > 0xffffffffu) throw Error(ErrorCode::MalformedEncoding, {}, "length exceeds u32");
    out.push_back(static_cast<std::uint8_t>(tag));
    put_u32(out, static_cast<std::uint32_t>(length));
}

void put_string(Bytes& out, const std::string& s) {
    put_header(out, Tag::String, s.size());
    out.insert(out.end(), s.begin(), s.end());
}

struct Encoder {
    Bytes& out;

    void operator()(const Map& m) const {
        put_header(out, Tag::Map, m.size());
        for (const auto& [k, v] : m) {
            put_string(out, k);
            std::visit(*this, v.storage());
        }
    }
    void operator()(const List& l) const {
        put_header(out, Tag::List, l.size());
        for (const auto& v : l) std::visit(*this, v.storage());
    }
    void operator()(const std::string& s) const { put_string(out, s); }
    void operator()(std::int64_t i) const {
        put_header(out, Tag::Int, 8);
        put_i64(out, i);
    }
    void operator()(bool b) const {
        put_header(out, Tag::Bool, 1);
        out.push_back(b ? 1 : 0);
    }
    void operator()(Timestamp t) const {
        put_header(out, Tag::Timestamp, 8);
        put_i64(out, t.ms);
    }
    void operator()(const Bytes& b) const {
        put_header(out, Tag::Bytes, b.size());
        out.insert(out.end(), b.begin(), b.end());
    }
};

class Decoder {
public:
    explicit Decoder(ByteView in) : in_(in) {}

    Value value(int depth = 0) {
        if (depth > kMaxDepth) fail("nesting too deep");
        auto tag = take(1)[0];
        auto length = u32();
        switch (static_cast<Tag>(tag)) {
        case Tag::Map: {
            Map m;
            const std::string* prev = nullptr;
            for (std::uint32_t i = 0; i < length; ++i) {
                auto key = string_value();
                if (prev && !(*prev < key)) {
                    if (*prev == key) throw Error(ErrorCode::DuplicateKey, key);
                    fail("map keys out of order");
                }
                auto [it, _] = m.emplace(std::move(key), value(depth + 1));
                prev = &it->first;
            }
            return m;
        }
        case Tag::List: {
            List l;
            l.reserve(std::min<std::size_t>(length, remaining()));
            for (std::uint32_t i = 0; i < length; ++i) l.push_back(value(depth + 1));
            return l;
        }
        case Tag::String: {
            auto s = take(length);
            return std::string(s.begin(), s.end());
        }
        case Tag::Int:
            if (length != 8) fail("int64 length must be 8");
            return i64();
        case Tag::Bool: {
            if (length != 1) fail("bool length must be 1");
            auto b = take(1)[0];
            if (b > 1) fail("bool payload must be 0 or 1");
            return b == 1;
        }
        case Tag::Timestamp:
            if (length != 8) fail("timestamp length must be 8");
            return Timestamp{i64()};
        case Tag::Bytes: {
            auto b = take(length);
            return Bytes(b.begin(), b.end());
        }
        }
        fail("unknown type tag");
    }

    std::size_t remaining() const { return in_.size() - pos_; }

private:
    static constexpr int kMaxDepth = 128;

    [[noreturn]] void fail(const char* why) const {
        throw Error(ErrorCode::MalformedEncoding, {}, std::string(why) + " at offset " + std::to_string(pos_));
    }

    ByteView take(std::size_t n) {
        if (n > remaining()) fail("truncated input");
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::uint32_t u32() {
        auto b = take(4);
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
    }

    std::int64_t i64() {
        auto b = take(8);
        std::uint64_t u = 0;
        for (auto byte : b) u = (u << 8) | byte;
        return static_cast<std::int64_t>(u);
    }

    std::string string_value() {
        auto tag = take(1)[0];
        if (tag != static_cast<std::uint8_t>(Tag::String)) fail("map key must be a string");
        auto s = take(u32());
        return std::string(s.begin(), s.end());
    }

    ByteView in_;
    std::size_t pos_ = 0;
};

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

} // namespace

Value Value::map_from_entries(std::vector<std::pair<std::string, Value>> entries) {
    Map m;
    for (auto& [k, v] : entries) {
        auto [it, inserted] = m.emplace(std::move(k), std::move(v));
        if (!inserted) throw Error(ErrorCode::DuplicateKey, it->first);
    }
    return m;
}

const Value* Value::find(std::string_view key) const {
    if (!is_map()) return nullptr;
    const auto& m = as_map();
    auto it = m.find(std::string(key));
    return it == m.end() ? nullptr : &it->second;
}

void encode_canonical_into(const Value& doc, Bytes& out) { std::visit(Encoder{out}, doc.storage()); }

Bytes encode_canonical(const Value& doc) {
    Bytes out;
    encode_canonical_into(doc, out);
    return out;
}

Value decode_canonical(ByteView bytes) {
    Decoder d(bytes);
    auto v = d.value();
    if (d.remaining() != 0) throw Error(ErrorCode::MalformedEncoding, {}, "trailing bytes");
    return v;
}

std::string Digest::hex() const { return to_hex(bytes); }

Digest Digest::from_hex(std::string_view hex) {
    if (hex.size() != 64) throw Error(ErrorCode::BadHex, std::string(hex), "digest must be 64 hex chars");
    return from_bytes(medledger::from_hex(hex));
}

Digest Digest::from_bytes(ByteView b) {
    if (b.size() != 32) throw Error(ErrorCode::BadHex, {}, "digest must be 32 bytes");
    Digest d;
    std::copy(b.begin(), b.end(), d.bytes.begin());
    return d;
}

Digest digest(ByteView bytes) {
    Digest d;
    crypto_hash_sha256(d.bytes.data(), bytes.data(), bytes.size());
    return d;
}

Digest digest(std::string_view text) { return digest(as_bytes(text)); }

std::string to_hex(ByteView bytes) {
    std::string out(bytes.size() * 2, '0');
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        out[2 * i] = kHexChars[bytes[i] >> 4];
        out[2 * i + 1] = kHexChars[bytes[i] & 0x0f];
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw Error(ErrorCode::BadHex, std::string(hex), "odd length");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_nibble(hex[2 * i]);
        int lo = hex_nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw Error(ErrorCode::BadHex, std::string(hex), "non-hex character");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

nlohmann::json to_json(const Value& doc) {
    using nlohmann::json;
    struct Visitor {
        json operator()(const Map& m) const {
            json j = json::object();
            for (const auto& [k, v] : m) j[k] = std::visit(*this, v.storage());
            return j;
        }
        json operator()(const List& l) const {
            json j = json::array();
            for (const auto& v : l) j.push_back(std::visit(*this, v.storage()));
            return j;
        }
        json operator()(const std::string& s) const { return s; }
        json operator()(std::int64_t i) const { return i; }
        json operator()(bool b) const { return b; }
        json operator()(Timestamp t) const { return json{{"$ts", t.ms}}; }
        json operator()(const Bytes& b) const { return json{{"$bytes", to_hex(b)}}; }
    };
    return std::visit(Visitor{}, doc.storage());
}

Value from_json(const nlohmann::json& j) {
    using nlohmann::json;
    switch (j.type()) {
    case json::value_t::object: {
        if (j.size() == 1) {
            if (auto it = j.find("$ts"); it != j.end()) {
                if (!it->is_number_integer()) throw Error(ErrorCode::WrongType, "$ts", "expected integer");
                return Timestamp{it->get<std::int64_t>()};
            }
            if (auto it = j.find("$bytes"); it != j.end()) {
                if (!it->is_string()) throw Error(ErrorCode::WrongType, "$bytes", "expected hex string");
                return from_hex(it->get<std::string>());
            }
        }
        Map m;
        for (const auto& [k, v] : j.items()) m.emplace(k, from_json(v));
        return m;
    }
    case json::value_t::array: {
        List l;
        for (const auto& v : j) l.push_back(from_json(v));
        return l;
    }
    case json::value_t::string:
        return j.get<std::string>();
    case json::value_t::boolean:
        return j.get<bool>();
    case json::value_t::number_integer:
        return j.get<std::int64_t>();
    case json::value_t::number_unsigned:
        if (j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
            throw Error(ErrorCode::WrongType, {}, "integer exceeds int64");
        return static_cast<std::int64_t>(j.get<std::uint64_t>());
    default:
        throw Error(ErrorCode::WrongType, {}, std::string("unsupported JSON value: ") + j.type_name());
    }
}

} // namespace medledger
