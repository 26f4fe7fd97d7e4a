#pragma once

// Field accessors for hand-written document schemas. All throw MissingField or
// WrongType with the field name as subject.

#include <string>

#include "medledger/codec.hpp"
#include "medledger/error.hpp"

namespace medledger::detail {

inline const Map& expect_map(const Value& v, const char* what) {
    if (!v.is_map()) throw Error(ErrorCode::WrongType, what, "expected map");
    return v.as_map();
}

inline const Value& get(const Value& doc, const char* key) {
    const auto& m = expect_map(doc, "<root>");
    auto it = m.find(key);
    if (it == m.end()) throw Error(ErrorCode::MissingField, key);
    return it->second;
}

inline const std::string& get_string(const Value& doc, const char* key) {
    const auto& v = get(doc, key);
    if (!v.is_string()) throw Error(ErrorCode::WrongType, key, "expected string");
    return v.as_string();
}

inline std::int64_t get_int(const Value& doc, const char* key) {
    const auto& v = get(doc, key);
    if (!v.is_int()) throw Error(ErrorCode::WrongType, key, "expected integer");
    return v.as_int();
}

inline bool get_bool(const Value& doc, const char* key) {
    const auto& v = get(doc, key);
    if (!v.is_bool()) throw Error(ErrorCode::WrongType, key, "expected bool");
    return v.as_bool();
}

inline Timestamp get_timestamp(const Value& doc, const char* key) {
    const auto& v = get(doc, key);
    if (!v.is_timestamp()) throw Error(ErrorCode::WrongType, key, "expected timestamp");
    return v.as_timestamp();
}

inline const List& get_list(const Value& doc, const char* key) {
    const auto& v = get(doc, key);
    if (!v.is_list()) throw Error(ErrorCode::WrongType, key, "expected list");
    return v.as_list();
}

inline const Bytes& get_bytes(const Value& doc, const char* key) {
    const auto& v = get(doc, key);
    if (!v.is_bytes()) throw Error(ErrorCode::WrongType, key, "expected bytes");
    return v.as_bytes();
}

inline Digest get_digest_hex(const Value& doc, const char* key) {
    return Digest::from_hex(get_string(doc, key));
}

// Rejects keys outside the allowed set.
template <std::size_t N>
void only_keys(const Value& doc, const char* const (&allowed)[N]) {
    for (const auto& [k, _] : expect_map(doc, "<root>")) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw Error(ErrorCode::UnknownField, k);
    }
}

} // namespace medledger::detail
