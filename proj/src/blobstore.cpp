#include "medledger/blobstore.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "doc_util.hpp"
#include "medledger/acl.hpp"
#include "medledger/crypto.hpp"
#include "medledger/error.hpp"

namespace medledger {
namespace fs = std::filesystem;
namespace {

using namespace medledger::detail;

constexpr const char* kIndexFile = "index.jsonl";

bool is_blob_name(const std::string& name) {
    return name.size() == 64 && std::all_of(name.begin(), name.end(), [](char c) {
               return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
           });
}

Bytes read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, p.string(), "cannot open");
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, ByteView bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, p.string(), "write failed");
}

} // namespace

bool is_supported_media_type(std::string_view media_type) {
    return media_type == "pdf" || media_type == "png" || media_type == "jpg";
}

Document to_document(const BlobEntry& e) {
    return Map{{"contentHash", e.hash.hex()}, {"size", e.size}, {"mediaType", e.media_type}, {"storedAt", e.stored_at}};
}

BlobEntry blob_entry_from_document(const Document& doc) {
    static constexpr const char* kKeys[] = {"contentHash", "size", "mediaType", "storedAt"};
    only_keys(doc, kKeys);
    return {get_digest_hex(doc, "contentHash"), get_int(doc, "size"), get_string(doc, "mediaType"),
            get_timestamp(doc, "storedAt")};
}

BlobStore::BlobStore(fs::path dir, std::size_t max_bytes) : dir_(std::move(dir)), max_bytes_(max_bytes) {
    fs::create_directories(dir_ / ".tmp");
    std::ifstream in(dir_ / kIndexFile);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto e = blob_entry_from_document(from_json(nlohmann::json::parse(line)));
            index_[e.hash] = e;
        } catch (const std::exception&) {
            // A torn final line from a crash mid-append; the blob file itself is intact or absent.
        }
    }
}

Digest BlobStore::put(const LoginRecord& caller, ByteView bytes, const std::string& media_type, Timestamp now) {
    if (!authorize(caller, Permission::PutBlob))
        throw Error(ErrorCode::PermissionDenied, caller.user, "PutBlob requires DOCTOR or above");
    if (bytes.empty()) throw Error(ErrorCode::EmptyBlob);
    if (bytes.size() > max_bytes_)
        throw Error(ErrorCode::TooLarge, {}, std::to_string(bytes.size()) + " bytes exceeds " + std::to_string(max_bytes_));
    if (!is_supported_media_type(media_type)) throw Error(ErrorCode::UnsupportedMediaType, media_type);

    auto hash = digest(bytes);
    std::lock_guard lock(mu_);
    auto final_path = path_for(hash);
    bool indexed = index_.contains(hash);
    if (indexed && fs::exists(final_path) && digest(read_file(final_path)) == hash) return hash;

    std::array<std::uint8_t, 8> nonce{};
    random_bytes(nonce);
    auto tmp = dir_ / ".tmp" / (hash.hex() + "." + to_hex(nonce));
    write_file(tmp, bytes);
    fs::rename(tmp, final_path);

    if (!indexed) {
        BlobEntry e{hash, static_cast<std::int64_t>(bytes.size()), media_type, now};
        std::ofstream idx(dir_ / kIndexFile, std::ios::app);
        idx << to_json(to_document(e)).dump() << '\n';
        idx.flush();
        if (!idx) throw Error(ErrorCode::IoError, kIndexFile, "append failed");
        index_.emplace(hash, e);
    }
    return hash;
}

bool may_read_blob(const LoginRecord& caller, const LedgerState& state, const Digest& hash) {
    if (caller.superset >= ElevationLevel::Doctor) return true;
    auto hex = hash.hex();
    if (auto it = state.patients.find(caller.mob); it != state.patients.end())
        for (const auto& v : it->second)
            if (v.photo == hex) return true;
    for (const auto& [_, e] : state.prescriptions)
        if (e.record.patientnum == caller.mob && e.record.attachment == hex) return true;
    return false;
}

std::pair<Bytes, std::string> BlobStore::get(const LoginRecord& caller, const LedgerState& state,
                                             const Digest& hash) const {
    if (!may_read_blob(caller, state, hash))
        throw Error(ErrorCode::PermissionDenied, caller.user, "blob is not referenced by the caller's records");
    std::string media_type;
    {
        std::lock_guard lock(mu_);
        auto it = index_.find(hash);
        if (it == index_.end()) throw Error(ErrorCode::NotFound, hash.hex());
        media_type = it->second.media_type;
    }
    Bytes bytes;
    try {
        bytes = read_file(path_for(hash));
    } catch (const Error&) {
        throw Error(ErrorCode::NotFound, hash.hex(), "indexed but file missing");
    }
    if (digest(bytes) != hash) throw Error(ErrorCode::CorruptBlob, hash.hex());
    return {std::move(bytes), media_type};
}

std::optional<BlobEntry> BlobStore::entry(const Digest& hash) const {
    std::lock_guard lock(mu_);
    auto it = index_.find(hash);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<BlobEntry> BlobStore::entries() const {
    std::lock_guard lock(mu_);
    std::vector<BlobEntry> out;
    for (const auto& [_, e] : index_) out.push_back(e);
    return out;
}

std::size_t BlobStore::size() const {
    std::lock_guard lock(mu_);
    return index_.size();
}

AuditReport BlobStore::audit() const {
    std::lock_guard lock(mu_);
    AuditReport r;
    for (const auto& [hash, e] : index_) {
        ++r.checked;
        auto p = path_for(hash);
        if (!fs::exists(p)) {
            r.missing.push_back(hash);
            continue;
        }
        auto bytes = read_file(p);
        if (digest(bytes) != hash || static_cast<std::int64_t>(bytes.size()) != e.size) r.corrupt.push_back(hash);
    }
    for (const auto& f : fs::directory_iterator(dir_)) {
        auto name = f.path().filename().string();
        if (!f.is_regular_file() || !is_blob_name(name)) continue;
        if (!index_.contains(Digest::from_hex(name))) r.unindexed.push_back(name);
    }
    std::sort(r.unindexed.begin(), r.unindexed.end());
    return r;
}

} // namespace medledger
