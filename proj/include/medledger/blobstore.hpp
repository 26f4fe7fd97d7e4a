#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "medledger/codec.hpp"
#include "medledger/ledger.hpp"
#include "medledger/records.hpp"

namespace medledger {

inline constexpr std::size_t kDefaultMaxBlobBytes = 16u << 20;

bool is_supported_media_type(std::string_view media_type); // pdf, png, jpg

struct BlobEntry {
    Digest hash;
    std::int64_t size = 0;
    std::string media_type;
    Timestamp stored_at;

    bool operator==(const BlobEntry&) const = default;
};

Document to_document(const BlobEntry& e);
BlobEntry blob_entry_from_document(const Document& doc);

struct AuditReport {
    std::size_t checked = 0;
    std::vector<Digest> corrupt;          // bytes no longer hash to their name
    std::vector<Digest> missing;          // indexed but no file
    std::vector<std::string> unindexed;   // blob-named files without an index entry
    bool ok() const { return corrupt.empty() && missing.empty() && unindexed.empty(); }
};

// Content-addressed flat directory: one file per blob named by its 64-char
// lowercase hex digest, plus the sidecar index "index.jsonl" (one BlobEntry
// per line). Writes go to ".tmp/" and are renamed into place.
class BlobStore {
public:
    explicit BlobStore(std::filesystem::path dir, std::size_t max_bytes = kDefaultMaxBlobBytes);

    // Throws PermissionDenied, EmptyBlob, TooLarge, UnsupportedMediaType.
    Digest put(const LoginRecord& caller, ByteView bytes, const std::string& media_type, Timestamp now);

    // Callers with DOCTOR or above may read any blob; a patient may read blobs
    // referenced by their own patient record or prescriptions.
    // Throws PermissionDenied, NotFound, CorruptBlob.
    std::pair<Bytes, std::string> get(const LoginRecord& caller, const LedgerState& state, const Digest& hash) const;

    std::optional<BlobEntry> entry(const Digest& hash) const;
    std::vector<BlobEntry> entries() const;
    std::size_t size() const;

    AuditReport audit() const;

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path path_for(const Digest& hash) const { return dir_ / hash.hex(); }

private:
    std::filesystem::path dir_;
    std::size_t max_bytes_;
    mutable std::mutex mu_;
    std::map<Digest, BlobEntry> index_;
};

bool may_read_blob(const LoginRecord& caller, const LedgerState& state, const Digest& hash);

} // namespace medledger
