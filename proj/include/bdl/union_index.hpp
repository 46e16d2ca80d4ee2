#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "bdl/datestamp.hpp"
#include "bdl/dc_model.hpp"
#include "bdl/json_codec.hpp"
#include "bdl/query.hpp"
#include "bdl/storage.hpp"

namespace bdl {

struct EntryKey {
    std::string provider_id;
    std::string identifier;
    friend auto operator<=>(const EntryKey&, const EntryKey&) = default;
};

struct IndexedEntry {
    std::string provider_id;
    RecordHeader header;
    std::optional<MetadataRecord> record;  // absent when deleted
    Fingerprint fingerprint;

    EntryKey key() const { return {provider_id, header.identifier}; }
    friend bool operator==(const IndexedEntry&, const IndexedEntry&) = default;
};

IndexedEntry make_entry(std::string provider_id, RecordHeader header, std::optional<MetadataRecord> record);

struct UnionHit {
    std::string provider_id;
    std::string identifier;
    std::uint64_t score = 0;
    Datestamp datestamp;
    MetadataRecord record;
};

struct UnionResult {
    std::size_t total = 0;
    std::vector<UnionHit> hits;
};

/// Field weight used by ranking: title 3, creator 2, subject 2, others 1.
std::uint64_t field_weight(Element e);

/// Additive field-weighted term frequency over the query's distinct
/// positive clauses; an `any` clause scores its best field.
std::uint64_t score_record(const QueryNode& query, const TokenizedRecord& record);

/// Central metadata store with an inverted index keyed by (element, token).
/// One writer at a time; readers share a lock and never observe a
/// half-applied write.
class UnionIndex {
public:
    /// In-memory when dir is empty; otherwise recovers from dir.
    explicit UnionIndex(std::filesystem::path dir = {}, bool sync_writes = false, std::size_t compact_every = 5000);
    ~UnionIndex();

    void upsert(const IndexedEntry& entry);
    void mark_deleted(const std::string& provider_id, const std::string& identifier, Datestamp datestamp);

    std::optional<IndexedEntry> lookup(const std::string& provider_id, const std::string& identifier) const;

    /// Throws QuerySyntaxError.
    UnionResult query(std::string_view query_text, std::size_t start, std::size_t max) const;
    UnionResult query(const QueryNode& q, std::size_t start, std::size_t max) const;

    /// Rebuilds postings from the stored entries.
    void rebuild();

    std::vector<IndexedEntry> entries() const;  // ordered by key
    std::vector<IndexedEntry> entries_of(const std::string& provider_id) const;
    std::size_t size() const;
    std::size_t live_size() const;
    /// Number of distinct posting keys; changes only through writes or rebuild.
    std::size_t posting_count() const;

    void compact();
    const std::filesystem::path& dir() const { return dir_; }

private:
    using DocId = std::uint32_t;
    using Postings = std::vector<DocId>;  // sorted

    struct Slot {
        IndexedEntry entry;
        TokenizedRecord tokens;
    };

    void recover();
    void apply_upsert(IndexedEntry entry);
    void index_doc(DocId id);
    void unindex_doc(DocId id);
    void log(json op);
    json state_json() const;
    Postings evaluate(const QueryNode& node) const;
    Postings clause_candidates(const Clause& clause) const;
    const Postings* postings(Element e, const std::string& token) const;

    std::filesystem::path dir_;
    std::size_t compact_every_;
    mutable std::shared_mutex mutex_;
    std::map<EntryKey, DocId> ids_;
    std::vector<Slot> slots_;
    std::unordered_map<std::string, Postings> postings_;
    Postings live_;
    std::unique_ptr<storage::OperationLog> log_;
};

json to_search_json(const UnionResult& r);

}  // namespace bdl
