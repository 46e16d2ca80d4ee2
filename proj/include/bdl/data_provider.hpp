#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "bdl/datestamp.hpp"
#include "bdl/dc_model.hpp"
#include "bdl/harvest_protocol.hpp"
#include "bdl/json_codec.hpp"
#include "bdl/query.hpp"
#include "bdl/storage.hpp"

namespace bdl {

struct RepositoryConfig {
    std::string repository_id;
    std::string display_name;
    std::string admin_contact;
    std::string listen_address = "127.0.0.1:0";
    std::size_t page_size = 100;
    std::filesystem::path data_dir;  // empty: in-memory only
    std::size_t max_document_bytes = 64u * 1024u * 1024u;
    bool sync_writes = false;
    std::size_t compact_every = 1000;  // operations between snapshots; 0 disables

    /// Throws std::invalid_argument when an invariant does not hold.
    void check() const;
};

RepositoryConfig repository_config_from_json(const json& j);
json to_json(const RepositoryConfig& c);

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

class RepositoryError : public std::runtime_error {
public:
    enum class Kind { id_does_not_exist, already_deleted, clock_regression, document_too_large, storage };
    RepositoryError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct StoredItem {
    std::uint64_t local_id = 0;
    DocumentKind kind = DocumentKind::generic;
    WireRecord wire;
    std::optional<std::string> document;
    std::string media_type;
};

struct LocalHit {
    std::string identifier;
    Datestamp datestamp;
    MetadataRecord record;
};

struct LocalSearchResult {
    std::size_t total = 0;
    std::vector<LocalHit> hits;
};

/// A data provider's store. Writes are serialized; reads and harvest
/// requests share a reader lock so they never see a half-applied write.
class Repository {
public:
    /// Recovers persisted state when config.data_dir is set.
    explicit Repository(RepositoryConfig config);
    ~Repository();

    const RepositoryConfig& config() const { return config_; }

    std::string submit(const MetadataRecord& record, DocumentKind kind, std::optional<std::string> document,
                       std::string media_type, Datestamp now);
    Datestamp update(const std::string& identifier, const MetadataRecord& record, Datestamp now);
    Datestamp remove(const std::string& identifier, Datestamp now);

    /// Live items matching the query, (datestamp desc, identifier asc),
    /// windowed [start, start + max). Throws QuerySyntaxError.
    LocalSearchResult search_local(std::string_view query_text, std::size_t start, std::size_t max) const;

    std::string handle_harvest(const HarvestParams& params, Datestamp now) const;

    std::optional<StoredItem> find(const std::string& identifier) const;
    std::optional<StoredItem> find(std::uint64_t local_id) const;

    /// Every item (live and tombstoned) ordered by local id.
    std::vector<StoredItem> items() const;
    std::size_t size() const;
    std::uint64_t next_local_id() const;

    /// Writes a snapshot and empties the operation log.
    void compact();

    std::string identifier_for(std::uint64_t local_id) const;
    std::optional<std::uint64_t> local_id_of(std::string_view identifier) const;

private:
    void recover();
    void apply_logged(const json& op);
    json state_json() const;
    void log(json op);
    void maybe_compact();
    void store_document(std::uint64_t local_id, const std::string& bytes);
    void drop_document(std::uint64_t local_id);
    StoredItem& existing(const std::string& identifier);

    RepositoryConfig config_;
    mutable std::shared_mutex mutex_;
    std::map<std::uint64_t, StoredItem> items_;
    std::map<std::uint64_t, TokenizedRecord> tokens_;  // live items only
    std::uint64_t next_id_ = 1;
    std::unique_ptr<storage::OperationLog> log_;
};

json to_search_json(const std::string& provider_id, const LocalSearchResult& r);

}  // namespace bdl
