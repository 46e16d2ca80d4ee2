#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bdl/datestamp.hpp"
#include "bdl/dc_model.hpp"
#include "bdl/harvester.hpp"
#include "bdl/http.hpp"
#include "bdl/json_codec.hpp"
#include "bdl/registry.hpp"
#include "bdl/union_index.hpp"

namespace bdl {

enum class OutcomeStatus { ok, timeout, error };
std::string_view outcome_status_name(OutcomeStatus s);

struct SourceRecord {
    std::string identifier;
    MetadataRecord record;
};

struct ProviderOutcome {
    std::string provider_id;
    OutcomeStatus status = OutcomeStatus::error;
    std::chrono::milliseconds elapsed{0};
    std::vector<SourceRecord> records;  // ranked; empty unless ok
    std::string message;
};

struct SourceRef {
    std::string provider_id;
    std::string identifier;
    std::size_t rank = 0;
    friend auto operator<=>(const SourceRef&, const SourceRef&) = default;
};

struct MergedResult {
    Fingerprint fingerprint;
    MetadataRecord best_record;
    std::vector<SourceRef> sources;  // sorted by (provider, identifier, rank)
    double score = 0;
};

struct UnifiedResponse {
    std::vector<MergedResult> results;
    std::size_t total = 0;  // merged results before windowing
    bool partial = false;
    std::vector<ProviderOutcome> outcomes;
};

/// Something that answers the `/search` request shape.
class SearchTarget {
public:
    virtual ~SearchTarget() = default;
    virtual std::string id() const = 0;
    /// Returns the `{"records":[{"identifier","metadata"}...]}` document.
    /// Throws on any failure.
    virtual json search(const std::string& query, std::size_t max, std::chrono::milliseconds timeout) = 0;
};

class HttpSearchTarget final : public SearchTarget {
public:
    explicit HttpSearchTarget(ProviderDescriptor d) : d_(std::move(d)) {}
    std::string id() const override { return d_.provider_id; }
    json search(const std::string& query, std::size_t max, std::chrono::milliseconds timeout) override;

private:
    ProviderDescriptor d_;
};

class UnionSearchTarget final : public SearchTarget {
public:
    explicit UnionSearchTarget(const UnionIndex& index) : index_(index) {}
    std::string id() const override { return std::string(kUnionTargetId); }
    json search(const std::string& query, std::size_t max, std::chrono::milliseconds timeout) override;

private:
    const UnionIndex& index_;
};

struct Deadlines {
    std::chrono::milliseconds per_provider{2000};
    std::chrono::milliseconds overall{5000};
};

/// Queries every target concurrently; outcomes come back in target order.
std::vector<ProviderOutcome> broadcast(const std::string& query, const std::vector<std::shared_ptr<SearchTarget>>& targets,
                                       std::size_t depth, Deadlines deadlines = {});

/// Groups ok records by fingerprint and ranks by summed reciprocal rank.
std::vector<MergedResult> merge(const std::vector<ProviderOutcome>& outcomes);

json to_json(const MergedResult& r);
json to_json(const UnifiedResponse& r);

struct GatewayOptions {
    Deadlines deadlines;
    /// How many records each target is asked for; windows are cut from the merged list.
    std::size_t fetch_depth = 1000;
};

/// The single query interface over the union index and live providers.
class Gateway {
public:
    Gateway(UnionIndex& index, ProviderRegistry& registry, Harvester& harvester, const Clock& clock,
            GatewayOptions options = {});

    /// Throws QuerySyntaxError before contacting anything; std::invalid_argument when max < 1.
    UnifiedResponse unified_search(const std::string& query, std::size_t start, std::size_t max) const;

    UnionIndex& index() { return index_; }
    ProviderRegistry& registry() { return registry_; }
    Harvester& harvester() { return harvester_; }
    const Clock& clock() const { return clock_; }

private:
    UnionIndex& index_;
    ProviderRegistry& registry_;
    Harvester& harvester_;
    const Clock& clock_;
    GatewayOptions options_;
};

/// HTTP front of a Gateway:
///   GET    /api/search?q=&start=&max=
///   GET    /api/providers, POST /api/providers, DELETE /api/providers/<id>
///   POST   /api/harvest/<id>/run?kind=full|incremental
///   GET    /api/harvest/jobs
///   GET    /api/checkpoints
///   POST   /api/ingest  {"directory","providerId"}
///   POST   /search      the union index as a search target
class GatewayServer {
public:
    explicit GatewayServer(Gateway& gateway);
    ~GatewayServer();

    void start(const std::string& listen_address);
    void stop();
    void wait() { service_.wait(); }
    std::string base_url() const { return service_.base_url(); }
    int port() const { return service_.port(); }

private:
    void install_routes();

    Gateway& gateway_;
    http::Service service_;
};

}  // namespace bdl
