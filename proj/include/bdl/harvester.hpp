#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "bdl/datestamp.hpp"
#include "bdl/harvest_protocol.hpp"
#include "bdl/registry.hpp"
#include "bdl/union_index.hpp"

namespace bdl {

enum class JobKind { full, incremental, file_ingest };
enum class JobState { queued, running, succeeded, failed };

std::string_view job_kind_name(JobKind k);
std::string_view job_state_name(JobState s);

struct JobCounts {
    std::size_t fetched = 0;
    std::size_t upserted = 0;
    std::size_t deleted = 0;
    std::size_t skipped = 0;
    friend bool operator==(const JobCounts&, const JobCounts&) = default;
};

struct HarvestJob {
    std::uint64_t job_id = 0;
    std::string provider_id;
    JobKind kind = JobKind::full;
    JobState state = JobState::queued;
    JobCounts counts;
    std::vector<std::string> error_log;
};

json to_json(const HarvestJob& j);

struct HarvestCheckpoint {
    std::string provider_id;
    Datestamp last_success_until;
};

enum class ApplyOutcome { upserted, deleted, skipped };

/// Fetches one `/oai` response. Throws on transport failure or non-200.
class HarvestTransport {
public:
    virtual ~HarvestTransport() = default;
    virtual std::string fetch(const ProviderDescriptor& provider, const HarvestParams& params) = 0;
};

class HttpHarvestTransport final : public HarvestTransport {
public:
    explicit HttpHarvestTransport(std::chrono::milliseconds timeout = std::chrono::seconds(30)) : timeout_(timeout) {}
    std::string fetch(const ProviderDescriptor& provider, const HarvestParams& params) override;

private:
    std::chrono::milliseconds timeout_;
};

struct RetryPolicy {
    int attempts = 3;
    std::vector<std::chrono::milliseconds> backoff = {std::chrono::seconds(1), std::chrono::seconds(2),
                                                      std::chrono::seconds(4)};
    std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
        std::this_thread::sleep_for(d);
    };
};

inline constexpr std::int64_t kOverlapWindowSeconds = 60;

/// Service-provider side of harvesting: pulls provider records into the
/// union index with last-write-wins reconciliation and checkpoints.
class Harvester {
public:
    /// state_file holds checkpoints and job history; empty keeps them in memory.
    Harvester(UnionIndex& index, std::shared_ptr<HarvestTransport> transport, std::filesystem::path state_file = {},
              RetryPolicy retry = {});
    ~Harvester();

    HarvestJob run_full(const ProviderDescriptor& provider);
    HarvestJob run_incremental(const ProviderDescriptor& provider);
    HarvestJob ingest_files(const std::filesystem::path& directory, const std::string& virtual_provider_id,
                            Datestamp now);

    ApplyOutcome apply(const WireRecord& wire, const std::string& provider_id);

    /// Starts a job on a background thread; returns its id immediately.
    std::uint64_t enqueue(const ProviderDescriptor& provider, JobKind kind);
    /// Blocks until every enqueued job has finished.
    void drain();

    std::optional<Datestamp> checkpoint(const std::string& provider_id) const;
    std::vector<HarvestCheckpoint> checkpoints() const;
    std::vector<HarvestJob> jobs() const;
    std::optional<HarvestJob> job(std::uint64_t job_id) const;

    /// Runs incremental harvests for every harvest-mode provider whose poll
    /// interval has elapsed, checking every `tick`.
    void start_scheduler(std::function<std::shared_ptr<const std::vector<ProviderDescriptor>>()> providers,
                         std::chrono::milliseconds tick = std::chrono::seconds(1));
    void stop_scheduler();

private:

    std::uint64_t new_job(const std::string& provider_id, JobKind kind);
    void update_job(std::uint64_t id, const std::function<void(HarvestJob&)>& fn);
    HarvestJob run_pages(const ProviderDescriptor& provider, JobKind kind, std::uint64_t job_id);
    HarvestJob execute(const ProviderDescriptor& provider, JobKind kind, std::uint64_t job_id);
    std::string fetch_with_retry(const ProviderDescriptor& provider, const HarvestParams& params);
    std::mutex& provider_lock(const std::string& provider_id);
    void persist_state();
    void load_state();

    UnionIndex& index_;
    std::shared_ptr<HarvestTransport> transport_;
    std::filesystem::path state_file_;
    RetryPolicy retry_;

    mutable std::mutex mutex_;  // guards jobs_, checkpoints_, provider_locks_, next_job_
    std::map<std::uint64_t, HarvestJob> jobs_;
    std::map<std::string, Datestamp> checkpoints_;
    std::map<std::string, std::unique_ptr<std::mutex>> provider_locks_;
    std::uint64_t next_job_ = 1;
    std::mutex apply_mutex_;

    std::mutex workers_mutex_;
    std::condition_variable workers_cv_;
    std::size_t active_workers_ = 0;

    std::thread scheduler_;
    std::mutex scheduler_mutex_;
    std::condition_variable scheduler_cv_;
    bool scheduler_stop_ = false;
};

}  // namespace bdl
