#include "bdl/harvester.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bdl/codecs.hpp"
#include "bdl/http.hpp"
#include "bdl/storage.hpp"
#include "bdl/text.hpp"

namespace bdl {

namespace {

constexpr std::size_t kJobHistory = 500;

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xF];
    }
    return out;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw std::runtime_error("cannot read " + p.string());
    return ss.str();
}

// Protocol errors other than an empty list are permanent; retrying them is pointless.
class ProtocolFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace

std::string_view job_kind_name(JobKind k) {
    switch (k) {
        case JobKind::full: return "full";
        case JobKind::incremental: return "incremental";
        case JobKind::file_ingest: return "file-ingest";
    }
    return "?";
}

std::string_view job_state_name(JobState s) {
    switch (s) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::succeeded: return "succeeded";
        case JobState::failed: return "failed";
    }
    return "?";
}

json to_json(const HarvestJob& j) {
    return {{"jobId", j.job_id},
            {"providerId", j.provider_id},
            {"kind", job_kind_name(j.kind)},
            {"state", job_state_name(j.state)},
            {"counts",
             {{"fetched", j.counts.fetched},
              {"upserted", j.counts.upserted},
              {"deleted", j.counts.deleted},
              {"skipped", j.counts.skipped}}},
            {"errorLog", j.error_log}};
}

std::string HttpHarvestTransport::fetch(const ProviderDescriptor& provider, const HarvestParams& params) {
    const auto res = http::get(provider.base_url, "/oai", http::Params(params.begin(), params.end()), timeout_);
    if (res.status != 200) throw std::runtime_error("HTTP " + std::to_string(res.status) + " from " + provider.base_url);
    return res.body;
}

Harvester::Harvester(UnionIndex& index, std::shared_ptr<HarvestTransport> transport, std::filesystem::path state_file,
                     RetryPolicy retry)
    : index_(index), transport_(std::move(transport)), state_file_(std::move(state_file)), retry_(std::move(retry)) {
    load_state();
}

Harvester::~Harvester() {
    stop_scheduler();
    drain();
}

void Harvester::load_state() {
    if (state_file_.empty() || !std::filesystem::exists(state_file_)) return;
    const json j = json::parse(read_file(state_file_));
    for (const auto& [provider, ds] : j.at("checkpoints").items())
        if (auto d = Datestamp::parse(ds.get<std::string>())) checkpoints_[provider] = *d;
    for (const auto& jj : j.at("jobs")) {
        HarvestJob job;
        job.job_id = jj.at("jobId").get<std::uint64_t>();
        job.provider_id = jj.at("providerId").get<std::string>();
        const auto kind = jj.at("kind").get<std::string>();
        job.kind = kind == "full" ? JobKind::full : kind == "incremental" ? JobKind::incremental : JobKind::file_ingest;
        const auto state = jj.at("state").get<std::string>();
        // A job that was in flight when the process stopped did not finish.
        job.state = state == "succeeded" ? JobState::succeeded : JobState::failed;
        const auto& c = jj.at("counts");
        job.counts = {c.at("fetched").get<std::size_t>(), c.at("upserted").get<std::size_t>(),
                      c.at("deleted").get<std::size_t>(), c.at("skipped").get<std::size_t>()};
        job.error_log = jj.at("errorLog").get<std::vector<std::string>>();
        if (state != "succeeded" && state != "failed") job.error_log.push_back("interrupted by shutdown");
        jobs_[job.job_id] = std::move(job);
        next_job_ = std::max(next_job_, jobs_.rbegin()->first + 1);
    }
}

void Harvester::persist_state() {
    if (state_file_.empty()) return;
    json cps = json::object();
    json jobs = json::array();
    {
        std::lock_guard lock(mutex_);
        for (const auto& [p, d] : checkpoints_) cps[p] = d.str();
        auto it = jobs_.size() > kJobHistory ? std::prev(jobs_.end(), kJobHistory) : jobs_.begin();
        for (; it != jobs_.end(); ++it) jobs.push_back(to_json(it->second));
    }
    storage::write_file_atomic(state_file_, json{{"checkpoints", cps}, {"jobs", jobs}}.dump());
}

std::uint64_t Harvester::new_job(const std::string& provider_id, JobKind kind) {
    std::lock_guard lock(mutex_);
    HarvestJob job;
    job.job_id = next_job_++;
    job.provider_id = provider_id;
    job.kind = kind;
    jobs_[job.job_id] = job;
    return job.job_id;
}

void Harvester::update_job(std::uint64_t id, const std::function<void(HarvestJob&)>& fn) {
    std::lock_guard lock(mutex_);
    fn(jobs_.at(id));
}

std::mutex& Harvester::provider_lock(const std::string& provider_id) {
    std::lock_guard lock(mutex_);
    auto& slot = provider_locks_[provider_id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

ApplyOutcome Harvester::apply(const WireRecord& wire, const std::string& provider_id) {
    std::lock_guard lock(apply_mutex_);
    if (const auto stored = index_.lookup(provider_id, wire.header.identifier)) {
        if (wire.header.datestamp < stored->header.datestamp) return ApplyOutcome::skipped;
        const std::optional<MetadataRecord> incoming = wire.header.deleted ? std::nullopt : wire.record;
        if (stored->header == wire.header && stored->record == incoming) return ApplyOutcome::skipped;
    }
    if (wire.header.deleted) {
        index_.mark_deleted(provider_id, wire.header.identifier, wire.header.datestamp);
        return ApplyOutcome::deleted;
    }
    index_.upsert(make_entry(provider_id, wire.header, wire.record));
    return ApplyOutcome::upserted;
}

std::string Harvester::fetch_with_retry(const ProviderDescriptor& provider, const HarvestParams& params) {
    std::string last_error;
    for (int attempt = 0; attempt < retry_.attempts; ++attempt) {
        if (attempt > 0) {
            const auto idx = std::min<std::size_t>(static_cast<std::size_t>(attempt - 1), retry_.backoff.size() - 1);
            if (!retry_.backoff.empty()) retry_.sleep(retry_.backoff[idx]);
        }
        try {
            return transport_->fetch(provider, params);
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw std::runtime_error("giving up after " + std::to_string(retry_.attempts) + " attempts: " + last_error);
}

HarvestJob Harvester::run_pages(const ProviderDescriptor& provider, JobKind kind, std::uint64_t job_id) {
    HarvestParams params{{"verb", "ListRecords"}};
    const auto previous = checkpoint(provider.provider_id);
    if (kind == JobKind::incremental && previous)
        params.emplace("from", previous->plus_seconds(-kOverlapWindowSeconds).str());

    JobCounts counts;
    std::optional<Datestamp> until;
    for (;;) {
        const std::string body = fetch_with_retry(provider, params);
        HarvestResponse resp;
        try {
            resp = decode_response(body);
        } catch (const std::exception& e) {
            throw ProtocolFailure(std::string("undecodable response: ") + e.what());
        }
        if (!until) until = resp.responded_at;
        if (resp.error) {
            if (*resp.error == HarvestErrorCode::no_records_match && params.count("resumptionToken") == 0) break;
            throw ProtocolFailure(std::string(error_code_name(*resp.error)) + ": " + resp.error_message);
        }
        for (const auto& w : resp.records) {
            ++counts.fetched;
            switch (apply(w, provider.provider_id)) {
                case ApplyOutcome::upserted: ++counts.upserted; break;
                case ApplyOutcome::deleted: ++counts.deleted; break;
                case ApplyOutcome::skipped: ++counts.skipped; break;
            }
        }
        update_job(job_id, [&](HarvestJob& j) { j.counts = counts; });
        if (!resp.resumption) break;
        params = {{"verb", "ListRecords"}, {"resumptionToken", resp.resumption->token}};
    }

    {
        std::lock_guard lock(mutex_);
        auto& cp = checkpoints_[provider.provider_id];
        if (until && (!previous || *until > cp)) cp = *until;
    }
    HarvestJob done;
    update_job(job_id, [&](HarvestJob& j) {
        j.counts = counts;
        j.state = JobState::succeeded;
        done = j;
    });
    return done;
}

HarvestJob Harvester::execute(const ProviderDescriptor& provider, JobKind kind, std::uint64_t job_id) {
    std::lock_guard running(provider_lock(provider.provider_id));
    update_job(job_id, [](HarvestJob& j) { j.state = JobState::running; });
    HarvestJob result;
    try {
        if (!provider.harvest) throw std::runtime_error("provider '" + provider.provider_id + "' has no harvest mode");
        result = run_pages(provider, kind, job_id);
    } catch (const std::exception& e) {
        update_job(job_id, [&](HarvestJob& j) {
            j.state = JobState::failed;
            j.error_log.emplace_back(e.what());
            result = j;
        });
    }
    persist_state();
    return result;
}

HarvestJob Harvester::run_full(const ProviderDescriptor& provider) {
    return execute(provider, JobKind::full, new_job(provider.provider_id, JobKind::full));
}

HarvestJob Harvester::run_incremental(const ProviderDescriptor& provider) {
    return execute(provider, JobKind::incremental, new_job(provider.provider_id, JobKind::incremental));
}

HarvestJob Harvester::ingest_files(const std::filesystem::path& directory, const std::string& virtual_provider_id,
                                   Datestamp now) {
    const std::uint64_t job_id = new_job(virtual_provider_id, JobKind::file_ingest);
    std::lock_guard running(provider_lock(virtual_provider_id));
    update_job(job_id, [](HarvestJob& j) { j.state = JobState::running; });

    JobCounts counts;
    std::vector<std::string> log;
    std::size_t parsed_files = 0;
    bool listing_failed = false;

    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (std::filesystem::directory_iterator it(directory, ec), end; !ec && it != end; it.increment(ec))
        if (it->is_regular_file()) files.push_back(it->path());
    if (ec) {
        log.push_back("cannot list " + directory.string() + ": " + ec.message());
        listing_failed = true;
    }
    std::sort(files.begin(), files.end());

    for (const auto& path : files) {
        const std::string ext = ascii_lower(path.extension().string());
        if (ext != ".html" && ext != ".htm" && ext != ".txt") continue;
        std::string bytes;
        try {
            bytes = read_file(path);
        } catch (const std::exception& e) {
            log.push_back(path.filename().string() + ": " + e.what());
            continue;
        }
        ++parsed_files;
        std::vector<ParsedRecord> records;
        if (ext == ".txt") records = parse_tagged_text(bytes);
        else records.push_back(extract_dc_from_html(bytes));

        for (auto& pr : records) {
            for (const auto& w : pr.warnings) log.push_back(path.filename().string() + ": " + w);
            if (pr.record.statements.empty()) {
                log.push_back(path.filename().string() + ": no Dublin Core statements, skipped");
                ++counts.skipped;
                continue;
            }
            ++counts.fetched;
            std::string identifier;
            if (const auto* id = pr.record.first(Element::identifier)) identifier = trim(id->value);
            if (identifier.empty()) identifier = "hash:" + sha256_hex(encode_metadata_xml(pr.record)).substr(0, 16);

            const auto stored = index_.lookup(virtual_provider_id, identifier);
            if (stored && !stored->header.deleted && stored->record == pr.record) {
                ++counts.skipped;
                continue;
            }
            const Datestamp ds = stored && stored->header.datestamp > now ? stored->header.datestamp : now;
            switch (apply(WireRecord{{identifier, ds, false}, pr.record}, virtual_provider_id)) {
                case ApplyOutcome::upserted: ++counts.upserted; break;
                case ApplyOutcome::deleted: ++counts.deleted; break;
                case ApplyOutcome::skipped: ++counts.skipped; break;
            }
        }
    }

    HarvestJob done;
    update_job(job_id, [&](HarvestJob& j) {
        j.counts = counts;
        j.error_log = log;
        j.state = listing_failed || (parsed_files == 0 && !files.empty()) ? JobState::failed : JobState::succeeded;
        done = j;
    });
    persist_state();
    return done;
}

std::uint64_t Harvester::enqueue(const ProviderDescriptor& provider, JobKind kind) {
    if (kind == JobKind::file_ingest) throw std::invalid_argument("file ingest jobs are started with ingest_files");
    const std::uint64_t id = new_job(provider.provider_id, kind);
    {
        std::lock_guard lock(workers_mutex_);
        ++active_workers_;
    }
    std::thread([this, provider, kind, id] {
        execute(provider, kind, id);
        std::lock_guard lock(workers_mutex_);
        --active_workers_;
        workers_cv_.notify_all();
    }).detach();
    return id;
}

void Harvester::drain() {
    std::unique_lock lock(workers_mutex_);
    workers_cv_.wait(lock, [this] { return active_workers_ == 0; });
}

std::optional<Datestamp> Harvester::checkpoint(const std::string& provider_id) const {
    std::lock_guard lock(mutex_);
    const auto it = checkpoints_.find(provider_id);
    if (it == checkpoints_.end()) return std::nullopt;
    return it->second;
}

std::vector<HarvestCheckpoint> Harvester::checkpoints() const {
    std::lock_guard lock(mutex_);
    std::vector<HarvestCheckpoint> out;
    for (const auto& [p, d] : checkpoints_) out.push_back({p, d});
    return out;
}

std::vector<HarvestJob> Harvester::jobs() const {
    std::lock_guard lock(mutex_);
    std::vector<HarvestJob> out;
    for (const auto& [id, j] : jobs_) out.push_back(j);
    return out;
}

std::optional<HarvestJob> Harvester::job(std::uint64_t job_id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    return it->second;
}

void Harvester::start_scheduler(std::function<std::shared_ptr<const std::vector<ProviderDescriptor>>()> providers,
                                std::chrono::milliseconds tick) {
    stop_scheduler();
    {
        std::lock_guard lock(scheduler_mutex_);
        scheduler_stop_ = false;
    }
    scheduler_ = std::thread([this, providers = std::move(providers), tick] {
        std::map<std::string, std::chrono::steady_clock::time_point> last_run;
        std::unique_lock lock(scheduler_mutex_);
        while (!scheduler_stop_) {
            lock.unlock();
            const auto now = std::chrono::steady_clock::now();
            for (const auto& p : *providers()) {
                if (!p.harvest) continue;
                const auto it = last_run.find(p.provider_id);
                if (it != last_run.end() && now - it->second < std::chrono::seconds(p.poll_interval)) continue;
                bool busy = false;
                {
                    std::lock_guard jl(mutex_);
                    for (const auto& [id, j] : jobs_)
                        busy = busy || (j.provider_id == p.provider_id &&
                                        (j.state == JobState::queued || j.state == JobState::running));
                }
                if (busy) continue;
                last_run[p.provider_id] = now;
                enqueue(p, JobKind::incremental);
            }
            lock.lock();
            scheduler_cv_.wait_for(lock, tick, [this] { return scheduler_stop_; });
        }
    });
}

void Harvester::stop_scheduler() {
    {
        std::lock_guard lock(scheduler_mutex_);
        scheduler_stop_ = true;
    }
    scheduler_cv_.notify_all();
    if (scheduler_.joinable()) scheduler_.join();
}

}  // namespace bdl
