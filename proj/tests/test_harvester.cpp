#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "bdl/corpus.hpp"
#include "bdl/data_provider.hpp"
#include "bdl/harvester.hpp"
#include "support.hpp"

using namespace bdl;
using namespace std::chrono_literals;
using testing::ds;
using testing::stmt;

namespace {

const Datestamp T0 = ds("2020-06-01T12:00:00Z");

// Serves /oai requests straight from in-process repositories.
class FakeTransport final : public HarvestTransport {
public:
    std::map<std::string, Repository*> repos;
    std::atomic<std::int64_t> now{T0.epoch_seconds()};
    std::atomic<int> calls{0};
    std::atomic<int> fail_from_call{-1};  // fail every call with index >= this
    std::vector<HarvestParams> seen;
    std::mutex mutex;

    std::string fetch(const ProviderDescriptor& provider, const HarvestParams& params) override {
        const int n = calls++;
        {
            std::lock_guard lock(mutex);
            seen.push_back(params);
        }
        if (fail_from_call >= 0 && n >= fail_from_call) throw std::runtime_error("connection refused");
        return repos.at(provider.provider_id)->handle_harvest(params, Datestamp(now.load()));
    }
    void advance(std::int64_t s) { now += s; }
    Datestamp time() const { return Datestamp(now.load()); }
};

RepositoryConfig repo_config(const std::string& id, std::size_t page_size = 100) {
    RepositoryConfig c;
    c.repository_id = id;
    c.display_name = id;
    c.admin_contact = "a@" + id;
    c.page_size = page_size;
    return c;
}

ProviderDescriptor provider(const std::string& id, std::int64_t poll = 3600) {
    return {id, "http://unused/" + id, true, false, poll};
}

void fill(Repository& repo, std::uint64_t seed, std::size_t n, Datestamp at) {
    for (const auto& item : generate_corpus(seed, n)) repo.submit(item.record, item.kind, std::nullopt, "", at);
}

struct Rig {
    UnionIndex index;
    std::shared_ptr<FakeTransport> transport = std::make_shared<FakeTransport>();
    std::vector<std::chrono::milliseconds> sleeps;
    std::mutex sleeps_mutex;
    Harvester harvester;

    explicit Rig(std::filesystem::path state = {})
        : harvester(index, transport, std::move(state), RetryPolicy{3, {1s, 2s, 4s}, [this](std::chrono::milliseconds d) {
                                                                        std::lock_guard lock(sleeps_mutex);
                                                                        sleeps.push_back(d);
                                                                    }}) {}
};

// Union contents for one provider, as (identifier, deleted, record).
std::vector<WireRecord> union_view(const UnionIndex& index, const std::string& provider_id) {
    std::vector<WireRecord> out;
    for (const auto& e : index.entries_of(provider_id)) out.push_back({e.header, e.record});
    return out;
}

std::vector<WireRecord> repo_view(const Repository& repo) {
    std::vector<WireRecord> out;
    for (const auto& item : repo.items()) out.push_back(item.wire);
    std::sort(out.begin(), out.end(), [](const WireRecord& a, const WireRecord& b) { return a.header.identifier < b.header.identifier; });
    return out;
}

}  // namespace

TEST_CASE("full harvest copies every record") {
    Repository repo(repo_config("rep1", 100));
    fill(repo, 1, 1000, T0);
    Rig rig;
    rig.transport->repos["rep1"] = &repo;
    rig.transport->advance(10);

    const auto job = rig.harvester.run_full(provider("rep1"));
    CHECK(job.state == JobState::succeeded);
    CHECK(job.counts == JobCounts{1000, 1000, 0, 0});
    CHECK(rig.index.live_size() == 1000);
    CHECK(union_view(rig.index, "rep1") == repo_view(repo));
    CHECK(rig.harvester.checkpoint("rep1") == T0.plus_seconds(10));
    CHECK(rig.transport->calls == 10);
    CHECK(rig.transport->seen[0].count("from") == 0);
}

TEST_CASE("empty provider succeeds with nothing") {
    Repository repo(repo_config("empty"));
    Rig rig;
    rig.transport->repos["empty"] = &repo;
    const auto job = rig.harvester.run_full(provider("empty"));
    CHECK(job.state == JobState::succeeded);
    CHECK(job.counts == JobCounts{});
    CHECK(rig.harvester.checkpoint("empty") == T0);
}

TEST_CASE("unreachable provider fails after retries and keeps its checkpoint") {
    Repository repo(repo_config("rep1"));
    fill(repo, 2, 5, T0);
    Rig rig;
    rig.transport->repos["rep1"] = &repo;
    rig.harvester.run_full(provider("rep1"));
    const auto before = rig.harvester.checkpoint("rep1");

    rig.transport->fail_from_call = rig.transport->calls.load();
    rig.transport->advance(500);
    const auto job = rig.harvester.run_incremental(provider("rep1"));
    CHECK(job.state == JobState::failed);
    REQUIRE(job.error_log.size() == 1);
    CHECK(job.error_log[0].find("connection refused") != std::string::npos);
    CHECK(rig.transport->calls == 4);
    CHECK(rig.sleeps == std::vector<std::chrono::milliseconds>{1s, 2s});
    CHECK(rig.harvester.checkpoint("rep1") == before);
    CHECK(rig.index.live_size() == 5);
}

TEST_CASE("failure mid-harvest leaves the checkpoint and a rerun completes") {
    Repository repo(repo_config("rep1", 10));
    fill(repo, 3, 35, T0);
    Rig rig;
    rig.transport->repos["rep1"] = &repo;
    rig.transport->fail_from_call = 2;
    const auto failed = rig.harvester.run_full(provider("rep1"));
    CHECK(failed.state == JobState::failed);
    CHECK(failed.counts.fetched == 20);
    CHECK_FALSE(rig.harvester.checkpoint("rep1"));

    rig.transport->fail_from_call = -1;
    const auto ok = rig.harvester.run_full(provider("rep1"));
    CHECK(ok.state == JobState::succeeded);
    CHECK(ok.counts == JobCounts{35, 15, 0, 20});
    CHECK(union_view(rig.index, "rep1") == repo_view(repo));
}

TEST_CASE("incremental harvest converges on the provider state") {
    Repository repo(repo_config("rep1", 25));
    fill(repo, 4, 100, T0);
    Rig rig;
    rig.transport->repos["rep1"] = &repo;
    rig.transport->advance(100);
    rig.harvester.run_full(provider("rep1"));

    SUBCASE("no changes means no writes") {
        rig.transport->advance(3600);
        const auto job = rig.harvester.run_incremental(provider("rep1"));
        CHECK(job.state == JobState::succeeded);
        CHECK(job.counts.upserted == 0);
        CHECK(job.counts.deleted == 0);
        CHECK(job.counts.fetched == 0);
        CHECK(rig.transport->seen.back().find("from")->second == T0.plus_seconds(100 - kOverlapWindowSeconds).str());
        CHECK(rig.harvester.checkpoint("rep1") == rig.transport->time());
    }

    SUBCASE("updates and deletions arrive") {
        rig.transport->advance(600);
        const auto when = rig.transport->time();
        for (std::uint64_t i = 1; i <= 10; ++i)
            repo.update("oai:rep1:" + std::to_string(i), revise_record(repo.find(i)->wire.record.value(), 1), when);
        for (std::uint64_t i = 50; i < 55; ++i) repo.remove("oai:rep1:" + std::to_string(i), when);
        fill(repo, 44, 3, when);
        rig.transport->advance(5);

        const auto calls_before = rig.transport->calls.load();
        const auto job = rig.harvester.run_incremental(provider("rep1"));
        CHECK(job.state == JobState::succeeded);
        CHECK(job.counts == JobCounts{18, 13, 5, 0});
        CHECK(rig.transport->seen[static_cast<std::size_t>(calls_before)].find("from")->second ==
              T0.plus_seconds(100 - kOverlapWindowSeconds).str());

        // Oracle: a fresh full harvest into an empty index.
        Rig oracle;
        oracle.transport->repos["rep1"] = &repo;
        oracle.transport->now = rig.transport->now.load();
        oracle.harvester.run_full(provider("rep1"));
        CHECK(union_view(rig.index, "rep1") == union_view(oracle.index, "rep1"));
        CHECK(rig.index.live_size() == 98);
    }
}

TEST_CASE("last write wins") {
    UnionIndex index;
    Harvester h(index, std::make_shared<FakeTransport>());
    const MetadataRecord a = {{stmt(Element::title, "a")}};
    const MetadataRecord b = {{stmt(Element::title, "b")}};
    const MetadataRecord c = {{stmt(Element::title, "c")}};

    CHECK(h.apply({{"x", T0, false}, a}, "p") == ApplyOutcome::upserted);
    CHECK(h.apply({{"x", T0.plus_seconds(-1), false}, b}, "p") == ApplyOutcome::skipped);
    CHECK(index.lookup("p", "x")->record == a);
    CHECK(h.apply({{"x", T0, false}, a}, "p") == ApplyOutcome::skipped);
    CHECK(h.apply({{"x", T0, false}, c}, "p") == ApplyOutcome::upserted);
    CHECK(index.lookup("p", "x")->record == c);
    CHECK(h.apply({{"x", T0.plus_seconds(1), false}, b}, "p") == ApplyOutcome::upserted);
    CHECK(h.apply({{"x", T0.plus_seconds(1), false}, b}, "p") == ApplyOutcome::skipped);

    CHECK(h.apply({{"x", T0.plus_seconds(2), true}, std::nullopt}, "p") == ApplyOutcome::deleted);
    CHECK(h.apply({{"x", T0.plus_seconds(2), true}, std::nullopt}, "p") == ApplyOutcome::skipped);
    CHECK(h.apply({{"x", T0.plus_seconds(1), false}, b}, "p") == ApplyOutcome::skipped);
    CHECK(index.lookup("p", "x")->header.deleted);

    CHECK(h.apply({{"ghost", T0, true}, std::nullopt}, "p") == ApplyOutcome::deleted);
    CHECK(index.lookup("p", "ghost")->header.deleted);
    CHECK(index.live_size() == 0);

    CHECK(h.apply({{"x", T0, false}, a}, "q") == ApplyOutcome::upserted);
    CHECK(index.live_size() == 1);
}

TEST_CASE("apply is order independent for distinct datestamps (property)") {
    testing::Gen g(31);
    for (int round = 0; round < 50; ++round) {
        std::vector<WireRecord> updates;
        for (int i = 0; i < 12; ++i) {
            const bool del = g.coin(25);
            updates.push_back({{"id" + std::to_string(g.below(3)), T0.plus_seconds(i), del},
                               del ? std::nullopt : std::optional<MetadataRecord>(g.record(4))});
        }
        UnionIndex in_order, shuffled;
        Harvester a(in_order, std::make_shared<FakeTransport>());
        Harvester b(shuffled, std::make_shared<FakeTransport>());
        for (const auto& u : updates) a.apply(u, "p");
        std::shuffle(updates.begin(), updates.end(), g.engine());
        for (const auto& u : updates) b.apply(u, "p");
        CHECK(in_order.entries() == shuffled.entries());
    }
}

TEST_CASE("file ingestion") {
    testing::TempDir dir;
    std::ofstream(dir / "a.html") << "<html><head><meta name=\"DC.Title\" content=\"Arquivos abertos\">"
                                     "<meta name=\"DC.Identifier\" content=\"urn:a\"></head></html>";
    std::ofstream(dir / "b.txt") << "DC.Title: One\nDC.Identifier: urn:b1\n\nDC.Title: Two\n";
    std::ofstream(dir / "c.html") << "<html><body>nothing here</body></html>";
    std::ofstream(dir / "notes.md") << "DC.Title: ignored";

    UnionIndex index;
    Harvester h(index, std::make_shared<FakeTransport>());
    const auto job = h.ingest_files(dir.path(), "files", T0);
    CHECK(job.state == JobState::succeeded);
    CHECK(job.kind == JobKind::file_ingest);
    CHECK(job.counts == JobCounts{3, 3, 0, 1});
    CHECK(index.lookup("files", "urn:a")->record == MetadataRecord{{stmt(Element::title, "Arquivos abertos"), stmt(Element::identifier, "urn:a")}});
    CHECK(index.lookup("files", "urn:b1"));
    CHECK(index.query("title:two", 0, 10).hits.at(0).identifier.rfind("hash:", 0) == 0);

    const auto again = h.ingest_files(dir.path(), "files", T0.plus_seconds(100));
    CHECK(again.state == JobState::succeeded);
    CHECK(again.counts == JobCounts{3, 0, 0, 4});
    CHECK(index.lookup("files", "urn:a")->header.datestamp == T0);

    std::ofstream(dir / "a.html") << "<meta name=\"DC.Creator\" content=\"Lima\"><meta name=\"DC.Identifier\" content=\"urn:a\">";
    const auto changed = h.ingest_files(dir.path(), "files", T0.plus_seconds(200));
    CHECK(changed.counts.upserted == 1);
    CHECK(index.lookup("files", "urn:a")->header.datestamp == T0.plus_seconds(200));

    CHECK(h.ingest_files(dir / "missing", "files", T0).state == JobState::failed);
}

TEST_CASE("state survives a restart") {
    testing::TempDir dir;
    const auto state = dir / "harvester.json";
    Repository repo(repo_config("rep1"));
    fill(repo, 5, 3, T0);
    std::uint64_t job_id = 0;
    {
        Rig rig(state);
        rig.transport->repos["rep1"] = &repo;
        job_id = rig.harvester.run_full(provider("rep1")).job_id;
    }
    Rig again(state);
    CHECK(again.harvester.checkpoint("rep1") == T0);
    REQUIRE(again.harvester.job(job_id));
    CHECK(again.harvester.job(job_id)->state == JobState::succeeded);
    CHECK(again.harvester.checkpoints().size() == 1);
    again.transport->repos["rep1"] = &repo;
    CHECK(again.harvester.run_full(provider("rep1")).job_id > job_id);
}

TEST_CASE("jobs in flight at shutdown load as failed") {
    testing::TempDir dir;
    const auto state = dir / "harvester.json";
    std::ofstream(state) << R"({"checkpoints":{},"jobs":[{"jobId":4,"providerId":"p","kind":"full","state":"running",)"
                            R"("counts":{"fetched":1,"upserted":1,"deleted":0,"skipped":0},"errorLog":[]}]})";
    Rig rig(state);
    const auto job = rig.harvester.job(4);
    REQUIRE(job);
    CHECK(job->state == JobState::failed);
    CHECK(job->error_log == std::vector<std::string>{"interrupted by shutdown"});
}

TEST_CASE("background jobs") {
    Repository r1(repo_config("r1", 7)), r2(repo_config("r2", 7));
    fill(r1, 6, 30, T0);
    fill(r2, 7, 20, T0);
    Rig rig;
    rig.transport->repos = {{"r1", &r1}, {"r2", &r2}};
    const auto a = rig.harvester.enqueue(provider("r1"), JobKind::full);
    const auto b = rig.harvester.enqueue(provider("r2"), JobKind::full);
    const auto c = rig.harvester.enqueue(provider("r1"), JobKind::incremental);
    rig.harvester.drain();
    for (auto id : {a, b, c}) CHECK(rig.harvester.job(id)->state == JobState::succeeded);
    CHECK(rig.index.live_size() == 50);
    CHECK(to_json(*rig.harvester.job(a))["counts"]["fetched"] == 30);
    CHECK(to_json(*rig.harvester.job(a))["kind"] == "full");
}

TEST_CASE("scheduler polls harvest-mode providers") {
    Repository r1(repo_config("r1"));
    fill(r1, 8, 4, T0);
    Rig rig;
    rig.transport->repos = {{"r1", &r1}};
    auto list = std::make_shared<const std::vector<ProviderDescriptor>>(std::vector<ProviderDescriptor>{
        provider("r1", 0), ProviderDescriptor{"searchonly", "http://unused", false, true, 0}});
    rig.harvester.start_scheduler([list] { return list; }, 20ms);
    for (int i = 0; i < 200 && rig.harvester.jobs().size() < 3; ++i) std::this_thread::sleep_for(10ms);
    rig.harvester.stop_scheduler();
    rig.harvester.drain();
    const auto jobs = rig.harvester.jobs();
    CHECK(jobs.size() >= 3);
    for (const auto& j : jobs) {
        CHECK(j.provider_id == "r1");
        CHECK(j.kind == JobKind::incremental);
        CHECK(j.state == JobState::succeeded);
    }
    CHECK(rig.index.live_size() == 4);
}
