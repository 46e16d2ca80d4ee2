#include <doctest.h>

#include <httplib.h>

#include <set>
#include <thread>

#include "bdl/corpus.hpp"
#include "bdl/data_provider.hpp"
#include "bdl/provider_server.hpp"
#include "support.hpp"

using namespace bdl;
using testing::ds;
using testing::stmt;

namespace {

const Datestamp T0 = ds("2021-03-01T10:00:00Z");

MetadataRecord minimal(const std::string& title) {
    return {{stmt(Element::title, title), stmt(Element::identifier, "urn:x:" + title), stmt(Element::date, "2001-05-01")}};
}

RepositoryConfig config(const std::string& id, std::filesystem::path dir = {}) {
    RepositoryConfig c;
    c.repository_id = id;
    c.display_name = "Repository " + id;
    c.admin_contact = "admin@" + id;
    c.data_dir = std::move(dir);
    return c;
}

class FixedClock : public Clock {
public:
    explicit FixedClock(Datestamp d) : d_(d) {}
    Datestamp now() const override { return d_; }

private:
    Datestamp d_;
};

}  // namespace

TEST_CASE("config") {
    CHECK_THROWS_AS(Repository(config("")), std::invalid_argument);
    CHECK_THROWS_AS(Repository(config("a:b")), std::invalid_argument);
    const auto c = repository_config_from_json(json{{"repositoryId", "rep1"}, {"pageSize", 7}});
    CHECK(c.page_size == 7);
    CHECK(c.display_name == "rep1");
    CHECK(repository_config_from_json(to_json(c)).page_size == 7);
    CHECK_THROWS(repository_config_from_json(json{{"repositoryId", "rep1"}, {"pageSize", 0}}));
}

TEST_CASE("submit, update, delete") {
    Repository repo(config("rep1"));
    CHECK(repo.submit(minimal("A"), DocumentKind::generic, std::nullopt, "", T0) == "oai:rep1:1");
    CHECK(repo.submit(minimal("B"), DocumentKind::generic, std::nullopt, "", T0) == "oai:rep1:2");

    SUBCASE("missing title is rejected with the violation") {
        MetadataRecord r = minimal("C");
        r.statements.erase(r.statements.begin());
        try {
            repo.submit(r, DocumentKind::generic, std::nullopt, "", T0);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            REQUIRE(e.violations().size() == 1);
            CHECK(e.violations()[0].find("(title, -)") != std::string::npos);
        }
        CHECK(repo.size() == 2);
        CHECK(repo.next_local_id() == 3);
    }

    SUBCASE("thesis needs its degree statements") {
        CHECK_THROWS_AS(repo.submit(minimal("T"), DocumentKind::thesis, std::nullopt, "", T0), ValidationError);
    }

    SUBCASE("update and delete") {
        const auto later = T0.plus_seconds(5);
        CHECK(repo.update("oai:rep1:1", minimal("A2"), later) == later);
        CHECK(repo.find("oai:rep1:1")->wire.record == minimal("A2"));
        CHECK(repo.find("oai:rep1:1")->wire.header.datestamp == later);

        try {
            repo.update("oai:rep1:1", minimal("A3"), T0);
            FAIL("expected clock regression");
        } catch (const RepositoryError& e) {
            CHECK(e.kind() == RepositoryError::Kind::clock_regression);
        }

        repo.remove("oai:rep1:1", later);
        const auto item = repo.find("oai:rep1:1");
        CHECK(item->wire.header.deleted);
        CHECK_FALSE(item->wire.record);
        try {
            repo.remove("oai:rep1:1", later);
            FAIL("expected already-deleted");
        } catch (const RepositoryError& e) {
            CHECK(e.kind() == RepositoryError::Kind::already_deleted);
        }

        const auto resp = decode_response(repo.handle_harvest({{"verb", "GetRecord"}, {"identifier", "oai:rep1:1"}}, later));
        REQUIRE(resp.records.size() == 1);
        CHECK(resp.records[0].header.deleted);
        CHECK_FALSE(resp.records[0].record);

        try {
            repo.update("oai:rep1:9", minimal("X"), later);
            FAIL("expected unknown id");
        } catch (const RepositoryError& e) {
            CHECK(e.kind() == RepositoryError::Kind::id_does_not_exist);
        }
        CHECK_THROWS_AS(repo.remove("oai:other:2", later), RepositoryError);
    }

    SUBCASE("documents have a size limit") {
        auto c = config("rep2");
        c.max_document_bytes = 4;
        Repository small(c);
        CHECK_NOTHROW(small.submit(minimal("A"), DocumentKind::generic, "1234", "text/plain", T0));
        try {
            small.submit(minimal("B"), DocumentKind::generic, "12345", "text/plain", T0);
            FAIL("expected too large");
        } catch (const RepositoryError& e) {
            CHECK(e.kind() == RepositoryError::Kind::document_too_large);
        }
    }
}

TEST_CASE("search_local agrees with a linear scan (property)") {
    testing::Gen g(404);
    Repository repo(config("rep1"));
    std::vector<std::pair<std::string, MetadataRecord>> live;
    for (int i = 0; i < 500; ++i) {
        auto r = g.vocab_record();
        r.statements.push_back(stmt(Element::identifier, "urn:" + std::to_string(i)));
        r.statements.push_back(stmt(Element::date, "2001"));
        if (!r.first(Element::title)) r.statements.push_back(stmt(Element::title, "untitled"));
        const auto id = repo.submit(r, DocumentKind::generic, std::nullopt, "", T0.plus_seconds(i));
        live.emplace_back(id, r);
    }
    for (int i = 0; i < 50; ++i) {
        const auto victim = g.below(live.size());
        repo.remove(live[victim].first, T0.plus_seconds(1000));
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(victim));
    }
    CHECK(repo.search_local("nothingmatchesthis", 0, 10).total == 0);
    for (int i = 0; i < 200; ++i) {
        const auto text = g.query();
        CAPTURE(text);
        const auto q = parse_query(text);
        std::set<std::string> expected;
        for (const auto& [id, r] : live)
            if (testing::oracle_eval(*q, r)) expected.insert(id);
        const auto result = repo.search_local(text, 0, 100000);
        std::set<std::string> got;
        for (const auto& h : result.hits) got.insert(h.identifier);
        CHECK(result.total == expected.size());
        CHECK(got == expected);
        for (std::size_t k = 1; k < result.hits.size(); ++k) {
            const auto& a = result.hits[k - 1];
            const auto& b = result.hits[k];
            CHECK((a.datestamp > b.datestamp || (a.datestamp == b.datestamp && a.identifier < b.identifier)));
        }
        const auto window = repo.search_local(text, 3, 4);
        for (std::size_t k = 0; k < window.hits.size(); ++k) CHECK(window.hits[k].identifier == result.hits[k + 3].identifier);
    }
}

TEST_CASE("persistence and recovery") {
    testing::TempDir dir;
    auto c = config("rep1", dir / "store");
    c.compact_every = 3;
    std::vector<StoredItem> before;
    {
        Repository repo(c);
        for (const auto& item : generate_corpus(9, 10))
            repo.submit(item.record, item.kind, std::nullopt, "", T0);
        repo.submit(minimal("doc"), DocumentKind::generic, std::string("%PDF-1.4 bytes"), "application/pdf", T0);
        repo.update("oai:rep1:2", revise_record(generate_item(9, 1).record, 1), T0.plus_seconds(1));
        repo.remove("oai:rep1:3", T0.plus_seconds(2));
        before = repo.items();
    }
    Repository again(c);
    const auto after = again.items();
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < after.size(); ++i) {
        CAPTURE(i);
        CHECK(after[i].wire.header == before[i].wire.header);
        CHECK(to_json(after[i].wire.record.value_or(MetadataRecord{})).dump() == to_json(before[i].wire.record.value_or(MetadataRecord{})).dump());
        CHECK(after[i].kind == before[i].kind);
        CHECK(after[i].document == before[i].document);
        CHECK(after[i].media_type == before[i].media_type);
    }
    CHECK(again.next_local_id() == 12);
    CHECK(again.submit(minimal("next"), DocumentKind::generic, std::nullopt, "", T0.plus_seconds(3)) == "oai:rep1:12");
}

TEST_CASE("provider HTTP endpoints") {
    Repository repo(config("rep1"));
    FixedClock clock(T0);
    ProviderServer server(repo, clock);
    server.start();
    httplib::Client cli(server.base_url());

    const json meta = {{"kind", "generic"}, {"metadata", to_json(minimal("Redes"))}};
    httplib::MultipartFormDataItems items = {{"metadata", meta.dump(), "", "application/json"},
                                             {"document", "hello", "a.txt", "text/plain"}};
    auto res = cli.Post("/submit", items);
    REQUIRE(res);
    CHECK(res->status == 201);
    CHECK(json::parse(res->body)["identifier"] == "oai:rep1:1");

    const json bad = {{"kind", "thesis"}, {"metadata", to_json(minimal("T"))}};
    res = cli.Post("/submit", httplib::MultipartFormDataItems{{"metadata", bad.dump(), "", "application/json"}});
    REQUIRE(res);
    CHECK(res->status == 422);
    CHECK(json::parse(res->body)["violations"].size() == 3);

    res = cli.Get("/documents/1");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == "hello");
    CHECK(res->get_header_value("Content-Type") == "text/plain");
    CHECK(cli.Get("/documents/2")->status == 404);

    res = cli.Get("/oai?verb=ListRecords");
    REQUIRE(res);
    const auto resp = decode_response(res->body);
    REQUIRE(resp.records.size() == 1);
    CHECK(resp.records[0].record == minimal("Redes"));
    CHECK(resp.responded_at == T0);

    res = cli.Post("/search", R"({"query":"title:redes"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto found = json::parse(res->body);
    CHECK(found["provider"] == "rep1");
    CHECK(found["total"] == 1);
    CHECK(found["records"][0]["identifier"] == "oai:rep1:1");

    res = cli.Post("/search", R"({"query":"title:(a"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["offset"] == 6);

    server.set_unavailable(true);
    CHECK(cli.Get("/oai?verb=Identify")->status == 503);
    server.set_unavailable(false);
    CHECK(cli.Get("/oai?verb=Identify")->status == 200);
    server.stop();
}

TEST_CASE("a delayed search is released by stop") {
    Repository repo(config("rep1"));
    FixedClock clock(T0);
    ProviderServer server(repo, clock);
    server.start();
    server.set_search_delay(std::chrono::seconds(30));
    const auto url = server.base_url();
    std::thread caller([url] {
        httplib::Client cli(url);
        cli.set_read_timeout(60, 0);
        cli.Post("/search", R"({"query":"x"})", "application/json");
    });
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    const auto started = std::chrono::steady_clock::now();
    server.stop();
    caller.join();
    CHECK(std::chrono::steady_clock::now() - started < std::chrono::seconds(5));
}
