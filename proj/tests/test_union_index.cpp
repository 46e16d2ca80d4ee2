#include <doctest.h>

#include <map>
#include <set>

#include "bdl/union_index.hpp"
#include "support.hpp"

using namespace bdl;
using testing::ds;
using testing::stmt;

namespace {

const Datestamp T0 = ds("2022-01-01T00:00:00Z");

IndexedEntry entry(const std::string& provider, const std::string& id, MetadataRecord r, Datestamp d = T0) {
    return make_entry(provider, RecordHeader{id, d, false}, std::move(r));
}

std::vector<std::string> ids(const UnionResult& r) {
    std::vector<std::string> out;
    for (const auto& h : r.hits) out.push_back(h.provider_id + "/" + h.identifier);
    return out;
}

std::uint64_t oracle_weight(Element e) {
    if (e == Element::title) return 3;
    if (e == Element::creator || e == Element::subject) return 2;
    return 1;
}

std::uint64_t oracle_occurrences(const Clause& c, const std::vector<std::string>& toks) {
    std::vector<std::string> needle;
    if (const auto* t = std::get_if<Term>(&c.match)) needle = {t->token};
    else needle = std::get<Phrase>(c.match).tokens;
    if (needle.empty()) return 0;
    std::uint64_t n = 0;
    for (std::size_t i = 0; i + needle.size() <= toks.size(); ++i)
        if (std::equal(needle.begin(), needle.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
    return n;
}

void oracle_positive(const QueryNode& n, bool positive, std::vector<const Clause*>& out) {
    if (const auto* a = std::get_if<And>(&n.node)) {
        oracle_positive(*a->left, positive, out);
        oracle_positive(*a->right, positive, out);
    } else if (const auto* o = std::get_if<Or>(&n.node)) {
        oracle_positive(*o->left, positive, out);
        oracle_positive(*o->right, positive, out);
    } else if (const auto* x = std::get_if<Not>(&n.node)) {
        oracle_positive(*x->child, !positive, out);
    } else if (positive) {
        const auto& c = std::get<Clause>(n.node);
        const auto same = [&](const Clause* s) {
            if (s->field != c.field || s->match.index() != c.match.index()) return false;
            if (const auto* t = std::get_if<Term>(&c.match)) return std::get<Term>(s->match).token == t->token;
            return std::get<Phrase>(s->match).tokens == std::get<Phrase>(c.match).tokens;
        };
        if (std::none_of(out.begin(), out.end(), same)) out.push_back(&c);
    }
}

std::uint64_t oracle_score(const QueryNode& q, const MetadataRecord& r) {
    std::vector<const Clause*> clauses;
    oracle_positive(q, true, clauses);
    std::uint64_t total = 0;
    for (const Clause* c : clauses) {
        std::map<Element, std::uint64_t> per_field;
        for (const auto& s : r.statements) per_field[s.element] += oracle_occurrences(*c, tokenize(s.value));
        if (c->field) {
            total += oracle_weight(*c->field) * per_field[*c->field];
        } else {
            std::uint64_t best = 0;
            for (const auto& [e, n] : per_field) best = std::max(best, oracle_weight(e) * n);
            total += best;
        }
    }
    return total;
}

}  // namespace

TEST_CASE("read your write") {
    UnionIndex index;
    index.upsert(entry("p1", "oai:p1:1", {{stmt(Element::title, "XML XML harvesting")}}));
    const auto r = index.query("title:xml", 0, 10);
    REQUIRE(r.total == 1);
    CHECK(r.hits[0].score == 6);
    CHECK(index.lookup("p1", "oai:p1:1")->fingerprint == fingerprint({{stmt(Element::title, "XML XML harvesting")}}));

    index.mark_deleted("p1", "oai:p1:1", T0.plus_seconds(1));
    CHECK(index.query("title:xml", 0, 10).total == 0);
    CHECK(index.size() == 1);
    CHECK(index.live_size() == 0);
    CHECK(index.lookup("p1", "oai:p1:1")->header.deleted);
    CHECK_FALSE(index.lookup("p1", "oai:p1:1")->record);
    CHECK(index.posting_count() == 0);

    index.mark_deleted("p2", "oai:p2:7", T0);
    CHECK(index.size() == 2);
    CHECK(index.live_size() == 0);
}

TEST_CASE("replacement swaps postings") {
    UnionIndex index;
    index.upsert(entry("p1", "a", {{stmt(Element::title, "alpha")}}));
    index.upsert(entry("p1", "a", {{stmt(Element::title, "beta")}}, T0.plus_seconds(1)));
    CHECK(index.query("alpha", 0, 10).total == 0);
    CHECK(index.query("beta", 0, 10).total == 1);
    CHECK(index.size() == 1);
    CHECK(index.posting_count() == 1);
}

TEST_CASE("score examples") {
    UnionIndex index;
    index.upsert(entry("p", "1", {{stmt(Element::title, "xml"), stmt(Element::creator, "xml"), stmt(Element::description, "xml xml xml xml")}}));
    CHECK(index.query("xml", 0, 1).hits[0].score == 4);
    CHECK(index.query("title:xml creator:xml", 0, 1).hits[0].score == 5);
    CHECK(index.query("xml NOT creator:zzz", 0, 1).hits[0].score == 4);
    CHECK(index.query("xml AND xml", 0, 1).hits[0].score == 4);
    CHECK(index.query("NOT NOT title:xml", 0, 1).hits[0].score == 3);
    CHECK(index.query("description:\"xml xml\"", 0, 1).hits[0].score == 3);
}

TEST_CASE("ties break by datestamp, identifier, provider") {
    UnionIndex index;
    const MetadataRecord r = {{stmt(Element::title, "same")}};
    index.upsert(entry("p2", "b", r, T0));
    index.upsert(entry("p1", "b", r, T0));
    index.upsert(entry("p1", "a", r, T0));
    index.upsert(entry("p1", "z", r, T0.plus_seconds(5)));
    CHECK(ids(index.query("same", 0, 10)) == std::vector<std::string>{"p1/z", "p1/a", "p1/b", "p2/b"});
    CHECK(ids(index.query("same", 1, 2)) == std::vector<std::string>{"p1/a", "p1/b"});
    CHECK(index.query("same", 9, 2).hits.empty());
    CHECK(index.query("same", 9, 2).total == 4);
}

TEST_CASE("query results agree with the oracle (property)") {
    testing::Gen g(77);
    UnionIndex index;
    std::map<EntryKey, MetadataRecord> live;
    for (int i = 0; i < 500; ++i) {
        const std::string provider = "p" + std::to_string(g.below(3));
        const std::string id = "oai:" + provider + ":" + std::to_string(g.below(200));
        if (g.coin(10)) {
            index.mark_deleted(provider, id, T0);
            live.erase({provider, id});
            continue;
        }
        auto r = g.vocab_record();
        index.upsert(entry(provider, id, r, T0.plus_seconds(static_cast<std::int64_t>(g.below(50)))));
        live[{provider, id}] = r;
    }
    CHECK(index.live_size() == live.size());
    for (int i = 0; i < 200; ++i) {
        const auto text = g.query();
        CAPTURE(text);
        const auto q = parse_query(text);
        const auto result = index.query(*q, 0, 100000);
        std::set<EntryKey> got, expected;
        for (const auto& h : result.hits) {
            got.insert({h.provider_id, h.identifier});
            CHECK(h.score == oracle_score(*q, live.at({h.provider_id, h.identifier})));
        }
        for (const auto& [key, r] : live)
            if (testing::oracle_eval(*q, r)) expected.insert(key);
        CHECK(got == expected);
        CHECK(result.total == expected.size());
        for (std::size_t k = 1; k < result.hits.size(); ++k) {
            const auto& a = result.hits[k - 1];
            const auto& b = result.hits[k];
            const bool ordered = a.score > b.score ||
                                 (a.score == b.score &&
                                  std::tuple(b.datestamp, a.identifier, a.provider_id) < std::tuple(a.datestamp, b.identifier, b.provider_id));
            CHECK(ordered);
        }
        CHECK(to_search_json(index.query(*q, 0, 100000)).dump() == to_search_json(result).dump());
    }
}

TEST_CASE("rebuild leaves results unchanged") {
    testing::Gen g(5);
    UnionIndex index;
    for (int i = 0; i < 200; ++i) index.upsert(entry("p", std::to_string(g.below(120)), g.vocab_record()));
    std::vector<std::string> queries;
    std::vector<std::string> before;
    for (int i = 0; i < 50; ++i) {
        queries.push_back(g.query());
        before.push_back(to_search_json(index.query(queries.back(), 0, 1000)).dump());
    }
    const auto postings = index.posting_count();
    index.rebuild();
    CHECK(index.posting_count() == postings);
    for (std::size_t i = 0; i < queries.size(); ++i) CHECK(to_search_json(index.query(queries[i], 0, 1000)).dump() == before[i]);
}

TEST_CASE("persistence across reopen and compaction") {
    testing::TempDir dir;
    testing::Gen g(9);
    std::vector<IndexedEntry> before;
    {
        UnionIndex index(dir.path(), false, 7);
        for (int i = 0; i < 60; ++i) {
            const std::string id = std::to_string(g.below(30));
            if (g.coin(20)) index.mark_deleted("p", id, T0.plus_seconds(i));
            else index.upsert(entry("p", id, g.record(), T0.plus_seconds(i)));
        }
        before = index.entries();
    }
    UnionIndex again(dir.path(), false, 7);
    CHECK(again.entries() == before);
    CHECK(again.entries_of("p").size() == before.size());
    CHECK(again.entries_of("q").empty());
}
