#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "bdl/corpus.hpp"
#include "bdl/scenario.hpp"
#include "support.hpp"

using namespace bdl;

namespace {

std::string read(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::filesystem::path kScenarios = BDL_SCENARIO_DIR;

}  // namespace

TEST_CASE("corpus generation is deterministic and valid") {
    CHECK(generate_corpus(42, 0).empty());
    const auto a = generate_corpus(42, 200);
    const auto b = generate_corpus(42, 200);
    REQUIRE(a.size() == 200);
    std::set<std::string> fingerprints;
    std::array<int, 5> kinds{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].record == b[i].record);
        CHECK(a[i].kind == b[i].kind);
        CHECK(validate_record(a[i].record, profile_for(a[i].kind)).empty());
        fingerprints.insert(fingerprint(a[i].record).key);
        ++kinds[static_cast<std::size_t>(a[i].kind)];
    }
    CHECK(fingerprints.size() == 200);
    for (int k : kinds) CHECK(k > 0);

    const auto tail = generate_corpus(42, 50, kEvenKindMix, 150);
    for (std::size_t i = 0; i < tail.size(); ++i) CHECK(tail[i].record == a[150 + i].record);
    CHECK(generate_corpus(43, 1)[0].record != a[0].record);
}

TEST_CASE("kind mix") {
    for (std::size_t k = 0; k < 5; ++k) {
        KindMix mix{};
        mix[k] = 1;
        for (const auto& item : generate_corpus(3, 40, mix)) CHECK(static_cast<std::size_t>(item.kind) == k);
    }
}

TEST_CASE("revisions keep the fingerprint") {
    for (const auto& item : generate_corpus(5, 50)) {
        const auto r1 = revise_record(item.record, 1);
        const auto r2 = revise_record(r1, 2);
        CHECK(fingerprint(r1) == fingerprint(item.record));
        CHECK(r1 != item.record);
        CHECK(r2 != r1);
        CHECK(r2.statements.size() == r1.statements.size());
        CHECK(validate_record(r2, profile_for(item.kind)).empty());
    }
}

TEST_CASE("scenario parsing") {
    const auto sc = parse_scenario("# comment\n\nseed 9\n  search title:\"open archives\" AND x  \nassert partial false\n");
    CHECK(sc.seed == 9u);
    REQUIRE(sc.steps.size() == 3);
    CHECK(sc.steps[1].line == 4);
    CHECK(sc.steps[1].args == std::vector<std::string>{"title:\"open archives\" AND x"});

    const auto line_of = [](const char* text) -> std::size_t {
        try {
            parse_scenario(text);
        } catch (const ScenarioError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("seed 1\nfly away\n") == 2);
    CHECK(line_of("submit a\n") == 1);
    CHECK(line_of("submit a x\n") == 1);
    CHECK(line_of("\n\nupdate a 1.5\n") == 3);
    CHECK(line_of("harvest a sometimes\n") == 1);
    CHECK(line_of("start-provider a colour=red\n") == 1);
    CHECK(line_of("start-provider a modes=browse\n") == 1);
    CHECK(line_of("start-provider a page-size=0\n") == 1);
    CHECK(line_of("assert union-size\n") == 1);
    CHECK(line_of("assert partial maybe\n") == 1);
    CHECK(line_of("assert vibes 3\n") == 1);
    CHECK(line_of("search\n") == 1);
    CHECK(line_of("seed -1\n") == 1);
    CHECK(line_of("seed 1\nsubmit a 3 stream=s\nadvance 5\n") == 0);
}

TEST_CASE("an empty scenario passes") {
    testing::TempDir dir;
    const auto report = run_scenario(parse_scenario(""), 1, dir / "w");
    CHECK(report.passed);
    CHECK(report.document["steps"].empty());
    CHECK(report.document["passed"] == true);
}

TEST_CASE("the work directory must be empty") {
    testing::TempDir dir;
    std::ofstream(dir / "stray") << "x";
    CHECK_THROWS_AS(run_scenario(parse_scenario(""), 1, dir.path()), std::invalid_argument);
}

TEST_CASE("a failing step stops the run") {
    testing::TempDir dir;
    const auto report = run_scenario(parse_scenario("submit ghost 3\nadvance 1\n"), 1, dir / "w");
    CHECK_FALSE(report.passed);
    REQUIRE(report.document["steps"].size() == 1);
    CHECK(report.document["steps"][0]["ok"] == false);

    const auto early = run_scenario(parse_scenario("assert partial true\n"), 1, dir / "w2");
    CHECK_FALSE(early.passed);
}

TEST_CASE("failed assertions fail the report") {
    testing::TempDir dir;
    const auto report = run_scenario(parse_scenario("start-provider a\nsubmit a 3\nharvest a full\nassert union-size 4\n"), 1, dir / "w");
    CHECK_FALSE(report.passed);
    const auto& assertion = report.document["assertions"][0];
    CHECK(assertion["expected"] == 4);
    CHECK(assertion["actual"] == 3);
    CHECK(assertion["passed"] == false);
}

TEST_CASE("scenario files pass and replay identically") {
    for (const char* name : {"basic.scn", "slow_provider.scn", "three_providers.scn"}) {
        CAPTURE(name);
        const auto sc = parse_scenario(read(kScenarios / name));
        testing::TempDir d1, d2;
        const auto first = run_scenario(sc, sc.seed.value(), d1 / "w");
        const auto second = run_scenario(sc, sc.seed.value(), d2 / "w");
        INFO(first.document.dump(2));
        CHECK(first.passed);
        CHECK(second.passed);
        CHECK(without_timing(first.document) == without_timing(second.document));
    }
}

TEST_CASE("without_timing") {
    const json report = json::parse(R"({
        "steps": [{"detail": {"wallMs": 12, "total": 3}}],
        "assertions": [{"name": "wall-ms-below", "actual": 7, "actualIsTiming": true, "expected": 9}],
        "outcomes": [{"elapsedMs": 4, "provider": "p"}]})");
    const json expected = json::parse(R"({
        "steps": [{"detail": {"total": 3}}],
        "assertions": [{"name": "wall-ms-below", "actualIsTiming": true, "expected": 9}],
        "outcomes": [{"provider": "p"}]})");
    CHECK(without_timing(report) == expected);
}
