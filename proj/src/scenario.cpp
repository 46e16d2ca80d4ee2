#include "bdl/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "bdl/corpus.hpp"
#include "bdl/data_provider.hpp"
#include "bdl/gateway.hpp"
#include "bdl/harvester.hpp"
#include "bdl/provider_server.hpp"
#include "bdl/registry.hpp"
#include "bdl/text.hpp"
#include "bdl/union_index.hpp"

namespace bdl {

namespace {

constexpr std::int64_t kScenarioEpoch = 1577836800;  // 2020-01-01T00:00:00Z

std::uint64_t parse_uint(const std::string& s, std::size_t line, const char* what) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size())
        throw ScenarioError(line, std::string(what) + " must be a non-negative integer, got '" + s + "'");
    return v;
}

double parse_fraction(const std::string& s, std::size_t line) {
    std::size_t used = 0;
    double v = -1;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
    }
    if (used != s.size() || !(v >= 0.0 && v <= 1.0))
        throw ScenarioError(line, "fraction must be a number in [0, 1], got '" + s + "'");
    return v;
}

std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : stream) h = (h ^ c) * 0x100000001b3ULL;
    return seed ^ h;
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::optional<std::string> option(const std::vector<std::string>& args, std::size_t from, const std::string& key) {
    for (std::size_t i = from; i < args.size(); ++i)
        if (args[i].rfind(key + "=", 0) == 0) return args[i].substr(key.size() + 1);
    return std::nullopt;
}

void check_arity(const ScenarioStep& s, std::size_t min, std::size_t max) {
    if (s.args.size() < min || s.args.size() > max)
        throw ScenarioError(s.line, "'" + s.verb + "' takes " + std::to_string(min) +
                                        (min == max ? "" : " to " + std::to_string(max)) + " arguments");
}

void check_options(const ScenarioStep& s, std::size_t from, std::initializer_list<std::string_view> keys) {
    for (std::size_t i = from; i < s.args.size(); ++i) {
        const auto eq = s.args[i].find('=');
        const std::string key = s.args[i].substr(0, eq);
        if (eq == std::string::npos || std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ScenarioError(s.line, "unknown option '" + s.args[i] + "' for '" + s.verb + "'");
    }
}

void validate_step(const ScenarioStep& s) {
    const auto& a = s.args;
    if (s.verb == "seed") {
        check_arity(s, 1, 1);
        parse_uint(a[0], s.line, "seed");
    } else if (s.verb == "start-provider") {
        check_arity(s, 1, 3);
        check_options(s, 1, {"page-size", "modes"});
        if (const auto ps = option(a, 1, "page-size"); ps && parse_uint(*ps, s.line, "page-size") == 0)
            throw ScenarioError(s.line, "page-size must be positive");
        if (auto modes = option(a, 1, "modes")) {
            std::replace(modes->begin(), modes->end(), ',', ' ');
            const auto list = split_words(*modes);
            if (list.empty()) throw ScenarioError(s.line, "modes must not be empty");
            for (const auto& m : list)
                if (m != "harvest" && m != "search") throw ScenarioError(s.line, "unknown mode '" + m + "'");
        }
    } else if (s.verb == "submit") {
        check_arity(s, 2, 3);
        parse_uint(a[1], s.line, "count");
        check_options(s, 2, {"stream"});
    } else if (s.verb == "update" || s.verb == "delete") {
        check_arity(s, 2, 2);
        parse_fraction(a[1], s.line);
    } else if (s.verb == "harvest") {
        check_arity(s, 2, 2);
        if (a[1] != "full" && a[1] != "incremental") throw ScenarioError(s.line, "harvest kind must be full or incremental");
    } else if (s.verb == "inject-delay") {
        check_arity(s, 2, 2);
        parse_uint(a[1], s.line, "delay");
    } else if (s.verb == "advance") {
        check_arity(s, 1, 1);
        parse_uint(a[0], s.line, "seconds");
    } else if (s.verb == "search") {
        check_arity(s, 1, 1);
    } else if (s.verb == "assert") {
        if (a.empty()) throw ScenarioError(s.line, "'assert' needs a name");
        const auto& name = a[0];
        if (name == "union-matches-oracle") {
            check_arity(s, 1, 1);
        } else if (name == "union-size" || name == "union-live" || name == "wall-ms-below" ||
                   name == "results-at-least" || name == "sources-at-least") {
            check_arity(s, 2, 2);
            parse_uint(a[1], s.line, name.c_str());
        } else if (name == "partial") {
            check_arity(s, 2, 2);
            if (a[1] != "true" && a[1] != "false") throw ScenarioError(s.line, "partial expects true or false");
        } else {
            throw ScenarioError(s.line, "unknown assertion '" + name + "'");
        }
    } else {
        throw ScenarioError(s.line, "unknown step '" + s.verb + "'");
    }
}

struct SimProvider {
    std::unique_ptr<Repository> repo;
    std::unique_ptr<ProviderServer> server;
    std::map<std::string, std::uint64_t> stream_next;
    std::uint64_t revisions = 0;
};

class Runner {
public:
    Runner(std::uint64_t seed, const std::filesystem::path& work_dir)
        : seed_(seed),
          work_dir_(work_dir),
          clock_(Datestamp(kScenarioEpoch)),
          index_(work_dir / "union"),
          registry_(work_dir / "registry.json"),
          harvester_(index_, std::make_shared<HttpHarvestTransport>(), work_dir / "harvester.json",
                     RetryPolicy{3, {}, [](std::chrono::milliseconds) {}}),
          gateway_(index_, registry_, harvester_, clock_) {}

    ~Runner() {
        for (auto& [id, p] : providers_) p.server->stop();
    }

    json step(const ScenarioStep& s, json& assertions, bool& passed) {
        json detail = json::object();
        const auto& a = s.args;
        if (s.verb == "seed") {
        } else if (s.verb == "start-provider") {
            start_provider(s, detail);
        } else if (s.verb == "submit") {
            auto& p = provider(s, a[0]);
            const std::string stream = option(a, 2, "stream").value_or(a[0]);
            auto& next = p.stream_next[stream];
            const auto n = parse_uint(a[1], s.line, "count");
            const auto items = generate_corpus(stream_seed(seed_, stream), n, kEvenKindMix, next);
            for (const auto& item : items) p.repo->submit(item.record, item.kind, std::nullopt, "", clock_.now());
            next += n;
            detail["submitted"] = n;
        } else if (s.verb == "update" || s.verb == "delete") {
            auto& p = provider(s, a[0]);
            const auto chosen = choose_live(p, parse_fraction(a[1], s.line), s.line);
            for (const auto& item : chosen) {
                if (s.verb == "update") p.repo->update(item.wire.header.identifier, revise_record(*item.wire.record, ++p.revisions), clock_.now());
                else p.repo->remove(item.wire.header.identifier, clock_.now());
            }
            detail[s.verb == "update" ? "updated" : "deleted"] = chosen.size();
        } else if (s.verb == "harvest") {
            const auto d = registry_.find(a[0]);
            if (!d) throw ScenarioError(s.line, "unknown provider '" + a[0] + "'");
            const auto job = a[1] == "full" ? harvester_.run_full(*d) : harvester_.run_incremental(*d);
            detail["job"] = to_json(job);
            if (job.state != JobState::succeeded) throw ScenarioError(s.line, "harvest of '" + a[0] + "' failed");
        } else if (s.verb == "inject-delay") {
            provider(s, a[0]).server->set_search_delay(std::chrono::milliseconds(parse_uint(a[1], s.line, "delay")));
        } else if (s.verb == "advance") {
            clock_.advance(static_cast<std::int64_t>(parse_uint(a[0], s.line, "seconds")));
        } else if (s.verb == "search") {
            search(a[0], detail);
        } else if (s.verb == "assert") {
            const json result = check(s);
            passed = passed && result["passed"].get<bool>();
            assertions.push_back(result);
            detail["passed"] = result["passed"];
        }
        clock_.advance(1);
        return detail;
    }

private:
    SimProvider& provider(const ScenarioStep& s, const std::string& id) {
        const auto it = providers_.find(id);
        if (it == providers_.end()) throw ScenarioError(s.line, "unknown provider '" + id + "'");
        return it->second;
    }

    void start_provider(const ScenarioStep& s, json& detail) {
        const std::string& id = s.args[0];
        if (providers_.count(id) || id == kUnionTargetId) throw ScenarioError(s.line, "provider '" + id + "' already exists");
        RepositoryConfig config;
        config.repository_id = id;
        config.display_name = id;
        config.admin_contact = "admin@" + id + ".example.org";
        config.data_dir = work_dir_ / "providers" / id;
        if (const auto ps = option(s.args, 1, "page-size")) config.page_size = parse_uint(*ps, s.line, "page-size");
        SimProvider p;
        p.repo = std::make_unique<Repository>(config);
        p.server = std::make_unique<ProviderServer>(*p.repo, clock_);
        p.server->start();

        ProviderDescriptor d;
        d.provider_id = id;
        d.base_url = p.server->base_url();
        const std::string modes = option(s.args, 1, "modes").value_or("harvest,search");
        d.harvest = modes.find("harvest") != std::string::npos;
        d.search = modes.find("search") != std::string::npos;
        registry_.add(d);
        providers_.emplace(id, std::move(p));
        detail["pageSize"] = config.page_size;
    }

    std::vector<StoredItem> choose_live(const SimProvider& p, double fraction, std::size_t line) {
        std::vector<StoredItem> live;
        for (auto& item : p.repo->items())
            if (!item.wire.header.deleted) live.push_back(std::move(item));
        const auto count = static_cast<std::size_t>(fraction * static_cast<double>(live.size()) + 0.5);
        std::mt19937_64 rng(seed_ * 1000003ULL + line);
        for (std::size_t i = 0; i < count && i < live.size(); ++i) std::swap(live[i], live[i + rng() % (live.size() - i)]);
        live.resize(std::min(count, live.size()));
        return live;
    }

    void search(const std::string& query, json& detail) {
        const auto started = std::chrono::steady_clock::now();
        last_ = gateway_.unified_search(query, 0, 10);
        last_wall_ms_ = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
        json outcomes = json::array();
        for (const auto& o : last_->outcomes)
            outcomes.push_back({{"provider", o.provider_id}, {"status", outcome_status_name(o.status)}, {"records", o.records.size()}});
        json top = json::array();
        for (const auto& r : last_->results) top.push_back({{"fingerprint", r.fingerprint.key}, {"sources", r.sources.size()}});
        detail = {{"total", last_->total}, {"partial", last_->partial}, {"outcomes", outcomes}, {"top", top},
                  {"wallMs", last_wall_ms_}};
    }

    std::size_t oracle_mismatches() const {
        std::size_t mismatches = 0;
        for (const auto& [id, p] : providers_) {
            std::map<std::string, WireRecord> expected;
            for (const auto& item : p.repo->items()) expected[item.wire.header.identifier] = item.wire;
            const auto entries = index_.entries_of(id);
            std::set<std::string> seen;
            for (const auto& e : entries) {
                seen.insert(e.header.identifier);
                const auto it = expected.find(e.header.identifier);
                if (it == expected.end() || !(WireRecord{e.header, e.record} == it->second)) ++mismatches;
            }
            for (const auto& [ident, w] : expected)
                if (!seen.count(ident)) ++mismatches;
        }
        return mismatches;
    }

    json check(const ScenarioStep& s) {
        const auto& name = s.args[0];
        json expected;
        json actual;
        bool ok = false;
        const auto need_search = [&] {
            if (!last_) throw ScenarioError(s.line, "'" + name + "' needs a preceding search step");
        };
        if (name == "union-size") {
            expected = parse_uint(s.args[1], s.line, "size");
            actual = index_.size();
            ok = expected == actual;
        } else if (name == "union-live") {
            expected = parse_uint(s.args[1], s.line, "size");
            actual = index_.live_size();
            ok = expected == actual;
        } else if (name == "union-matches-oracle") {
            expected = 0;
            actual = oracle_mismatches();
            ok = expected == actual;
        } else if (name == "partial") {
            need_search();
            expected = s.args[1] == "true";
            actual = last_->partial;
            ok = expected == actual;
        } else if (name == "wall-ms-below") {
            need_search();
            expected = parse_uint(s.args[1], s.line, "ms");
            actual = last_wall_ms_;
            ok = last_wall_ms_ < expected.get<std::int64_t>();
        } else if (name == "results-at-least") {
            need_search();
            expected = parse_uint(s.args[1], s.line, "count");
            actual = last_->total;
            ok = last_->total >= expected.get<std::size_t>();
        } else if (name == "sources-at-least") {
            need_search();
            expected = parse_uint(s.args[1], s.line, "count");
            std::size_t fewest = last_->results.empty() ? 0 : SIZE_MAX;
            for (const auto& r : last_->results) fewest = std::min(fewest, r.sources.size());
            actual = fewest;
            ok = !last_->results.empty() && fewest >= expected.get<std::size_t>();
        }
        json result = {{"line", s.line}, {"name", name}, {"expected", expected}, {"actual", actual}, {"passed", ok}};
        if (name == "wall-ms-below") result["actualIsTiming"] = true;
        return result;
    }

    std::uint64_t seed_;
    std::filesystem::path work_dir_;
    ManualClock clock_;
    UnionIndex index_;
    ProviderRegistry registry_;
    Harvester harvester_;
    Gateway gateway_;
    std::map<std::string, SimProvider> providers_;
    std::optional<UnifiedResponse> last_;
    std::int64_t last_wall_ms_ = 0;
};

}  // namespace

Scenario parse_scenario(std::string_view text) {
    Scenario sc;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;

        ScenarioStep step;
        step.line = line_no;
        const auto space = line.find_first_of(" \t");
        step.verb = line.substr(0, space);
        const std::string rest = space == std::string::npos ? std::string() : trim(line.substr(space + 1));
        if (step.verb == "search") {
            if (rest.empty()) throw ScenarioError(line_no, "'search' needs a query");
            step.args = {rest};
        } else {
            step.args = split_words(rest);
        }
        validate_step(step);
        if (step.verb == "seed") sc.seed = parse_uint(step.args[0], line_no, "seed");
        sc.steps.push_back(std::move(step));
    }
    return sc;
}

ScenarioReport run_scenario(const Scenario& scenario, std::uint64_t seed, const std::filesystem::path& work_dir) {
    if (std::filesystem::exists(work_dir) && !std::filesystem::is_empty(work_dir))
        throw std::invalid_argument("scenario work directory must be empty: " + work_dir.string());
    std::filesystem::create_directories(work_dir);

    ScenarioReport report;
    json steps = json::array();
    json assertions = json::array();
    {
        Runner runner(seed, work_dir);
        for (const auto& s : scenario.steps) {
            json entry = {{"line", s.line}, {"step", s.verb}, {"args", s.args}};
            try {
                entry["detail"] = runner.step(s, assertions, report.passed);
                entry["ok"] = true;
            } catch (const std::exception& e) {
                entry["ok"] = false;
                entry["error"] = e.what();
                report.passed = false;
                steps.push_back(std::move(entry));
                break;
            }
            steps.push_back(std::move(entry));
        }
    }
    report.document = {{"seed", seed}, {"steps", steps}, {"assertions", assertions}, {"passed", report.passed}};
    return report;
}

json without_timing(const json& report) {
    if (report.is_object()) {
        const bool timed_actual = report.value("actualIsTiming", false);
        json out = json::object();
        for (const auto& [k, v] : report.items())
            if (k != "wallMs" && k != "elapsedMs" && !(timed_actual && k == "actual")) out[k] = without_timing(v);
        return out;
    }
    if (report.is_array()) {
        json out = json::array();
        for (const auto& v : report) out.push_back(without_timing(v));
        return out;
    }
    return report;
}

}  // namespace bdl
