#include "bdl/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

#include "bdl/query.hpp"

namespace bdl {

namespace {

using SteadyClock = std::chrono::steady_clock;

std::vector<SourceRecord> records_from_json(const json& doc) {
    std::vector<SourceRecord> out;
    for (const auto& r : doc.at("records")) {
        SourceRecord s;
        s.identifier = r.at("identifier").get<std::string>();
        s.record = record_from_json(r.at("metadata"));
        out.push_back(std::move(s));
    }
    return out;
}

struct BroadcastState {
    std::mutex mutex;
    std::condition_variable cv;
    std::vector<std::optional<ProviderOutcome>> outcomes;
    std::size_t remaining = 0;
};

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

std::optional<std::size_t> parse_count(const httplib::Request& req, const char* name, std::size_t fallback) {
    if (!req.has_param(name)) return fallback;
    const std::string v = req.get_param_value(name);
    std::size_t n = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) return std::nullopt;
    return n;
}

}  // namespace

std::string_view outcome_status_name(OutcomeStatus s) {
    switch (s) {
        case OutcomeStatus::ok: return "ok";
        case OutcomeStatus::timeout: return "timeout";
        case OutcomeStatus::error: return "error";
    }
    return "?";
}

json HttpSearchTarget::search(const std::string& query, std::size_t max, std::chrono::milliseconds timeout) {
    const json body = {{"query", query}, {"start", 0}, {"max", max}};
    const auto res = http::post(d_.base_url, "/search", body.dump(), "application/json", timeout);
    if (res.status != 200) throw std::runtime_error("HTTP " + std::to_string(res.status));
    return json::parse(res.body);
}

json UnionSearchTarget::search(const std::string& query, std::size_t max, std::chrono::milliseconds) {
    return to_search_json(index_.query(query, 0, max));
}

std::vector<ProviderOutcome> broadcast(const std::string& query, const std::vector<std::shared_ptr<SearchTarget>>& targets,
                                       std::size_t depth, Deadlines deadlines) {
    const auto started = SteadyClock::now();
    const auto budget = std::min(deadlines.per_provider, deadlines.overall);
    auto state = std::make_shared<BroadcastState>();
    state->outcomes.resize(targets.size());
    state->remaining = targets.size();

    for (std::size_t i = 0; i < targets.size(); ++i) {
        std::thread([state, target = targets[i], i, query, depth, budget, started] {
            ProviderOutcome out;
            out.provider_id = target->id();
            try {
                out.records = records_from_json(target->search(query, depth, budget));
                out.status = OutcomeStatus::ok;
            } catch (const http::TransportError& e) {
                out.status = e.timed_out() ? OutcomeStatus::timeout : OutcomeStatus::error;
                out.message = e.what();
            } catch (const std::exception& e) {
                out.status = OutcomeStatus::error;
                out.message = e.what();
            }
            out.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(SteadyClock::now() - started);
            if (out.elapsed > budget) {
                out.status = OutcomeStatus::timeout;
                out.records.clear();
            }
            if (out.status != OutcomeStatus::ok) out.records.clear();
            std::lock_guard lock(state->mutex);
            state->outcomes[i] = std::move(out);
            --state->remaining;
            state->cv.notify_all();
        }).detach();
    }

    std::unique_lock lock(state->mutex);
    state->cv.wait_until(lock, started + budget, [&] { return state->remaining == 0; });
    std::vector<ProviderOutcome> result;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (state->outcomes[i]) {
            result.push_back(*state->outcomes[i]);
        } else {
            ProviderOutcome late;
            late.provider_id = targets[i]->id();
            late.status = OutcomeStatus::timeout;
            late.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(SteadyClock::now() - started);
            late.message = "deadline exceeded";
            result.push_back(std::move(late));
        }
    }
    return result;
}

std::vector<MergedResult> merge(const std::vector<ProviderOutcome>& outcomes) {
    struct Member {
        SourceRef ref;
        const MetadataRecord* record;
    };
    std::map<std::string, std::vector<Member>> groups;
    for (const auto& o : outcomes) {
        if (o.status != OutcomeStatus::ok) continue;
        for (std::size_t rank = 0; rank < o.records.size(); ++rank) {
            const auto& r = o.records[rank];
            groups[fingerprint(r.record).key].push_back({{o.provider_id, r.identifier, rank}, &r.record});
        }
    }

    std::vector<MergedResult> merged;
    merged.reserve(groups.size());
    for (auto& [key, members] : groups) {
        std::sort(members.begin(), members.end(), [](const Member& a, const Member& b) { return a.ref < b.ref; });
        MergedResult m;
        m.fingerprint.key = key;
        const Member* best = &members.front();
        for (const auto& mem : members) {
            m.sources.push_back(mem.ref);
            m.score += 1.0 / static_cast<double>(mem.ref.rank + 1);
            // members are sorted by provider then identifier, so the first maximum wins ties
            if (mem.record->statements.size() > best->record->statements.size()) best = &mem;
        }
        m.best_record = *best->record;
        merged.push_back(std::move(m));
    }
    std::sort(merged.begin(), merged.end(), [](const MergedResult& a, const MergedResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.fingerprint.key < b.fingerprint.key;
    });
    return merged;
}

json to_json(const MergedResult& r) {
    json sources = json::array();
    for (const auto& s : r.sources)
        sources.push_back({{"provider", s.provider_id}, {"identifier", s.identifier}, {"rank", s.rank}});
    return {{"fingerprint", r.fingerprint.key}, {"record", to_json(r.best_record)}, {"sources", sources}, {"score", r.score}};
}

json to_json(const UnifiedResponse& r) {
    json results = json::array();
    for (const auto& m : r.results) results.push_back(to_json(m));
    json outcomes = json::array();
    for (const auto& o : r.outcomes) {
        json j = {{"provider", o.provider_id}, {"status", outcome_status_name(o.status)}, {"elapsedMs", o.elapsed.count()}};
        if (!o.message.empty()) j["message"] = o.message;
        outcomes.push_back(std::move(j));
    }
    return {{"results", results}, {"total", r.total}, {"partial", r.partial}, {"outcomes", outcomes}};
}

Gateway::Gateway(UnionIndex& index, ProviderRegistry& registry, Harvester& harvester, const Clock& clock,
                 GatewayOptions options)
    : index_(index), registry_(registry), harvester_(harvester), clock_(clock), options_(options) {}

UnifiedResponse Gateway::unified_search(const std::string& query, std::size_t start, std::size_t max) const {
    if (max < 1) throw std::invalid_argument("max must be at least 1");
    parse_query(query);

    std::vector<std::shared_ptr<SearchTarget>> targets{std::make_shared<UnionSearchTarget>(index_)};
    for (const auto& d : *registry_.snapshot())
        if (d.search) targets.push_back(std::make_shared<HttpSearchTarget>(d));

    UnifiedResponse resp;
    resp.outcomes = broadcast(query, targets, options_.fetch_depth, options_.deadlines);
    auto merged = merge(resp.outcomes);
    resp.total = merged.size();
    for (std::size_t i = start; i < merged.size() && i - start < max; ++i) resp.results.push_back(std::move(merged[i]));
    resp.partial = std::any_of(resp.outcomes.begin(), resp.outcomes.end(),
                               [](const ProviderOutcome& o) { return o.status != OutcomeStatus::ok; });
    return resp;
}

GatewayServer::GatewayServer(Gateway& gateway) : gateway_(gateway) { install_routes(); }

GatewayServer::~GatewayServer() { stop(); }

void GatewayServer::start(const std::string& listen_address) { service_.start(listen_address); }

void GatewayServer::stop() { service_.stop(); }

void GatewayServer::install_routes() {
    auto& srv = service_.server();
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });

    srv.Get("/api/search", [this](const httplib::Request& req, httplib::Response& res) {
        const auto start = parse_count(req, "start", 0);
        const auto max = parse_count(req, "max", 10);
        if (!req.has_param("q") || !start || !max || *max < 1) {
            send_json(res, 400, {{"error", "expected q, start >= 0 and max >= 1"}});
            return;
        }
        try {
            send_json(res, 200, to_json(gateway_.unified_search(req.get_param_value("q"), *start, *max)));
        } catch (const QuerySyntaxError& e) {
            send_json(res, 400, {{"error", e.what()}, {"offset", e.offset()}});
        }
    });

    srv.Post("/search", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("query") || !body["query"].is_string()) {
            send_json(res, 400, {{"error", "body must be {\"query\": text, \"start\": n, \"max\": n}"}});
            return;
        }
        const auto start = body.value("start", 0LL);
        const auto max = body.value("max", 10LL);
        if (start < 0 || max < 1) {
            send_json(res, 400, {{"error", "start must be >= 0 and max >= 1"}});
            return;
        }
        try {
            send_json(res, 200,
                      to_search_json(gateway_.index().query(body["query"].get<std::string>(),
                                                            static_cast<std::size_t>(start), static_cast<std::size_t>(max))));
        } catch (const QuerySyntaxError& e) {
            send_json(res, 400, {{"error", e.what()}, {"offset", e.offset()}});
        }
    });

    srv.Get("/api/providers", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, registry_to_json(*gateway_.registry().snapshot()));
    });

    srv.Post("/api/providers", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = json::parse(req.body, nullptr, false);
        ProviderDescriptor d;
        try {
            d = descriptor_from_json(body);
        } catch (const std::exception& e) {
            send_json(res, 400, {{"error", e.what()}});
            return;
        }
        try {
            gateway_.registry().add(d);
        } catch (const RegistryError& e) {
            send_json(res, 409, {{"error", e.what()}});
            return;
        }
        send_json(res, 201, to_json(d));
    });

    srv.Delete(R"(/api/providers/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        try {
            gateway_.registry().remove(req.matches[1]);
        } catch (const RegistryError& e) {
            send_json(res, 404, {{"error", e.what()}});
            return;
        }
        res.status = 204;
    });

    srv.Post(R"(/api/harvest/([^/]+)/run)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto provider = gateway_.registry().find(req.matches[1]);
        if (!provider) {
            send_json(res, 404, {{"error", "unknown provider id '" + std::string(req.matches[1]) + "'"}});
            return;
        }
        const std::string kind = req.has_param("kind") ? req.get_param_value("kind") : "incremental";
        if (kind != "full" && kind != "incremental") {
            send_json(res, 400, {{"error", "kind must be full or incremental"}});
            return;
        }
        if (!provider->harvest) {
            send_json(res, 400, {{"error", "provider '" + provider->provider_id + "' has no harvest mode"}});
            return;
        }
        const auto id = gateway_.harvester().enqueue(*provider, kind == "full" ? JobKind::full : JobKind::incremental);
        json body = {{"jobId", id}};
        if (const auto job = gateway_.harvester().job(id)) body["job"] = to_json(*job);
        send_json(res, 202, body);
    });

    srv.Get("/api/harvest/jobs", [this](const httplib::Request&, httplib::Response& res) {
        json jobs = json::array();
        for (const auto& j : gateway_.harvester().jobs()) jobs.push_back(to_json(j));
        send_json(res, 200, {{"jobs", jobs}});
    });

    srv.Get(R"(/api/harvest/jobs/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
        const auto job = gateway_.harvester().job(std::stoull(req.matches[1]));
        if (!job) {
            send_json(res, 404, {{"error", "unknown job"}});
            return;
        }
        send_json(res, 200, to_json(*job));
    });

    srv.Get("/api/checkpoints", [this](const httplib::Request&, httplib::Response& res) {
        json cps = json::array();
        for (const auto& c : gateway_.harvester().checkpoints())
            cps.push_back({{"providerId", c.provider_id}, {"lastSuccessUntil", c.last_success_until.str()}});
        send_json(res, 200, {{"checkpoints", cps}});
    });

    srv.Post("/api/ingest", [this](const httplib::Request& req, httplib::Response& res) {
        const json body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object() || !body.contains("directory") || !body["directory"].is_string() ||
            !body.contains("providerId") || !body["providerId"].is_string() ||
            body["providerId"].get<std::string>().empty()) {
            send_json(res, 400, {{"error", "body must be {\"directory\": path, \"providerId\": id}"}});
            return;
        }
        const std::string provider = body["providerId"];
        if (provider == kUnionTargetId) {
            send_json(res, 400, {{"error", "provider id 'union' is reserved"}});
            return;
        }
        const auto job = gateway_.harvester().ingest_files(body["directory"].get<std::string>(), provider,
                                                           gateway_.clock().now());
        send_json(res, job.state == JobState::succeeded ? 200 : 422, to_json(job));
    });
}

}  // namespace bdl
