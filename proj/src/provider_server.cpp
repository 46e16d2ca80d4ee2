#include "bdl/provider_server.hpp"

#include <httplib.h>

#include "bdl/query.hpp"

namespace bdl {

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

ProviderServer::ProviderServer(Repository& repo, const Clock& clock) : repo_(repo), clock_(clock) { install_routes(); }

ProviderServer::~ProviderServer() { stop(); }

void ProviderServer::start() {
    {
        std::lock_guard lock(sleep_mutex_);
        stopping_ = false;
    }
    service_.start(repo_.config().listen_address);
}

void ProviderServer::stop() {
    {
        std::lock_guard lock(sleep_mutex_);
        stopping_ = true;
    }
    sleep_cv_.notify_all();
    service_.stop();
}

bool ProviderServer::interruptible_sleep(std::chrono::milliseconds d) {
    std::unique_lock lock(sleep_mutex_);
    return !sleep_cv_.wait_for(lock, d, [this] { return stopping_; });
}

void ProviderServer::install_routes() {
    auto& srv = service_.server();

    srv.set_pre_routing_handler([this](const httplib::Request&, httplib::Response& res) {
        if (!unavailable_) return httplib::Server::HandlerResponse::Unhandled;
        send_json(res, 503, {{"error", "provider unavailable"}});
        return httplib::Server::HandlerResponse::Handled;
    });

    srv.Get("/oai", [this](const httplib::Request& req, httplib::Response& res) {
        HarvestParams params(req.params.begin(), req.params.end());
        res.set_content(repo_.handle_harvest(params, clock_.now()), "application/xml");
    });

    srv.Post("/search", [this](const httplib::Request& req, httplib::Response& res) {
        if (const auto delay = search_delay_ms_.load(); delay > 0) {
            if (!interruptible_sleep(std::chrono::milliseconds(delay))) {
                send_json(res, 503, {{"error", "shutting down"}});
                return;
            }
        }
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
            const auto result = repo_.search_local(body["query"].get<std::string>(), static_cast<std::size_t>(start),
                                                   static_cast<std::size_t>(max));
            send_json(res, 200, to_search_json(repo_.config().repository_id, result));
        } catch (const QuerySyntaxError& e) {
            send_json(res, 400, {{"error", e.what()}, {"offset", e.offset()}});
        }
    });

    srv.Post("/submit", [this](const httplib::Request& req, httplib::Response& res) {
        if (!req.has_file("metadata")) {
            send_json(res, 400, {{"error", "multipart part 'metadata' is required"}});
            return;
        }
        const json meta = json::parse(req.get_file_value("metadata").content, nullptr, false);
        if (meta.is_discarded() || !meta.is_object()) {
            send_json(res, 400, {{"error", "metadata part must be a JSON object"}});
            return;
        }
        try {
            const auto kind = kind_from_name(meta.value("kind", std::string("generic")));
            if (!kind) throw std::invalid_argument("unknown document kind");
            const MetadataRecord record = record_from_json(meta.at("metadata"));
            std::optional<std::string> document;
            std::string media_type;
            if (req.has_file("document")) {
                const auto part = req.get_file_value("document");
                document = part.content;
                media_type = part.content_type.empty() ? "application/octet-stream" : part.content_type;
            }
            const std::string id = repo_.submit(record, *kind, std::move(document), media_type, clock_.now());
            send_json(res, 201, {{"identifier", id}});
        } catch (const ValidationError& e) {
            send_json(res, 422, {{"error", "validation failed"}, {"violations", e.violations()}});
        } catch (const RepositoryError& e) {
            send_json(res, e.kind() == RepositoryError::Kind::document_too_large ? 413 : 500, {{"error", e.what()}});
        } catch (const std::exception& e) {
            send_json(res, 400, {{"error", e.what()}});
        }
    });

    srv.Get(R"(/documents/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
        std::uint64_t id = 0;
        try {
            id = std::stoull(req.matches[1].str());
        } catch (const std::exception&) {
            send_json(res, 404, {{"error", "no such document"}});
            return;
        }
        const auto item = repo_.find(id);
        if (!item || !item->document) {
            send_json(res, 404, {{"error", "no such document"}});
            return;
        }
        res.set_content(*item->document, item->media_type.c_str());
    });
}

}  // namespace bdl
