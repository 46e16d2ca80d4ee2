#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <string>

#include "bdl/data_provider.hpp"
#include "bdl/http.hpp"

namespace bdl {

/// HTTP front of a Repository:
///   GET  /oai                  harvest protocol
///   POST /search               {"query","start","max"}
///   POST /submit               multipart: metadata (JSON) + optional document
///   GET  /documents/<localId>  stored bytes with stored media type
class ProviderServer {
public:
    ProviderServer(Repository& repo, const Clock& clock);
    ~ProviderServer();

    void start();  // listens on repo.config().listen_address
    void stop();
    void wait() { service_.wait(); }

    std::string base_url() const { return service_.base_url(); }
    int port() const { return service_.port(); }

    /// Fault injection: every /search answer is held back this long.
    void set_search_delay(std::chrono::milliseconds delay) { search_delay_ms_ = delay.count(); }
    /// Fault injection: every endpoint answers 503 while set.
    void set_unavailable(bool down) { unavailable_ = down; }

private:
    void install_routes();
    bool interruptible_sleep(std::chrono::milliseconds d);

    Repository& repo_;
    const Clock& clock_;
    http::Service service_;
    std::atomic<long long> search_delay_ms_{0};
    std::atomic<bool> unavailable_{false};
    std::mutex sleep_mutex_;
    std::condition_variable sleep_cv_;
    bool stopping_ = false;
};

}  // namespace bdl
