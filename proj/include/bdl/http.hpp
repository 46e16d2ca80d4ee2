#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace bdl::http {

/// Connection-level failure: refused, reset, timed out, unparsable URL.
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, bool timed_out = false) : std::runtime_error(what), timed_out_(timed_out) {}
    bool timed_out() const noexcept { return timed_out_; }

private:
    bool timed_out_;
};

struct Response {
    int status = 0;
    std::string body;
    std::string content_type;
};

using Params = std::multimap<std::string, std::string>;

Response get(const std::string& base_url, const std::string& path, const Params& params,
             std::chrono::milliseconds timeout);
Response post(const std::string& base_url, const std::string& path, const std::string& body,
              const std::string& content_type, std::chrono::milliseconds timeout);
Response del(const std::string& base_url, const std::string& path, std::chrono::milliseconds timeout);

/// Owns an httplib::Server and its listening thread.
class Service {
public:
    Service();
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    httplib::Server& server() { return *server_; }

    /// Binds `host:port` (port 0 picks a free port) and starts listening
    /// on a background thread. Throws std::runtime_error when binding fails.
    void start(const std::string& listen_address);
    void stop();
    /// Blocks until stop() is called from elsewhere.
    void wait();

    int port() const { return port_; }
    std::string base_url() const;

private:
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string host_;
    int port_ = 0;
};

std::pair<std::string, int> split_host_port(const std::string& address);

}  // namespace bdl::http
