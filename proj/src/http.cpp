#include "bdl/http.hpp"

#include <httplib.h>

namespace bdl::http {

namespace {

std::unique_ptr<httplib::Client> client_for(const std::string& base_url, std::chrono::milliseconds timeout) {
    auto cli = std::make_unique<httplib::Client>(base_url);
    if (!cli->is_valid()) throw TransportError("invalid base URL '" + base_url + "'");
    const auto sec = timeout.count() / 1000;
    const auto usec = (timeout.count() % 1000) * 1000;
    cli->set_connection_timeout(sec, usec);
    cli->set_read_timeout(sec, usec);
    cli->set_write_timeout(sec, usec);
    cli->set_keep_alive(false);
    return cli;
}

Response finish(const httplib::Result& res, const std::string& what) {
    if (!res) {
        const auto err = res.error();
        throw TransportError(what + ": " + httplib::to_string(err),
                             err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout);
    }
    Response out;
    out.status = res->status;
    out.body = res->body;
    out.content_type = res->get_header_value("Content-Type");
    return out;
}

}  // namespace

std::pair<std::string, int> split_host_port(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("listen address must be host:port, got '" + address + "'");
    int port = 0;
    try {
        port = std::stoi(address.substr(colon + 1));
    } catch (const std::exception&) {
        throw std::invalid_argument("bad port in '" + address + "'");
    }
    if (port < 0 || port > 65535) throw std::invalid_argument("bad port in '" + address + "'");
    return {address.substr(0, colon), port};
}

Response get(const std::string& base_url, const std::string& path, const Params& params,
             std::chrono::milliseconds timeout) {
    auto cli = client_for(base_url, timeout);
    httplib::Params p(params.begin(), params.end());
    return finish(cli->Get(path, p, httplib::Headers{}), "GET " + base_url + path);
}

Response post(const std::string& base_url, const std::string& path, const std::string& body,
              const std::string& content_type, std::chrono::milliseconds timeout) {
    auto cli = client_for(base_url, timeout);
    return finish(cli->Post(path, body, content_type), "POST " + base_url + path);
}

Response del(const std::string& base_url, const std::string& path, std::chrono::milliseconds timeout) {
    auto cli = client_for(base_url, timeout);
    return finish(cli->Delete(path), "DELETE " + base_url + path);
}

Service::Service() : server_(std::make_unique<httplib::Server>()) {}

Service::~Service() { stop(); }

void Service::start(const std::string& listen_address) {
    auto [host, port] = split_host_port(listen_address);
    host_ = host;
    if (port == 0) {
        port_ = server_->bind_to_any_port(host);
    } else {
        port_ = server_->bind_to_port(host, port) ? port : -1;
    }
    if (port_ <= 0) throw std::runtime_error("cannot bind " + listen_address);
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void Service::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

void Service::wait() {
    if (thread_.joinable()) thread_.join();
}

std::string Service::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace bdl::http
