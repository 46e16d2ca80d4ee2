#include "bdl/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bdl::storage {

namespace {

[[noreturn]] void io_fail(const std::string& what, const std::filesystem::path& p) {
    throw std::runtime_error(what + " " + p.string() + ": " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const std::filesystem::path& p) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            io_fail("write failed for", p);
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) io_fail("cannot create", tmp);
    try {
        write_all(fd, contents, tmp);
        if (::fsync(fd) != 0) io_fail("fsync failed for", tmp);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), path.c_str()) != 0) io_fail("rename failed for", tmp);
}

OperationLog::OperationLog(std::filesystem::path dir, bool sync_writes) : dir_(std::move(dir)), sync_(sync_writes) {
    std::filesystem::create_directories(dir_);
}

OperationLog::~OperationLog() {
    if (fd_ >= 0) ::close(fd_);
}

Recovered OperationLog::recover() {
    Recovered out;
    std::uint64_t snapshot_seq = 0;
    if (std::filesystem::exists(snapshot_path())) {
        const json snap = json::parse(slurp(snapshot_path()));
        snapshot_seq = snap.at("seq").get<std::uint64_t>();
        out.state = snap.at("state");
    }
    out.last_seq = snapshot_seq;

    std::size_t good_bytes = 0;
    std::size_t total = 0;
    if (std::filesystem::exists(log_path())) {
        const std::string data = slurp(log_path());
        total = data.size();
        std::size_t pos = 0;
        while (pos < data.size()) {
            const auto nl = data.find('\n', pos);
            if (nl == std::string::npos) break;  // torn final line
            json op = json::parse(data.begin() + static_cast<std::ptrdiff_t>(pos),
                                  data.begin() + static_cast<std::ptrdiff_t>(nl), nullptr, false);
            if (op.is_discarded() || !op.is_object() || !op.contains("seq")) break;
            const auto seq = op["seq"].get<std::uint64_t>();
            if (seq > out.last_seq) {
                out.last_seq = seq;
                out.tail.push_back(std::move(op));
            }
            pos = nl + 1;
            good_bytes = pos;
        }
    }
    out.discarded_bytes = total - good_bytes;
    if (out.discarded_bytes > 0) std::filesystem::resize_file(log_path(), good_bytes);
    seq_ = out.last_seq;
    since_compaction_ = out.tail.size();
    open_for_append();
    return out;
}

void OperationLog::open_for_append() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = ::open(log_path().c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) io_fail("cannot open", log_path());
}

std::uint64_t OperationLog::append(json op) {
    if (fd_ < 0) throw std::logic_error("OperationLog::append before recover()");
    op["seq"] = seq_ + 1;
    std::string line = op.dump();
    line += '\n';
    write_all(fd_, line, log_path());
    if (sync_ && ::fdatasync(fd_) != 0) io_fail("fdatasync failed for", log_path());
    ++since_compaction_;
    return ++seq_;
}

void OperationLog::compact(const json& state) {
    const json snap = {{"seq", seq_}, {"state", state}};
    write_file_atomic(snapshot_path(), snap.dump());
    // A crash here leaves already-covered ops in the log; recovery skips them by seq.
    if (::ftruncate(fd_, 0) != 0) io_fail("truncate failed for", log_path());
    since_compaction_ = 0;
}

}  // namespace bdl::storage
