#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "bdl/json_codec.hpp"

namespace bdl::storage {

/// Writes to `<path>.tmp`, fsyncs, renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

struct Recovered {
    std::optional<json> state;  // from snapshot.json, if any
    std::vector<json> tail;     // logged operations newer than the snapshot, in order
    std::uint64_t last_seq = 0;
    std::size_t discarded_bytes = 0;  // torn or unparseable tail that was cut off
};

/// Append-only JSON-lines operation log plus an atomically replaced
/// snapshot. Each appended operation gets a strictly increasing "seq";
/// recovery loads the snapshot and returns operations with a larger seq.
/// Not thread-safe; owners serialize writers.
class OperationLog {
public:
    explicit OperationLog(std::filesystem::path dir, bool sync_writes = false);
    ~OperationLog();
    OperationLog(const OperationLog&) = delete;
    OperationLog& operator=(const OperationLog&) = delete;

    /// Reads the directory and truncates any torn tail. Must be called once
    /// before append().
    Recovered recover();

    std::uint64_t append(json op);

    /// Persists `state` as covering everything up to the last appended seq,
    /// then empties the log.
    void compact(const json& state);

    std::uint64_t ops_since_compaction() const { return since_compaction_; }
    const std::filesystem::path& dir() const { return dir_; }

    std::filesystem::path log_path() const { return dir_ / "ops.log"; }
    std::filesystem::path snapshot_path() const { return dir_ / "snapshot.json"; }

private:
    void open_for_append();

    std::filesystem::path dir_;
    bool sync_;
    int fd_ = -1;
    std::uint64_t seq_ = 0;
    std::uint64_t since_compaction_ = 0;
};

}  // namespace bdl::storage
