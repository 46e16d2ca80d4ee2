#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bdl/datestamp.hpp"
#include "bdl/json_codec.hpp"

namespace bdl {

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct ScenarioStep {
    std::size_t line = 0;
    std::string verb;
    std::vector<std::string> args;  // for `search`, the single argument is the raw query text
};

// One step per line; `#` starts a comment.
//   seed <n>
//   start-provider <id> [page-size=<n>] [modes=harvest,search]
//   submit <id> <n> [stream=<name>]
//   update <id> <fraction>
//   delete <id> <fraction>
//   harvest <id> full|incremental
//   inject-delay <id> <ms>
//   advance <seconds>
//   search <query text>
//   assert union-size <n> | union-live <n> | union-matches-oracle | partial true|false
//          | wall-ms-below <n> | results-at-least <n> | sources-at-least <n>
struct Scenario {
    std::optional<std::uint64_t> seed;
    std::vector<ScenarioStep> steps;
};

/// Throws ScenarioError on unknown verbs or malformed arguments.
Scenario parse_scenario(std::string_view text);

struct ScenarioReport {
    json document;
    bool passed = true;
};

/// Runs the steps against in-process providers on loopback ports, a
/// harvester, a union index and a gateway, all driven by a manual clock.
/// Provider stores live under work_dir. A failing step stops the run.
ScenarioReport run_scenario(const Scenario& scenario, std::uint64_t seed, const std::filesystem::path& work_dir);

/// The report with wall-clock fields removed, for determinism comparisons.
json without_timing(const json& report);

/// Deterministic clock advanced explicitly.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Datestamp start) : now_(start.epoch_seconds()) {}
    Datestamp now() const override { return Datestamp(now_.load()); }
    void advance(std::int64_t seconds) { now_ += seconds; }

private:
    std::atomic<std::int64_t> now_;
};

}  // namespace bdl
