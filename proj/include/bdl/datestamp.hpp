#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "bdl/dc_model.hpp"

namespace bdl {

/// UTC instant at second granularity, rendered YYYY-MM-DDThh:mm:ssZ.
class Datestamp {
public:
    constexpr Datestamp() = default;
    constexpr explicit Datestamp(std::int64_t epoch_seconds) : seconds_(epoch_seconds) {}

    static std::optional<Datestamp> parse(std::string_view text);
    static Datestamp from_system(std::chrono::system_clock::time_point tp);

    std::string str() const;
    constexpr std::int64_t epoch_seconds() const { return seconds_; }

    constexpr Datestamp plus_seconds(std::int64_t s) const { return Datestamp(seconds_ + s); }

    friend constexpr auto operator<=>(Datestamp, Datestamp) = default;

private:
    std::int64_t seconds_ = 0;
};

/// `oai:<repositoryId>:<localId>` with both parts non-empty and colon-free.
bool is_oai_identifier(std::string_view id);

struct RecordHeader {
    std::string identifier;
    Datestamp datestamp;
    bool deleted = false;
    friend bool operator==(const RecordHeader&, const RecordHeader&) = default;
};

/// A harvestable unit; record is absent exactly when the header is deleted.
struct WireRecord {
    RecordHeader header;
    std::optional<MetadataRecord> record;
    friend bool operator==(const WireRecord&, const WireRecord&) = default;
};

/// Source of "now" for anything that writes datestamps.
class Clock {
public:
    virtual ~Clock() = default;
    virtual Datestamp now() const = 0;
};

class SystemClock final : public Clock {
public:
    Datestamp now() const override { return Datestamp::from_system(std::chrono::system_clock::now()); }
};

}  // namespace bdl
