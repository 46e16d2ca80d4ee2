#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bdl/datestamp.hpp"

namespace bdl {

enum class HarvestErrorCode { bad_verb, bad_argument, bad_resumption_token, id_does_not_exist, no_records_match };

std::string_view error_code_name(HarvestErrorCode c);
std::optional<HarvestErrorCode> error_code_from_name(std::string_view name);

class HarvestError : public std::runtime_error {
public:
    HarvestError(HarvestErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}
    HarvestErrorCode code() const noexcept { return code_; }

private:
    HarvestErrorCode code_;
};

enum class Verb { identify, list_records, list_identifiers, get_record };

std::string_view verb_name(Verb v);

struct HarvestRequest {
    Verb verb = Verb::identify;
    std::optional<std::string> identifier;
    std::optional<Datestamp> from;
    std::optional<Datestamp> until;
    std::optional<std::string> resumption_token;
};

/// Raw query parameters, as they arrive on `/oai`. Keys may repeat.
using HarvestParams = std::multimap<std::string, std::string>;

/// Validates verb and arguments; throws HarvestError (badVerb/badArgument).
HarvestRequest parse_request(const HarvestParams& params);
HarvestParams to_params(const HarvestRequest& r);

inline constexpr std::int64_t kTokenLifetimeSeconds = 3600;

struct TokenContent {
    std::uint64_t cursor = 0;
    std::optional<Datestamp> from;
    std::optional<Datestamp> until;
    Datestamp issued_at;
    friend bool operator==(const TokenContent&, const TokenContent&) = default;
};

/// Self-describing, stateless token.
std::string mint_token(std::uint64_t cursor, std::optional<Datestamp> from, std::optional<Datestamp> until,
                       Datestamp now);
/// Throws HarvestError(badResumptionToken) when unparseable or expired
/// (now >= issuedAt + 3600 s).
TokenContent parse_token(std::string_view text, Datestamp now);

/// A read-only view of a repository's items, ordered or not.
struct StoreSnapshot {
    std::vector<const WireRecord*> items;
};

struct Page {
    std::vector<const WireRecord*> records;
    std::optional<std::uint64_t> next_cursor;  // present iff more remain
    std::size_t complete_list_size = 0;
};

/// Inclusive [from, until] selection including tombstones, ordered by
/// (datestamp asc, identifier asc), windowed [cursor, cursor + page_size).
Page select_page(const StoreSnapshot& snapshot, std::optional<Datestamp> from, std::optional<Datestamp> until,
                 std::uint64_t cursor, std::size_t page_size);

struct RepositoryInfo {
    std::string name;
    std::string repository_id;
    std::string admin_contact;
    std::size_t page_size = 100;
};

/// Response document for one request. Pure in (snapshot, info, params, now).
std::string handle_request(const StoreSnapshot& snapshot, const RepositoryInfo& info, const HarvestParams& params,
                           Datestamp now);

// ---------------------------------------------------------------- client side

struct IdentifyInfo {
    std::string repository_name;
    std::string repository_id;
    std::string admin_contact;
    std::optional<Datestamp> earliest_datestamp;
};

struct ResumptionInfo {
    std::string token;
    std::size_t complete_list_size = 0;
    std::uint64_t cursor = 0;
};

struct HarvestResponse {
    Datestamp responded_at;
    std::optional<HarvestErrorCode> error;
    std::string error_message;
    std::vector<WireRecord> records;       // ListRecords, GetRecord
    std::vector<RecordHeader> headers;     // ListIdentifiers
    std::optional<IdentifyInfo> identify;
    std::optional<ResumptionInfo> resumption;
};

/// Throws CodecError when the document is not a well-formed response.
HarvestResponse decode_response(std::string_view bytes);

}  // namespace bdl
