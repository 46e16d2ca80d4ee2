#pragma once

#include <json.hpp>

#include "bdl/datestamp.hpp"
#include "bdl/dc_model.hpp"

namespace bdl {

using json = nlohmann::json;

// Statement objects: {"element", "qualifier"?, "scheme"?, "lang"?, "value"}.
json to_json(const Statement& s);
json to_json(const MetadataRecord& r);  // order-preserving array

/// Throws std::invalid_argument on unknown elements or missing fields.
Statement statement_from_json(const json& j);
MetadataRecord record_from_json(const json& j);

json to_json(const WireRecord& w);
WireRecord wire_from_json(const json& j);

}  // namespace bdl
