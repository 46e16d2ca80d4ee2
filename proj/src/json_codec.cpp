#include "bdl/json_codec.hpp"

#include <stdexcept>

namespace bdl {

json to_json(const Statement& s) {
    json j = json::object();
    j["element"] = element_name(s.element);
    if (s.qualifier) j["qualifier"] = *s.qualifier;
    if (s.scheme) j["scheme"] = *s.scheme;
    if (s.language) j["lang"] = *s.language;
    j["value"] = s.value;
    return j;
}

json to_json(const MetadataRecord& r) {
    json arr = json::array();
    for (const auto& s : r.statements) arr.push_back(to_json(s));
    return arr;
}

Statement statement_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("statement must be an object");
    const auto el = j.find("element");
    if (el == j.end() || !el->is_string()) throw std::invalid_argument("statement without element");
    const auto element = element_from_name(el->get<std::string>());
    if (!element) throw std::invalid_argument("unknown element '" + el->get<std::string>() + "'");
    Statement s;
    s.element = *element;
    auto opt = [&](const char* key) -> std::optional<std::string> {
        const auto it = j.find(key);
        if (it == j.end() || it->is_null()) return std::nullopt;
        if (!it->is_string()) throw std::invalid_argument(std::string(key) + " must be a string");
        return it->get<std::string>();
    };
    s.qualifier = opt("qualifier");
    s.scheme = opt("scheme");
    s.language = opt("lang");
    auto value = opt("value");
    if (!value) throw std::invalid_argument("statement without value");
    s.value = std::move(*value);
    return s;
}

MetadataRecord record_from_json(const json& j) {
    if (!j.is_array()) throw std::invalid_argument("metadata must be an array of statements");
    MetadataRecord r;
    r.statements.reserve(j.size());
    for (const auto& s : j) r.statements.push_back(statement_from_json(s));
    return r;
}

json to_json(const WireRecord& w) {
    json j = {{"identifier", w.header.identifier}, {"datestamp", w.header.datestamp.str()}, {"deleted", w.header.deleted}};
    if (w.record) j["metadata"] = to_json(*w.record);
    return j;
}

WireRecord wire_from_json(const json& j) {
    WireRecord w;
    w.header.identifier = j.at("identifier").get<std::string>();
    const auto ds = Datestamp::parse(j.at("datestamp").get<std::string>());
    if (!ds) throw std::invalid_argument("malformed datestamp");
    w.header.datestamp = *ds;
    w.header.deleted = j.value("deleted", false);
    if (const auto it = j.find("metadata"); it != j.end() && !it->is_null()) w.record = record_from_json(*it);
    return w;
}

}  // namespace bdl
