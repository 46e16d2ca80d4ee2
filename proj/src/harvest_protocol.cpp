#include "bdl/harvest_protocol.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>

#include "bdl/codecs.hpp"
#include "bdl/xml.hpp"

namespace bdl {

namespace {

constexpr std::array<std::string_view, 5> kErrorNames = {
    "badVerb", "badArgument", "badResumptionToken", "idDoesNotExist", "noRecordsMatch",
};

constexpr std::array<std::string_view, 4> kVerbNames = {"Identify", "ListRecords", "ListIdentifiers", "GetRecord"};

constexpr std::string_view kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";

std::string b64url_encode(std::string_view in) {
    std::string out;
    std::uint32_t buf = 0;
    int bits = 0;
    for (unsigned char c : in) {
        buf = (buf << 8) | c;
        bits += 8;
        while (bits >= 6) {
            bits -= 6;
            out += kB64[(buf >> bits) & 0x3F];
        }
    }
    if (bits > 0) out += kB64[(buf << (6 - bits)) & 0x3F];
    return out;
}

std::optional<std::string> b64url_decode(std::string_view in) {
    std::string out;
    std::uint32_t buf = 0;
    int bits = 0;
    for (char c : in) {
        const auto idx = kB64.find(c);
        if (idx == std::string_view::npos) return std::nullopt;
        buf = (buf << 6) | static_cast<std::uint32_t>(idx);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out += static_cast<char>((buf >> bits) & 0xFF);
        }
    }
    return out;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

template <class Int>
std::optional<Int> to_int(std::string_view s) {
    Int v{};
    if (s.empty()) return std::nullopt;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const auto at = s.find(sep, start);
        parts.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
        if (at == std::string_view::npos) return parts;
        start = at + 1;
    }
}

std::string optional_seconds(const std::optional<Datestamp>& d) {
    return d ? std::to_string(d->epoch_seconds()) : std::string();
}

std::optional<std::optional<Datestamp>> parse_optional_seconds(std::string_view s) {
    if (s.empty()) return std::optional<Datestamp>{};
    auto v = to_int<std::int64_t>(s);
    if (!v) return std::nullopt;
    return std::optional<Datestamp>{Datestamp(*v)};
}

bool before(const WireRecord* a, const WireRecord* b) {
    if (a->header.datestamp != b->header.datestamp) return a->header.datestamp < b->header.datestamp;
    return a->header.identifier < b->header.identifier;
}

void echo_request(std::string& out, const HarvestParams& params) {
    out += "<request";
    for (std::string_view key : {"verb", "identifier", "from", "until", "resumptionToken"}) {
        const auto it = params.find(std::string(key));
        if (it == params.end()) continue;
        out += ' ';
        out += key;
        out += "=\"" + xml::escape(it->second) + '"';
    }
    out += "/>";
}

std::string envelope_start(Datestamp now) {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<repository-response respondedAt=\"" + now.str() + "\">";
}

std::string error_document(const HarvestParams& params, Datestamp now, HarvestErrorCode code, std::string_view message) {
    std::string out = envelope_start(now);
    echo_request(out, params);
    out += "<error code=\"";
    out += error_code_name(code);
    out += "\">" + xml::escape(message) + "</error></repository-response>";
    return out;
}

std::optional<Datestamp> earliest(const StoreSnapshot& snapshot) {
    std::optional<Datestamp> best;
    for (const auto* w : snapshot.items)
        if (!best || w->header.datestamp < *best) best = w->header.datestamp;
    return best;
}

std::string list_document(const StoreSnapshot& snapshot, const RepositoryInfo& info, const HarvestParams& params,
                          const HarvestRequest& req, Datestamp now) {
    std::uint64_t cursor = 0;
    auto from = req.from;
    auto until = req.until;
    if (req.resumption_token) {
        const TokenContent t = parse_token(*req.resumption_token, now);
        cursor = t.cursor;
        from = t.from;
        until = t.until;
    }
    const Page page = select_page(snapshot, from, until, cursor, std::max<std::size_t>(info.page_size, 1));
    if (page.records.empty()) {
        if (req.resumption_token) throw HarvestError(HarvestErrorCode::bad_resumption_token, "token cursor is past the end of the list");
        throw HarvestError(HarvestErrorCode::no_records_match, "no records match the request");
    }
    std::string out = envelope_start(now);
    echo_request(out, params);
    out += "<records>";
    for (const auto* w : page.records) {
        if (req.verb == Verb::list_identifiers) {
            out += "<header";
            if (w->header.deleted) out += " status=\"deleted\"";
            out += "><identifier>" + xml::escape(w->header.identifier) + "</identifier><datestamp>" +
                   w->header.datestamp.str() + "</datestamp></header>";
        } else {
            append_record_xml(out, *w);
        }
    }
    if (page.next_cursor) {
        // Pin the upper bound so later pages see the same selection window.
        const auto pinned_until = until ? until : std::optional<Datestamp>(now);
        out += "<resumptionToken completeListSize=\"" + std::to_string(page.complete_list_size) + "\" cursor=\"" +
               std::to_string(cursor) + "\">" + mint_token(*page.next_cursor, from, pinned_until, now) +
               "</resumptionToken>";
    }
    out += "</records></repository-response>";
    return out;
}

}  // namespace

std::string_view error_code_name(HarvestErrorCode c) { return kErrorNames[static_cast<std::size_t>(c)]; }

std::optional<HarvestErrorCode> error_code_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kErrorNames.size(); ++i)
        if (kErrorNames[i] == name) return static_cast<HarvestErrorCode>(i);
    return std::nullopt;
}

std::string_view verb_name(Verb v) { return kVerbNames[static_cast<std::size_t>(v)]; }

HarvestRequest parse_request(const HarvestParams& params) {
    const auto verb_count = params.count("verb");
    if (verb_count == 0) throw HarvestError(HarvestErrorCode::bad_verb, "missing verb");
    if (verb_count > 1) throw HarvestError(HarvestErrorCode::bad_verb, "repeated verb");
    const std::string& verb_text = params.find("verb")->second;
    HarvestRequest req;
    bool known = false;
    for (std::size_t i = 0; i < kVerbNames.size(); ++i) {
        if (kVerbNames[i] == verb_text) {
            req.verb = static_cast<Verb>(i);
            known = true;
        }
    }
    if (!known) throw HarvestError(HarvestErrorCode::bad_verb, "unknown verb '" + verb_text + "'");

    std::vector<std::string_view> allowed;
    switch (req.verb) {
        case Verb::identify: break;
        case Verb::get_record: allowed = {"identifier"}; break;
        case Verb::list_records:
        case Verb::list_identifiers: allowed = {"from", "until", "resumptionToken"}; break;
    }
    for (const auto& [key, value] : params) {
        if (key == "verb") continue;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw HarvestError(HarvestErrorCode::bad_argument, "illegal argument '" + key + "'");
        if (params.count(key) > 1) throw HarvestError(HarvestErrorCode::bad_argument, "repeated argument '" + key + "'");
    }
    auto get = [&](const char* key) -> std::optional<std::string> {
        const auto it = params.find(key);
        if (it == params.end()) return std::nullopt;
        return it->second;
    };
    req.identifier = get("identifier");
    req.resumption_token = get("resumptionToken");
    if (auto f = get("from")) {
        req.from = Datestamp::parse(*f);
        if (!req.from) throw HarvestError(HarvestErrorCode::bad_argument, "malformed from '" + *f + "'");
    }
    if (auto u = get("until")) {
        req.until = Datestamp::parse(*u);
        if (!req.until) throw HarvestError(HarvestErrorCode::bad_argument, "malformed until '" + *u + "'");
    }
    if (req.verb == Verb::get_record && !req.identifier)
        throw HarvestError(HarvestErrorCode::bad_argument, "GetRecord requires identifier");
    if (req.resumption_token && (req.from || req.until))
        throw HarvestError(HarvestErrorCode::bad_argument, "resumptionToken is an exclusive argument");
    if (req.from && req.until && *req.from > *req.until)
        throw HarvestError(HarvestErrorCode::bad_argument, "from is later than until");
    return req;
}

HarvestParams to_params(const HarvestRequest& r) {
    HarvestParams p;
    p.emplace("verb", std::string(verb_name(r.verb)));
    if (r.identifier) p.emplace("identifier", *r.identifier);
    if (r.from) p.emplace("from", r.from->str());
    if (r.until) p.emplace("until", r.until->str());
    if (r.resumption_token) p.emplace("resumptionToken", *r.resumption_token);
    return p;
}

std::string mint_token(std::uint64_t cursor, std::optional<Datestamp> from, std::optional<Datestamp> until,
                       Datestamp now) {
    std::string payload = "v1;" + std::to_string(cursor) + ";" + optional_seconds(from) + ";" + optional_seconds(until) +
                          ";" + std::to_string(now.epoch_seconds());
    char sum[17];
    std::snprintf(sum, sizeof sum, "%016llx", static_cast<unsigned long long>(fnv1a(payload)));
    payload += ";";
    payload += sum;
    return b64url_encode(payload);
}

TokenContent parse_token(std::string_view text, Datestamp now) {
    auto bad = [](const std::string& why) { return HarvestError(HarvestErrorCode::bad_resumption_token, why); };
    const auto decoded = b64url_decode(text);
    if (!decoded) throw bad("unparseable token");
    const auto parts = split(*decoded, ';');
    if (parts.size() != 6 || parts[0] != "v1") throw bad("unparseable token");
    const std::string_view signed_part = std::string_view(*decoded).substr(0, decoded->size() - parts[5].size() - 1);
    std::uint64_t expected_sum = 0;
    {
        auto [p, ec] = std::from_chars(parts[5].data(), parts[5].data() + parts[5].size(), expected_sum, 16);
        if (parts[5].size() != 16 || ec != std::errc() || p != parts[5].data() + parts[5].size())
            throw bad("unparseable token");
    }
    if (expected_sum != fnv1a(signed_part)) throw bad("token checksum mismatch");
    TokenContent t;
    const auto cursor = to_int<std::uint64_t>(parts[1]);
    const auto from = parse_optional_seconds(parts[2]);
    const auto until = parse_optional_seconds(parts[3]);
    const auto issued = to_int<std::int64_t>(parts[4]);
    if (!cursor || !from || !until || !issued) throw bad("unparseable token");
    t.cursor = *cursor;
    t.from = *from;
    t.until = *until;
    t.issued_at = Datestamp(*issued);
    if (now >= t.issued_at.plus_seconds(kTokenLifetimeSeconds)) throw bad("token expired");
    return t;
}

Page select_page(const StoreSnapshot& snapshot, std::optional<Datestamp> from, std::optional<Datestamp> until,
                 std::uint64_t cursor, std::size_t page_size) {
    std::vector<const WireRecord*> selected;
    for (const auto* w : snapshot.items) {
        if (from && w->header.datestamp < *from) continue;
        if (until && w->header.datestamp > *until) continue;
        selected.push_back(w);
    }
    std::sort(selected.begin(), selected.end(), before);
    Page page;
    page.complete_list_size = selected.size();
    if (cursor >= selected.size()) return page;
    const std::size_t end = std::min<std::size_t>(selected.size(), cursor + page_size);
    page.records.assign(selected.begin() + static_cast<std::ptrdiff_t>(cursor),
                        selected.begin() + static_cast<std::ptrdiff_t>(end));
    if (end < selected.size()) page.next_cursor = end;
    return page;
}

std::string handle_request(const StoreSnapshot& snapshot, const RepositoryInfo& info, const HarvestParams& params,
                           Datestamp now) {
    try {
        const HarvestRequest req = parse_request(params);
        switch (req.verb) {
            case Verb::identify: {
                std::string out = envelope_start(now);
                echo_request(out, params);
                out += "<identify><repositoryName>" + xml::escape(info.name) + "</repositoryName><repositoryId>" +
                       xml::escape(info.repository_id) + "</repositoryId><adminContact>" +
                       xml::escape(info.admin_contact) + "</adminContact>";
                if (auto e = earliest(snapshot)) out += "<earliestDatestamp>" + e->str() + "</earliestDatestamp>";
                out += "</identify></repository-response>";
                return out;
            }
            case Verb::get_record: {
                for (const auto* w : snapshot.items) {
                    if (w->header.identifier != *req.identifier) continue;
                    std::string out = envelope_start(now);
                    echo_request(out, params);
                    out += "<records>";
                    append_record_xml(out, *w);
                    out += "</records></repository-response>";
                    return out;
                }
                throw HarvestError(HarvestErrorCode::id_does_not_exist, "unknown identifier '" + *req.identifier + "'");
            }
            case Verb::list_records:
            case Verb::list_identifiers: return list_document(snapshot, info, params, req, now);
        }
        throw HarvestError(HarvestErrorCode::bad_verb, "unhandled verb");
    } catch (const HarvestError& e) {
        const std::string what = e.what();
        const auto colon = what.find(": ");
        return error_document(params, now, e.code(), colon == std::string::npos ? what : what.substr(colon + 2));
    }
}

HarvestResponse decode_response(std::string_view bytes) {
    xml::Element root;
    try {
        root = xml::parse(bytes);
    } catch (const xml::ParseError& e) {
        throw CodecError(e.what());
    }
    if (root.name != "repository-response") throw CodecError("not a repository-response document");
    HarvestResponse resp;
    const auto* at = root.attribute("respondedAt");
    if (!at) throw CodecError("response without respondedAt");
    const auto responded = Datestamp::parse(*at);
    if (!responded) throw CodecError("malformed respondedAt '" + *at + "'");
    resp.responded_at = *responded;

    for (const auto& child : root.children) {
        if (child.name == "request") continue;
        if (child.name == "error") {
            const auto* code = child.attribute("code");
            if (!code) throw CodecError("error without code");
            resp.error = error_code_from_name(*code);
            if (!resp.error) throw CodecError("unknown error code '" + *code + "'");
            resp.error_message = child.text;
        } else if (child.name == "identify") {
            IdentifyInfo info;
            if (const auto* n = child.child("repositoryName")) info.repository_name = n->text;
            if (const auto* n = child.child("repositoryId")) info.repository_id = n->text;
            if (const auto* n = child.child("adminContact")) info.admin_contact = n->text;
            if (const auto* n = child.child("earliestDatestamp")) info.earliest_datestamp = Datestamp::parse(n->text);
            resp.identify = std::move(info);
        } else if (child.name == "records") {
            for (const auto& r : child.children) {
                if (r.name == "record") {
                    resp.records.push_back(decode_record_element(r));
                } else if (r.name == "header") {
                    resp.headers.push_back(decode_header_element(r));
                } else if (r.name == "resumptionToken") {
                    ResumptionInfo ri;
                    ri.token = r.text;
                    if (const auto* n = r.attribute("completeListSize"))
                        ri.complete_list_size = to_int<std::size_t>(*n).value_or(0);
                    if (const auto* c = r.attribute("cursor")) ri.cursor = to_int<std::uint64_t>(*c).value_or(0);
                    if (!ri.token.empty()) resp.resumption = std::move(ri);
                } else {
                    throw CodecError("unexpected <" + r.name + "> in records");
                }
            }
        } else {
            throw CodecError("unexpected <" + child.name + "> in response");
        }
    }
    return resp;
}

}  // namespace bdl
