#include "bdl/codecs.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_map>

#include "bdl/text.hpp"

namespace bdl {

namespace {

void append_statement(std::string& out, const Statement& s) {
    const std::string_view name = element_name(s.element);
    out += '<';
    out += name;
    if (s.qualifier) out += " qualifier=\"" + xml::escape(*s.qualifier) + '"';
    if (s.scheme) out += " scheme=\"" + xml::escape(*s.scheme) + '"';
    if (s.language) out += " lang=\"" + xml::escape(*s.language) + '"';
    out += '>';
    out += xml::escape(s.value);
    out += "</";
    out += name;
    out += '>';
}

void require_no_text(const xml::Element& e) {
    if (e.has_text && !trim(e.text).empty()) throw CodecError("unexpected text inside <" + e.name + ">");
}

void require_attributes(const xml::Element& e, std::initializer_list<std::string_view> allowed) {
    for (const auto& [k, v] : e.attributes)
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw CodecError("unexpected attribute '" + k + "' on <" + e.name + ">");
}

Statement decode_statement(const xml::Element& e) {
    const auto element = element_from_name(e.name);
    if (!element) throw CodecError("unknown element <" + e.name + "> in <dc>");
    if (!e.children.empty()) throw CodecError("nested markup inside <" + e.name + ">");
    require_attributes(e, {"qualifier", "scheme", "lang"});
    Statement s;
    s.element = *element;
    if (const auto* q = e.attribute("qualifier")) s.qualifier = *q;
    if (const auto* q = e.attribute("scheme")) s.scheme = *q;
    if (const auto* q = e.attribute("lang")) s.language = *q;
    s.value = e.text;
    if (auto problems = statement_problems(s); !problems.empty()) throw CodecError("malformed statement: " + problems.front());
    return s;
}

// ------------------------------------------------------------ HTML helpers

bool html_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

const std::unordered_map<std::string_view, std::uint32_t>& html_entities() {
    static const std::unordered_map<std::string_view, std::uint32_t> table = {
        {"amp", '&'},       {"lt", '<'},         {"gt", '>'},         {"quot", '"'},       {"apos", '\''},
        {"nbsp", 0xA0},     {"copy", 0xA9},      {"reg", 0xAE},       {"ordf", 0xAA},      {"ordm", 0xBA},
        {"Agrave", 0xC0},   {"Aacute", 0xC1},    {"Acirc", 0xC2},     {"Atilde", 0xC3},    {"Auml", 0xC4},
        {"Ccedil", 0xC7},   {"Egrave", 0xC8},    {"Eacute", 0xC9},    {"Ecirc", 0xCA},     {"Iacute", 0xCD},
        {"Ntilde", 0xD1},   {"Oacute", 0xD3},    {"Ocirc", 0xD4},     {"Otilde", 0xD5},    {"Ouml", 0xD6},
        {"Uacute", 0xDA},   {"Uuml", 0xDC},      {"agrave", 0xE0},    {"aacute", 0xE1},    {"acirc", 0xE2},
        {"atilde", 0xE3},   {"auml", 0xE4},      {"ccedil", 0xE7},    {"egrave", 0xE8},    {"eacute", 0xE9},
        {"ecirc", 0xEA},    {"euml", 0xEB},      {"igrave", 0xEC},    {"iacute", 0xED},    {"icirc", 0xEE},
        {"ntilde", 0xF1},   {"ograve", 0xF2},    {"oacute", 0xF3},    {"ocirc", 0xF4},     {"otilde", 0xF5},
        {"ouml", 0xF6},     {"ugrave", 0xF9},    {"uacute", 0xFA},    {"ucirc", 0xFB},     {"uuml", 0xFC},
    };
    return table;
}

void put_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

// Unknown or malformed references are kept literally.
std::string decode_html_entities(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        if (s[i] != '&') {
            out += s[i++];
            continue;
        }
        const auto semi = s.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            out += s[i++];
            continue;
        }
        const std::string_view ent = s.substr(i + 1, semi - i - 1);
        std::uint32_t cp = 0;
        bool ok = false;
        if (ent.size() > 1 && ent[0] == '#') {
            const bool hex = ent[1] == 'x' || ent[1] == 'X';
            const std::string_view digits = ent.substr(hex ? 2 : 1);
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
            ok = !digits.empty() && ec == std::errc() && p == digits.data() + digits.size() && cp > 0 &&
                 cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
        } else if (auto it = html_entities().find(ent); it != html_entities().end()) {
            cp = it->second;
            ok = true;
        }
        if (ok) {
            put_utf8(out, cp);
            i = semi + 1;
        } else {
            out += s[i++];
        }
    }
    return out;
}

using Attributes = std::vector<std::pair<std::string, std::string>>;

// Parses attributes from just after the tag name up to the closing '>'.
Attributes scan_attributes(std::string_view s, std::size_t& pos) {
    Attributes attrs;
    while (pos < s.size()) {
        while (pos < s.size() && (html_space(s[pos]) || s[pos] == '/')) ++pos;
        if (pos >= s.size()) break;
        if (s[pos] == '>') {
            ++pos;
            break;
        }
        const std::size_t name_start = pos;
        while (pos < s.size() && !html_space(s[pos]) && s[pos] != '=' && s[pos] != '>' && s[pos] != '/') ++pos;
        std::string name = ascii_lower(s.substr(name_start, pos - name_start));
        while (pos < s.size() && html_space(s[pos])) ++pos;
        std::string value;
        if (pos < s.size() && s[pos] == '=') {
            ++pos;
            while (pos < s.size() && html_space(s[pos])) ++pos;
            if (pos < s.size() && (s[pos] == '"' || s[pos] == '\'')) {
                const char q = s[pos++];
                const auto end = s.find(q, pos);
                const std::size_t stop = end == std::string_view::npos ? s.size() : end;
                value = decode_html_entities(s.substr(pos, stop - pos));
                pos = end == std::string_view::npos ? s.size() : end + 1;
            } else {
                const std::size_t vstart = pos;
                while (pos < s.size() && !html_space(s[pos]) && s[pos] != '>') ++pos;
                value = decode_html_entities(s.substr(vstart, pos - vstart));
            }
        }
        if (name.empty()) {
            ++pos;
            continue;
        }
        bool dup = false;
        for (const auto& a : attrs) dup = dup || a.first == name;
        if (!dup) attrs.emplace_back(std::move(name), std::move(value));
    }
    return attrs;
}

const std::string* find_attr(const Attributes& attrs, std::string_view key) {
    for (const auto& [k, v] : attrs)
        if (k == key) return &v;
    return nullptr;
}

std::vector<std::string_view> split_dots(std::string_view s) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (;;) {
        const auto dot = s.find('.', start);
        parts.push_back(s.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (dot == std::string_view::npos) return parts;
        start = dot + 1;
    }
}

struct DcName {
    std::optional<Element> element;
    std::optional<std::string> qualifier;
    std::string problem;  // non-empty when the name is DC-prefixed but unusable
    bool is_dc = false;
};

DcName parse_dc_name(std::string_view name) {
    DcName out;
    const auto parts = split_dots(name);
    if (parts.size() < 2 || !iequals(parts[0], "DC")) return out;
    out.is_dc = true;
    if (parts.size() > 3) {
        out.problem = "too many name parts in '" + std::string(name) + "'";
        return out;
    }
    out.element = element_from_name(parts[1]);
    if (!out.element) {
        out.problem = "unknown DC element '" + std::string(parts[1]) + "'";
        return out;
    }
    if (parts.size() == 3) {
        if (!is_qualifier_token(parts[2])) {
            out.problem = "malformed qualifier in '" + std::string(name) + "'";
            out.element.reset();
            return out;
        }
        out.qualifier = std::string(parts[2]);
    }
    return out;
}

void flush_statement(ParsedRecord& rec, std::optional<Statement>& pending, std::size_t line) {
    if (!pending) return;
    pending->value = trim(pending->value);
    if (pending->value.empty()) {
        rec.warnings.push_back("line " + std::to_string(line) + ": empty value for " +
                               std::string(element_name(pending->element)) + ", statement skipped");
    } else if (auto problems = statement_problems(*pending); !problems.empty()) {
        rec.warnings.push_back("line " + std::to_string(line) + ": " + problems.front() + ", statement skipped");
    } else {
        rec.record.statements.push_back(std::move(*pending));
    }
    pending.reset();
}

}  // namespace

void append_record_xml(std::string& out, const WireRecord& wire) {
    out += "<record><header";
    if (wire.header.deleted) out += " status=\"deleted\"";
    out += "><identifier>";
    out += xml::escape(wire.header.identifier);
    out += "</identifier><datestamp>";
    out += wire.header.datestamp.str();
    out += "</datestamp></header>";
    if (!wire.header.deleted && wire.record) {
        out += "<metadata><dc>";
        for (const auto& s : wire.record->statements) append_statement(out, s);
        out += "</dc></metadata>";
    }
    out += "</record>";
}

std::string encode_metadata_xml(const MetadataRecord& record) {
    std::string out = "<dc>";
    for (const auto& s : record.statements) append_statement(out, s);
    out += "</dc>";
    return out;
}

std::string encode_record_xml(const WireRecord& wire) {
    std::string out;
    append_record_xml(out, wire);
    return out;
}

RecordHeader decode_header_element(const xml::Element& h) {
    if (h.name != "header") throw CodecError("expected <header>, found <" + h.name + ">");
    require_attributes(h, {"status"});
    require_no_text(h);
    RecordHeader header;
    if (const auto* status = h.attribute("status")) {
        if (*status != "deleted") throw CodecError("unknown header status '" + *status + "'");
        header.deleted = true;
    }
    if (h.children.size() != 2 || h.children[0].name != "identifier" || h.children[1].name != "datestamp")
        throw CodecError("header must contain exactly <identifier> and <datestamp>");
    const auto& id = h.children[0];
    const auto& ds = h.children[1];
    if (!id.attributes.empty() || !ds.attributes.empty() || !id.children.empty() || !ds.children.empty())
        throw CodecError("unexpected markup in header fields");
    if (is_blank(id.text)) throw CodecError("missing identifier");
    header.identifier = id.text;
    if (ds.text.empty()) throw CodecError("missing datestamp");
    const auto parsed = Datestamp::parse(ds.text);
    if (!parsed) throw CodecError("malformed datestamp '" + ds.text + "'");
    header.datestamp = *parsed;
    return header;
}

WireRecord decode_record_element(const xml::Element& root) {
    if (root.name != "record") throw CodecError("expected <record>, found <" + root.name + ">");
    require_attributes(root, {});
    require_no_text(root);
    if (root.children.empty()) throw CodecError("record without header");
    WireRecord wire;
    wire.header = decode_header_element(root.children[0]);
    if (root.children.size() > 2) throw CodecError("unexpected elements in record");
    if (root.children.size() == 1) {
        if (!wire.header.deleted) throw CodecError("live record without metadata");
        return wire;
    }
    const auto& md = root.children[1];
    if (md.name != "metadata") throw CodecError("unexpected element <" + md.name + "> in record");
    if (wire.header.deleted) throw CodecError("metadata present on deleted record");
    require_attributes(md, {});
    require_no_text(md);
    if (md.children.size() != 1 || md.children[0].name != "dc") throw CodecError("metadata must contain one <dc>");
    const auto& dc = md.children[0];
    require_attributes(dc, {});
    require_no_text(dc);
    MetadataRecord rec;
    rec.statements.reserve(dc.children.size());
    for (const auto& child : dc.children) rec.statements.push_back(decode_statement(child));
    wire.record = std::move(rec);
    return wire;
}

WireRecord decode_record_xml(std::string_view bytes) {
    try {
        return decode_record_element(xml::parse(bytes));
    } catch (const xml::ParseError& e) {
        throw CodecError(e.what());
    }
}

ParsedRecord extract_dc_from_html(std::string_view s) {
    ParsedRecord out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto lt = s.find('<', pos);
        if (lt == std::string_view::npos) break;
        pos = lt + 1;
        if (s.substr(lt, 4) == "<!--") {
            const auto end = s.find("-->", lt + 4);
            pos = end == std::string_view::npos ? s.size() : end + 3;
            continue;
        }
        if (s.size() - pos < 4 || !iequals(s.substr(pos, 4), "meta")) continue;
        if (pos + 4 < s.size() && !html_space(s[pos + 4]) && s[pos + 4] != '>' && s[pos + 4] != '/') continue;
        pos += 4;
        const Attributes attrs = scan_attributes(s, pos);
        const std::string* name = find_attr(attrs, "name");
        if (!name) continue;
        const DcName dc = parse_dc_name(trim(*name));
        if (!dc.is_dc) continue;
        if (!dc.problem.empty()) {
            out.warnings.push_back(dc.problem + ", tag skipped");
            continue;
        }
        Statement st;
        st.element = *dc.element;
        st.qualifier = dc.qualifier;
        if (const auto* scheme = find_attr(attrs, "scheme")) st.scheme = trim(*scheme);
        if (const auto* lang = find_attr(attrs, "lang")) st.language = trim(*lang);
        else if (const auto* xlang = find_attr(attrs, "xml:lang")) st.language = trim(*xlang);
        const std::string* content = find_attr(attrs, "content");
        st.value = content ? *content : std::string();
        if (is_blank(st.value)) {
            out.warnings.push_back("empty content for " + trim(*name) + ", tag skipped");
            continue;
        }
        if (auto problems = statement_problems(st); !problems.empty()) {
            out.warnings.push_back(problems.front() + ", tag skipped");
            continue;
        }
        out.record.statements.push_back(std::move(st));
    }
    return out;
}

std::vector<ParsedRecord> parse_tagged_text(std::string_view s) {
    std::vector<ParsedRecord> records;
    std::optional<ParsedRecord> current;
    std::optional<Statement> pending;
    std::size_t pending_line = 0;
    std::size_t line_no = 0;

    auto finish_block = [&] {
        if (!current) return;
        flush_statement(*current, pending, pending_line);
        records.push_back(std::move(*current));
        current.reset();
    };

    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto nl = s.find('\n', pos);
        std::string_view line = s.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? s.size() + 1 : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (is_blank(line)) {
            finish_block();
            continue;
        }
        if (!current) current.emplace();

        if (line.front() == ' ' || line.front() == '\t') {
            if (pending) {
                const std::string piece = trim(line);
                if (!trim(pending->value).empty()) pending->value = trim(pending->value) + " " + piece;
                else pending->value = piece;
            } else {
                current->warnings.push_back("line " + std::to_string(line_no) + ": continuation without a statement");
            }
            continue;
        }

        flush_statement(*current, pending, pending_line);
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) {
            current->warnings.push_back("line " + std::to_string(line_no) + ": not a DC statement, skipped");
            continue;
        }
        const DcName dc = parse_dc_name(trim(line.substr(0, colon)));
        if (!dc.is_dc) {
            current->warnings.push_back("line " + std::to_string(line_no) + ": not a DC statement, skipped");
            continue;
        }
        if (!dc.problem.empty()) {
            current->warnings.push_back("line " + std::to_string(line_no) + ": " + dc.problem + ", skipped");
            continue;
        }
        Statement st;
        st.element = *dc.element;
        st.qualifier = dc.qualifier;
        st.value = std::string(line.substr(colon + 1));
        pending = std::move(st);
        pending_line = line_no;
    }
    finish_block();
    return records;
}

std::string format_tagged_text(const MetadataRecord& record) {
    std::string out;
    for (const auto& s : record.statements) {
        std::string name(element_name(s.element));
        name[0] = static_cast<char>(name[0] - 'a' + 'A');
        out += "DC." + name;
        if (s.qualifier) out += "." + *s.qualifier;
        out += ": ";
        std::string v = s.value;
        std::replace(v.begin(), v.end(), '\n', ' ');
        out += trim(v);
        out += '\n';
    }
    return out;
}

}  // namespace bdl
