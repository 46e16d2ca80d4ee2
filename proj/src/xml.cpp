#include "bdl/xml.hpp"

#include <charconv>

#include "bdl/text.hpp"

namespace bdl::xml {

namespace {

constexpr int kMaxDepth = 64;

bool is_name_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == ':' ||
           static_cast<unsigned char>(c) >= 0x80;
}
bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9') || c == '-' || c == '.'; }
bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

class Reader {
public:
    explicit Reader(std::string_view s) : s_(s) {}

    Element document() {
        skip_misc();
        if (starts_with("<?xml")) {
            const auto end = s_.find("?>", pos_);
            if (end == std::string_view::npos) fail("unterminated XML declaration");
            pos_ = end + 2;
        }
        skip_misc();
        if (pos_ >= s_.size() || s_[pos_] != '<') fail("expected root element");
        Element root = element(0);
        skip_misc();
        if (pos_ != s_.size()) fail("trailing content after root element");
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("malformed XML at byte " + std::to_string(pos_) + ": " + msg);
    }

    bool starts_with(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }

    void skip_ws() {
        while (pos_ < s_.size() && is_ws(s_[pos_])) ++pos_;
    }

    void skip_misc() {
        for (;;) {
            skip_ws();
            if (starts_with("<!--")) {
                const auto end = s_.find("-->", pos_ + 4);
                if (end == std::string_view::npos) fail("unterminated comment");
                pos_ = end + 3;
            } else {
                return;
            }
        }
    }

    std::string name() {
        if (pos_ >= s_.size() || !is_name_start(s_[pos_])) fail("expected a name");
        const std::size_t start = pos_;
        while (pos_ < s_.size() && is_name_char(s_[pos_])) ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }

    void reference(std::string& out) {
        const auto semi = s_.find(';', pos_);
        if (semi == std::string_view::npos || semi - pos_ > 12) fail("unterminated entity reference");
        const std::string_view ent = s_.substr(pos_ + 1, semi - pos_ - 1);
        if (ent == "amp") out += '&';
        else if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (ent.size() > 1 && ent[0] == '#') {
            std::uint32_t cp = 0;
            const bool hex = ent[1] == 'x';
            const std::string_view digits = ent.substr(hex ? 2 : 1);
            if (digits.empty()) fail("empty character reference");
            auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), cp, hex ? 16 : 10);
            if (ec != std::errc() || p != digits.data() + digits.size()) fail("bad character reference");
            if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("character reference out of range");
            append_utf8(out, cp);
        } else {
            fail("unknown entity '" + std::string(ent) + "'");
        }
        pos_ = semi + 1;
    }

    std::string attribute_value() {
        if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) fail("expected quoted attribute value");
        const char quote = s_[pos_++];
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != quote) {
            if (s_[pos_] == '<') fail("'<' in attribute value");
            if (s_[pos_] == '&') reference(out);
            else out += s_[pos_++];
        }
        if (pos_ >= s_.size()) fail("unterminated attribute value");
        ++pos_;
        return out;
    }

    Element element(int depth) {
        if (depth > kMaxDepth) fail("nesting too deep");
        ++pos_;  // '<'
        Element el;
        el.name = name();
        for (;;) {
            const std::size_t before = pos_;
            skip_ws();
            if (pos_ >= s_.size()) fail("unterminated start tag");
            if (s_[pos_] == '/') {
                if (!starts_with("/>")) fail("expected '/>'");
                pos_ += 2;
                return el;
            }
            if (s_[pos_] == '>') {
                ++pos_;
                break;
            }
            if (pos_ == before) fail("expected whitespace before attribute");
            std::string key = name();
            skip_ws();
            if (pos_ >= s_.size() || s_[pos_] != '=') fail("expected '='");
            ++pos_;
            skip_ws();
            std::string value = attribute_value();
            for (const auto& [k, v] : el.attributes)
                if (k == key) fail("duplicate attribute '" + key + "'");
            el.attributes.emplace_back(std::move(key), std::move(value));
        }
        // content
        for (;;) {
            if (pos_ >= s_.size()) fail("unterminated element <" + el.name + ">");
            const char c = s_[pos_];
            if (c == '<') {
                if (starts_with("</")) {
                    pos_ += 2;
                    const std::string closing = name();
                    if (closing != el.name) fail("mismatched end tag </" + closing + "> for <" + el.name + ">");
                    skip_ws();
                    if (pos_ >= s_.size() || s_[pos_] != '>') fail("expected '>'");
                    ++pos_;
                    break;
                }
                if (starts_with("<!--")) {
                    const auto end = s_.find("-->", pos_ + 4);
                    if (end == std::string_view::npos) fail("unterminated comment");
                    pos_ = end + 3;
                    continue;
                }
                if (starts_with("<!") || starts_with("<?")) fail("unsupported markup");
                el.children.push_back(element(depth + 1));
            } else if (c == '&') {
                reference(el.text);
                el.has_text = true;
            } else {
                el.text += c;
                el.has_text = true;
                ++pos_;
            }
        }
        if (!el.children.empty()) {
            if (!trim(el.text).empty()) fail("mixed content in <" + el.name + ">");
            el.text.clear();
            el.has_text = false;
        }
        return el;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20 && c != '\t' && c != '\n') {
                    out += "&#" + std::to_string(static_cast<int>(c)) + ";";
                } else {
                    out += c;
                }
        }
    }
    return out;
}

const std::string* Element::attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes)
        if (k == key) return &v;
    return nullptr;
}

const Element* Element::child(std::string_view child_name) const {
    for (const auto& c : children)
        if (c.name == child_name) return &c;
    return nullptr;
}

Element parse(std::string_view bytes) {
    if (!is_valid_utf8(bytes)) throw ParseError("malformed XML: input is not valid UTF-8");
    return Reader(bytes).document();
}

}  // namespace bdl::xml
