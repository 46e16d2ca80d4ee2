#include "bdl/dc_model.hpp"

#include <algorithm>

#include "bdl/text.hpp"

namespace bdl {

namespace {

constexpr std::array<std::string_view, kElementCount> kElementNames = {
    "title", "creator", "subject", "description", "publisher", "contributor", "date", "type",
    "format", "identifier", "source", "language", "relation", "coverage", "rights",
};

constexpr std::array<std::string_view, 5> kKindNames = {
    "thesis", "journal-article", "conference-paper", "research-report", "generic",
};

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::vector<Requirement> base_requirements() {
    return {{Element::title, std::nullopt}, {Element::identifier, std::nullopt}, {Element::date, std::nullopt}};
}

DocumentProfile make_profile(DocumentKind kind, std::vector<Requirement> extra) {
    DocumentProfile p{kind, base_requirements()};
    p.required.insert(p.required.end(), extra.begin(), extra.end());
    return p;
}

}  // namespace

std::string_view element_name(Element e) { return kElementNames[static_cast<std::size_t>(e)]; }

std::optional<Element> element_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kElementCount; ++i)
        if (iequals(name, kElementNames[i])) return static_cast<Element>(i);
    return std::nullopt;
}

std::vector<const Statement*> MetadataRecord::of(Element e) const {
    std::vector<const Statement*> out;
    for (const auto& s : statements)
        if (s.element == e) out.push_back(&s);
    return out;
}

const Statement* MetadataRecord::first(Element e) const {
    for (const auto& s : statements)
        if (s.element == e) return &s;
    return nullptr;
}

bool is_qualifier_token(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return is_alpha(c) || is_digit(c) || c == '-'; });
}

bool is_scheme_token(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return is_alpha(c) || is_digit(c) || c == '-' || c == '.'; });
}

bool is_language_tag(std::string_view s) {
    if (s.size() < 2 || s.size() > 8) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return is_alpha(c) || c == '-'; });
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::vector<std::string> statement_problems(const Statement& s) {
    std::vector<std::string> out;
    const std::string el(element_name(s.element));
    if (is_blank(s.value)) out.push_back(el + ": empty value");
    else if (!is_valid_utf8(s.value)) out.push_back(el + ": value is not valid UTF-8");
    if (s.qualifier && !is_qualifier_token(*s.qualifier)) out.push_back(el + ": malformed qualifier '" + *s.qualifier + "'");
    if (s.scheme && !is_scheme_token(*s.scheme)) out.push_back(el + ": malformed scheme '" + *s.scheme + "'");
    if (s.language && !is_language_tag(*s.language)) out.push_back(el + ": malformed language '" + *s.language + "'");
    return out;
}

std::string_view kind_name(DocumentKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<DocumentKind> kind_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (iequals(name, kKindNames[i])) return static_cast<DocumentKind>(i);
    return std::nullopt;
}

const DocumentProfile& profile_for(DocumentKind kind) {
    static const std::array<DocumentProfile, 5> profiles = {
        make_profile(DocumentKind::thesis,
                     {{Element::description, "degree-name"},
                      {Element::description, "degree-level"},
                      {Element::description, "degree-grantor"}}),
        make_profile(DocumentKind::journal_article, {{Element::relation, "citation"}}),
        make_profile(DocumentKind::conference_paper,
                     {{Element::relation, "conference-name"}, {Element::date, "conference-date"}}),
        make_profile(DocumentKind::research_report,
                     {{Element::publisher, std::nullopt}, {Element::identifier, "report-number"}}),
        make_profile(DocumentKind::generic, {}),
    };
    return profiles[static_cast<std::size_t>(kind)];
}

std::string describe(const Requirement& r) {
    return "(" + std::string(element_name(r.element)) + ", " + (r.qualifier ? *r.qualifier : std::string("-")) + ")";
}

std::vector<std::string> validate_record(const MetadataRecord& record, const DocumentProfile& profile) {
    std::vector<std::string> violations;
    for (const auto& req : profile.required) {
        const bool found = std::any_of(record.statements.begin(), record.statements.end(), [&](const Statement& s) {
            if (s.element != req.element) return false;
            if (!req.qualifier) return true;
            return s.qualifier && iequals(*s.qualifier, *req.qualifier);
        });
        if (!found) violations.push_back("missing required statement " + describe(req));
    }
    for (std::size_t i = 0; i < record.statements.size(); ++i)
        for (auto& p : statement_problems(record.statements[i]))
            violations.push_back("statement " + std::to_string(i) + " " + p);
    return violations;
}

Fingerprint fingerprint(const MetadataRecord& record) {
    std::string title;
    if (const auto* t = record.first(Element::title)) title = normalize_text(t->value);

    std::vector<std::string> creators;
    for (const auto* c : record.of(Element::creator)) {
        auto n = normalize_text(c->value);
        if (!n.empty()) creators.push_back(std::move(n));
    }
    std::sort(creators.begin(), creators.end());

    std::string year = "----";
    for (const auto* d : record.of(Element::date)) {
        const std::string v = trim(d->value);
        if (v.size() >= 4 && std::all_of(v.begin(), v.begin() + 4, is_digit)) {
            year = v.substr(0, 4);
            break;
        }
    }

    std::string key = title + "|";
    for (std::size_t i = 0; i < creators.size(); ++i) {
        if (i) key += ';';
        key += creators[i];
    }
    key += "|" + year;
    return Fingerprint{std::move(key)};
}

}  // namespace bdl
