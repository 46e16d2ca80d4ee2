#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bdl {

/// The fifteen Dublin Core elements. Values outside this set cannot be
/// constructed; parsing goes through element_from_name().
enum class Element : std::uint8_t {
    title,
    creator,
    subject,
    description,
    publisher,
    contributor,
    date,
    type,
    format,
    identifier,
    source,
    language,
    relation,
    coverage,
    rights,
};

inline constexpr std::size_t kElementCount = 15;

inline constexpr std::array<Element, kElementCount> kAllElements = {
    Element::title,   Element::creator,  Element::subject,    Element::description,
    Element::publisher, Element::contributor, Element::date,  Element::type,
    Element::format,  Element::identifier, Element::source,   Element::language,
    Element::relation, Element::coverage, Element::rights,
};

/// Canonical lowercase name.
std::string_view element_name(Element e);

/// Case-insensitive lookup; nullopt for anything outside the closed set.
std::optional<Element> element_from_name(std::string_view name);

struct Statement {
    Element element = Element::title;
    std::optional<std::string> qualifier;
    std::optional<std::string> scheme;
    std::optional<std::string> language;
    std::string value;

    friend bool operator==(const Statement&, const Statement&) = default;
};

/// Ordered statement list. Every element is optional and repeatable.
struct MetadataRecord {
    std::vector<Statement> statements;

    /// Statements of one element, in record order.
    std::vector<const Statement*> of(Element e) const;
    const Statement* first(Element e) const;

    friend bool operator==(const MetadataRecord&, const MetadataRecord&) = default;
};

// Lexical rules shared by validators and decoders.
bool is_qualifier_token(std::string_view s);   // letters, digits, hyphen
bool is_scheme_token(std::string_view s);      // qualifier rule plus '.'
bool is_language_tag(std::string_view s);      // 2-8 chars, letters + hyphen
bool is_blank(std::string_view s);

/// Problems with a single statement; empty when it satisfies every
/// Statement invariant.
std::vector<std::string> statement_problems(const Statement& s);

enum class DocumentKind : std::uint8_t { thesis, journal_article, conference_paper, research_report, generic };

inline constexpr std::array<DocumentKind, 5> kAllKinds = {
    DocumentKind::thesis, DocumentKind::journal_article, DocumentKind::conference_paper,
    DocumentKind::research_report, DocumentKind::generic,
};

std::string_view kind_name(DocumentKind k);
std::optional<DocumentKind> kind_from_name(std::string_view name);

struct Requirement {
    Element element;
    std::optional<std::string> qualifier;  // nullopt: any statement of the element
    friend bool operator==(const Requirement&, const Requirement&) = default;
};

struct DocumentProfile {
    DocumentKind kind = DocumentKind::generic;
    std::vector<Requirement> required;
};

/// Qualifier profile for a document kind. Every profile starts with
/// (title), (identifier), (date).
const DocumentProfile& profile_for(DocumentKind kind);

std::string describe(const Requirement& r);

/// Empty iff the record satisfies the profile and every statement is well formed.
std::vector<std::string> validate_record(const MetadataRecord& record, const DocumentProfile& profile);

/// Deduplication key: normalized title | sorted normalized creators | year.
struct Fingerprint {
    std::string key;
    friend auto operator<=>(const Fingerprint&, const Fingerprint&) = default;
};

Fingerprint fingerprint(const MetadataRecord& record);

}  // namespace bdl
