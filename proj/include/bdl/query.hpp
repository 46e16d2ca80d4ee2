#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bdl/dc_model.hpp"

namespace bdl {

struct QueryNode;
using QueryPtr = std::shared_ptr<const QueryNode>;

/// Search field of a clause; nullopt stands for `any`.
using Field = std::optional<Element>;

struct Term {
    std::string token;
    friend bool operator==(const Term&, const Term&) = default;
};

struct Phrase {
    std::vector<std::string> tokens;
    friend bool operator==(const Phrase&, const Phrase&) = default;
};

struct Clause {
    Field field;
    std::variant<Term, Phrase> match;
};

struct And {
    QueryPtr left, right;
};
struct Or {
    QueryPtr left, right;
};
struct Not {
    QueryPtr child;
};

/// Immutable boolean AST. Clause tokens are already normalized.
struct QueryNode {
    std::variant<And, Or, Not, Clause> node;
};

bool operator==(const QueryNode& a, const QueryNode& b);
bool same_tree(const QueryPtr& a, const QueryPtr& b);

QueryPtr make_and(QueryPtr l, QueryPtr r);
QueryPtr make_or(QueryPtr l, QueryPtr r);
QueryPtr make_not(QueryPtr c);
QueryPtr make_term(Field f, std::string token);
QueryPtr make_phrase(Field f, std::vector<std::string> tokens);

class QuerySyntaxError : public std::runtime_error {
public:
    QuerySyntaxError(std::size_t offset, const std::string& what)
        : std::runtime_error("query syntax error at offset " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Grammar:
///   or := and { "OR" and } ; and := not { ["AND"] not } ;
///   not := "NOT" not | atom ; atom := "(" or ")" | clause ;
///   clause := [ field ":" ] ( WORD | QUOTED )
QueryPtr parse_query(std::string_view text);

/// Fully parenthesized text; parse_query(canonical_text(n)) == n.
std::string canonical_text(const QueryNode& node);

/// Record pre-split into per-statement token lists.
struct TokenizedRecord {
    struct Entry {
        Element element;
        std::vector<std::string> tokens;
    };
    std::vector<Entry> statements;

    static TokenizedRecord from(const MetadataRecord& r);
};

bool eval_query(const QueryNode& node, const MetadataRecord& record);
bool eval_query(const QueryNode& node, const TokenizedRecord& record);

/// Occurrences of a term or phrase inside the statements of one element.
std::size_t match_count(const Clause& clause, Element element, const TokenizedRecord& record);
bool clause_matches(const Clause& clause, const TokenizedRecord& record);

/// Distinct clauses reached through an even number of NOTs.
std::vector<const Clause*> positive_clauses(const QueryNode& node);

std::string field_name(const Field& f);

}  // namespace bdl
