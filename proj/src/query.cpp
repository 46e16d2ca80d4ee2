#include "bdl/query.hpp"

#include <algorithm>

#include "bdl/text.hpp"

namespace bdl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool clause_equal(const Clause& a, const Clause& b) { return a.field == b.field && a.match == b.match; }

// ---------------------------------------------------------------- lexer

enum class Tok { word, quoted, lparen, rparen, colon, end };

struct Token {
    Tok kind;
    std::size_t offset;
    std::string text;
};

bool reserved(char c) { return c == '(' || c == ')' || c == '"' || c == ':'; }
bool space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        if (space(c)) {
            ++i;
        } else if (c == '(') {
            out.push_back({Tok::lparen, i, "("});
            ++i;
        } else if (c == ')') {
            out.push_back({Tok::rparen, i, ")"});
            ++i;
        } else if (c == ':') {
            out.push_back({Tok::colon, i, ":"});
            ++i;
        } else if (c == '"') {
            const std::size_t close = s.find('"', i + 1);
            if (close == std::string_view::npos) throw QuerySyntaxError(i, "unterminated quoted string");
            out.push_back({Tok::quoted, i, std::string(s.substr(i + 1, close - i - 1))});
            i = close + 1;
        } else {
            const std::size_t start = i;
            while (i < s.size() && !space(s[i]) && !reserved(s[i])) ++i;
            out.push_back({Tok::word, start, std::string(s.substr(start, i - start))});
        }
    }
    out.push_back({Tok::end, s.size(), ""});
    return out;
}

// ---------------------------------------------------------------- parser

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(lex(text)) {}

    QueryPtr parse() {
        if (peek().kind == Tok::end) throw QuerySyntaxError(0, "empty query");
        QueryPtr q = parse_or();
        const Token& t = peek();
        if (t.kind == Tok::rparen) throw QuerySyntaxError(t.offset, "unbalanced ')'");
        if (t.kind != Tok::end) throw QuerySyntaxError(t.offset, "unexpected '" + t.text + "'");
        return q;
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
    }
    const Token& next() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }
    bool is_keyword(const Token& t, std::string_view kw) const { return t.kind == Tok::word && t.text == kw; }

    bool starts_operand(const Token& t) const {
        if (t.kind == Tok::lparen || t.kind == Tok::quoted) return true;
        return t.kind == Tok::word && t.text != "AND" && t.text != "OR";
    }

    QueryPtr parse_or() {
        QueryPtr left = parse_and();
        while (is_keyword(peek(), "OR")) {
            next();
            left = make_or(std::move(left), parse_and());
        }
        return left;
    }

    QueryPtr parse_and() {
        QueryPtr left = parse_not();
        for (;;) {
            if (is_keyword(peek(), "AND")) {
                next();
                left = make_and(std::move(left), parse_not());
            } else if (starts_operand(peek())) {
                left = make_and(std::move(left), parse_not());
            } else {
                return left;
            }
        }
    }

    QueryPtr parse_not() {
        if (is_keyword(peek(), "NOT")) {
            next();
            return make_not(parse_not());
        }
        return parse_atom();
    }

    QueryPtr parse_atom() {
        const Token& t = peek();
        if (t.kind == Tok::lparen) {
            next();
            if (peek().kind == Tok::rparen) throw QuerySyntaxError(peek().offset, "empty group");
            QueryPtr inner = parse_or();
            if (peek().kind != Tok::rparen) throw QuerySyntaxError(t.offset, "unbalanced '('");
            next();
            return inner;
        }
        return parse_clause();
    }

    QueryPtr parse_clause() {
        const Token& t = next();
        Field field;
        const Token* value = &t;
        if (t.kind == Tok::word && peek().kind == Tok::colon) {
            if (iequals(t.text, "any")) {
                field = std::nullopt;
            } else if (auto e = element_from_name(t.text)) {
                field = *e;
            } else {
                throw QuerySyntaxError(t.offset, "unknown field '" + t.text + "'");
            }
            const Token& colon = next();
            value = &next();
            if (value->kind != Tok::word && value->kind != Tok::quoted) {
                throw QuerySyntaxError(value->kind == Tok::end ? colon.offset + 1 : value->offset,
                                       "expected a term after field");
            }
        }
        switch (value->kind) {
            case Tok::word:
                if (value->text == "AND" || value->text == "OR" || value->text == "NOT")
                    throw QuerySyntaxError(value->offset, "misplaced operator '" + value->text + "'");
                break;
            case Tok::quoted: break;
            case Tok::rparen: throw QuerySyntaxError(value->offset, "unbalanced ')'");
            case Tok::end: throw QuerySyntaxError(value->offset, "expected a term");
            default: throw QuerySyntaxError(value->offset, "unexpected '" + value->text + "'");
        }
        auto tokens = tokenize(value->text);
        if (tokens.empty()) throw QuerySyntaxError(value->offset, "empty clause");
        if (value->kind == Tok::quoted || tokens.size() > 1) return make_phrase(field, std::move(tokens));
        return make_term(field, std::move(tokens.front()));
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

void print(const QueryNode& n, std::string& out) {
    std::visit(overloaded{
                   [&](const And& a) {
                       out += '(';
                       print(*a.left, out);
                       out += " AND ";
                       print(*a.right, out);
                       out += ')';
                   },
                   [&](const Or& o) {
                       out += '(';
                       print(*o.left, out);
                       out += " OR ";
                       print(*o.right, out);
                       out += ')';
                   },
                   [&](const Not& x) {
                       out += "(NOT ";
                       print(*x.child, out);
                       out += ')';
                   },
                   [&](const Clause& c) {
                       out += '(';
                       out += field_name(c.field);
                       out += ':';
                       if (const auto* t = std::get_if<Term>(&c.match)) {
                           out += t->token;
                       } else {
                           const auto& p = std::get<Phrase>(c.match);
                           out += '"';
                           for (std::size_t i = 0; i < p.tokens.size(); ++i) {
                               if (i) out += ' ';
                               out += p.tokens[i];
                           }
                           out += '"';
                       }
                       out += ')';
                   },
               },
               n.node);
}

std::size_t count_in(const std::vector<std::string>& hay, const Clause& clause) {
    if (const auto* t = std::get_if<Term>(&clause.match))
        return static_cast<std::size_t>(std::count(hay.begin(), hay.end(), t->token));
    const auto& needle = std::get<Phrase>(clause.match).tokens;
    if (needle.empty() || needle.size() > hay.size()) return 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i)
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) ++n;
    return n;
}

void collect_positive(const QueryNode& n, bool positive, std::vector<const Clause*>& out) {
    std::visit(overloaded{
                   [&](const And& a) {
                       collect_positive(*a.left, positive, out);
                       collect_positive(*a.right, positive, out);
                   },
                   [&](const Or& o) {
                       collect_positive(*o.left, positive, out);
                       collect_positive(*o.right, positive, out);
                   },
                   [&](const Not& x) { collect_positive(*x.child, !positive, out); },
                   [&](const Clause& c) {
                       if (!positive) return;
                       for (const Clause* seen : out)
                           if (clause_equal(*seen, c)) return;
                       out.push_back(&c);
                   },
               },
               n.node);
}

}  // namespace

bool operator==(const QueryNode& a, const QueryNode& b) {
    if (a.node.index() != b.node.index()) return false;
    return std::visit(overloaded{
                          [&](const And& x) {
                              const auto& y = std::get<And>(b.node);
                              return *x.left == *y.left && *x.right == *y.right;
                          },
                          [&](const Or& x) {
                              const auto& y = std::get<Or>(b.node);
                              return *x.left == *y.left && *x.right == *y.right;
                          },
                          [&](const Not& x) { return *x.child == *std::get<Not>(b.node).child; },
                          [&](const Clause& x) { return clause_equal(x, std::get<Clause>(b.node)); },
                      },
                      a.node);
}

bool same_tree(const QueryPtr& a, const QueryPtr& b) {
    if (!a || !b) return a == b;
    return *a == *b;
}

QueryPtr make_and(QueryPtr l, QueryPtr r) { return std::make_shared<const QueryNode>(QueryNode{And{std::move(l), std::move(r)}}); }
QueryPtr make_or(QueryPtr l, QueryPtr r) { return std::make_shared<const QueryNode>(QueryNode{Or{std::move(l), std::move(r)}}); }
QueryPtr make_not(QueryPtr c) { return std::make_shared<const QueryNode>(QueryNode{Not{std::move(c)}}); }
QueryPtr make_term(Field f, std::string token) {
    return std::make_shared<const QueryNode>(QueryNode{Clause{f, Term{std::move(token)}}});
}
QueryPtr make_phrase(Field f, std::vector<std::string> tokens) {
    return std::make_shared<const QueryNode>(QueryNode{Clause{f, Phrase{std::move(tokens)}}});
}

std::string field_name(const Field& f) { return f ? std::string(element_name(*f)) : std::string("any"); }

QueryPtr parse_query(std::string_view text) { return Parser(text).parse(); }

std::string canonical_text(const QueryNode& node) {
    std::string out;
    print(node, out);
    return out;
}

TokenizedRecord TokenizedRecord::from(const MetadataRecord& r) {
    TokenizedRecord t;
    t.statements.reserve(r.statements.size());
    for (const auto& s : r.statements) t.statements.push_back({s.element, tokenize(s.value)});
    return t;
}

std::size_t match_count(const Clause& clause, Element element, const TokenizedRecord& record) {
    std::size_t n = 0;
    for (const auto& s : record.statements)
        if (s.element == element) n += count_in(s.tokens, clause);
    return n;
}

bool clause_matches(const Clause& clause, const TokenizedRecord& record) {
    for (const auto& s : record.statements) {
        if (clause.field && s.element != *clause.field) continue;
        if (count_in(s.tokens, clause) > 0) return true;
    }
    return false;
}

bool eval_query(const QueryNode& node, const TokenizedRecord& record) {
    return std::visit(overloaded{
                          [&](const And& a) { return eval_query(*a.left, record) && eval_query(*a.right, record); },
                          [&](const Or& o) { return eval_query(*o.left, record) || eval_query(*o.right, record); },
                          [&](const Not& x) { return !eval_query(*x.child, record); },
                          [&](const Clause& c) { return clause_matches(c, record); },
                      },
                      node.node);
}

bool eval_query(const QueryNode& node, const MetadataRecord& record) {
    return eval_query(node, TokenizedRecord::from(record));
}

std::vector<const Clause*> positive_clauses(const QueryNode& node) {
    std::vector<const Clause*> out;
    collect_positive(node, true, out);
    return out;
}

}  // namespace bdl
