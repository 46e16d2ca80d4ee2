#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bdl/datestamp.hpp"
#include "bdl/dc_model.hpp"
#include "bdl/query.hpp"
#include "bdl/text.hpp"

namespace testing {

class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "bdl-test-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline bdl::Statement stmt(bdl::Element e, std::string value, std::optional<std::string> qualifier = std::nullopt,
                           std::optional<std::string> scheme = std::nullopt,
                           std::optional<std::string> lang = std::nullopt) {
    return bdl::Statement{e, std::move(qualifier), std::move(scheme), std::move(lang), std::move(value)};
}

inline bdl::Datestamp ds(const char* text) { return *bdl::Datestamp::parse(text); }

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::uint64_t below(std::uint64_t n) { return rng_() % n; }
    bool coin(unsigned percent = 50) { return below(100) < percent; }
    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[below(v.size())];
    }
    std::mt19937_64& engine() { return rng_; }

    std::string word() { return pick(words()); }

    // Non-blank, valid UTF-8, with markup-significant characters and
    // non-ASCII letters mixed in.
    std::string value() {
        static const std::vector<std::string> pieces = {
            "Ciência", "da", "Informação", "São Paulo", "x < y", "a & b", "\"quoted\"", "it's", "naïve",
            "Übersicht", "日本語", "emoji 😀", "tab\there", "line\nbreak", "100%", "#7", "]]>", "ação"};
        std::string v = pick(pieces);
        const auto extra = below(4);
        for (std::uint64_t i = 0; i < extra; ++i) v += " " + (coin() ? pick(pieces) : word());
        return v;
    }

    bdl::Statement statement() {
        static const std::vector<std::string> qualifiers = {"issued", "abstract", "alternative", "degree-level",
                                                            "citation", "report-number", "x1"};
        static const std::vector<std::string> schemes = {"W3CDTF", "URI", "LCSH", "ISO639-1", "DCMIType", "v2.1"};
        static const std::vector<std::string> langs = {"pt", "en", "pt-BR", "de", "ja"};
        bdl::Statement s;
        s.element = bdl::kAllElements[below(bdl::kElementCount)];
        if (coin(40)) s.qualifier = pick(qualifiers);
        if (coin(30)) s.scheme = pick(schemes);
        if (coin(30)) s.language = pick(langs);
        s.value = value();
        return s;
    }

    bdl::MetadataRecord record(std::size_t max_statements = 20) {
        bdl::MetadataRecord r;
        const auto n = 1 + below(max_statements);
        for (std::uint64_t i = 0; i < n; ++i) r.statements.push_back(statement());
        return r;
    }

    // Every element present at least once.
    bdl::MetadataRecord full_record() {
        bdl::MetadataRecord r = record(10);
        for (auto e : bdl::kAllElements) {
            auto s = statement();
            s.element = e;
            r.statements.insert(r.statements.begin() + static_cast<std::ptrdiff_t>(below(r.statements.size() + 1)), s);
        }
        return r;
    }

    // Searchable record over a small vocabulary so random queries hit.
    bdl::MetadataRecord vocab_record() {
        static const std::vector<bdl::Element> fields = {bdl::Element::title,   bdl::Element::creator,
                                                         bdl::Element::subject, bdl::Element::description,
                                                         bdl::Element::date,    bdl::Element::publisher};
        bdl::MetadataRecord r;
        const auto n = 1 + below(6);
        for (std::uint64_t i = 0; i < n; ++i) {
            std::string v;
            const auto len = 1 + below(5);
            for (std::uint64_t k = 0; k < len; ++k) v += (k ? " " : "") + word();
            r.statements.push_back(stmt(pick(fields), v));
        }
        return r;
    }

    // Random query text drawn from the grammar.
    std::string query(int depth = 0) {
        const auto roll = below(depth > 3 ? 3 : 10);
        if (roll < 3) return clause();
        switch (roll) {
            case 3: return "NOT " + query(depth + 1);
            case 4: return "(" + query(depth + 1) + ")";
            case 5: case 6: return query(depth + 1) + " AND " + query(depth + 1);
            case 7: return query(depth + 1) + " " + query(depth + 1);
            default: return query(depth + 1) + " OR " + query(depth + 1);
        }
    }

    std::string clause() {
        static const std::vector<std::string> fields = {"", "", "title:", "creator:", "subject:", "description:",
                                                        "any:", "date:", "TITLE:"};
        std::string c = pick(fields);
        if (coin(25)) {
            c += "\"" + word();
            if (coin()) c += " " + word();
            c += "\"";
        } else {
            c += word();
        }
        return c;
    }

private:
    static const std::vector<std::string>& words() {
        static const std::vector<std::string> w = {"xml",   "silva", "santos", "open",  "archives", "digital",
                                                   "library", "ciência", "informação", "2001", "metadata", "brasil"};
        return w;
    }

    std::mt19937_64 rng_;
};

// ------------------------------------------------------------ query oracle
// Independent of the evaluator: walks the AST and checks tokens directly.

inline bool oracle_clause(const bdl::Clause& c, const bdl::MetadataRecord& r) {
    for (const auto& s : r.statements) {
        if (c.field && *c.field != s.element) continue;
        const auto toks = bdl::tokenize(s.value);
        if (const auto* t = std::get_if<bdl::Term>(&c.match)) {
            if (std::find(toks.begin(), toks.end(), t->token) != toks.end()) return true;
        } else {
            const auto& p = std::get<bdl::Phrase>(c.match).tokens;
            if (p.empty() || p.size() > toks.size()) continue;
            for (std::size_t i = 0; i + p.size() <= toks.size(); ++i)
                if (std::equal(p.begin(), p.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) return true;
        }
    }
    return false;
}

inline bool oracle_eval(const bdl::QueryNode& n, const bdl::MetadataRecord& r) {
    return std::visit(
        [&](const auto& v) -> bool {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, bdl::And>) return oracle_eval(*v.left, r) && oracle_eval(*v.right, r);
            else if constexpr (std::is_same_v<T, bdl::Or>) return oracle_eval(*v.left, r) || oracle_eval(*v.right, r);
            else if constexpr (std::is_same_v<T, bdl::Not>) return !oracle_eval(*v.child, r);
            else return oracle_clause(v, r);
        },
        n.node);
}

}  // namespace testing
