#include "bdl/corpus.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <random>
#include <string>
#include <string_view>

namespace bdl {

namespace {

constexpr std::array<std::string_view, 16> kAdjectives = {
    "Adaptive",  "Distributed", "Comparative", "Empirical", "Federated", "Incremental", "Scalable",  "Robust",
    "Semântica", "Integrated",  "Heterogeneous", "Automatic", "Estudo",  "Análise",     "Efficient", "Open"};
constexpr std::array<std::string_view, 16> kNouns = {
    "methods", "models",    "indexing",  "retrieval", "harvesting", "archives",   "catalogues", "repositories",
    "métodos", "coleções",  "metadados", "bibliotecas", "networks", "interfaces", "protocols",  "services"};
constexpr std::array<std::string_view, 12> kTopics = {
    "digital libraries", "electronic theses", "scholarly communication", "information retrieval",
    "acesso aberto",     "preservação digital", "eprint archives",       "union catalogues",
    "metadata quality",  "citation analysis",   "ciência da informação", "open archives"};
constexpr std::array<std::string_view, 16> kSurnames = {
    "Silva",  "Santos", "Oliveira", "Souza",  "Pereira", "Lima",  "Gonçalves", "Araújo",
    "Müller", "Smith",  "Nakamura", "García", "Costa",   "Ribeiro", "Martins", "Fernandes"};
constexpr std::array<std::string_view, 16> kGiven = {
    "Ana",   "João",  "Maria",   "José",  "Luís", "Carla", "Pedro", "Beatriz",
    "Helena", "Paulo", "Renata", "Tomás", "Akira", "Laura", "Inês",  "Rafael"};
constexpr std::array<std::string_view, 12> kSubjects = {
    "Bibliotecas digitais", "Metadata",       "Information systems", "Interoperability",
    "Dublin Core",          "Harvesting",     "Teses e dissertações", "Open access",
    "Z39.50",               "Search engines", "Ciência da computação", "Preservation"};
constexpr std::array<std::string_view, 20> kWords = {
    "this", "work", "presents", "a",      "study", "of",     "the",      "integration", "between",   "systems",
    "que",  "para", "avaliação", "results", "show", "improved", "coverage", "across",   "providers", "records"};
constexpr std::array<std::string_view, 6> kPublishers = {
    "Instituto Brasileiro de Informação em Ciência e Tecnologia", "Universidade de São Paulo",
    "Universidade Estadual de Campinas", "Editora Acadêmica", "Academic Press", "Sociedade Brasileira de Computação"};
constexpr std::array<std::string_view, 4> kDegreeLevels = {"Mestrado", "Doutorado", "Master", "Doctorate"};
constexpr std::array<std::string_view, 5> kConferences = {
    "Simpósio Brasileiro de Banco de Dados", "Joint Conference on Digital Libraries",
    "European Conference on Digital Libraries", "Seminário Nacional de Bibliotecas Universitárias",
    "International Conference on Asian Digital Libraries"};
constexpr std::array<std::string_view, 5> kJournals = {"Ciência da Informação", "D-Lib Magazine",
                                                       "Journal of Documentation", "Perspectivas em Ciência da Informação",
                                                       "Information Processing and Management"};

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t index) : engine_(splitmix(splitmix(seed) ^ index)) {}
    std::uint64_t below(std::uint64_t n) { return engine_() % n; }
    bool chance(unsigned percent) { return below(100) < percent; }
    template <typename Array>
    std::string pick(const Array& a) {
        return std::string(a[below(a.size())]);
    }

private:
    std::mt19937_64 engine_;
};

std::string two_digits(std::uint64_t v) { return (v < 10 ? "0" : "") + std::to_string(v); }

Statement st(Element e, std::string value, std::optional<std::string> qualifier = std::nullopt,
             std::optional<std::string> scheme = std::nullopt, std::optional<std::string> lang = std::nullopt) {
    return Statement{e, std::move(qualifier), std::move(scheme), std::move(lang), std::move(value)};
}

std::string sentence(Rng& rng, std::size_t words) {
    std::string s;
    for (std::size_t i = 0; i < words; ++i) {
        if (i) s += ' ';
        s += rng.pick(kWords);
    }
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s + ".";
}

DocumentKind pick_kind(Rng& rng, const KindMix& mix) {
    const unsigned total = std::accumulate(mix.begin(), mix.end(), 0u);
    if (total == 0) return static_cast<DocumentKind>(rng.below(5));
    auto r = rng.below(total);
    for (std::size_t k = 0; k < mix.size(); ++k) {
        if (r < mix[k]) return static_cast<DocumentKind>(k);
        r -= mix[k];
    }
    return DocumentKind::generic;
}

}  // namespace

CorpusItem generate_item(std::uint64_t seed, std::uint64_t index, const KindMix& mix) {
    Rng rng(seed, index);
    CorpusItem item;
    item.kind = pick_kind(rng, mix);
    auto& s = item.record.statements;

    const std::string lang = rng.chance(50) ? "pt-BR" : "en";
    s.push_back(st(Element::title,
                   rng.pick(kAdjectives) + " " + rng.pick(kNouns) + " for " + rng.pick(kTopics) + " " +
                       std::to_string(seed % 100000) + "-" + std::to_string(index),
                   std::nullopt, std::nullopt, lang));
    if (rng.chance(20)) s.push_back(st(Element::title, "Alternative " + rng.pick(kNouns), "alternative"));

    const auto creators = 1 + rng.below(3);
    for (std::uint64_t i = 0; i < creators; ++i) s.push_back(st(Element::creator, rng.pick(kSurnames) + ", " + rng.pick(kGiven)));
    if (rng.chance(30)) s.push_back(st(Element::contributor, rng.pick(kSurnames) + ", " + rng.pick(kGiven), "advisor"));

    const auto subjects = 1 + rng.below(3);
    for (std::uint64_t i = 0; i < subjects; ++i)
        s.push_back(st(Element::subject, rng.pick(kSubjects), std::nullopt, rng.chance(50) ? std::optional<std::string>("LCSH") : std::nullopt));

    s.push_back(st(Element::description, sentence(rng, 8 + rng.below(8)), "abstract", std::nullopt, lang));

    const auto year = 1995 + rng.below(30);
    const std::string issued = std::to_string(year) + "-" + two_digits(1 + rng.below(12)) + "-" + two_digits(1 + rng.below(28));
    s.push_back(st(Element::date, issued, "issued", "W3CDTF"));

    s.push_back(st(Element::identifier, "http://bdl.example.org/items/" + std::to_string(seed) + "/" + std::to_string(index),
                   std::nullopt, "URI"));
    s.push_back(st(Element::language, lang == "en" ? "en" : "pt", std::nullopt, "ISO639-1"));
    s.push_back(st(Element::format, "application/pdf", std::nullopt, "IMT"));
    s.push_back(st(Element::type, "Text", std::nullopt, "DCMIType"));
    if (rng.chance(40)) s.push_back(st(Element::rights, "Open access"));
    if (rng.chance(25)) s.push_back(st(Element::coverage, rng.chance(50) ? "Brasil" : "1990-2005", std::nullopt, std::nullopt, "pt"));
    if (rng.chance(25)) s.push_back(st(Element::source, "Digitized from the print edition"));

    switch (item.kind) {
        case DocumentKind::thesis:
            s.push_back(st(Element::description, rng.chance(50) ? "Ciência da Computação" : "Ciência da Informação", "degree-name"));
            s.push_back(st(Element::description, rng.pick(kDegreeLevels), "degree-level"));
            s.push_back(st(Element::description, rng.pick(kPublishers), "degree-grantor"));
            break;
        case DocumentKind::journal_article:
            s.push_back(st(Element::relation,
                           rng.pick(kJournals) + ", v. " + std::to_string(1 + rng.below(40)) + ", n. " + std::to_string(1 + rng.below(4)),
                           "citation"));
            break;
        case DocumentKind::conference_paper:
            s.push_back(st(Element::relation, rng.pick(kConferences), "conference-name"));
            s.push_back(st(Element::date, issued, "conference-date", "W3CDTF"));
            break;
        case DocumentKind::research_report:
            s.push_back(st(Element::publisher, rng.pick(kPublishers)));
            s.push_back(st(Element::identifier, "RT-" + std::to_string(year) + "-" + std::to_string(index % 1000), "report-number"));
            break;
        case DocumentKind::generic:
            if (rng.chance(50)) s.push_back(st(Element::publisher, rng.pick(kPublishers)));
            break;
    }
    return item;
}

std::vector<CorpusItem> generate_corpus(std::uint64_t seed, std::size_t n, const KindMix& mix, std::uint64_t first) {
    std::vector<CorpusItem> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(generate_item(seed, first + i, mix));
    return out;
}

MetadataRecord revise_record(const MetadataRecord& record, std::uint64_t revision) {
    MetadataRecord out;
    for (const auto& s : record.statements) {
        if (s.element == Element::subject && s.value.rfind("Revision ", 0) == 0) continue;
        out.statements.push_back(s);
    }
    out.statements.push_back(st(Element::subject, "Revision " + std::to_string(revision)));
    return out;
}

}  // namespace bdl
