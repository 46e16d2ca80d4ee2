#include "bdl/union_index.hpp"

#include <algorithm>
#include <iterator>
#include <mutex>

namespace bdl {

namespace {

std::string posting_key(Element e, const std::string& token) {
    std::string key;
    key.reserve(token.size() + 1);
    key.push_back(static_cast<char>('a' + static_cast<int>(e)));
    key += token;
    return key;
}

using Ids = std::vector<std::uint32_t>;

Ids unite(const Ids& a, const Ids& b) {
    Ids out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

Ids intersect(const Ids& a, const Ids& b) {
    Ids out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

Ids subtract(const Ids& a, const Ids& b) {
    Ids out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

void insert_sorted(Ids& v, std::uint32_t id) {
    const auto it = std::lower_bound(v.begin(), v.end(), id);
    if (it == v.end() || *it != id) v.insert(it, id);
}

void erase_sorted(Ids& v, std::uint32_t id) {
    const auto it = std::lower_bound(v.begin(), v.end(), id);
    if (it != v.end() && *it == id) v.erase(it);
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

IndexedEntry make_entry(std::string provider_id, RecordHeader header, std::optional<MetadataRecord> record) {
    IndexedEntry e;
    e.provider_id = std::move(provider_id);
    e.header = std::move(header);
    if (e.header.deleted) record.reset();
    if (record) e.fingerprint = fingerprint(*record);
    e.record = std::move(record);
    return e;
}

std::uint64_t field_weight(Element e) {
    switch (e) {
        case Element::title: return 3;
        case Element::creator:
        case Element::subject: return 2;
        default: return 1;
    }
}

std::uint64_t score_record(const QueryNode& query, const TokenizedRecord& record) {
    std::uint64_t total = 0;
    for (const Clause* c : positive_clauses(query)) {
        if (c->field) {
            total += field_weight(*c->field) * match_count(*c, *c->field, record);
        } else {
            std::uint64_t best = 0;
            for (Element e : kAllElements) best = std::max(best, field_weight(e) * match_count(*c, e, record));
            total += best;
        }
    }
    return total;
}

UnionIndex::UnionIndex(std::filesystem::path dir, bool sync_writes, std::size_t compact_every)
    : dir_(std::move(dir)), compact_every_(compact_every) {
    if (!dir_.empty()) {
        log_ = std::make_unique<storage::OperationLog>(dir_ / "index", sync_writes);
        recover();
    }
}

UnionIndex::~UnionIndex() = default;

void UnionIndex::recover() {
    const storage::Recovered rec = log_->recover();
    if (rec.state) {
        for (const auto& j : rec.state->at("entries")) {
            WireRecord w = wire_from_json(j.at("wire"));
            apply_upsert(make_entry(j.at("provider").get<std::string>(), w.header, std::move(w.record)));
        }
    }
    for (const auto& op : rec.tail) {
        WireRecord w = wire_from_json(op.at("wire"));
        apply_upsert(make_entry(op.at("provider").get<std::string>(), w.header, std::move(w.record)));
    }
}

void UnionIndex::index_doc(DocId id) {
    const Slot& slot = slots_[id];
    if (slot.entry.header.deleted) return;
    for (const auto& st : slot.tokens.statements)
        for (const auto& tok : st.tokens) insert_sorted(postings_[posting_key(st.element, tok)], id);
    insert_sorted(live_, id);
}

void UnionIndex::unindex_doc(DocId id) {
    const Slot& slot = slots_[id];
    for (const auto& st : slot.tokens.statements) {
        for (const auto& tok : st.tokens) {
            const auto it = postings_.find(posting_key(st.element, tok));
            if (it == postings_.end()) continue;
            erase_sorted(it->second, id);
            if (it->second.empty()) postings_.erase(it);
        }
    }
    erase_sorted(live_, id);
}

void UnionIndex::apply_upsert(IndexedEntry entry) {
    const EntryKey key = entry.key();
    DocId id;
    if (const auto it = ids_.find(key); it != ids_.end()) {
        id = it->second;
        unindex_doc(id);
    } else {
        id = static_cast<DocId>(slots_.size());
        slots_.emplace_back();
        ids_.emplace(key, id);
    }
    Slot& slot = slots_[id];
    slot.tokens = entry.record ? TokenizedRecord::from(*entry.record) : TokenizedRecord{};
    slot.entry = std::move(entry);
    index_doc(id);
}

json UnionIndex::state_json() const {
    json entries = json::array();
    for (const auto& [key, id] : ids_) {
        const auto& e = slots_[id].entry;
        entries.push_back({{"provider", e.provider_id}, {"wire", to_json(WireRecord{e.header, e.record})}});
    }
    return {{"entries", std::move(entries)}};
}

void UnionIndex::log(json op) {
    if (!log_) return;
    log_->append(std::move(op));
}

void UnionIndex::upsert(const IndexedEntry& entry) {
    IndexedEntry e = make_entry(entry.provider_id, entry.header, entry.record);
    std::unique_lock lock(mutex_);
    log({{"op", "upsert"}, {"provider", e.provider_id}, {"wire", to_json(WireRecord{e.header, e.record})}});
    apply_upsert(std::move(e));
    if (log_ && compact_every_ > 0 && log_->ops_since_compaction() >= compact_every_) log_->compact(state_json());
}

void UnionIndex::mark_deleted(const std::string& provider_id, const std::string& identifier, Datestamp datestamp) {
    upsert(make_entry(provider_id, RecordHeader{identifier, datestamp, true}, std::nullopt));
}

std::optional<IndexedEntry> UnionIndex::lookup(const std::string& provider_id, const std::string& identifier) const {
    std::shared_lock lock(mutex_);
    const auto it = ids_.find(EntryKey{provider_id, identifier});
    if (it == ids_.end()) return std::nullopt;
    return slots_[it->second].entry;
}

const UnionIndex::Postings* UnionIndex::postings(Element e, const std::string& token) const {
    const auto it = postings_.find(posting_key(e, token));
    return it == postings_.end() ? nullptr : &it->second;
}

UnionIndex::Postings UnionIndex::clause_candidates(const Clause& clause) const {
    std::vector<Element> fields;
    if (clause.field) fields.push_back(*clause.field);
    else fields.assign(kAllElements.begin(), kAllElements.end());

    Postings out;
    for (Element e : fields) {
        if (const auto* t = std::get_if<Term>(&clause.match)) {
            if (const auto* p = postings(e, t->token)) out = unite(out, *p);
            continue;
        }
        const auto& tokens = std::get<Phrase>(clause.match).tokens;
        std::optional<Postings> acc;
        for (const auto& tok : tokens) {
            const auto* p = postings(e, tok);
            if (!p) {
                acc = Postings{};
                break;
            }
            acc = acc ? intersect(*acc, *p) : *p;
            if (acc->empty()) break;
        }
        if (!acc || acc->empty()) continue;
        // Every token is present in the field; adjacency still has to be checked.
        Postings verified;
        for (DocId id : *acc)
            if (match_count(clause, e, slots_[id].tokens) > 0) verified.push_back(id);
        out = unite(out, verified);
    }
    return out;
}

UnionIndex::Postings UnionIndex::evaluate(const QueryNode& node) const {
    return std::visit(overloaded{
                          [&](const And& a) { return intersect(evaluate(*a.left), evaluate(*a.right)); },
                          [&](const Or& o) { return unite(evaluate(*o.left), evaluate(*o.right)); },
                          [&](const Not& n) { return subtract(live_, evaluate(*n.child)); },
                          [&](const Clause& c) { return clause_candidates(c); },
                      },
                      node.node);
}

UnionResult UnionIndex::query(std::string_view query_text, std::size_t start, std::size_t max) const {
    const QueryPtr q = parse_query(query_text);
    return query(*q, start, max);
}

UnionResult UnionIndex::query(const QueryNode& q, std::size_t start, std::size_t max) const {
    std::shared_lock lock(mutex_);
    const Postings matched = evaluate(q);

    struct Scored {
        std::uint64_t score;
        DocId id;
    };
    std::vector<Scored> scored;
    scored.reserve(matched.size());
    for (DocId id : matched) scored.push_back({score_record(q, slots_[id].tokens), id});
    std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        const auto& ea = slots_[a.id].entry;
        const auto& eb = slots_[b.id].entry;
        if (ea.header.datestamp != eb.header.datestamp) return ea.header.datestamp > eb.header.datestamp;
        if (ea.header.identifier != eb.header.identifier) return ea.header.identifier < eb.header.identifier;
        return ea.provider_id < eb.provider_id;
    });

    UnionResult out;
    out.total = scored.size();
    const std::size_t lo = std::min(start, scored.size());
    const std::size_t hi = std::min(scored.size(), lo + std::max<std::size_t>(max, 1));
    for (std::size_t i = lo; i < hi; ++i) {
        const auto& e = slots_[scored[i].id].entry;
        out.hits.push_back({e.provider_id, e.header.identifier, scored[i].score, e.header.datestamp, *e.record});
    }
    return out;
}

void UnionIndex::rebuild() {
    std::unique_lock lock(mutex_);
    postings_.clear();
    live_.clear();
    for (DocId id = 0; id < slots_.size(); ++id) {
        auto& slot = slots_[id];
        slot.tokens = slot.entry.record ? TokenizedRecord::from(*slot.entry.record) : TokenizedRecord{};
        index_doc(id);
    }
}

std::vector<IndexedEntry> UnionIndex::entries() const {
    std::shared_lock lock(mutex_);
    std::vector<IndexedEntry> out;
    out.reserve(ids_.size());
    for (const auto& [key, id] : ids_) out.push_back(slots_[id].entry);
    return out;
}

std::vector<IndexedEntry> UnionIndex::entries_of(const std::string& provider_id) const {
    std::shared_lock lock(mutex_);
    std::vector<IndexedEntry> out;
    for (auto it = ids_.lower_bound(EntryKey{provider_id, ""}); it != ids_.end() && it->first.provider_id == provider_id; ++it)
        out.push_back(slots_[it->second].entry);
    return out;
}

std::size_t UnionIndex::size() const {
    std::shared_lock lock(mutex_);
    return ids_.size();
}

std::size_t UnionIndex::live_size() const {
    std::shared_lock lock(mutex_);
    return live_.size();
}

std::size_t UnionIndex::posting_count() const {
    std::shared_lock lock(mutex_);
    return postings_.size();
}

void UnionIndex::compact() {
    std::unique_lock lock(mutex_);
    if (log_) log_->compact(state_json());
}

json to_search_json(const UnionResult& r) {
    json records = json::array();
    for (const auto& h : r.hits) {
        records.push_back({{"identifier", h.identifier},
                           {"datestamp", h.datestamp.str()},
                           {"metadata", to_json(h.record)},
                           {"score", h.score},
                           {"origin", h.provider_id}});
    }
    return {{"provider", "union"}, {"total", r.total}, {"records", std::move(records)}};
}

}  // namespace bdl
