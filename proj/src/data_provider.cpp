#include "bdl/data_provider.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include "bdl/query.hpp"

namespace bdl {

namespace {

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) {
        if (!out.empty()) out += "; ";
        out += s;
    }
    return out;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void RepositoryConfig::check() const {
    if (repository_id.empty()) throw std::invalid_argument("repositoryId must be non-empty");
    if (repository_id.find(':') != std::string::npos) throw std::invalid_argument("repositoryId must be colon-free");
    if (page_size < 1) throw std::invalid_argument("pageSize must be >= 1");
}

RepositoryConfig repository_config_from_json(const json& j) {
    RepositoryConfig c;
    c.repository_id = j.at("repositoryId").get<std::string>();
    c.display_name = j.value("displayName", c.repository_id);
    c.admin_contact = j.value("adminContact", std::string());
    c.listen_address = j.value("listenAddress", c.listen_address);
    c.page_size = j.value("pageSize", c.page_size);
    c.data_dir = j.value("dataDir", std::string());
    c.max_document_bytes = j.value("maxDocumentBytes", c.max_document_bytes);
    c.sync_writes = j.value("syncWrites", c.sync_writes);
    c.compact_every = j.value("compactEvery", c.compact_every);
    c.check();
    return c;
}

json to_json(const RepositoryConfig& c) {
    return {{"repositoryId", c.repository_id}, {"displayName", c.display_name},   {"adminContact", c.admin_contact},
            {"listenAddress", c.listen_address}, {"pageSize", c.page_size},       {"dataDir", c.data_dir.string()},
            {"maxDocumentBytes", c.max_document_bytes}, {"syncWrites", c.sync_writes}, {"compactEvery", c.compact_every}};
}

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error("record rejected: " + join(violations)), violations_(std::move(violations)) {}

Repository::Repository(RepositoryConfig config) : config_(std::move(config)) {
    config_.check();
    if (!config_.data_dir.empty()) recover();
}

Repository::~Repository() = default;

std::string Repository::identifier_for(std::uint64_t local_id) const {
    return "oai:" + config_.repository_id + ":" + std::to_string(local_id);
}

std::optional<std::uint64_t> Repository::local_id_of(std::string_view identifier) const {
    const std::string prefix = "oai:" + config_.repository_id + ":";
    if (identifier.substr(0, prefix.size()) != prefix) return std::nullopt;
    const std::string_view rest = identifier.substr(prefix.size());
    if (rest.empty() || rest.size() > 19 || !std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    if (rest[0] == '0') return std::nullopt;
    return std::stoull(std::string(rest));
}

void Repository::recover() {
    log_ = std::make_unique<storage::OperationLog>(config_.data_dir, config_.sync_writes);
    const storage::Recovered rec = log_->recover();
    if (rec.state) {
        next_id_ = rec.state->at("nextLocalId").get<std::uint64_t>();
        for (const auto& j : rec.state->at("items")) {
            StoredItem item;
            item.local_id = j.at("localId").get<std::uint64_t>();
            item.kind = kind_from_name(j.at("kind").get<std::string>()).value_or(DocumentKind::generic);
            item.wire = wire_from_json(j.at("wire"));
            item.media_type = j.value("mediaType", std::string());
            if (j.value("hasDocument", false)) item.document = read_file(config_.data_dir / "documents" / std::to_string(item.local_id));
            if (item.wire.record) tokens_[item.local_id] = TokenizedRecord::from(*item.wire.record);
            items_[item.local_id] = std::move(item);
        }
    }
    for (const auto& op : rec.tail) apply_logged(op);
}

void Repository::apply_logged(const json& op) {
    const std::string kind = op.at("op").get<std::string>();
    const auto local_id = op.at("localId").get<std::uint64_t>();
    const auto ds = Datestamp::parse(op.at("datestamp").get<std::string>()).value();
    if (kind == "submit") {
        StoredItem item;
        item.local_id = local_id;
        item.kind = kind_from_name(op.at("kind").get<std::string>()).value_or(DocumentKind::generic);
        item.wire.header = {identifier_for(local_id), ds, false};
        item.wire.record = record_from_json(op.at("metadata"));
        item.media_type = op.value("mediaType", std::string());
        if (op.value("hasDocument", false)) {
            const auto path = config_.data_dir / "documents" / std::to_string(local_id);
            if (std::filesystem::exists(path)) item.document = read_file(path);
        }
        tokens_[local_id] = TokenizedRecord::from(*item.wire.record);
        items_[local_id] = std::move(item);
        next_id_ = std::max(next_id_, local_id + 1);
    } else if (kind == "update") {
        auto& item = items_.at(local_id);
        item.wire.header.datestamp = ds;
        item.wire.record = record_from_json(op.at("metadata"));
        tokens_[local_id] = TokenizedRecord::from(*item.wire.record);
    } else if (kind == "delete") {
        auto& item = items_.at(local_id);
        item.wire.header.datestamp = ds;
        item.wire.header.deleted = true;
        item.wire.record.reset();
        item.document.reset();
        tokens_.erase(local_id);
    } else {
        throw std::runtime_error("unknown logged operation '" + kind + "'");
    }
}

json Repository::state_json() const {
    json items = json::array();
    for (const auto& [id, item] : items_) {
        items.push_back({{"localId", id},
                         {"kind", kind_name(item.kind)},
                         {"wire", to_json(item.wire)},
                         {"mediaType", item.media_type},
                         {"hasDocument", item.document.has_value()}});
    }
    return {{"nextLocalId", next_id_}, {"items", std::move(items)}};
}

void Repository::log(json op) {
    if (!log_) return;
    try {
        log_->append(std::move(op));
    } catch (const std::exception& e) {
        throw RepositoryError(RepositoryError::Kind::storage, e.what());
    }
}

void Repository::maybe_compact() {
    if (!log_ || config_.compact_every == 0 || log_->ops_since_compaction() < config_.compact_every) return;
    try {
        log_->compact(state_json());
    } catch (const std::exception& e) {
        throw RepositoryError(RepositoryError::Kind::storage, e.what());
    }
}

void Repository::store_document(std::uint64_t local_id, const std::string& bytes) {
    if (!log_) return;
    try {
        storage::write_file_atomic(config_.data_dir / "documents" / std::to_string(local_id), bytes);
    } catch (const std::exception& e) {
        throw RepositoryError(RepositoryError::Kind::storage, e.what());
    }
}

void Repository::drop_document(std::uint64_t local_id) {
    if (!log_) return;
    std::error_code ec;
    std::filesystem::remove(config_.data_dir / "documents" / std::to_string(local_id), ec);
}

StoredItem& Repository::existing(const std::string& identifier) {
    const auto id = local_id_of(identifier);
    const auto it = id ? items_.find(*id) : items_.end();
    if (it == items_.end()) throw RepositoryError(RepositoryError::Kind::id_does_not_exist, "no item '" + identifier + "'");
    return it->second;
}

std::string Repository::submit(const MetadataRecord& record, DocumentKind kind, std::optional<std::string> document,
                               std::string media_type, Datestamp now) {
    if (auto v = validate_record(record, profile_for(kind)); !v.empty()) throw ValidationError(std::move(v));
    if (document && document->size() > config_.max_document_bytes)
        throw RepositoryError(RepositoryError::Kind::document_too_large,
                              "document exceeds " + std::to_string(config_.max_document_bytes) + " bytes");
    std::unique_lock lock(mutex_);
    const std::uint64_t id = next_id_;
    if (document) store_document(id, *document);
    log({{"op", "submit"},
         {"localId", id},
         {"kind", kind_name(kind)},
         {"datestamp", now.str()},
         {"metadata", to_json(record)},
         {"mediaType", media_type},
         {"hasDocument", document.has_value()}});
    StoredItem item;
    item.local_id = id;
    item.kind = kind;
    item.wire.header = {identifier_for(id), now, false};
    item.wire.record = record;
    item.document = std::move(document);
    item.media_type = std::move(media_type);
    tokens_[id] = TokenizedRecord::from(record);
    items_[id] = std::move(item);
    ++next_id_;
    maybe_compact();
    return identifier_for(id);
}

Datestamp Repository::update(const std::string& identifier, const MetadataRecord& record, Datestamp now) {
    std::unique_lock lock(mutex_);
    StoredItem& item = existing(identifier);
    if (item.wire.header.deleted)
        throw RepositoryError(RepositoryError::Kind::already_deleted, "cannot update deleted item '" + identifier + "'");
    if (now < item.wire.header.datestamp)
        throw RepositoryError(RepositoryError::Kind::clock_regression,
                              "update at " + now.str() + " precedes current datestamp " + item.wire.header.datestamp.str());
    if (auto v = validate_record(record, profile_for(item.kind)); !v.empty()) throw ValidationError(std::move(v));
    log({{"op", "update"}, {"localId", item.local_id}, {"datestamp", now.str()}, {"metadata", to_json(record)}});
    item.wire.header.datestamp = now;
    item.wire.record = record;
    tokens_[item.local_id] = TokenizedRecord::from(record);
    maybe_compact();
    return now;
}

Datestamp Repository::remove(const std::string& identifier, Datestamp now) {
    std::unique_lock lock(mutex_);
    StoredItem& item = existing(identifier);
    if (item.wire.header.deleted)
        throw RepositoryError(RepositoryError::Kind::already_deleted, "item '" + identifier + "' is already deleted");
    if (now < item.wire.header.datestamp)
        throw RepositoryError(RepositoryError::Kind::clock_regression,
                              "delete at " + now.str() + " precedes current datestamp " + item.wire.header.datestamp.str());
    log({{"op", "delete"}, {"localId", item.local_id}, {"datestamp", now.str()}});
    item.wire.header.datestamp = now;
    item.wire.header.deleted = true;
    item.wire.record.reset();
    item.document.reset();
    tokens_.erase(item.local_id);
    drop_document(item.local_id);
    maybe_compact();
    return now;
}

LocalSearchResult Repository::search_local(std::string_view query_text, std::size_t start, std::size_t max) const {
    const QueryPtr q = parse_query(query_text);
    std::shared_lock lock(mutex_);
    std::vector<const StoredItem*> matched;
    for (const auto& [id, tokens] : tokens_)
        if (eval_query(*q, tokens)) matched.push_back(&items_.at(id));
    std::sort(matched.begin(), matched.end(), [](const StoredItem* a, const StoredItem* b) {
        if (a->wire.header.datestamp != b->wire.header.datestamp) return a->wire.header.datestamp > b->wire.header.datestamp;
        return a->wire.header.identifier < b->wire.header.identifier;
    });
    LocalSearchResult out;
    out.total = matched.size();
    const std::size_t lo = std::min(start, matched.size());
    const std::size_t hi = std::min(matched.size(), lo + std::max<std::size_t>(max, 1));
    for (std::size_t i = lo; i < hi; ++i)
        out.hits.push_back({matched[i]->wire.header.identifier, matched[i]->wire.header.datestamp, *matched[i]->wire.record});
    return out;
}

std::string Repository::handle_harvest(const HarvestParams& params, Datestamp now) const {
    std::shared_lock lock(mutex_);
    StoreSnapshot snap;
    snap.items.reserve(items_.size());
    for (const auto& [id, item] : items_) snap.items.push_back(&item.wire);
    const RepositoryInfo info{config_.display_name, config_.repository_id, config_.admin_contact, config_.page_size};
    return handle_request(snap, info, params, now);
}

std::optional<StoredItem> Repository::find(const std::string& identifier) const {
    const auto id = local_id_of(identifier);
    if (!id) return std::nullopt;
    return find(*id);
}

std::optional<StoredItem> Repository::find(std::uint64_t local_id) const {
    std::shared_lock lock(mutex_);
    const auto it = items_.find(local_id);
    if (it == items_.end()) return std::nullopt;
    return it->second;
}

std::vector<StoredItem> Repository::items() const {
    std::shared_lock lock(mutex_);
    std::vector<StoredItem> out;
    out.reserve(items_.size());
    for (const auto& [id, item] : items_) out.push_back(item);
    return out;
}

std::size_t Repository::size() const {
    std::shared_lock lock(mutex_);
    return items_.size();
}

std::uint64_t Repository::next_local_id() const {
    std::shared_lock lock(mutex_);
    return next_id_;
}

void Repository::compact() {
    std::unique_lock lock(mutex_);
    if (log_) log_->compact(state_json());
}

json to_search_json(const std::string& provider_id, const LocalSearchResult& r) {
    json records = json::array();
    for (const auto& h : r.hits)
        records.push_back({{"identifier", h.identifier}, {"datestamp", h.datestamp.str()}, {"metadata", to_json(h.record)}});
    return {{"provider", provider_id}, {"total", r.total}, {"records", std::move(records)}};
}

}  // namespace bdl
