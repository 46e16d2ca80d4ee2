#include "bdl/registry.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "bdl/storage.hpp"

namespace bdl {

json to_json(const ProviderDescriptor& d) {
    json modes = json::array();
    if (d.harvest) modes.push_back("harvest");
    if (d.search) modes.push_back("search");
    return {{"providerId", d.provider_id}, {"baseUrl", d.base_url}, {"modes", modes}, {"pollInterval", d.poll_interval}};
}

ProviderDescriptor descriptor_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("provider descriptor must be an object");
    ProviderDescriptor d;
    const auto id = j.find("providerId");
    if (id == j.end() || !id->is_string() || id->get<std::string>().empty())
        throw std::invalid_argument("providerId is required");
    d.provider_id = id->get<std::string>();
    d.base_url = j.value("baseUrl", std::string());
    d.poll_interval = j.value("pollInterval", std::int64_t{3600});
    if (d.poll_interval < 1) throw std::invalid_argument("pollInterval must be positive");
    const auto modes = j.find("modes");
    if (modes == j.end() || !modes->is_array()) throw std::invalid_argument("modes must be a list");
    for (const auto& m : *modes) {
        const std::string s = m.is_string() ? m.get<std::string>() : std::string();
        if (s == "harvest") d.harvest = true;
        else if (s == "search") d.search = true;
        else throw std::invalid_argument("unknown mode '" + s + "'");
    }
    if (!d.harvest && !d.search) throw std::invalid_argument("modes must not be empty");
    return d;
}

json registry_to_json(const std::vector<ProviderDescriptor>& list) {
    json arr = json::array();
    for (const auto& d : list) arr.push_back(to_json(d));
    return {{"providers", arr}};
}

std::vector<ProviderDescriptor> registry_from_json(const json& j) {
    std::vector<ProviderDescriptor> out;
    for (const auto& d : j.at("providers")) {
        auto desc = descriptor_from_json(d);
        for (const auto& existing : out)
            if (existing.provider_id == desc.provider_id)
                throw std::invalid_argument("duplicate providerId '" + desc.provider_id + "'");
        out.push_back(std::move(desc));
    }
    return out;
}

ProviderRegistry::ProviderRegistry(std::filesystem::path path) : path_(std::move(path)) {
    auto list = std::make_shared<std::vector<ProviderDescriptor>>();
    if (!path_.empty() && std::filesystem::exists(path_)) {
        std::ifstream in(path_);
        std::stringstream ss;
        ss << in.rdbuf();
        *list = registry_from_json(json::parse(ss.str()));
    }
    current_ = std::move(list);
}

ProviderRegistry::Snapshot ProviderRegistry::snapshot() const {
    std::lock_guard lock(mutex_);
    return current_;
}

std::optional<ProviderDescriptor> ProviderRegistry::find(const std::string& provider_id) const {
    const auto snap = snapshot();
    for (const auto& d : *snap)
        if (d.provider_id == provider_id) return d;
    return std::nullopt;
}

void ProviderRegistry::persist(const std::vector<ProviderDescriptor>& list) const {
    if (path_.empty()) return;
    storage::write_file_atomic(path_, registry_to_json(list).dump(2) + "\n");
}

void ProviderRegistry::add(const ProviderDescriptor& d) {
    if (d.provider_id == kUnionTargetId) throw RegistryError("provider id 'union' is reserved");
    if (!d.harvest && !d.search) throw RegistryError("provider must have at least one mode");
    std::lock_guard lock(mutex_);
    for (const auto& existing : *current_)
        if (existing.provider_id == d.provider_id) throw RegistryError("duplicate provider id '" + d.provider_id + "'");
    auto next = std::make_shared<std::vector<ProviderDescriptor>>(*current_);
    next->push_back(d);
    persist(*next);
    current_ = std::move(next);
}

void ProviderRegistry::remove(const std::string& provider_id) {
    std::lock_guard lock(mutex_);
    auto next = std::make_shared<std::vector<ProviderDescriptor>>(*current_);
    const auto it = std::find_if(next->begin(), next->end(), [&](const auto& d) { return d.provider_id == provider_id; });
    if (it == next->end()) throw RegistryError("unknown provider id '" + provider_id + "'");
    next->erase(it);
    persist(*next);
    current_ = std::move(next);
}

}  // namespace bdl
