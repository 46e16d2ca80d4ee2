#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bdl/json_codec.hpp"

namespace bdl {

struct ProviderDescriptor {
    std::string provider_id;
    std::string base_url;
    bool harvest = false;
    bool search = false;
    std::int64_t poll_interval = 3600;  // seconds

    friend bool operator==(const ProviderDescriptor&, const ProviderDescriptor&) = default;
};

/// {"providerId", "baseUrl", "modes": ["harvest","search"], "pollInterval"}
json to_json(const ProviderDescriptor& d);
/// Throws std::invalid_argument on missing fields, unknown modes or an
/// empty mode set.
ProviderDescriptor descriptor_from_json(const json& j);

class RegistryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kUnionTargetId = "union";

/// Ordered provider list persisted as a JSON document. Mutations are
/// serialized and rewrite the file atomically; readers take an immutable
/// snapshot.
class ProviderRegistry {
public:
    using Snapshot = std::shared_ptr<const std::vector<ProviderDescriptor>>;

    /// In-memory when path is empty; loads the file when it exists.
    explicit ProviderRegistry(std::filesystem::path path = {});

    Snapshot snapshot() const;
    std::optional<ProviderDescriptor> find(const std::string& provider_id) const;

    void add(const ProviderDescriptor& d);     // RegistryError on duplicate or reserved id
    void remove(const std::string& provider_id);  // RegistryError on unknown id

    const std::filesystem::path& path() const { return path_; }

private:
    void persist(const std::vector<ProviderDescriptor>& list) const;

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    Snapshot current_;
};

json registry_to_json(const std::vector<ProviderDescriptor>& list);
std::vector<ProviderDescriptor> registry_from_json(const json& j);

}  // namespace bdl
