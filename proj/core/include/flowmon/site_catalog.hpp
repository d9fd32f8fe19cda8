#ifndef FLOWMON_SITE_CATALOG_HPP
#define FLOWMON_SITE_CATALOG_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace flowmon {

using SiteId = std::uint32_t;

class CatalogError : public std::runtime_error {
public:
    enum class Kind { Overlap, InvalidCidr };

    CatalogError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// IPv4 CIDR prefix. Prefixes longer than /24 round up to the enclosing /24
// when expanded into the catalog.
struct Cidr {
    std::uint32_t addr = 0;
    int prefix_len = 0;

    static Cidr parse(const std::string& text); // throws CatalogError::InvalidCidr
    std::string to_string() const;

    std::uint32_t network() const;   // addr masked to prefix_len
    std::uint32_t first_prefix24() const;
    std::uint32_t last_prefix24() const;
};

std::uint32_t parse_ipv4(const std::string& text); // throws CatalogError::InvalidCidr
std::string format_ipv4(std::uint32_t ip);

// Registry of named sites and the /24-prefix table mapping prefixes to
// site ids. Build is single-writer; after that lookups are read-only and
// safe from any number of threads. Any registration rebuilds the hash
// table from scratch.
class SiteCatalog {
public:
    struct Site {
        SiteId id;
        std::string name;
        std::vector<Cidr> cidrs;
    };

    // Expands each CIDR into /24 entries. Throws CatalogError on overlap
    // with an existing site or an invalid prefix.
    SiteId register_site(const std::string& name, const std::vector<Cidr>& cidrs);
    SiteId register_site(const std::string& name, const std::vector<std::string>& cidrs);

    // O(1) expected hash probe on ip & 0xFFFFFF00.
    std::optional<SiteId> lookup(std::uint32_t ip) const;

    // Linear scan over all /24 entries. Benchmark baseline and correctness
    // oracle; always agrees with lookup().
    std::optional<SiteId> sequential_lookup(std::uint32_t ip) const;

    const Site& site(SiteId id) const { return sites_.at(id); }
    const std::vector<Site>& sites() const { return sites_; }
    std::size_t site_count() const { return sites_.size(); }
    std::size_t entry_count() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    // All (prefix24, site) pairs, in insertion order.
    const std::vector<std::pair<std::uint32_t, SiteId>>& entries() const { return entries_; }

    // One site per line: `<name> <cidr>[,<cidr>...]`, `#` comments.
    static SiteCatalog load(std::istream& in);
    static SiteCatalog load_file(const std::string& path);
    void save(std::ostream& out) const;
    void save_file(const std::string& path) const;

private:
    void rebuild_table();

    std::vector<Site> sites_;
    std::vector<std::pair<std::uint32_t, SiteId>> entries_; // prefix24 -> site

    // Open-addressing table over 24-bit keys, sized to a power of two. Each
    // slot packs key << 32 | site so a probe costs one load.
    std::vector<std::uint64_t> slots_;
    std::uint32_t slot_mask_ = 0;

    static constexpr std::uint64_t kEmptySlot = ~0ull;
};

inline std::optional<SiteId> SiteCatalog::lookup(std::uint32_t ip) const {
    if (slots_.empty()) {
        return std::nullopt;
    }
    const std::uint32_t key = ip >> 8; // 24-bit /24 prefix
    std::uint32_t h = (key * 2654435761u) & slot_mask_;
    while (slots_[h] != kEmptySlot) {
        if (static_cast<std::uint32_t>(slots_[h] >> 32) == key) {
            return static_cast<SiteId>(slots_[h]);
        }
        h = (h + 1) & slot_mask_;
    }
    return std::nullopt;
}

inline std::optional<SiteId> SiteCatalog::sequential_lookup(std::uint32_t ip) const {
    const std::uint32_t prefix24 = ip & 0xFFFFFF00u;
    for (const auto& [entry_prefix, site] : entries_) {
        if (entry_prefix == prefix24) {
            return site;
        }
    }
    return std::nullopt;
}

} // namespace flowmon

#endif
