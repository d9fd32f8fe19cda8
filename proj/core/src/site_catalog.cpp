#include "flowmon/site_catalog.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

namespace flowmon {

std::uint32_t parse_ipv4(const std::string& text) {
    std::uint32_t ip = 0;
    int octets = 0;
    std::size_t pos = 0;
    while (octets < 4) {
        if (pos >= text.size() || !isdigit(static_cast<unsigned char>(text[pos]))) {
            throw CatalogError(CatalogError::Kind::InvalidCidr, "bad IPv4 address: " + text);
        }
        std::uint32_t value = 0;
        std::size_t digits = 0;
        while (pos < text.size() && isdigit(static_cast<unsigned char>(text[pos]))) {
            value = value * 10 + static_cast<std::uint32_t>(text[pos] - '0');
            ++pos;
            if (++digits > 3 || value > 255) {
                throw CatalogError(CatalogError::Kind::InvalidCidr, "bad IPv4 address: " + text);
            }
        }
        ip = ip << 8 | value;
        ++octets;
        if (octets < 4) {
            if (pos >= text.size() || text[pos] != '.') {
                throw CatalogError(CatalogError::Kind::InvalidCidr, "bad IPv4 address: " + text);
            }
            ++pos;
        }
    }
    if (pos != text.size()) {
        throw CatalogError(CatalogError::Kind::InvalidCidr, "bad IPv4 address: " + text);
    }
    return ip;
}

std::string format_ipv4(std::uint32_t ip) {
    std::ostringstream out;
    out << (ip >> 24) << '.' << (ip >> 16 & 0xFF) << '.' << (ip >> 8 & 0xFF) << '.' << (ip & 0xFF);
    return out.str();
}

Cidr Cidr::parse(const std::string& text) {
    const std::size_t slash = text.find('/');
    if (slash == std::string::npos || slash + 1 >= text.size()) {
        throw CatalogError(CatalogError::Kind::InvalidCidr, "missing prefix length: " + text);
    }
    Cidr c;
    c.addr = parse_ipv4(text.substr(0, slash));
    const std::string len = text.substr(slash + 1);
    if (len.size() > 2 || len.empty() ||
        !isdigit(static_cast<unsigned char>(len[0])) ||
        (len.size() == 2 && !isdigit(static_cast<unsigned char>(len[1])))) {
        throw CatalogError(CatalogError::Kind::InvalidCidr, "bad prefix length: " + text);
    }
    c.prefix_len = std::stoi(len);
    if (c.prefix_len < 1 || c.prefix_len > 32) {
        throw CatalogError(CatalogError::Kind::InvalidCidr, "prefix length out of range: " + text);
    }
    return c;
}

std::string Cidr::to_string() const {
    return format_ipv4(network()) + "/" + std::to_string(prefix_len);
}

std::uint32_t Cidr::network() const {
    const std::uint32_t mask =
        prefix_len == 0 ? 0 : ~std::uint32_t{0} << (32 - prefix_len);
    return addr & mask;
}

std::uint32_t Cidr::first_prefix24() const {
    return network() & 0xFFFFFF00u;
}

std::uint32_t Cidr::last_prefix24() const {
    if (prefix_len >= 24) {
        return first_prefix24(); // /25..32 round up to the enclosing /24
    }
    const std::uint32_t span = 1u << (24 - prefix_len);
    return first_prefix24() + (span - 1) * 256u;
}

SiteId SiteCatalog::register_site(const std::string& name, const std::vector<Cidr>& cidrs) {
    const SiteId id = static_cast<SiteId>(sites_.size());

    std::vector<std::uint32_t> produced;
    for (const Cidr& c : cidrs) {
        for (std::uint64_t p = c.first_prefix24(); p <= c.last_prefix24(); p += 256) {
            produced.push_back(static_cast<std::uint32_t>(p));
        }
    }
    for (std::uint32_t p : produced) {
        if (auto owner = sequential_lookup(p)) {
            throw CatalogError(CatalogError::Kind::Overlap,
                               format_ipv4(p) + "/24 already belongs to site '" +
                                   sites_[*owner].name + "'");
        }
    }
    // A single registration may also overlap itself (duplicate CIDRs).
    std::vector<std::uint32_t> sorted = produced;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end()) {
        throw CatalogError(CatalogError::Kind::Overlap,
                           format_ipv4(*dup) + "/24 produced twice by '" + name + "'");
    }

    sites_.push_back(Site{id, name, cidrs});
    for (std::uint32_t p : produced) {
        entries_.emplace_back(p, id);
    }
    rebuild_table();
    return id;
}

SiteId SiteCatalog::register_site(const std::string& name, const std::vector<std::string>& cidrs) {
    std::vector<Cidr> parsed;
    parsed.reserve(cidrs.size());
    for (const std::string& c : cidrs) {
        parsed.push_back(Cidr::parse(c));
    }
    return register_site(name, parsed);
}

void SiteCatalog::rebuild_table() {
    std::size_t size = 16;
    while (size < entries_.size() * 2) {
        size *= 2;
    }
    slots_.assign(size, kEmptySlot);
    slot_mask_ = static_cast<std::uint32_t>(size - 1);

    for (const auto& [prefix24, site] : entries_) {
        const std::uint32_t key = prefix24 >> 8;
        std::uint32_t h = (key * 2654435761u) & slot_mask_;
        while (slots_[h] != kEmptySlot) {
            h = (h + 1) & slot_mask_;
        }
        slots_[h] = static_cast<std::uint64_t>(key) << 32 | site;
    }
}

SiteCatalog SiteCatalog::load(std::istream& in) {
    SiteCatalog catalog;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        std::istringstream fields(line);
        std::string name, cidr_list;
        if (!(fields >> name >> cidr_list)) {
            continue; // blank or comment-only line
        }
        std::vector<std::string> cidrs;
        std::istringstream items(cidr_list);
        std::string item;
        while (std::getline(items, item, ',')) {
            if (!item.empty()) {
                cidrs.push_back(item);
            }
        }
        catalog.register_site(name, cidrs);
    }
    return catalog;
}

SiteCatalog SiteCatalog::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw CatalogError(CatalogError::Kind::InvalidCidr, "cannot open catalog file " + path);
    }
    return load(in);
}

void SiteCatalog::save(std::ostream& out) const {
    for (const Site& s : sites_) {
        out << s.name << ' ';
        for (std::size_t i = 0; i < s.cidrs.size(); ++i) {
            if (i) {
                out << ',';
            }
            out << s.cidrs[i].to_string();
        }
        out << '\n';
    }
}

void SiteCatalog::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw CatalogError(CatalogError::Kind::InvalidCidr, "cannot write catalog file " + path);
    }
    save(out);
}

} // namespace flowmon
