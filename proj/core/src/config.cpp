#include "flowmon/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flowmon {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

} // namespace

Config Config::parse(std::istream& in) {
    Config config;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.resize(hash);
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) {
            config.values_[key] = value;
        }
    }
    return config;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file " + path);
    }
    return parse(in);
}

Config Config::parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
}

std::optional<std::string> Config::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

std::int64_t Config::get_int_or(const std::string& key, std::int64_t fallback) const {
    const auto v = get(key);
    return v ? std::stoll(*v) : fallback;
}

double Config::get_double_or(const std::string& key, double fallback) const {
    const auto v = get(key);
    return v ? std::stod(*v) : fallback;
}

FilterParams Config::filter_params() const {
    FilterParams p;
    p.ack_avg_size_max = static_cast<std::uint32_t>(get_int_or("ack_avg_size_max", p.ack_avg_size_max));
    p.min_packets = static_cast<std::uint32_t>(get_int_or("min_packets", p.min_packets));
    p.min_duration_ms = static_cast<std::uint32_t>(get_int_or("min_duration_ms", p.min_duration_ms));
    p.workers = static_cast<unsigned>(get_int_or("workers", p.workers));
    return p;
}

} // namespace flowmon
