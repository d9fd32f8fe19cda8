#ifndef FLOWMON_CONFIG_HPP
#define FLOWMON_CONFIG_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "flowmon/rate_engine.hpp"

namespace flowmon {

// `key = value` text configuration, `#` comments, later keys win.
class Config {
public:
    static Config parse(std::istream& in);
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    std::optional<std::string> get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const;
    double get_double_or(const std::string& key, double fallback) const;

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }

    // ack_avg_size_max, min_packets, min_duration_ms, workers.
    FilterParams filter_params() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace flowmon

#endif
