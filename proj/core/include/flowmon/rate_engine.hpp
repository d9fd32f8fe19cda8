#ifndef FLOWMON_RATE_ENGINE_HPP
#define FLOWMON_RATE_ENGINE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowmon/netflow.hpp"
#include "flowmon/site_catalog.hpp"

namespace flowmon {

inline constexpr std::size_t kBucketCount = 10001;
inline constexpr double kBucketWidthBps = 10'000.0;   // 10 kbps
inline constexpr double kRateCapBps = 100'000'000.0;  // 100 Mbps, overflow bucket

struct FilterParams {
    std::uint32_t ack_avg_size_max = 96; // bytes; at or below this is a pure ACK
    std::uint32_t min_packets = 20;      // below this is administrative chatter
    std::uint32_t min_duration_ms = 100; // likewise
    unsigned workers = 1;

    bool operator==(const FilterParams&) const = default;
};

enum class FlowClass { Forward, PureAck, Administrative, Unmatched };

enum class LookupMode { Hash, Sequential };

class RateError : public std::runtime_error {
public:
    enum class Kind { ZeroDuration, EmptyHistogram };

    RateError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// 10 kbps bucket frequencies plus exact accumulators. The rate sum is kept
// as an integer count of micro-bps so merges commute exactly: aggregation
// results do not depend on partitioning or worker count.
class RateHistogram {
public:
    void add(double rate_bps, unsigned __int128 rate_ubps);
    void merge(const RateHistogram& other);

    std::uint64_t count() const { return count_; }
    std::uint64_t bucket(std::size_t n) const {
        return buckets_.empty() ? 0 : buckets_[n];
    }
    const std::vector<std::uint32_t>& buckets() const { return buckets_; }
    double min_bps() const { return min_bps_; }
    double max_bps() const { return max_bps_; }
    double sum_bps() const { return static_cast<double>(sum_ubps_) / 1e6; }

    double median_bps() const; // throws RateError::EmptyHistogram when count == 0

    bool operator==(const RateHistogram& other) const;

private:
    std::vector<std::uint32_t> buckets_; // sized lazily on first add
    std::uint64_t count_ = 0;
    unsigned __int128 sum_ubps_ = 0;
    double min_bps_ = 0;
    double max_bps_ = 0;
};

struct RateStats {
    double max_bps = 0;
    double min_bps = 0;
    double avg_bps = 0;
    double median_bps = 0; // bucket-midpoint median, clamped into [min, max]
    std::uint64_t flow_count = 0;

    bool operator==(const RateStats&) const = default;
};

struct HostResult {
    RateStats stats;
    RateHistogram histogram;

    bool operator==(const HostResult&) const = default;
};

struct SiteResult {
    RateStats stats;
    RateHistogram histogram; // element-wise sum of host histograms
    std::map<std::uint32_t, HostResult> hosts;

    bool operator==(const SiteResult&) const = default;
};

struct ClassTallies {
    std::uint64_t forward = 0;
    std::uint64_t pure_ack = 0;
    std::uint64_t administrative = 0;
    std::uint64_t unmatched = 0;

    std::uint64_t total() const { return forward + pure_ack + administrative + unmatched; }

    bool operator==(const ClassTallies&) const = default;
};

struct AnalysisResult {
    std::uint64_t window_start_ms = 0;
    std::uint64_t window_end_ms = 0;
    std::map<SiteId, SiteResult> sites;
    ClassTallies tallies;

    bool operator==(const AnalysisResult&) const = default;
};

// Fixed evaluation order: pure-ACK test, administrative test, attribution.
FlowClass classify(const FlowRecord& record, const FilterParams& params,
                   const SiteCatalog& catalog,
                   LookupMode mode = LookupMode::Hash);

// 8 * d_octets / (duration_ms / 1000), bits per second.
double flow_rate(const FlowRecord& record); // throws RateError::ZeroDuration

// The same rate as an exact integer count of micro-bps.
unsigned __int128 flow_rate_ubps(const FlowRecord& record);

// min(floor(rate / 10 kbps), 10000).
std::size_t bucket_index(double rate_bps);

// Site and matched host for a record: source endpoint wins when both match.
std::optional<std::pair<SiteId, std::uint32_t>> attribute(const FlowRecord& record,
                                                          const SiteCatalog& catalog,
                                                          LookupMode mode = LookupMode::Hash);

// Reduces a snapshot view to per-site and per-host statistics. Workers get
// contiguous slices and private partial state; partials merge through a
// commutative monoid, so the result is identical for any worker count.
AnalysisResult aggregate(std::span<const FlowRecord> view, const SiteCatalog& catalog,
                         const FilterParams& params, unsigned workers,
                         LookupMode mode = LookupMode::Hash,
                         std::uint64_t window_start_ms = 0, std::uint64_t window_end_ms = 0);

// Test hook: the same reduction over caller-chosen slice boundaries.
AnalysisResult aggregate_partitioned(std::span<const FlowRecord> view, const SiteCatalog& catalog,
                                     const FilterParams& params,
                                     const std::vector<std::size_t>& boundaries,
                                     LookupMode mode = LookupMode::Hash,
                                     std::uint64_t window_start_ms = 0,
                                     std::uint64_t window_end_ms = 0);

} // namespace flowmon

#endif
