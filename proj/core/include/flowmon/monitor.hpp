#ifndef FLOWMON_MONITOR_HPP
#define FLOWMON_MONITOR_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flowmon/flow_store.hpp"
#include "flowmon/rate_engine.hpp"
#include "flowmon/site_catalog.hpp"

namespace flowmon {

inline constexpr double kDefaultWarnThresholdBps = 1'000'000.0; // 1 Mbps
inline constexpr std::uint64_t kDefaultCycleSeconds = 3600;

// Per-site streak counters behind the two-consecutive-hour rule. Hours
// with zero qualifying flows freeze a streak rather than reset it.
class WarningState {
public:
    struct Streak {
        std::uint32_t consecutive_bad_hours = 0;
        std::uint64_t last_evaluated_window_end_ms = 0;
    };

    std::uint32_t streak(SiteId site) const {
        const auto it = streaks_.find(site);
        return it == streaks_.end() ? 0 : it->second.consecutive_bad_hours;
    }

    std::map<SiteId, Streak>& streaks() { return streaks_; }
    const std::map<SiteId, Streak>& streaks() const { return streaks_; }

private:
    std::map<SiteId, Streak> streaks_;
};

struct SiteWarning {
    SiteId site = 0;
    std::string site_name;
    double median_bps = 0;
    std::uint32_t consecutive_bad_hours = 0;

    bool operator==(const SiteWarning&) const = default;
};

// Applies the hourly rule: median below threshold extends the streak,
// a good hour resets it, and every site at streak >= 2 warns.
std::vector<SiteWarning> evaluate_warnings(const AnalysisResult& result,
                                           const SiteCatalog& catalog, WarningState& state,
                                           double threshold_bps = kDefaultWarnThresholdBps);

struct HourlyReport {
    std::uint64_t window_start_ms = 0;
    std::uint64_t window_end_ms = 0;
    AnalysisResult analysis;
    FilterParams params;
    std::vector<SiteWarning> warnings;

    // Report JSON: {window, sites: [{name, stats, hosts, warning, buckets}],
    // tallies, params, warnings}.
    std::string to_json(const SiteCatalog& catalog) const;

    // File name for the cycle covering window_start_ms, UTC: YYYYMMDDTHHZ.json
    std::string file_name() const;
};

struct MonitorOptions {
    double warn_threshold_bps = kDefaultWarnThresholdBps;
    std::uint64_t cycle_seconds = kDefaultCycleSeconds;
    FilterParams params;
    std::string report_dir; // empty: reports not written to disk
    LookupMode mode = LookupMode::Hash;
};

// One monitoring cycle over [window_start_ms, window_start_ms + cycle):
// snapshot, aggregate, evaluate warnings, persist the report, and mark the
// snapshot's records analyzed so a later flush can archive them.
HourlyReport run_cycle(FlowStore& store, const SiteCatalog& catalog, WarningState& state,
                       std::uint64_t window_start_ms, const MonitorOptions& options);

} // namespace flowmon

#endif
