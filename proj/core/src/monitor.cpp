#include "flowmon/monitor.hpp"

#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace flowmon {

using nlohmann::json;

std::vector<SiteWarning> evaluate_warnings(const AnalysisResult& result,
                                           const SiteCatalog& catalog, WarningState& state,
                                           double threshold_bps) {
    std::vector<SiteWarning> warnings;
    for (const auto& [site, sr] : result.sites) {
        if (sr.stats.flow_count == 0) {
            continue; // no qualifying flows: the streak is frozen
        }
        auto& streak = state.streaks()[site];
        if (sr.stats.median_bps < threshold_bps) {
            ++streak.consecutive_bad_hours;
        } else {
            streak.consecutive_bad_hours = 0;
        }
        streak.last_evaluated_window_end_ms = result.window_end_ms;
        if (streak.consecutive_bad_hours >= 2) {
            warnings.push_back(SiteWarning{site, catalog.site(site).name, sr.stats.median_bps,
                                           streak.consecutive_bad_hours});
        }
    }
    return warnings;
}

namespace {

json stats_to_json(const RateStats& s) {
    return json{{"max", s.max_bps},
                {"min", s.min_bps},
                {"avg", s.avg_bps},
                {"median", s.median_bps},
                {"flows", s.flow_count}};
}

json sparse_buckets(const RateHistogram& hist) {
    json out = json::array();
    for (std::size_t i = 0; i < hist.buckets().size(); ++i) {
        if (hist.buckets()[i] != 0) {
            out.push_back(json::array({i, hist.buckets()[i]}));
        }
    }
    return out;
}

} // namespace

std::string HourlyReport::to_json(const SiteCatalog& catalog) const {
    json doc;
    doc["window"] = {{"start_ms", window_start_ms}, {"end_ms", window_end_ms}};

    json sites = json::array();
    for (const auto& [site, sr] : analysis.sites) {
        bool warned = false;
        for (const SiteWarning& w : warnings) {
            warned = warned || w.site == site;
        }
        json hosts = json::array();
        for (const auto& [ip, hr] : sr.hosts) {
            hosts.push_back(json{{"ip", format_ipv4(ip)}, {"stats", stats_to_json(hr.stats)}});
        }
        sites.push_back(json{{"name", catalog.site(site).name},
                             {"stats", stats_to_json(sr.stats)},
                             {"hosts", std::move(hosts)},
                             {"warning", warned},
                             {"buckets", sparse_buckets(sr.histogram)}});
    }
    doc["sites"] = std::move(sites);

    doc["tallies"] = {{"forward", analysis.tallies.forward},
                      {"pure_ack", analysis.tallies.pure_ack},
                      {"administrative", analysis.tallies.administrative},
                      {"unmatched", analysis.tallies.unmatched}};
    doc["params"] = {{"ack_avg_size_max", params.ack_avg_size_max},
                     {"min_packets", params.min_packets},
                     {"min_duration_ms", params.min_duration_ms},
                     {"workers", params.workers}};

    json warns = json::array();
    for (const SiteWarning& w : warnings) {
        warns.push_back(json{{"site", w.site_name},
                             {"median_bps", w.median_bps},
                             {"consecutive_bad_hours", w.consecutive_bad_hours}});
    }
    doc["warnings"] = std::move(warns);
    return doc.dump(2);
}

std::string HourlyReport::file_name() const {
    const std::time_t secs = static_cast<std::time_t>(window_start_ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d%02d%02dT%02dZ.json", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour);
    return buf;
}

HourlyReport run_cycle(FlowStore& store, const SiteCatalog& catalog, WarningState& state,
                       std::uint64_t window_start_ms, const MonitorOptions& options) {
    const std::uint64_t window_end_ms = window_start_ms + options.cycle_seconds * 1000;
    const Snapshot snap = store.snapshot(window_start_ms, window_end_ms);

    HourlyReport report;
    report.window_start_ms = window_start_ms;
    report.window_end_ms = window_end_ms;
    report.params = options.params;
    report.analysis = aggregate(snap.records(), catalog, options.params, options.params.workers,
                                options.mode, window_start_ms, window_end_ms);
    report.warnings =
        evaluate_warnings(report.analysis, catalog, state, options.warn_threshold_bps);

    if (!options.report_dir.empty()) {
        std::filesystem::create_directories(options.report_dir);
        const auto path = std::filesystem::path(options.report_dir) / report.file_name();
        std::ofstream out(path);
        out << report.to_json(catalog) << '\n';
        if (!out) {
            throw std::runtime_error("cannot write report " + path.string());
        }
    }
    store.mark_analyzed(snap.base_size());
    return report;
}

} // namespace flowmon
