// flowmon: NetFlow v5 collection, per-site transfer-rate analysis, and the
// supporting generate/replay/bench tooling, driven by one config file plus
// flag overrides.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowmon/collector.hpp"
#include "flowmon/config.hpp"
#include "flowmon/flow_store.hpp"
#include "flowmon/monitor.hpp"
#include "flowmon/rate_engine.hpp"
#include "flowmon/site_catalog.hpp"
#include "flowmon/toolkit.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitWarnings = 3;

std::atomic<bool> g_stop{false};

void handle_signal(int) { g_stop.store(true); }

std::pair<std::string, std::uint16_t> split_addr(const std::string& addr,
                                                 std::uint16_t default_port) {
    const auto colon = addr.find(':');
    if (colon == std::string::npos) {
        return {addr, default_port};
    }
    return {addr.substr(0, colon),
            static_cast<std::uint16_t>(std::stoi(addr.substr(colon + 1)))};
}

flowmon::Config load_config(const std::string& path) {
    return path.empty() ? flowmon::Config{} : flowmon::Config::parse_file(path);
}

void print_stats_row(const std::string& label, const flowmon::RateStats& s) {
    std::printf("  %-18s flows=%-8llu max=%.0f min=%.0f avg=%.0f median=%.0f (bps)\n",
                label.c_str(), static_cast<unsigned long long>(s.flow_count), s.max_bps, s.min_bps,
                s.avg_bps, s.median_bps);
}

int cmd_collect(const std::string& config_path, std::string listen, std::int64_t rcvbuf,
                std::int64_t capacity, const std::string& catalog_path,
                const std::string& report_dir, const std::string& metrics_file,
                const std::string& archive_dir) {
    const auto config = load_config(config_path);

    flowmon::CollectorOptions opts;
    if (listen.empty()) {
        listen = config.get_or("listen", "0.0.0.0:2055");
    }
    std::tie(opts.bind_address, opts.port) = split_addr(listen, 2055);
    opts.rcvbuf_bytes = static_cast<int>(rcvbuf > 0 ? rcvbuf : config.get_int_or("rcvbuf", opts.rcvbuf_bytes));

    const std::uint64_t cap = capacity > 0
                                  ? static_cast<std::uint64_t>(capacity)
                                  : static_cast<std::uint64_t>(config.get_int_or(
                                        "store_capacity", flowmon::kDefaultStoreCapacity));
    flowmon::FlowStore store(cap);

    flowmon::Collector collector(store, opts);
    collector.start();
    std::fprintf(stderr, "listening on %s:%u (rcvbuf %d, capacity %llu)\n",
                 opts.bind_address.c_str(), opts.port, opts.rcvbuf_bytes,
                 static_cast<unsigned long long>(cap));

    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    // Optional in-process monitor loop over completed windows.
    const bool monitoring = !catalog_path.empty();
    flowmon::SiteCatalog catalog;
    flowmon::WarningState state;
    flowmon::MonitorOptions mon_opts;
    std::uint64_t next_window_ms = 0;
    if (monitoring) {
        catalog = flowmon::SiteCatalog::load_file(catalog_path);
        mon_opts.params = config.filter_params();
        mon_opts.warn_threshold_bps =
            config.get_double_or("warn_threshold_bps", flowmon::kDefaultWarnThresholdBps);
        mon_opts.cycle_seconds = static_cast<std::uint64_t>(
            config.get_int_or("cycle_seconds", flowmon::kDefaultCycleSeconds));
        mon_opts.report_dir = report_dir.empty() ? config.get_or("report_dir", "reports") : report_dir;
        const auto now_ms = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count());
        next_window_ms = now_ms / (mon_opts.cycle_seconds * 1000) * (mon_opts.cycle_seconds * 1000);
    }

    std::uint64_t archive_index = 0;
    while (!g_stop.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        if (!metrics_file.empty()) {
            static int tick = 0;
            if (++tick % 25 == 0) {
                collector.metrics().write_snapshot(metrics_file);
            }
        }
        if (monitoring) {
            const auto now_ms = static_cast<std::uint64_t>(
                std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count());
            if (now_ms >= next_window_ms + mon_opts.cycle_seconds * 1000) {
                const auto report =
                    flowmon::run_cycle(store, catalog, state, next_window_ms, mon_opts);
                std::fprintf(stderr, "cycle %s: %llu forward flows, %zu warnings\n",
                             report.file_name().c_str(),
                             static_cast<unsigned long long>(report.analysis.tallies.forward),
                             report.warnings.size());
                if (!archive_dir.empty()) {
                    std::filesystem::create_directories(archive_dir);
                    const auto path = std::filesystem::path(archive_dir) /
                                      ("flows-" + std::to_string(archive_index++) + ".arc");
                    store.flush(path.string());
                }
                next_window_ms += mon_opts.cycle_seconds * 1000;
            }
        }
    }

    collector.stop();
    if (!metrics_file.empty()) {
        collector.metrics().write_snapshot(metrics_file);
    }
    std::cout << collector.metrics().to_json() << '\n';
    return kExitOk;
}

int cmd_register(const std::string& catalog_path, const std::string& name,
                 const std::vector<std::string>& cidrs) {
    flowmon::SiteCatalog catalog;
    if (std::filesystem::exists(catalog_path)) {
        catalog = flowmon::SiteCatalog::load_file(catalog_path);
    }
    const auto id = catalog.register_site(name, cidrs);
    catalog.save_file(catalog_path);
    std::printf("registered '%s' as site %u (%zu /24 entries total)\n", name.c_str(), id,
                catalog.entry_count());
    return kExitOk;
}

int cmd_analyze(const std::string& config_path, const std::vector<std::string>& archives,
                const std::string& catalog_path, const std::string& report_dir,
                std::int64_t workers_flag) {
    const auto config = load_config(config_path);
    auto catalog = flowmon::SiteCatalog::load_file(catalog_path);

    flowmon::MonitorOptions opts;
    opts.params = config.filter_params();
    if (workers_flag > 0) {
        opts.params.workers = static_cast<unsigned>(workers_flag);
    }
    opts.warn_threshold_bps =
        config.get_double_or("warn_threshold_bps", flowmon::kDefaultWarnThresholdBps);
    opts.cycle_seconds = static_cast<std::uint64_t>(
        config.get_int_or("cycle_seconds", flowmon::kDefaultCycleSeconds));
    opts.report_dir = report_dir;

    std::vector<flowmon::FlowRecord> records;
    for (const std::string& path : archives) {
        auto loaded = flowmon::FlowStore::load(path);
        records.insert(records.end(), loaded.begin(), loaded.end());
    }
    if (records.empty()) {
        std::fprintf(stderr, "no records in input archives\n");
        return kExitRuntime;
    }

    std::uint64_t min_end = records.front().end_ms, max_end = records.front().end_ms;
    for (const auto& r : records) {
        min_end = std::min(min_end, r.end_ms);
        max_end = std::max(max_end, r.end_ms);
    }
    const std::uint64_t cycle_ms = opts.cycle_seconds * 1000;
    const std::uint64_t first_window = min_end / cycle_ms * cycle_ms;

    flowmon::FlowStore store(records.size());
    store.append(records);
    flowmon::WarningState state;

    bool any_warnings = false;
    for (std::uint64_t window = first_window; window <= max_end; window += cycle_ms) {
        const auto report = flowmon::run_cycle(store, catalog, state, window, opts);
        std::printf("window %s: forward=%llu ack=%llu admin=%llu unmatched=%llu\n",
                    report.file_name().c_str(),
                    static_cast<unsigned long long>(report.analysis.tallies.forward),
                    static_cast<unsigned long long>(report.analysis.tallies.pure_ack),
                    static_cast<unsigned long long>(report.analysis.tallies.administrative),
                    static_cast<unsigned long long>(report.analysis.tallies.unmatched));
        for (const auto& [site, sr] : report.analysis.sites) {
            print_stats_row(catalog.site(site).name, sr.stats);
        }
        for (const auto& w : report.warnings) {
            any_warnings = true;
            std::printf("  WARNING %s: median %.0f bps for %u consecutive hours\n",
                        w.site_name.c_str(), w.median_bps, w.consecutive_bad_hours);
        }
    }
    return any_warnings ? kExitWarnings : kExitOk;
}

int cmd_report(const std::string& report_path, const std::string& csv_path,
               const std::string& site_filter) {
    std::ifstream in(report_path);
    if (!in) {
        std::fprintf(stderr, "cannot open %s\n", report_path.c_str());
        return kExitRuntime;
    }
    const auto doc = nlohmann::json::parse(in);

    std::printf("window: %llu .. %llu ms\n",
                doc.at("window").at("start_ms").get<unsigned long long>(),
                doc.at("window").at("end_ms").get<unsigned long long>());
    const auto& tallies = doc.at("tallies");
    std::printf("classes: forward=%llu pure_ack=%llu administrative=%llu unmatched=%llu\n",
                tallies.at("forward").get<unsigned long long>(),
                tallies.at("pure_ack").get<unsigned long long>(),
                tallies.at("administrative").get<unsigned long long>(),
                tallies.at("unmatched").get<unsigned long long>());

    std::ofstream csv;
    if (!csv_path.empty()) {
        csv.open(csv_path);
        csv << "site,bucket,rate_low_bps,count\n";
    }
    for (const auto& site : doc.at("sites")) {
        const std::string name = site.at("name").get<std::string>();
        if (!site_filter.empty() && name != site_filter) {
            continue;
        }
        const auto& s = site.at("stats");
        std::printf("%-20s flows=%-8llu max=%.0f min=%.0f avg=%.0f median=%.0f%s\n", name.c_str(),
                    s.at("flows").get<unsigned long long>(), s.at("max").get<double>(),
                    s.at("min").get<double>(), s.at("avg").get<double>(),
                    s.at("median").get<double>(),
                    site.at("warning").get<bool>() ? "  [WARNING]" : "");
        for (const auto& host : site.at("hosts")) {
            const auto& hs = host.at("stats");
            std::printf("    %-16s flows=%-8llu median=%.0f\n",
                        host.at("ip").get<std::string>().c_str(),
                        hs.at("flows").get<unsigned long long>(), hs.at("median").get<double>());
        }
        if (csv.is_open()) {
            for (const auto& bucket : site.at("buckets")) {
                csv << name << ',' << bucket.at(0).get<std::uint64_t>() << ','
                    << bucket.at(0).get<std::uint64_t>() * 10000 << ','
                    << bucket.at(1).get<std::uint64_t>() << '\n';
            }
        }
    }
    return kExitOk;
}

int cmd_generate(const std::string& spec_path, const std::string& out_path,
                 std::int64_t seed_override, const std::string& catalog_out) {
    auto config = flowmon::Config::parse_file(spec_path);
    if (seed_override >= 0) {
        config.set("seed", std::to_string(seed_override));
    }
    const auto spec = flowmon::ScenarioSpec::from_config(config);
    const auto records = flowmon::generate(spec);
    flowmon::FlowStore::write_archive(out_path, records);
    if (!catalog_out.empty()) {
        flowmon::scenario_catalog(spec).save_file(catalog_out);
    }
    std::printf("wrote %zu records to %s\n", records.size(), out_path.c_str());
    return kExitOk;
}

int cmd_replay(const std::string& archive_path, const std::string& target, double pps) {
    const auto records = flowmon::FlowStore::load(archive_path);
    const auto [host, port] = split_addr(target, 2055);
    const auto stats = flowmon::replay(records, host, port, pps);
    std::printf("sent %llu datagrams / %llu records in %.2f s (%.1f pps requested, %.1f achieved)%s\n",
                static_cast<unsigned long long>(stats.datagrams_sent),
                static_cast<unsigned long long>(stats.records_sent), stats.elapsed_s,
                stats.requested_pps, stats.achieved_pps,
                stats.pacing_ok ? "" : "  [pacing off target]");
    return kExitOk;
}

int cmd_bench(std::int64_t record_count, std::int64_t site_count, std::int64_t workers,
              const std::string& archive_path) {
    std::vector<flowmon::FlowRecord> records;
    flowmon::ScenarioSpec spec;
    spec.seed = 7;
    spec.duration_hours = 1;
    for (std::int64_t i = 0; i < site_count; ++i) {
        flowmon::SiteSpec site;
        site.name = "site" + std::to_string(i);
        site.cidr = "10." + std::to_string(i / 250) + "." + std::to_string(i % 250) + ".0/24";
        site.host_count = 8;
        site.rate = flowmon::RateDistribution::parse("lognormal:14.5,1.5");
        site.flows_per_hour =
            static_cast<std::uint32_t>(record_count / std::max<std::int64_t>(site_count, 1));
        site.ack_fraction = 0.3;
        site.admin_fraction = 0.2;
        spec.sites.push_back(site);
    }
    const auto catalog = flowmon::scenario_catalog(spec);
    if (!archive_path.empty()) {
        records = flowmon::FlowStore::load(archive_path);
    } else {
        records = flowmon::generate(spec);
    }

    flowmon::FilterParams params;
    const auto cmp = flowmon::run_bench(records, catalog,  params,
                                        static_cast<unsigned>(std::max<std::int64_t>(workers, 1)));
    for (const auto& r : {cmp.hash, cmp.sequential}) {
        std::printf("%-12s %zu records in %.2f ms (%.0f records/s)\n", r.variant.c_str(),
                    r.record_count, r.elapsed_ms, r.records_per_second);
    }
    std::printf("speedup (sequential/hash): %.2fx, results identical: %s\n", cmp.speedup,
                cmp.results_identical ? "yes" : "NO");
    return cmp.results_identical ? kExitOk : kExitRuntime;
}

int cmd_stats(const std::string& metrics_file) {
    std::ifstream in(metrics_file);
    if (!in) {
        std::fprintf(stderr, "cannot open %s\n", metrics_file.c_str());
        return kExitRuntime;
    }
    std::cout << in.rdbuf();
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowmon - NetFlow v5 transfer-rate monitor"};
    app.require_subcommand(1);

    std::string config_path, listen, catalog_path, report_dir, metrics_file, archive_dir;
    std::string name, report_path, csv_path, site_filter, spec_path, out_path, target, archive_path;
    std::string catalog_out;
    std::vector<std::string> cidrs, archives;
    std::int64_t rcvbuf = 0, capacity = 0, workers = 0, record_count = 1'000'000, site_count = 100;
    std::int64_t seed_override = -1;
    double pps = 463;

    auto* collect = app.add_subcommand("collect", "run the UDP flow collector");
    collect->add_option("--config", config_path);
    collect->add_option("--listen", listen, "bind address, addr:port");
    collect->add_option("--rcvbuf", rcvbuf, "socket receive buffer bytes");
    collect->add_option("--capacity", capacity, "flow store capacity");
    collect->add_option("--catalog", catalog_path, "site catalog file; enables hourly monitoring");
    collect->add_option("--report-dir", report_dir);
    collect->add_option("--metrics-file", metrics_file);
    collect->add_option("--archive-dir", archive_dir, "flush analyzed records here after each cycle");

    auto* reg = app.add_subcommand("register", "add a site to a catalog file");
    reg->add_option("--catalog", catalog_path)->required();
    reg->add_option("--name", name)->required();
    reg->add_option("--cidrs", cidrs, "comma-separated CIDR list")->required()->delimiter(',');

    auto* analyze = app.add_subcommand("analyze", "offline analysis of flow archives");
    analyze->add_option("--config", config_path);
    analyze->add_option("archives", archives, "archive files")->required();
    analyze->add_option("--catalog", catalog_path)->required();
    analyze->add_option("--report-dir", report_dir);
    analyze->add_option("--workers", workers);

    auto* report = app.add_subcommand("report", "render a stored report");
    report->add_option("file", report_path)->required();
    report->add_option("--csv", csv_path, "dump per-site bucket counts as CSV");
    report->add_option("--site", site_filter);

    auto* generate = app.add_subcommand("generate", "generate a synthetic flow archive");
    generate->add_option("--spec", spec_path)->required();
    generate->add_option("--out", out_path)->required();
    generate->add_option("--seed", seed_override);
    generate->add_option("--catalog-out", catalog_out, "write the scenario's catalog here");

    auto* replay = app.add_subcommand("replay", "replay an archive over UDP");
    replay->add_option("--archive", archive_path)->required();
    replay->add_option("--target", target)->required();
    replay->add_option("--pps", pps, "datagrams per second");

    auto* bench = app.add_subcommand("bench", "hash vs sequential lookup benchmark");
    bench->add_option("--records", record_count);
    bench->add_option("--sites", site_count);
    bench->add_option("--workers", workers);
    bench->add_option("--archive", archive_path, "use an existing archive instead of generating");

    auto* stats = app.add_subcommand("stats", "print a collector metrics snapshot");
    stats->add_option("metrics-file", metrics_file, "metrics snapshot written by collect")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (collect->parsed()) {
            return cmd_collect(config_path, listen, rcvbuf, capacity, catalog_path, report_dir,
                               metrics_file, archive_dir);
        }
        if (reg->parsed()) {
            return cmd_register(catalog_path, name, cidrs);
        }
        if (analyze->parsed()) {
            return cmd_analyze(config_path, archives, catalog_path, report_dir, workers);
        }
        if (report->parsed()) {
            return cmd_report(report_path, csv_path, site_filter);
        }
        if (generate->parsed()) {
            return cmd_generate(spec_path, out_path, seed_override, catalog_out);
        }
        if (replay->parsed()) {
            return cmd_replay(archive_path, target, pps);
        }
        if (bench->parsed()) {
            return cmd_bench(record_count, site_count, workers, archive_path);
        }
        if (stats->parsed()) {
            return cmd_stats(metrics_file);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
