// Acceptance suite: one PASS/FAIL line per criterion, exit code = failures.
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "flowmon/collector.hpp"
#include "flowmon/monitor.hpp"
#include "flowmon/toolkit.hpp"

using namespace flowmon;
using clock_type = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s: criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
}

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

// ---- criterion 1: codec exactness --------------------------------------

void criterion1() {
    const auto t0 = clock_type::now();
    std::mt19937_64 rng(1);
    bool ok = true;
    std::string detail;

    for (int i = 0; i < 10'000 && ok; ++i) {
        ExportHeader header;
        header.count = static_cast<std::uint16_t>(1 + rng() % kMaxRecordsPerPacket);
        header.sys_uptime = static_cast<std::uint32_t>(rng());
        header.unix_secs = static_cast<std::uint32_t>(rng());
        header.unix_nsecs = static_cast<std::uint32_t>(rng() % 1'000'000'000);
        header.flow_sequence = static_cast<std::uint32_t>(rng());
        header.engine_type = static_cast<std::uint8_t>(rng());
        header.engine_id = static_cast<std::uint8_t>(rng());
        header.sampling_interval = static_cast<std::uint16_t>(rng());

        std::vector<RawFlowRecord> records(header.count);
        for (RawFlowRecord& r : records) {
            r.src_addr = static_cast<std::uint32_t>(rng());
            r.dst_addr = static_cast<std::uint32_t>(rng());
            r.next_hop = static_cast<std::uint32_t>(rng());
            r.input_if = static_cast<std::uint16_t>(rng());
            r.output_if = static_cast<std::uint16_t>(rng());
            r.d_pkts = static_cast<std::uint32_t>(rng());
            r.d_octets = static_cast<std::uint32_t>(rng());
            r.first = static_cast<std::uint32_t>(rng());
            r.last = static_cast<std::uint32_t>(rng());
            r.src_port = static_cast<std::uint16_t>(rng());
            r.dst_port = static_cast<std::uint16_t>(rng());
            r.tcp_flags = static_cast<std::uint8_t>(rng());
            r.protocol = static_cast<std::uint8_t>(rng());
            r.tos = static_cast<std::uint8_t>(rng());
            r.src_as = static_cast<std::uint16_t>(rng());
            r.dst_as = static_cast<std::uint16_t>(rng());
            r.src_mask = static_cast<std::uint8_t>(rng());
            r.dst_mask = static_cast<std::uint8_t>(rng());
        }

        const auto wire = encode_packet(header, records);
        const auto decoded = decode_packet(wire);
        const auto rewire = encode_packet(decoded.header, decoded.records);
        if (wire != rewire) {
            ok = false;
            detail = "round-trip mismatch at packet " + std::to_string(i);
        }
    }

    // Malformed inputs: every wrong length and the bad-version case reject.
    auto rejects = [](std::vector<std::uint8_t> bytes) {
        try {
            decode_packet(bytes);
            return false;
        } catch (const CodecError&) {
            return true;
        }
    };
    ExportHeader header;
    header.count = 2;
    const auto good = encode_packet(header, std::vector<RawFlowRecord>(2));
    for (std::size_t len = 0; len < good.size() + 48 && ok; ++len) {
        if (len == good.size()) {
            continue;
        }
        std::vector<std::uint8_t> bytes(len, 0);
        std::copy_n(good.begin(), std::min(len, good.size()), bytes.begin());
        if (!rejects(bytes)) {
            ok = false;
            detail = "accepted malformed length " + std::to_string(len);
        }
    }
    for (int version = 0; version < 16 && ok; ++version) {
        if (version == 5) {
            continue;
        }
        auto bytes = good;
        bytes[0] = static_cast<std::uint8_t>(version >> 8);
        bytes[1] = static_cast<std::uint8_t>(version);
        if (!rejects(bytes)) {
            ok = false;
            detail = "accepted version " + std::to_string(version);
        }
    }

    const double elapsed = seconds_since(t0);
    if (ok && elapsed >= 5.0) {
        ok = false;
        detail = "too slow";
    }
    if (ok) {
        detail = "10^4 packets round-trip byte-identically, malformed rejected";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.2f s, limit 5 s)", elapsed);
    report(1, ok, detail + buf);
}

// ---- criterion 2: lookup equivalence ------------------------------------

SiteCatalog hundred_site_catalog() {
    SiteCatalog catalog;
    std::mt19937_64 rng(2);
    std::vector<std::uint32_t> prefixes;
    while (prefixes.size() < 100) {
        const auto prefix = static_cast<std::uint32_t>(rng()) & 0xFFFFFF00u;
        if (std::find(prefixes.begin(), prefixes.end(), prefix) == prefixes.end()) {
            prefixes.push_back(prefix);
        }
    }
    for (std::size_t i = 0; i < prefixes.size(); ++i) {
        catalog.register_site("site" + std::to_string(i),
                              std::vector<std::string>{format_ipv4(prefixes[i]) + "/24"});
    }
    return catalog;
}

void criterion2() {
    const auto t0 = clock_type::now();
    const SiteCatalog catalog = hundred_site_catalog();
    bool ok = catalog.entry_count() == 100;
    std::string detail = ok ? "" : "catalog did not expand to 100 entries";

    std::mt19937_64 rng(3);
    auto check = [&](std::uint32_t ip) {
        if (catalog.lookup(ip) != catalog.sequential_lookup(ip)) {
            ok = false;
            detail = "disagreement at " + format_ipv4(ip);
        }
    };
    for (int i = 0; i < 1'000'000 && ok; ++i) {
        check(static_cast<std::uint32_t>(rng()));
    }
    for (const auto& [prefix, site] : catalog.entries()) {
        (void)site;
        check(prefix);          // network address
        check(prefix + 255);    // last address
        check(prefix - 1);      // just below
        check(prefix + 256);    // just above
    }

    const double elapsed = seconds_since(t0);
    if (ok && elapsed >= 10.0) {
        ok = false;
        detail = "too slow";
    }
    if (ok) {
        detail = "hash == sequential on 10^6 addresses + all boundaries";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.2f s, limit 10 s)", elapsed);
    report(2, ok, detail + buf);
}

// ---- shared 5M-record workload for criteria 3, 4, 6 ---------------------

struct Workload {
    std::vector<FlowRecord> records;
    SiteCatalog catalog;
};

Workload five_million_workload() {
    ScenarioSpec spec;
    spec.duration_hours = 1;
    spec.seed = 4;
    for (int i = 0; i < 100; ++i) {
        SiteSpec site;
        site.name = "site" + std::to_string(i);
        site.cidr = "10." + std::to_string(i / 200) + "." + std::to_string(i % 200) + ".0/24";
        site.host_count = 16;
        site.rate = RateDistribution::parse("lognormal:15.0,1.0");
        site.flows_per_hour = 50'000;
        site.ack_fraction = 0.10;
        site.admin_fraction = 0.05;
        spec.sites.push_back(site);
    }
    Workload w;
    w.records = generate(spec);
    w.catalog = scenario_catalog(spec);
    return w;
}

double timed_aggregate_ms(const Workload& w, unsigned workers, LookupMode mode,
                          AnalysisResult* out = nullptr) {
    const auto t0 = clock_type::now();
    AnalysisResult result = aggregate(w.records, w.catalog, FilterParams{}, workers, mode);
    const double ms = seconds_since(t0) * 1000.0;
    if (out) {
        *out = std::move(result);
    }
    return ms;
}

double median_of(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return xs[(xs.size() - 1) / 2];
}

void criterion3(const Workload& w) {
    // Hard floor: >= 1M records/s single-worker, hash lookups.
    const double single_ms = timed_aggregate_ms(w, 1, LookupMode::Hash);
    const double rate = static_cast<double>(w.records.size()) / (single_ms / 1000.0);
    const bool floor_ok = rate >= 1'000'000.0;

    // Scaling: median of 5 runs each at 1 and 4 workers.
    std::vector<double> one_ms, four_ms;
    for (int i = 0; i < 5; ++i) {
        one_ms.push_back(timed_aggregate_ms(w, 1, LookupMode::Hash));
        four_ms.push_back(timed_aggregate_ms(w, 4, LookupMode::Hash));
    }
    const double scaling = median_of(one_ms) / median_of(four_ms);
    const bool scaling_ok = scaling >= 2.0;

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "single-worker %.2fM records/s (floor 1M: %s); 1->4 worker scaling %.2fx "
                  "(floor 2x: %s)",
                  rate / 1e6, floor_ok ? "ok" : "below", scaling, scaling_ok ? "ok" : "below");
    report(3, floor_ok && scaling_ok, buf);
}

void criterion4(const Workload& w) {
    AnalysisResult hash_result, seq_result;
    std::vector<double> hash_runs, seq_runs;
    for (int i = 0; i < 5; ++i) {
        hash_runs.push_back(timed_aggregate_ms(w, 1, LookupMode::Hash, &hash_result));
        seq_runs.push_back(timed_aggregate_ms(w, 1, LookupMode::Sequential, &seq_result));
    }
    const double hash_ms = median_of(hash_runs);
    const double seq_ms = median_of(seq_runs);
    const double ratio = seq_ms / hash_ms;
    const bool identical = hash_result == seq_result;
    const bool ok = ratio >= 3.0 && identical;

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "sequential/hash elapsed ratio %.2f (floor 3.0), results %s (%.0f ms vs %.0f ms)",
                  ratio, identical ? "identical" : "DIFFER", seq_ms, hash_ms);
    report(4, ok, buf);
}

// ---- criterion 5: median fidelity ---------------------------------------

void criterion5() {
    const auto t0 = clock_type::now();
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> size_pick(1, 10'000);
    std::uniform_real_distribution<double> rate_pick(0.0, 120e6);

    bool ok = true;
    std::string detail;
    for (int set = 0; set < 1'000 && ok; ++set) {
        const std::size_t n = size_pick(rng);
        std::vector<double> rates(n);
        RateHistogram hist;
        for (double& r : rates) {
            r = rate_pick(rng);
            hist.add(r, static_cast<unsigned __int128>(r * 1e6));
        }

        // Brute-force sorted lower median, clamped at the histogram's
        // overflow point (rates >= 100 Mbps are indistinguishable by design).
        std::sort(rates.begin(), rates.end());
        const double truth = std::min(rates[(n - 1) / 2], kRateCapBps);

        const double estimate = hist.median_bps();
        const double error = std::abs(estimate - truth);
        const double tolerance = truth < kRateCapBps ? 5'000.0 : 10'000.0;
        if (error > tolerance) {
            ok = false;
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "set %d (n=%zu): estimate %.0f vs truth %.0f, error %.0f > %.0f", set, n,
                          estimate, truth, error, tolerance);
            detail = buf;
        }
    }

    const double elapsed = seconds_since(t0);
    if (ok && elapsed >= 30.0) {
        ok = false;
        detail = "too slow";
    }
    if (ok) {
        detail = "10^3 sample sets within 5/10 kbps of the sorted lower median";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.2f s, limit 30 s)", elapsed);
    report(5, ok, detail + buf);
}

// ---- criterion 6: determinism -------------------------------------------

void criterion6(const Workload& w) {
    AnalysisResult reference;
    timed_aggregate_ms(w, 1, LookupMode::Hash, &reference);

    bool ok = true;
    std::string detail;
    for (unsigned workers : {2u, 4u, 8u}) {
        AnalysisResult result;
        timed_aggregate_ms(w, workers, LookupMode::Hash, &result);
        if (!(result == reference)) {
            ok = false;
            detail = "mismatch at " + std::to_string(workers) + " workers";
        }
    }

    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 10 && ok; ++trial) {
        std::vector<std::size_t> boundaries{0, w.records.size()};
        const int cuts = 1 + static_cast<int>(rng() % 7);
        for (int c = 0; c < cuts; ++c) {
            boundaries.push_back(rng() % w.records.size());
        }
        std::sort(boundaries.begin(), boundaries.end());
        const auto result = aggregate_partitioned(w.records, w.catalog, FilterParams{},
                                                  boundaries, LookupMode::Hash);
        if (!(result == reference)) {
            ok = false;
            detail = "mismatch at random partitioning " + std::to_string(trial);
        }
    }
    if (ok) {
        detail = "bit-identical for workers {1,2,4,8} and 10 random partitionings";
    }
    report(6, ok, detail);
}

// ---- criterion 7: warning scenario --------------------------------------

// Hours run through monitor cycles; rates[h] is SiteA's fixed rate in hour h.
std::vector<int> warning_cycles(const std::vector<double>& rates) {
    constexpr std::uint64_t kHourMs = 3'600'000;
    constexpr std::uint64_t kBase = 1'700'000'000'000;

    FlowStore store(1 << 22);
    SiteCatalog catalog;
    for (std::size_t hour = 0; hour < rates.size(); ++hour) {
        ScenarioSpec spec;
        spec.duration_hours = 1;
        spec.base_wall_ms = kBase + hour * kHourMs;
        spec.seed = 7 + hour;
        SiteSpec site;
        site.name = "SiteA";
        site.cidr = "10.1.1.0/24";
        site.host_count = 8;
        site.rate.kind = RateDistribution::Kind::Fixed;
        site.rate.fixed_bps = rates[hour];
        site.flows_per_hour = 200;
        spec.sites.push_back(site);
        store.append(generate(spec));
        if (hour == 0) {
            catalog = scenario_catalog(spec);
        }
    }

    WarningState state;
    std::vector<int> cycles;
    for (std::size_t hour = 0; hour < rates.size(); ++hour) {
        const auto report =
            run_cycle(store, catalog, state, kBase + hour * kHourMs, MonitorOptions{});
        if (!report.warnings.empty()) {
            cycles.push_back(static_cast<int>(hour));
        }
    }
    return cycles;
}

void criterion7() {
    const auto two_hour = warning_cycles({10e6, 10e6, 10e6, 0.5e6, 0.5e6, 10e6});
    const auto one_hour = warning_cycles({10e6, 0.5e6, 10e6, 10e6, 10e6, 10e6});
    const auto four_hour = warning_cycles({10e6, 0.5e6, 0.5e6, 0.5e6, 0.5e6, 10e6});

    const bool ok = two_hour == std::vector<int>{4} && one_hour.empty() &&
                    four_hour == std::vector<int>{2, 3, 4};
    std::ostringstream detail;
    detail << "2h dip -> " << two_hour.size() << " warning(s)";
    if (!two_hour.empty()) {
        detail << " at hour " << two_hour[0];
    }
    detail << "; 1h dip -> " << one_hour.size() << "; 4h dip -> " << four_hour.size();
    report(7, ok, detail.str());
}

// ---- criterion 8: collector design load ---------------------------------

void criterion8() {
    // 463 datagrams/s x 30 records x 60 s.
    constexpr std::size_t kRecords = 833'400;
    constexpr std::uint64_t kBase = 1'700'000'000'000;
    std::vector<FlowRecord> records;
    records.reserve(kRecords);
    for (std::size_t i = 0; i < kRecords; ++i) {
        FlowRecord record;
        record.raw.src_addr = 0x0A010100u + 1 + (i % 200);
        record.raw.dst_addr = 0xC6336401u;
        record.raw.d_octets = 1'000'000;
        record.raw.d_pkts = 800;
        record.start_ms = kBase + i;
        record.end_ms = record.start_ms + 2000;
        records.push_back(record);
    }

    FlowStore store(kRecords);
    CollectorOptions options;
    options.bind_address = "127.0.0.1";
    options.port = 39557;
    Collector collector(store, options);
    collector.start();

    const auto stats = replay(records, "127.0.0.1", options.port, 463.0);

    const auto deadline = clock_type::now() + std::chrono::seconds(10);
    while (collector.metrics().records_accepted < kRecords && clock_type::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    collector.stop();

    const auto& m = collector.metrics();
    const bool ok = m.records_accepted == kRecords && m.sequence_gaps == 0 && stats.pacing_ok;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "accepted %llu/%zu records, %llu gaps, %.1f/463 datagrams/s over %.1f s "
                  "(pacing %s)",
                  static_cast<unsigned long long>(m.records_accepted.load()), kRecords,
                  static_cast<unsigned long long>(m.sequence_gaps.load()), stats.achieved_pps,
                  stats.elapsed_s, stats.pacing_ok ? "ok" : "off");
    report(8, ok, buf);

    // Loss observability: synthesized sequence jumps surface as gap counts.
    FlowStore store2(1 << 12);
    Collector collector2(store2, CollectorOptions{});
    ExportHeader header;
    header.count = 30;
    header.unix_secs = 1'700'000'000;
    std::vector<RawFlowRecord> raws(30);
    for (auto& r : raws) {
        r.d_pkts = 10;
        r.d_octets = 10'000;
    }
    for (std::uint32_t seq : {0u, 30u, 120u, 150u, 300u}) { // drops 60 + 120 records
        header.flow_sequence = seq;
        collector2.ingest_datagram(encode_packet(header, raws), 0x7F000001);
    }
    const bool loss_ok = collector2.metrics().sequence_gaps == 180;
    char buf2[120];
    std::snprintf(buf2, sizeof buf2, "loss observability: synthesized gaps measured as %llu/180",
                  static_cast<unsigned long long>(collector2.metrics().sequence_gaps.load()));
    report(8, loss_ok, buf2);
}

// ---- criterion 9: capacity/memory ---------------------------------------

std::uint64_t resident_kb() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmRSS:", 0) == 0) {
            return std::strtoull(line.c_str() + 6, nullptr, 10);
        }
    }
    return 0;
}

void fill_store_check(std::uint64_t count, double limit_gb, const char* label) {
    const std::uint64_t before_kb = resident_kb();
    FlowStore store(count);
    {
        std::vector<FlowRecord> batch(10'000);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            batch[i].raw.src_addr = static_cast<std::uint32_t>(i);
            batch[i].raw.d_pkts = 100;
            batch[i].raw.d_octets = 140'000;
            batch[i].start_ms = i;
            batch[i].end_ms = i + 1000;
        }
        for (std::uint64_t done = 0; done < count; done += batch.size()) {
            store.append(batch);
        }
    }
    const double grown_gb = static_cast<double>(resident_kb() - before_kb) / (1024.0 * 1024.0);
    const bool ok = store.size() == count && grown_gb < limit_gb;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: %llu records resident in %.2f GB (limit %.2f GB)", label,
                  static_cast<unsigned long long>(store.size()), grown_gb, limit_gb);
    report(9, ok, buf);
}

void criterion9() {
    fill_store_check(5'000'000, 0.4, "5M store (mandatory)");
    if (std::getenv("FLOWMON_BIG_TESTS")) {
        fill_store_check(50'000'000, 4.0, "50M store");
    } else {
        std::printf("SKIP: criterion 9: 50M/4GB variant (set FLOWMON_BIG_TESTS=1 to run)\n");
    }
}

} // namespace

int main() {
    criterion1();
    criterion2();

    std::printf("INFO: generating shared 5M-record workload...\n");
    std::fflush(stdout);
    const Workload w = five_million_workload();

    criterion3(w);
    criterion4(w);
    criterion5();
    criterion6(w);
    criterion7();
    criterion8();
    criterion9();

    std::printf("%d criterion check(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
