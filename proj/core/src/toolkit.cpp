#include "flowmon/toolkit.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <random>
#include <thread>

namespace flowmon {

RateDistribution RateDistribution::parse(const std::string& text) {
    RateDistribution d;
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
    if (kind == "fixed") {
        d.kind = Kind::Fixed;
        d.fixed_bps = std::stod(args);
        if (d.fixed_bps <= 0) {
            throw ToolkitError(ToolkitError::Kind::InvalidSpec, "fixed rate must be positive");
        }
    } else if (kind == "lognormal") {
        const auto comma = args.find(',');
        if (comma == std::string::npos) {
            throw ToolkitError(ToolkitError::Kind::InvalidSpec,
                               "lognormal needs mu,sigma: " + text);
        }
        d.kind = Kind::Lognormal;
        d.lognormal_mu = std::stod(args.substr(0, comma));
        d.lognormal_sigma = std::stod(args.substr(comma + 1));
        if (d.lognormal_sigma < 0) {
            throw ToolkitError(ToolkitError::Kind::InvalidSpec, "sigma must be >= 0");
        }
    } else {
        throw ToolkitError(ToolkitError::Kind::InvalidSpec, "unknown rate distribution: " + text);
    }
    return d;
}

ScenarioSpec ScenarioSpec::from_config(const Config& config) {
    ScenarioSpec spec;
    spec.duration_hours = static_cast<std::uint32_t>(config.get_int_or("duration_hours", 1));
    spec.base_wall_ms =
        static_cast<std::uint64_t>(config.get_int_or("base_wall_ms", 1'600'000'000'000));
    spec.seed = static_cast<std::uint64_t>(config.get_int_or("seed", 1));

    for (std::size_t i = 0;; ++i) {
        const std::string prefix = "site." + std::to_string(i) + ".";
        const auto name = config.get(prefix + "name");
        if (!name) {
            break;
        }
        SiteSpec site;
        site.name = *name;
        site.cidr = config.get_or(prefix + "cidr", "10." + std::to_string(i) + ".0.0/24");
        site.host_count = static_cast<std::uint32_t>(config.get_int_or(prefix + "hosts", 1));
        site.rate = RateDistribution::parse(config.get_or(prefix + "rate", "fixed:1000000"));
        site.flows_per_hour =
            static_cast<std::uint32_t>(config.get_int_or(prefix + "flows_per_hour", 1000));
        site.ack_fraction = config.get_double_or(prefix + "ack_fraction", 0);
        site.admin_fraction = config.get_double_or(prefix + "admin_fraction", 0);
        spec.sites.push_back(std::move(site));
    }
    spec.validate();
    return spec;
}

void ScenarioSpec::validate() const {
    if (duration_hours == 0) {
        throw ToolkitError(ToolkitError::Kind::InvalidSpec, "duration_hours must be >= 1");
    }
    if (sites.empty()) {
        throw ToolkitError(ToolkitError::Kind::InvalidSpec, "scenario needs at least one site");
    }
    for (const SiteSpec& s : sites) {
        if (s.ack_fraction < 0 || s.ack_fraction > 1 || s.admin_fraction < 0 ||
            s.admin_fraction > 1 || s.ack_fraction + s.admin_fraction > 1) {
            throw ToolkitError(ToolkitError::Kind::InvalidSpec,
                               "fractions out of range for site " + s.name);
        }
        if (s.host_count == 0 || s.host_count > 254) {
            throw ToolkitError(ToolkitError::Kind::InvalidSpec,
                               "host count must be 1..254 for site " + s.name);
        }
        Cidr::parse(s.cidr); // throws on bad syntax
    }
}

SiteCatalog scenario_catalog(const ScenarioSpec& spec) {
    SiteCatalog catalog;
    for (const SiteSpec& s : spec.sites) {
        catalog.register_site(s.name, std::vector<std::string>{s.cidr});
    }
    return catalog;
}

namespace {

constexpr std::uint64_t kHourMs = 3'600'000;
constexpr std::uint32_t kRemoteBase = 0xC6336400u; // 198.51.100.0, never registered

// A forward flow whose computed rate tracks rate_bps while clearing the
// default pure-ACK and administrative filters.
void fill_forward(RawFlowRecord& raw, double rate_bps, std::uint64_t duration_hint_ms,
                  bool exact) {
    std::uint64_t duration_ms = duration_hint_ms;
    std::uint64_t octets;
    if (exact) {
        // duration k*8000 ms and octets k*rate make the computed rate exact.
        const auto k = static_cast<std::uint64_t>(std::max(1.0, std::ceil(2048.0 / rate_bps)));
        duration_ms = 8000 * k;
        octets = static_cast<std::uint64_t>(std::llround(rate_bps)) * k;
    } else {
        octets = static_cast<std::uint64_t>(
            std::llround(rate_bps * static_cast<double>(duration_ms) / 8000.0));
        if (octets < 2048) {
            octets = 2048;
            duration_ms = std::clamp<std::uint64_t>(
                static_cast<std::uint64_t>(std::llround(8000.0 * 2048.0 / rate_bps)), 100,
                kHourMs);
        }
    }
    octets = std::min<std::uint64_t>(octets, 0xFFFFFFFFu);
    raw.d_octets = static_cast<std::uint32_t>(octets);
    raw.d_pkts = static_cast<std::uint32_t>(
        std::clamp<std::uint64_t>(octets / 1400 + 1, 20, std::max<std::uint64_t>(octets / 97, 20)));
    raw.first = 0; // placeholder, caller anchors timestamps
    raw.last = static_cast<std::uint32_t>(duration_ms);
}

} // namespace

std::vector<FlowRecord> generate(const ScenarioSpec& spec) {
    spec.validate();
    std::vector<FlowRecord> records;

    for (std::size_t si = 0; si < spec.sites.size(); ++si) {
        const SiteSpec& site = spec.sites[si];
        std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ull + si);
        std::uniform_int_distribution<std::uint32_t> host_pick(0, site.host_count - 1);
        std::uniform_int_distribution<std::uint64_t> hour_offset(0, kHourMs - 1);
        std::uniform_int_distribution<std::uint64_t> fwd_duration(1000, 8000);
        std::uniform_int_distribution<std::uint32_t> ack_pkts(10, 500);
        std::uniform_int_distribution<std::uint32_t> admin_pkts(1, 19);
        std::uniform_int_distribution<std::uint32_t> admin_avg(100, 500);
        std::uniform_int_distribution<std::uint64_t> short_duration(100, 5000);
        std::uniform_int_distribution<std::uint32_t> remote_pick(1, 254);
        std::normal_distribution<double> log_rate(site.rate.lognormal_mu,
                                                  site.rate.lognormal_sigma);

        const std::uint32_t prefix24 = Cidr::parse(site.cidr).first_prefix24();
        const auto n_ack =
            static_cast<std::uint32_t>(std::llround(site.flows_per_hour * site.ack_fraction));
        const auto n_admin =
            static_cast<std::uint32_t>(std::llround(site.flows_per_hour * site.admin_fraction));

        for (std::uint32_t hour = 0; hour < spec.duration_hours; ++hour) {
            const std::uint64_t hour_start = spec.base_wall_ms + hour * kHourMs;
            for (std::uint32_t f = 0; f < site.flows_per_hour; ++f) {
                FlowRecord record;
                RawFlowRecord& raw = record.raw;
                const std::uint32_t host_ip = prefix24 + 1 + host_pick(rng);
                const std::uint32_t remote_ip = kRemoteBase + remote_pick(rng);
                const bool outbound = (rng() & 1) != 0;
                raw.src_addr = outbound ? host_ip : remote_ip;
                raw.dst_addr = outbound ? remote_ip : host_ip;
                raw.protocol = 6;
                raw.src_port = static_cast<std::uint16_t>(1024 + (rng() & 0x7FFF));
                raw.dst_port = 443;
                raw.tcp_flags = 0x18;

                std::uint64_t duration_ms;
                if (f < n_ack) {
                    raw.d_pkts = ack_pkts(rng);
                    raw.d_octets = raw.d_pkts * 40; // header-sized segments
                    duration_ms = short_duration(rng);
                } else if (f < n_ack + n_admin) {
                    raw.d_pkts = admin_pkts(rng);
                    raw.d_octets = raw.d_pkts * admin_avg(rng);
                    duration_ms = short_duration(rng);
                } else if (site.rate.kind == RateDistribution::Kind::Fixed) {
                    fill_forward(raw, site.rate.fixed_bps, 0, true);
                    duration_ms = raw.last;
                } else {
                    const double rate =
                        std::clamp(std::exp(log_rate(rng)), 1000.0, 120'000'000.0);
                    fill_forward(raw, rate, fwd_duration(rng), false);
                    duration_ms = raw.last;
                }

                record.end_ms = hour_start + hour_offset(rng);
                record.start_ms = record.end_ms - duration_ms;
                raw.first = static_cast<std::uint32_t>(record.start_ms);
                raw.last = static_cast<std::uint32_t>(record.end_ms);
                records.push_back(record);
            }
        }
    }
    return records;
}

std::vector<std::vector<std::uint8_t>> packetize(std::span<const FlowRecord> records) {
    std::vector<std::vector<std::uint8_t>> packets;
    std::uint32_t sequence = 0;
    for (std::size_t done = 0; done < records.size();) {
        const std::size_t take = std::min(kMaxRecordsPerPacket, records.size() - done);
        std::uint64_t wall_ms = 0;
        for (std::size_t i = 0; i < take; ++i) {
            wall_ms = std::max(wall_ms, records[done + i].end_ms);
        }

        // With sys_uptime == wall_ms mod 2^32, uptime timestamps equal the
        // wall-clock ms mod 2^32 and resolve_times recovers start/end exactly.
        ExportHeader header;
        header.count = static_cast<std::uint16_t>(take);
        header.sys_uptime = static_cast<std::uint32_t>(wall_ms);
        header.unix_secs = static_cast<std::uint32_t>(wall_ms / 1000);
        header.unix_nsecs = static_cast<std::uint32_t>(wall_ms % 1000) * 1'000'000u;
        header.flow_sequence = sequence;

        std::vector<RawFlowRecord> raws;
        raws.reserve(take);
        for (std::size_t i = 0; i < take; ++i) {
            RawFlowRecord raw = records[done + i].raw;
            raw.first = static_cast<std::uint32_t>(records[done + i].start_ms);
            raw.last = static_cast<std::uint32_t>(records[done + i].end_ms);
            raws.push_back(raw);
        }
        packets.push_back(encode_packet(header, raws));
        sequence += static_cast<std::uint32_t>(take);
        done += take;
    }
    return packets;
}

ReplayStats replay(std::span<const FlowRecord> records, const std::string& host,
                   std::uint16_t port, double pps) {
    if (pps <= 0) {
        throw ToolkitError(ToolkitError::Kind::InvalidSpec, "pps must be positive");
    }
    const auto packets = packetize(records);

    const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) {
        throw ToolkitError(ToolkitError::Kind::IoFailure,
                           "socket() failed: " + std::string(std::strerror(errno)));
    }
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw ToolkitError(ToolkitError::Kind::IoFailure, "bad target address " + host);
    }

    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    ReplayStats stats;
    stats.requested_pps = pps;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const auto due =
            t0 + std::chrono::duration_cast<clock::duration>(
                     std::chrono::duration<double>(static_cast<double>(i) / pps));
        std::this_thread::sleep_until(due);
        const ssize_t n = ::sendto(fd, packets[i].data(), packets[i].size(), 0,
                                   reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
        if (n < 0) {
            ::close(fd);
            throw ToolkitError(ToolkitError::Kind::IoFailure,
                               "sendto failed: " + std::string(std::strerror(errno)));
        }
        ++stats.datagrams_sent;
        stats.records_sent += (packets[i].size() - kHeaderBytes) / kRecordBytes;
    }
    ::close(fd);

    stats.elapsed_s = std::chrono::duration<double>(clock::now() - t0).count();
    stats.achieved_pps =
        stats.elapsed_s > 0 ? static_cast<double>(stats.datagrams_sent) / stats.elapsed_s : 0;
    stats.pacing_ok = std::abs(stats.achieved_pps - pps) <= 0.05 * pps;
    return stats;
}

namespace {

BenchResult time_variant(const char* name, std::span<const FlowRecord> view,
                         const SiteCatalog& catalog, const FilterParams& params, unsigned workers,
                         LookupMode mode, AnalysisResult& out) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    out = aggregate(view, catalog, params, workers, mode);
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    BenchResult r;
    r.variant = name;
    r.record_count = view.size();
    r.elapsed_ms = elapsed_ms;
    r.records_per_second = elapsed_ms > 0 ? static_cast<double>(view.size()) / elapsed_ms * 1000.0
                                          : 0;
    return r;
}

} // namespace

BenchComparison run_bench(std::span<const FlowRecord> view, const SiteCatalog& catalog,
                          const FilterParams& params, unsigned workers) {
    BenchComparison cmp;
    AnalysisResult hash_result, seq_result;
    cmp.hash = time_variant("hash", view, catalog, params, workers, LookupMode::Hash, hash_result);
    cmp.sequential = time_variant("sequential", view, catalog, params, workers,
                                  LookupMode::Sequential, seq_result);
    cmp.speedup = cmp.hash.elapsed_ms > 0 ? cmp.sequential.elapsed_ms / cmp.hash.elapsed_ms : 0;
    cmp.results_identical = hash_result == seq_result;
    return cmp;
}

} // namespace flowmon
