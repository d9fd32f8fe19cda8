#ifndef FLOWMON_TOOLKIT_HPP
#define FLOWMON_TOOLKIT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "flowmon/config.hpp"
#include "flowmon/netflow.hpp"
#include "flowmon/rate_engine.hpp"
#include "flowmon/site_catalog.hpp"

namespace flowmon {

class ToolkitError : public std::runtime_error {
public:
    enum class Kind { InvalidSpec, IoFailure };

    ToolkitError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct RateDistribution {
    enum class Kind { Fixed, Lognormal };

    Kind kind = Kind::Fixed;
    double fixed_bps = 1'000'000;
    double lognormal_mu = 0;    // of ln(rate in bps)
    double lognormal_sigma = 1;

    static RateDistribution parse(const std::string& text); // "fixed:BPS" | "lognormal:MU,SIGMA"
};

struct SiteSpec {
    std::string name;
    std::string cidr;
    std::uint32_t host_count = 1;
    RateDistribution rate;
    std::uint32_t flows_per_hour = 1000;
    double ack_fraction = 0;
    double admin_fraction = 0;
};

struct ScenarioSpec {
    std::uint32_t duration_hours = 1;
    std::uint64_t base_wall_ms = 1'600'000'000'000; // window anchor
    std::uint64_t seed = 1;
    std::vector<SiteSpec> sites;

    // Keys: duration_hours, base_wall_ms, seed, site.N.name, site.N.cidr,
    // site.N.hosts, site.N.rate, site.N.flows_per_hour, site.N.ack_fraction,
    // site.N.admin_fraction.
    static ScenarioSpec from_config(const Config& config);

    void validate() const; // throws ToolkitError::InvalidSpec
};

// Deterministic per (spec, seed). Forward flows are built so their computed
// rate follows the site's distribution; ack/admin flows classify as such
// under default FilterParams.
std::vector<FlowRecord> generate(const ScenarioSpec& spec);

// Catalog implied by a scenario, one site per SiteSpec in order.
SiteCatalog scenario_catalog(const ScenarioSpec& spec);

struct ReplayStats {
    std::uint64_t datagrams_sent = 0;
    std::uint64_t records_sent = 0;
    double elapsed_s = 0;
    double requested_pps = 0;
    double achieved_pps = 0;
    bool pacing_ok = false; // achieved within 5% of requested
};

// Re-packetizes records 30 per datagram with synthesized coherent headers
// (resolve_times recovers the original start/end ms exactly) and sends them
// over UDP at the requested datagram rate.
ReplayStats replay(std::span<const FlowRecord> records, const std::string& host,
                   std::uint16_t port, double pps);

// The packets replay would send, for loopback-free tests.
std::vector<std::vector<std::uint8_t>> packetize(std::span<const FlowRecord> records);

struct BenchResult {
    std::string variant; // "hash" | "sequential"
    std::size_t record_count = 0;
    double elapsed_ms = 0;
    double records_per_second = 0;
};

struct BenchComparison {
    BenchResult hash;
    BenchResult sequential;
    double speedup = 0; // sequential elapsed / hash elapsed
    bool results_identical = false;
};

// Times aggregate() with hash vs sequential lookup over the same view and
// checks both produce identical results.
BenchComparison run_bench(std::span<const FlowRecord> view, const SiteCatalog& catalog,
                          const FilterParams& params, unsigned workers = 1);

} // namespace flowmon

#endif
