#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <set>
#include <thread>

#include "flowmon/collector.hpp"
#include "flowmon/toolkit.hpp"

using namespace flowmon;

namespace {

ScenarioSpec small_scenario() {
    ScenarioSpec spec;
    spec.duration_hours = 1;
    spec.seed = 42;
    SiteSpec site;
    site.name = "SiteA";
    site.cidr = "10.1.1.0/24";
    site.host_count = 4;
    site.rate = RateDistribution::parse("fixed:2000000");
    site.flows_per_hour = 1000;
    site.ack_fraction = 0.25;
    site.admin_fraction = 0.10;
    spec.sites.push_back(site);
    return spec;
}

} // namespace

TEST_CASE("rate distribution parsing") {
    auto fixed = RateDistribution::parse("fixed:2500000");
    CHECK(fixed.kind == RateDistribution::Kind::Fixed);
    CHECK(fixed.fixed_bps == doctest::Approx(2.5e6));

    auto logn = RateDistribution::parse("lognormal:14.5,1.2");
    CHECK(logn.kind == RateDistribution::Kind::Lognormal);
    CHECK(logn.lognormal_mu == doctest::Approx(14.5));
    CHECK(logn.lognormal_sigma == doctest::Approx(1.2));

    CHECK_THROWS_AS(RateDistribution::parse("uniform:1,2"), ToolkitError);
    CHECK_THROWS_AS(RateDistribution::parse("fixed:-5"), ToolkitError);
    CHECK_THROWS_AS(RateDistribution::parse("lognormal:14.5"), ToolkitError);
}

TEST_CASE("scenario spec from config") {
    Config config = Config::parse_string("duration_hours = 2\n"
                                         "seed = 7\n"
                                         "site.0.name = SiteA\n"
                                         "site.0.cidr = 10.1.0.0/22\n"
                                         "site.0.hosts = 10\n"
                                         "site.0.rate = lognormal:14.0,0.5\n"
                                         "site.0.flows_per_hour = 500\n"
                                         "site.0.ack_fraction = 0.2\n"
                                         "site.1.name = SiteB\n");
    const auto spec = ScenarioSpec::from_config(config);
    CHECK(spec.duration_hours == 2);
    CHECK(spec.seed == 7);
    REQUIRE(spec.sites.size() == 2);
    CHECK(spec.sites[0].name == "SiteA");
    CHECK(spec.sites[0].cidr == "10.1.0.0/22");
    CHECK(spec.sites[0].host_count == 10);
    CHECK(spec.sites[0].rate.kind == RateDistribution::Kind::Lognormal);
    CHECK(spec.sites[0].flows_per_hour == 500);
    CHECK(spec.sites[0].ack_fraction == doctest::Approx(0.2));
    CHECK(spec.sites[1].cidr == "10.1.0.0/24"); // default fills in
}

TEST_CASE("scenario validation rejects bad fractions and host counts") {
    ScenarioSpec spec = small_scenario();
    SUBCASE("fractions above one") { spec.sites[0].ack_fraction = 1.5; }
    SUBCASE("fractions summing above one") {
        spec.sites[0].ack_fraction = 0.7;
        spec.sites[0].admin_fraction = 0.6;
    }
    SUBCASE("zero hosts") { spec.sites[0].host_count = 0; }
    CHECK_THROWS_AS(spec.validate(), ToolkitError);

    // A malformed CIDR surfaces as the catalog's own error type.
    spec = small_scenario();
    spec.sites[0].cidr = "10.1.1.0/33";
    CHECK_THROWS_AS(spec.validate(), CatalogError);
}

TEST_CASE("generation is deterministic in the seed") {
    const ScenarioSpec spec = small_scenario();
    const auto a = generate(spec);
    const auto b = generate(spec);
    CHECK(a == b);

    ScenarioSpec other = spec;
    other.seed = 43;
    CHECK(generate(other) != a);
}

TEST_CASE("generated class mix matches the requested fractions") {
    const ScenarioSpec spec = small_scenario();
    const auto records = generate(spec);
    REQUIRE(records.size() == 1000);

    const SiteCatalog catalog = scenario_catalog(spec);
    ClassTallies tallies;
    for (const FlowRecord& record : records) {
        switch (classify(record, FilterParams{}, catalog)) {
        case FlowClass::PureAck: ++tallies.pure_ack; break;
        case FlowClass::Administrative: ++tallies.administrative; break;
        case FlowClass::Forward: ++tallies.forward; break;
        case FlowClass::Unmatched: ++tallies.unmatched; break;
        }
    }
    CHECK(tallies.pure_ack == 250);
    CHECK(tallies.administrative == 100);
    CHECK(tallies.forward == 650);
    CHECK(tallies.unmatched == 0);
}

TEST_CASE("fixed-rate forward flows compute to the exact requested rate") {
    const ScenarioSpec spec = small_scenario();
    const SiteCatalog catalog = scenario_catalog(spec);
    int forward = 0;
    for (const FlowRecord& record : generate(spec)) {
        if (classify(record, FilterParams{}, catalog) == FlowClass::Forward) {
            CHECK(flow_rate(record) == 2'000'000.0);
            CHECK(bucket_index(flow_rate(record)) == 200);
            ++forward;
        }
    }
    CHECK(forward == 650);
}

TEST_CASE("generated hosts stay inside the site prefix, remotes outside") {
    const ScenarioSpec spec = small_scenario();
    const SiteCatalog catalog = scenario_catalog(spec);
    std::set<std::uint32_t> hosts;
    for (const FlowRecord& record : generate(spec)) {
        const auto hit = attribute(record, catalog);
        REQUIRE(hit.has_value());
        CHECK((hit->second & 0xFFFFFF00u) == parse_ipv4("10.1.1.0"));
        hosts.insert(hit->second);
        // Exactly one endpoint belongs to the site.
        CHECK(catalog.lookup(record.raw.src_addr).has_value() !=
              catalog.lookup(record.raw.dst_addr).has_value());
    }
    CHECK(hosts.size() == spec.sites[0].host_count);
}

TEST_CASE("lognormal scenarios respect the rate cap bounds") {
    ScenarioSpec spec = small_scenario();
    spec.sites[0].rate = RateDistribution::parse("lognormal:16.0,2.0");
    spec.sites[0].ack_fraction = 0;
    spec.sites[0].admin_fraction = 0;
    const SiteCatalog catalog = scenario_catalog(spec);
    for (const FlowRecord& record : generate(spec)) {
        REQUIRE(classify(record, FilterParams{}, catalog) == FlowClass::Forward);
        const double rate = flow_rate(record);
        CHECK(rate > 0);
        CHECK(rate <= 130e6); // clamped at generation, small rounding slack
    }
}

TEST_CASE("packetize batches 30 records with recoverable timestamps") {
    const auto records = generate(small_scenario());
    const auto packets = packetize(records);
    REQUIRE(packets.size() == (records.size() + 29) / 30);

    std::size_t index = 0;
    std::uint32_t expected_sequence = 0;
    for (const auto& packet : packets) {
        const auto decoded = decode_packet(packet);
        CHECK(decoded.header.flow_sequence == expected_sequence);
        expected_sequence += decoded.header.count;
        for (const RawFlowRecord& raw : decoded.records) {
            const FlowRecord resolved = resolve_times(decoded.header, raw);
            CHECK(resolved.start_ms == records[index].start_ms);
            CHECK(resolved.end_ms == records[index].end_ms);
            CHECK(resolved.raw.d_octets == records[index].raw.d_octets);
            CHECK(resolved.raw.d_pkts == records[index].raw.d_pkts);
            ++index;
        }
    }
    CHECK(index == records.size());
}

TEST_CASE("replay through a live collector reproduces the records") {
    ScenarioSpec spec = small_scenario();
    spec.sites[0].flows_per_hour = 300;
    const auto records = generate(spec);

    FlowStore store(1 << 16);
    CollectorOptions options;
    options.bind_address = "127.0.0.1";
    options.port = 39556;
    Collector collector(store, options);
    collector.start();

    const auto stats = replay(records, "127.0.0.1", options.port, 500.0);
    CHECK(stats.datagrams_sent == 10);
    CHECK(stats.records_sent == 300);

    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
    while (collector.metrics().records_accepted < 300 &&
           std::chrono::steady_clock::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    collector.stop();

    REQUIRE(collector.metrics().records_accepted == 300);
    CHECK(collector.metrics().sequence_gaps == 0);

    // Collected records match the generated ones exactly (same order).
    auto snap = store.snapshot(0, UINT64_MAX);
    REQUIRE(snap.size() == records.size());
    std::vector<FlowRecord> got(snap.records().begin(), snap.records().end());
    CHECK(got == records);
}

TEST_CASE("bench compares lookup modes on identical results") {
    ScenarioSpec spec = small_scenario();
    spec.sites[0].flows_per_hour = 2000;
    const auto records = generate(spec);
    const SiteCatalog catalog = scenario_catalog(spec);

    const auto cmp = run_bench(records, catalog, FilterParams{});
    CHECK(cmp.results_identical);
    CHECK(cmp.hash.record_count == records.size());
    CHECK(cmp.sequential.record_count == records.size());
    CHECK(cmp.hash.elapsed_ms > 0);
    CHECK(cmp.sequential.elapsed_ms > 0);
    CHECK(cmp.speedup > 0);
}
