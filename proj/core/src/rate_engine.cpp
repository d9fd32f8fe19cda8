#include "flowmon/rate_engine.hpp"

#include <algorithm>
#include <thread>
#include <unordered_map>

namespace flowmon {

void RateHistogram::add(double rate_bps, unsigned __int128 rate_ubps) {
    if (buckets_.empty()) {
        buckets_.assign(kBucketCount, 0);
    }
    ++buckets_[bucket_index(rate_bps)];
    if (count_ == 0) {
        min_bps_ = rate_bps;
        max_bps_ = rate_bps;
    } else {
        min_bps_ = std::min(min_bps_, rate_bps);
        max_bps_ = std::max(max_bps_, rate_bps);
    }
    ++count_;
    sum_ubps_ += rate_ubps;
}

void RateHistogram::merge(const RateHistogram& other) {
    if (other.count_ == 0) {
        return;
    }
    if (count_ == 0) {
        *this = other;
        return;
    }
    for (std::size_t i = 0; i < kBucketCount; ++i) {
        buckets_[i] += other.buckets_[i];
    }
    min_bps_ = std::min(min_bps_, other.min_bps_);
    max_bps_ = std::max(max_bps_, other.max_bps_);
    count_ += other.count_;
    sum_ubps_ += other.sum_ubps_;
}

double RateHistogram::median_bps() const {
    if (count_ == 0) {
        throw RateError(RateError::Kind::EmptyHistogram, "median of empty histogram");
    }
    const std::uint64_t target = (count_ + 1) / 2; // ceil(count/2), the lower median
    std::uint64_t cumulative = 0;
    for (std::size_t k = 0; k < kBucketCount; ++k) {
        cumulative += buckets_[k];
        if (cumulative >= target) {
            if (k == kBucketCount - 1) {
                return kRateCapBps; // overflow bucket has no midpoint
            }
            return static_cast<double>(k) * kBucketWidthBps + kBucketWidthBps / 2;
        }
    }
    return kRateCapBps; // unreachable when the bucket sum matches count
}

bool RateHistogram::operator==(const RateHistogram& other) const {
    if (count_ != other.count_ || sum_ubps_ != other.sum_ubps_ || min_bps_ != other.min_bps_ ||
        max_bps_ != other.max_bps_) {
        return false;
    }
    if (buckets_.empty() || other.buckets_.empty()) {
        return buckets_.empty() == other.buckets_.empty() || count_ == 0;
    }
    return buckets_ == other.buckets_;
}

FlowClass classify(const FlowRecord& record, const FilterParams& params,
                   const SiteCatalog& catalog, LookupMode mode) {
    const RawFlowRecord& raw = record.raw;
    if (raw.d_pkts == 0) {
        return FlowClass::Administrative; // defensive; the store rejects these
    }
    // octets / pkts <= max, as a division-free comparison.
    if (raw.d_octets < (static_cast<std::uint64_t>(params.ack_avg_size_max) + 1) * raw.d_pkts) {
        return FlowClass::PureAck;
    }
    if (raw.d_pkts < params.min_packets || record.duration_ms() < params.min_duration_ms ||
        record.duration_ms() == 0) {
        return FlowClass::Administrative;
    }
    return attribute(record, catalog, mode) ? FlowClass::Forward : FlowClass::Unmatched;
}

double flow_rate(const FlowRecord& record) {
    const std::uint64_t duration = record.duration_ms();
    if (duration == 0) {
        throw RateError(RateError::Kind::ZeroDuration, "flow rate of zero-duration record");
    }
    return 8000.0 * static_cast<double>(record.raw.d_octets) / static_cast<double>(duration);
}

namespace {

// octets * 8e9 / duration; stays in 64-bit arithmetic whenever the product
// fits (octets below ~2.3e9, i.e. almost always).
inline unsigned __int128 rate_ubps_of(std::uint32_t octets, std::uint64_t duration) {
    constexpr std::uint64_t kUbpsPerOctetMs = 8'000'000'000ull;
    const std::uint64_t wide = octets;
    if (wide <= UINT64_MAX / kUbpsPerOctetMs) {
        return wide * kUbpsPerOctetMs / duration;
    }
    return static_cast<unsigned __int128>(wide) * kUbpsPerOctetMs / duration;
}

} // namespace

unsigned __int128 flow_rate_ubps(const FlowRecord& record) {
    const std::uint64_t duration = record.duration_ms();
    if (duration == 0) {
        throw RateError(RateError::Kind::ZeroDuration, "flow rate of zero-duration record");
    }
    return rate_ubps_of(record.raw.d_octets, duration);
}

std::size_t bucket_index(double rate_bps) {
    const double b = rate_bps / kBucketWidthBps;
    if (b >= static_cast<double>(kBucketCount - 1)) {
        return kBucketCount - 1;
    }
    return static_cast<std::size_t>(b);
}

std::optional<std::pair<SiteId, std::uint32_t>> attribute(const FlowRecord& record,
                                                          const SiteCatalog& catalog,
                                                          LookupMode mode) {
    if (mode == LookupMode::Hash) {
        if (auto site = catalog.lookup(record.raw.src_addr)) {
            return std::pair{*site, record.raw.src_addr};
        }
        if (auto site = catalog.lookup(record.raw.dst_addr)) {
            return std::pair{*site, record.raw.dst_addr};
        }
    } else {
        if (auto site = catalog.sequential_lookup(record.raw.src_addr)) {
            return std::pair{*site, record.raw.src_addr};
        }
        if (auto site = catalog.sequential_lookup(record.raw.dst_addr)) {
            return std::pair{*site, record.raw.dst_addr};
        }
    }
    return std::nullopt;
}

namespace {

// Per-worker accumulator. Host histograms live behind a small open-addressing
// index (power-of-two size, multiplicative hashing) so the hot loop avoids
// std::unordered_map's modulo-by-prime division.
struct Partial {
    static constexpr std::uint32_t kNoHist = 0xFFFFFFFFu;

    std::vector<std::uint64_t> keys;      // site << 32 | host ip, insertion order
    std::vector<RateHistogram> hists;     // parallel to keys
    std::vector<std::uint64_t> slot_key;
    std::vector<std::uint32_t> slot_hist; // kNoHist when free
    std::uint64_t mask = 0;
    ClassTallies tallies;

    RateHistogram& histogram_for(std::uint64_t key) {
        if (keys.size() * 2 >= slot_hist.size()) {
            grow();
        }
        std::uint64_t h = (key * 0x9E3779B97F4A7C15ull >> 32) & mask;
        while (slot_hist[h] != kNoHist) {
            if (slot_key[h] == key) {
                return hists[slot_hist[h]];
            }
            h = (h + 1) & mask;
        }
        slot_key[h] = key;
        slot_hist[h] = static_cast<std::uint32_t>(keys.size());
        keys.push_back(key);
        hists.emplace_back();
        return hists.back();
    }

    void grow() {
        const std::size_t size = slot_hist.empty() ? 1024 : slot_hist.size() * 2;
        slot_key.assign(size, 0);
        slot_hist.assign(size, kNoHist);
        mask = size - 1;
        for (std::uint32_t i = 0; i < keys.size(); ++i) {
            std::uint64_t h = (keys[i] * 0x9E3779B97F4A7C15ull >> 32) & mask;
            while (slot_hist[h] != kNoHist) {
                h = (h + 1) & mask;
            }
            slot_key[h] = keys[i];
            slot_hist[h] = i;
        }
    }
};

template <LookupMode Mode>
void reduce_slice(std::span<const FlowRecord> slice, const SiteCatalog& catalog,
                  const FilterParams& params, Partial& out) {
    for (const FlowRecord& record : slice) {
        const RawFlowRecord& raw = record.raw;
        if (raw.d_pkts == 0) {
            ++out.tallies.administrative;
            continue;
        }
        if (raw.d_octets <
            (static_cast<std::uint64_t>(params.ack_avg_size_max) + 1) * raw.d_pkts) {
            ++out.tallies.pure_ack;
            continue;
        }
        const std::uint64_t duration = record.end_ms - record.start_ms;
        if (raw.d_pkts < params.min_packets || duration < params.min_duration_ms || duration == 0) {
            ++out.tallies.administrative;
            continue;
        }
        std::optional<SiteId> site;
        std::uint32_t host = raw.src_addr;
        if constexpr (Mode == LookupMode::Hash) {
            site = catalog.lookup(raw.src_addr);
            if (!site) {
                site = catalog.lookup(raw.dst_addr);
                host = raw.dst_addr;
            }
        } else {
            site = catalog.sequential_lookup(raw.src_addr);
            if (!site) {
                site = catalog.sequential_lookup(raw.dst_addr);
                host = raw.dst_addr;
            }
        }
        if (!site) {
            ++out.tallies.unmatched;
            continue;
        }
        ++out.tallies.forward;
        const double rate = 8000.0 * static_cast<double>(raw.d_octets) / static_cast<double>(duration);
        out.histogram_for(static_cast<std::uint64_t>(*site) << 32 | host)
            .add(rate, rate_ubps_of(raw.d_octets, duration));
    }
}

RateStats stats_from(const RateHistogram& hist) {
    RateStats s;
    s.flow_count = hist.count();
    if (s.flow_count == 0) {
        return s;
    }
    s.min_bps = hist.min_bps();
    s.max_bps = hist.max_bps();
    s.avg_bps = hist.sum_bps() / static_cast<double>(s.flow_count);
    s.median_bps = std::clamp(hist.median_bps(), s.min_bps, s.max_bps);
    return s;
}

AnalysisResult finalize(std::vector<Partial>& partials, std::uint64_t window_start_ms,
                        std::uint64_t window_end_ms) {
    AnalysisResult result;
    result.window_start_ms = window_start_ms;
    result.window_end_ms = window_end_ms;

    std::map<std::uint64_t, RateHistogram> merged;
    for (Partial& p : partials) {
        result.tallies.forward += p.tallies.forward;
        result.tallies.pure_ack += p.tallies.pure_ack;
        result.tallies.administrative += p.tallies.administrative;
        result.tallies.unmatched += p.tallies.unmatched;
        for (std::size_t i = 0; i < p.keys.size(); ++i) {
            RateHistogram& dst = merged[p.keys[i]];
            if (dst.count() == 0) {
                dst = std::move(p.hists[i]); // first sighting: adopt, don't copy
            } else {
                dst.merge(p.hists[i]);
            }
        }
        p.keys.clear();
        p.hists.clear();
    }

    for (auto& [key, hist] : merged) {
        const SiteId site = static_cast<SiteId>(key >> 32);
        const std::uint32_t host = static_cast<std::uint32_t>(key);
        SiteResult& sr = result.sites[site];
        sr.histogram.merge(hist);
        HostResult& hr = sr.hosts[host];
        hr.stats = stats_from(hist);
        hr.histogram = std::move(hist);
    }
    for (auto& [site, sr] : result.sites) {
        sr.stats = stats_from(sr.histogram);
    }
    return result;
}

AnalysisResult run_partitioned(std::span<const FlowRecord> view, const SiteCatalog& catalog,
                               const FilterParams& params,
                               const std::vector<std::size_t>& boundaries, bool threaded,
                               LookupMode mode, std::uint64_t window_start_ms,
                               std::uint64_t window_end_ms) {
    std::vector<std::span<const FlowRecord>> slices;
    std::size_t prev = 0;
    for (std::size_t b : boundaries) {
        slices.push_back(view.subspan(prev, b - prev));
        prev = b;
    }
    slices.push_back(view.subspan(prev));

    std::vector<Partial> partials(slices.size());
    auto work = [&](std::size_t i) {
        if (mode == LookupMode::Hash) {
            reduce_slice<LookupMode::Hash>(slices[i], catalog, params, partials[i]);
        } else {
            reduce_slice<LookupMode::Sequential>(slices[i], catalog, params, partials[i]);
        }
    };

    if (threaded && slices.size() > 1) {
        std::vector<std::thread> threads;
        threads.reserve(slices.size());
        for (std::size_t i = 0; i < slices.size(); ++i) {
            threads.emplace_back(work, i);
        }
        for (std::thread& t : threads) {
            t.join();
        }
    } else {
        for (std::size_t i = 0; i < slices.size(); ++i) {
            work(i);
        }
    }
    return finalize(partials, window_start_ms, window_end_ms);
}

} // namespace

AnalysisResult aggregate(std::span<const FlowRecord> view, const SiteCatalog& catalog,
                         const FilterParams& params, unsigned workers, LookupMode mode,
                         std::uint64_t window_start_ms, std::uint64_t window_end_ms) {
    if (workers == 0) {
        workers = 1;
    }
    std::vector<std::size_t> boundaries;
    for (unsigned i = 1; i < workers; ++i) {
        boundaries.push_back(view.size() * i / workers);
    }
    return run_partitioned(view, catalog, params, boundaries, workers > 1, mode, window_start_ms,
                           window_end_ms);
}

AnalysisResult aggregate_partitioned(std::span<const FlowRecord> view, const SiteCatalog& catalog,
                                     const FilterParams& params,
                                     const std::vector<std::size_t>& boundaries, LookupMode mode,
                                     std::uint64_t window_start_ms, std::uint64_t window_end_ms) {
    return run_partitioned(view, catalog, params, boundaries, false, mode, window_start_ms,
                           window_end_ms);
}

} // namespace flowmon
