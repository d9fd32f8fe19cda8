#ifndef FLOWMON_COLLECTOR_HPP
#define FLOWMON_COLLECTOR_HPP

#include <atomic>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>

#include "flowmon/flow_store.hpp"
#include "flowmon/netflow.hpp"

namespace flowmon {

struct CollectorMetrics {
    std::atomic<std::uint64_t> datagrams_received{0};
    std::atomic<std::uint64_t> records_accepted{0};
    std::atomic<std::uint64_t> records_rejected{0}; // d_pkts == 0 or d_octets < d_pkts
    std::atomic<std::uint64_t> records_dropped{0};  // store at capacity
    std::atomic<std::uint64_t> decode_errors{0};
    std::atomic<std::uint64_t> sequence_gaps{0}; // estimated lost records
    std::atomic<std::uint64_t> socket_drops{0};  // kernel-reported, when available

    std::string to_json() const;
    void write_snapshot(const std::string& path) const;
};

// Loss observability from flow_sequence discontinuities, tracked per
// (exporter address, engine_id) under modulo-2^32 arithmetic. Backward
// jumps count as exporter restarts, not gaps.
class SequenceTracker {
public:
    std::uint64_t observe(std::uint32_t source_ip, std::uint8_t engine_id,
                          std::uint32_t flow_sequence, std::uint16_t count);

private:
    struct Expected {
        std::uint32_t next_sequence = 0;
        bool seen = false;
    };

    std::unordered_map<std::uint64_t, Expected> engines_;
};

struct CollectorOptions {
    std::string bind_address = "0.0.0.0";
    std::uint16_t port = 2055;
    int rcvbuf_bytes = 4 * 1024 * 1024;
};

// The flow-record ingestion service: one receive loop on its own thread,
// funneling all appends through the store's single writer.
class Collector {
public:
    Collector(FlowStore& store, CollectorOptions options);
    ~Collector();

    Collector(const Collector&) = delete;
    Collector& operator=(const Collector&) = delete;

    // Binds and spawns the receive loop. Throws std::runtime_error when the
    // socket cannot be bound.
    void start();
    void stop();
    bool running() const { return running_.load(); }

    // Decode + timestamp resolution + append for one datagram. The receive
    // loop calls this; tests can call it directly without a socket.
    void ingest_datagram(std::span<const std::uint8_t> datagram, std::uint32_t source_ip);

    const CollectorMetrics& metrics() const { return metrics_; }

private:
    void receive_loop();

    FlowStore& store_;
    CollectorOptions options_;
    CollectorMetrics metrics_;
    SequenceTracker tracker_;
    std::atomic<bool> running_{false};
    std::atomic<bool> stop_requested_{false};
    int socket_fd_ = -1;
    std::thread thread_;
};

} // namespace flowmon

#endif
