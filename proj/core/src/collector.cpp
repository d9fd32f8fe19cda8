#include "flowmon/collector.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace flowmon {

std::string CollectorMetrics::to_json() const {
    nlohmann::json doc{{"datagrams_received", datagrams_received.load()},
                       {"records_accepted", records_accepted.load()},
                       {"records_rejected", records_rejected.load()},
                       {"records_dropped", records_dropped.load()},
                       {"decode_errors", decode_errors.load()},
                       {"sequence_gaps", sequence_gaps.load()},
                       {"socket_drops", socket_drops.load()}};
    return doc.dump(2);
}

void CollectorMetrics::write_snapshot(const std::string& path) const {
    std::ofstream out(path);
    out << to_json() << '\n';
    if (!out) {
        throw std::runtime_error("cannot write metrics snapshot " + path);
    }
}

std::uint64_t SequenceTracker::observe(std::uint32_t source_ip, std::uint8_t engine_id,
                                       std::uint32_t flow_sequence, std::uint16_t count) {
    const std::uint64_t key = static_cast<std::uint64_t>(source_ip) << 8 | engine_id;
    Expected& expected = engines_[key];
    std::uint64_t gap = 0;
    if (expected.seen) {
        const std::uint32_t delta = flow_sequence - expected.next_sequence; // mod 2^32
        if (delta <= 0x80000000u) {
            gap = delta;
        }
        // else: sequence went backwards (reorder or exporter restart); resync
    }
    expected.seen = true;
    expected.next_sequence = flow_sequence + count; // mod 2^32
    return gap;
}

Collector::Collector(FlowStore& store, CollectorOptions options)
    : store_(store), options_(std::move(options)) {}

Collector::~Collector() { stop(); }

void Collector::start() {
    socket_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (socket_fd_ < 0) {
        throw std::runtime_error("socket() failed: " + std::string(std::strerror(errno)));
    }
    int reuse = 1;
    ::setsockopt(socket_fd_, SOL_SOCKET, SO_REUSEADDR, &reuse, sizeof reuse);
    ::setsockopt(socket_fd_, SOL_SOCKET, SO_RCVBUF, &options_.rcvbuf_bytes,
                 sizeof options_.rcvbuf_bytes);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options_.port);
    if (::inet_pton(AF_INET, options_.bind_address.c_str(), &addr.sin_addr) != 1) {
        ::close(socket_fd_);
        socket_fd_ = -1;
        throw std::runtime_error("bad bind address " + options_.bind_address);
    }
    if (::bind(socket_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(socket_fd_);
        socket_fd_ = -1;
        throw std::runtime_error("cannot bind " + options_.bind_address + ":" +
                                 std::to_string(options_.port) + ": " + std::strerror(errno));
    }

    stop_requested_.store(false);
    running_.store(true);
    thread_ = std::thread(&Collector::receive_loop, this);
}

void Collector::stop() {
    stop_requested_.store(true);
    if (thread_.joinable()) {
        thread_.join();
    }
    if (socket_fd_ >= 0) {
        ::close(socket_fd_);
        socket_fd_ = -1;
    }
    running_.store(false);
}

void Collector::ingest_datagram(std::span<const std::uint8_t> datagram, std::uint32_t source_ip) {
    metrics_.datagrams_received.fetch_add(1, std::memory_order_relaxed);

    DecodedPacket packet;
    try {
        packet = decode_packet(datagram);
    } catch (const CodecError&) {
        metrics_.decode_errors.fetch_add(1, std::memory_order_relaxed);
        return;
    }

    metrics_.sequence_gaps.fetch_add(
        tracker_.observe(source_ip, packet.header.engine_id, packet.header.flow_sequence,
                         packet.header.count),
        std::memory_order_relaxed);

    std::vector<FlowRecord> resolved;
    resolved.reserve(packet.records.size());
    for (const RawFlowRecord& raw : packet.records) {
        if (raw.d_pkts == 0 || raw.d_octets < raw.d_pkts) {
            metrics_.records_rejected.fetch_add(1, std::memory_order_relaxed);
            continue;
        }
        resolved.push_back(resolve_times(packet.header, raw));
    }
    const std::size_t accepted = store_.append(resolved);
    metrics_.records_accepted.fetch_add(accepted, std::memory_order_relaxed);
    metrics_.records_dropped.fetch_add(resolved.size() - accepted, std::memory_order_relaxed);
}

void Collector::receive_loop() {
    std::vector<std::uint8_t> buf(65536);
    while (!stop_requested_.load(std::memory_order_relaxed)) {
        pollfd pfd{socket_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, 100);
        if (ready <= 0) {
            continue;
        }
        sockaddr_in from{};
        socklen_t from_len = sizeof from;
        const ssize_t n = ::recvfrom(socket_fd_, buf.data(), buf.size(), 0,
                                     reinterpret_cast<sockaddr*>(&from), &from_len);
        if (n <= 0) {
            continue;
        }
        ingest_datagram(std::span(buf.data(), static_cast<std::size_t>(n)),
                        ntohl(from.sin_addr.s_addr));
    }
    running_.store(false);
}

} // namespace flowmon
