#ifndef FLOWMON_NETFLOW_HPP
#define FLOWMON_NETFLOW_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowmon {

inline constexpr std::size_t kHeaderBytes = 24;
inline constexpr std::size_t kRecordBytes = 48;
inline constexpr std::size_t kMaxRecordsPerPacket = 30;

// 24-byte NetFlow v5 export header.
struct ExportHeader {
    std::uint16_t version = 5;
    std::uint16_t count = 0;
    std::uint32_t sys_uptime = 0;    // ms since exporter boot
    std::uint32_t unix_secs = 0;
    std::uint32_t unix_nsecs = 0;
    std::uint32_t flow_sequence = 0; // cumulative record counter
    std::uint8_t engine_type = 0;
    std::uint8_t engine_id = 0;
    std::uint16_t sampling_interval = 0; // decoded, ignored by analytics

    bool operator==(const ExportHeader&) const = default;
};

// 48-byte NetFlow v5 flow record, timestamps still in exporter uptime ms.
struct RawFlowRecord {
    std::uint32_t src_addr = 0;
    std::uint32_t dst_addr = 0;
    std::uint32_t next_hop = 0;
    std::uint16_t input_if = 0;
    std::uint16_t output_if = 0;
    std::uint32_t d_pkts = 0;
    std::uint32_t d_octets = 0;
    std::uint32_t first = 0; // uptime ms of first packet
    std::uint32_t last = 0;  // uptime ms of last packet
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    std::uint8_t pad1 = 0;
    std::uint8_t tcp_flags = 0;
    std::uint8_t protocol = 0;
    std::uint8_t tos = 0;
    std::uint16_t src_as = 0;
    std::uint16_t dst_as = 0;
    std::uint8_t src_mask = 0;
    std::uint8_t dst_mask = 0;
    std::uint16_t pad2 = 0;

    bool operator==(const RawFlowRecord&) const = default;
};

// A raw record with its timestamps anchored to wall-clock time using the
// carrying header. Records from different export packets are comparable.
struct FlowRecord {
    RawFlowRecord raw;
    std::uint64_t start_ms = 0;
    std::uint64_t end_ms = 0;

    std::uint64_t duration_ms() const { return end_ms - start_ms; }

    bool operator==(const FlowRecord&) const = default;
};

class CodecError : public std::runtime_error {
public:
    enum class Kind { BadVersion, Truncated, BadCount };

    CodecError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct DecodedPacket {
    ExportHeader header;
    std::vector<RawFlowRecord> records;

    bool operator==(const DecodedPacket&) const = default;
};

// Parses one export datagram. Throws CodecError on bad version, bad count,
// or a length other than 24 + 48*count.
DecodedPacket decode_packet(std::span<const std::uint8_t> datagram);

// Serializes header + records, big-endian, 24 + 48*count bytes.
// header.count must equal records.size() and lie in 1..30.
std::vector<std::uint8_t> encode_packet(const ExportHeader& header,
                                        std::span<const RawFlowRecord> records);

// Single-record codec, used by the packet codec and the archive format.
RawFlowRecord decode_raw_record(const std::uint8_t* bytes48);
void encode_raw_record(std::uint8_t* bytes48, const RawFlowRecord& record);

// Non-negative ms delta a - b under modulo-2^32 arithmetic. Deltas that
// would exceed 2^31 (i.e. b is "after" a) clamp to 0.
std::uint32_t wrap_diff(std::uint32_t a, std::uint32_t b);

// Anchors a record's uptime timestamps to wall-clock ms via its header.
FlowRecord resolve_times(const ExportHeader& header, const RawFlowRecord& record);

} // namespace flowmon

#endif
