#include "flowmon/netflow.hpp"

namespace flowmon {

namespace {

std::uint16_t load_be16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] << 8 | p[1]);
}

std::uint32_t load_be32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
           static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]);
}

void store_be16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 8);
    p[1] = static_cast<std::uint8_t>(v);
}

void store_be32(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 24);
    p[1] = static_cast<std::uint8_t>(v >> 16);
    p[2] = static_cast<std::uint8_t>(v >> 8);
    p[3] = static_cast<std::uint8_t>(v);
}

} // namespace

RawFlowRecord decode_raw_record(const std::uint8_t* p) {
    RawFlowRecord r;
    r.src_addr = load_be32(p);
    r.dst_addr = load_be32(p + 4);
    r.next_hop = load_be32(p + 8);
    r.input_if = load_be16(p + 12);
    r.output_if = load_be16(p + 14);
    r.d_pkts = load_be32(p + 16);
    r.d_octets = load_be32(p + 20);
    r.first = load_be32(p + 24);
    r.last = load_be32(p + 28);
    r.src_port = load_be16(p + 32);
    r.dst_port = load_be16(p + 34);
    r.pad1 = p[36];
    r.tcp_flags = p[37];
    r.protocol = p[38];
    r.tos = p[39];
    r.src_as = load_be16(p + 40);
    r.dst_as = load_be16(p + 42);
    r.src_mask = p[44];
    r.dst_mask = p[45];
    r.pad2 = load_be16(p + 46);
    return r;
}

void encode_raw_record(std::uint8_t* p, const RawFlowRecord& r) {
    store_be32(p, r.src_addr);
    store_be32(p + 4, r.dst_addr);
    store_be32(p + 8, r.next_hop);
    store_be16(p + 12, r.input_if);
    store_be16(p + 14, r.output_if);
    store_be32(p + 16, r.d_pkts);
    store_be32(p + 20, r.d_octets);
    store_be32(p + 24, r.first);
    store_be32(p + 28, r.last);
    store_be16(p + 32, r.src_port);
    store_be16(p + 34, r.dst_port);
    p[36] = r.pad1;
    p[37] = r.tcp_flags;
    p[38] = r.protocol;
    p[39] = r.tos;
    store_be16(p + 40, r.src_as);
    store_be16(p + 42, r.dst_as);
    p[44] = r.src_mask;
    p[45] = r.dst_mask;
    store_be16(p + 46, r.pad2);
}

DecodedPacket decode_packet(std::span<const std::uint8_t> datagram) {
    if (datagram.size() < kHeaderBytes) {
        throw CodecError(CodecError::Kind::Truncated,
                         "datagram shorter than 24-byte header: " + std::to_string(datagram.size()));
    }
    const std::uint8_t* p = datagram.data();

    DecodedPacket out;
    out.header.version = load_be16(p);
    out.header.count = load_be16(p + 2);
    out.header.sys_uptime = load_be32(p + 4);
    out.header.unix_secs = load_be32(p + 8);
    out.header.unix_nsecs = load_be32(p + 12);
    out.header.flow_sequence = load_be32(p + 16);
    out.header.engine_type = p[20];
    out.header.engine_id = p[21];
    out.header.sampling_interval = load_be16(p + 22);

    if (out.header.version != 5) {
        throw CodecError(CodecError::Kind::BadVersion,
                         "unsupported NetFlow version " + std::to_string(out.header.version));
    }
    if (out.header.count == 0 || out.header.count > kMaxRecordsPerPacket) {
        throw CodecError(CodecError::Kind::BadCount,
                         "record count " + std::to_string(out.header.count) + " outside 1..30");
    }
    const std::size_t expected = kHeaderBytes + kRecordBytes * out.header.count;
    if (datagram.size() != expected) {
        throw CodecError(CodecError::Kind::Truncated,
                         "datagram length " + std::to_string(datagram.size()) + " != expected " +
                             std::to_string(expected));
    }

    out.records.reserve(out.header.count);
    for (std::size_t i = 0; i < out.header.count; ++i) {
        out.records.push_back(decode_raw_record(p + kHeaderBytes + i * kRecordBytes));
    }
    return out;
}

std::vector<std::uint8_t> encode_packet(const ExportHeader& header,
                                        std::span<const RawFlowRecord> records) {
    if (header.count != records.size() || header.count == 0 ||
        header.count > kMaxRecordsPerPacket) {
        throw CodecError(CodecError::Kind::BadCount,
                         "count " + std::to_string(header.count) + " invalid for " +
                             std::to_string(records.size()) + " records");
    }

    std::vector<std::uint8_t> buf(kHeaderBytes + kRecordBytes * records.size());
    std::uint8_t* p = buf.data();
    store_be16(p, header.version);
    store_be16(p + 2, header.count);
    store_be32(p + 4, header.sys_uptime);
    store_be32(p + 8, header.unix_secs);
    store_be32(p + 12, header.unix_nsecs);
    store_be32(p + 16, header.flow_sequence);
    p[20] = header.engine_type;
    p[21] = header.engine_id;
    store_be16(p + 22, header.sampling_interval);

    for (std::size_t i = 0; i < records.size(); ++i) {
        encode_raw_record(p + kHeaderBytes + i * kRecordBytes, records[i]);
    }
    return buf;
}

std::uint32_t wrap_diff(std::uint32_t a, std::uint32_t b) {
    std::uint32_t d = a - b; // unsigned wraparound
    return d > 0x80000000u ? 0 : d;
}

FlowRecord resolve_times(const ExportHeader& header, const RawFlowRecord& record) {
    const std::uint64_t export_wall_ms =
        static_cast<std::uint64_t>(header.unix_secs) * 1000u + header.unix_nsecs / 1000000u;
    FlowRecord out;
    out.raw = record;
    out.start_ms = export_wall_ms - wrap_diff(header.sys_uptime, record.first);
    out.end_ms = export_wall_ms - wrap_diff(header.sys_uptime, record.last);
    if (out.end_ms < out.start_ms) {
        out.end_ms = out.start_ms; // degenerate record with last "before" first
    }
    return out;
}

} // namespace flowmon
