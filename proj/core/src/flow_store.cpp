#include "flowmon/flow_store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace flowmon {

namespace {

void store_be32(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 24);
    p[1] = static_cast<std::uint8_t>(v >> 16);
    p[2] = static_cast<std::uint8_t>(v >> 8);
    p[3] = static_cast<std::uint8_t>(v);
}

void store_be64(std::uint8_t* p, std::uint64_t v) {
    store_be32(p, static_cast<std::uint32_t>(v >> 32));
    store_be32(p + 4, static_cast<std::uint32_t>(v));
}

std::uint32_t load_be32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
           static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]);
}

std::uint64_t load_be64(const std::uint8_t* p) {
    return static_cast<std::uint64_t>(load_be32(p)) << 32 | load_be32(p + 4);
}

} // namespace

FlowStore::FlowStore(std::uint64_t capacity) : capacity_(capacity) {}

std::size_t FlowStore::append(std::span<const FlowRecord> records) {
    std::lock_guard lock(mutex_);
    std::size_t accepted = 0;
    for (const FlowRecord& r : records) {
        if (size_ >= capacity_) {
            break;
        }
        const std::size_t chunk_index = static_cast<std::size_t>(size_ / kChunkRecords);
        const std::size_t offset = static_cast<std::size_t>(size_ % kChunkRecords);
        if (chunk_index == chunks_.size()) {
            auto chunk = std::make_shared<Chunk>();
            chunk->reserve(kChunkRecords);
            chunks_.push_back(std::move(chunk));
        }
        Chunk& chunk = *chunks_[chunk_index];
        if (chunk.size() <= offset) {
            chunk.resize(offset + 1);
        }
        chunk[offset] = r;
        ++size_;
        ++accepted;
    }
    dropped_ += records.size() - accepted;
    return accepted;
}

Snapshot FlowStore::snapshot(std::uint64_t start_ms, std::uint64_t end_ms) const {
    std::vector<std::shared_ptr<Chunk>> chunks;
    std::uint64_t size;
    {
        std::lock_guard lock(mutex_);
        chunks = chunks_;
        size = size_;
    }
    std::vector<FlowRecord> matched;
    for (std::uint64_t i = 0; i < size; ++i) {
        const FlowRecord& r =
            (*chunks[static_cast<std::size_t>(i / kChunkRecords)])[static_cast<std::size_t>(
                i % kChunkRecords)];
        if (r.end_ms >= start_ms && r.end_ms < end_ms) {
            matched.push_back(r);
        }
    }
    return Snapshot(std::move(matched), start_ms, end_ms, size);
}

std::uint64_t FlowStore::size() const {
    std::lock_guard lock(mutex_);
    return size_;
}

std::uint64_t FlowStore::dropped_records() const {
    std::lock_guard lock(mutex_);
    return dropped_;
}

std::uint64_t FlowStore::watermark() const {
    std::lock_guard lock(mutex_);
    return watermark_;
}

void FlowStore::mark_analyzed(std::uint64_t prefix_count) {
    std::lock_guard lock(mutex_);
    watermark_ = std::min(prefix_count, size_);
}

std::uint64_t FlowStore::flush(const std::string& path) {
    std::vector<FlowRecord> flushed;
    {
        std::lock_guard lock(mutex_);
        flushed.reserve(static_cast<std::size_t>(watermark_));
        for (std::uint64_t i = 0; i < watermark_; ++i) {
            flushed.push_back(
                (*chunks_[static_cast<std::size_t>(i / kChunkRecords)])[static_cast<std::size_t>(
                    i % kChunkRecords)]);
        }
    }
    if (flushed.empty()) {
        return 0;
    }
    write_archive(path, flushed);

    // Remove the flushed prefix. Appends between the copy and here only add
    // records past the prefix, so compaction by count stays correct.
    std::lock_guard lock(mutex_);
    std::vector<FlowRecord> remaining;
    remaining.reserve(static_cast<std::size_t>(size_ - flushed.size()));
    for (std::uint64_t i = flushed.size(); i < size_; ++i) {
        remaining.push_back(
            (*chunks_[static_cast<std::size_t>(i / kChunkRecords)])[static_cast<std::size_t>(
                i % kChunkRecords)]);
    }
    chunks_.clear();
    size_ = 0;
    watermark_ = 0;
    for (std::size_t done = 0; done < remaining.size();) {
        const std::size_t take = std::min(kChunkRecords, remaining.size() - done);
        auto chunk = std::make_shared<Chunk>();
        chunk->reserve(kChunkRecords);
        chunk->assign(remaining.begin() + static_cast<std::ptrdiff_t>(done),
                      remaining.begin() + static_cast<std::ptrdiff_t>(done + take));
        chunks_.push_back(std::move(chunk));
        size_ += take;
        done += take;
    }
    return flushed.size();
}

void FlowStore::write_archive(const std::string& path, std::span<const FlowRecord> records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ArchiveError(ArchiveError::Kind::IoFailure, "cannot open " + path + " for writing");
    }
    std::uint8_t header[kArchiveHeaderBytes];
    std::memcpy(header, kArchiveMagic, 8);
    store_be32(header + 8, kArchiveVersion);
    store_be64(header + 12, records.size());
    out.write(reinterpret_cast<const char*>(header), sizeof header);

    std::vector<std::uint8_t> entry(kArchiveEntryBytes);
    for (const FlowRecord& r : records) {
        store_be64(entry.data(), r.start_ms);
        store_be64(entry.data() + 8, r.end_ms);
        encode_raw_record(entry.data() + 16, r.raw);
        out.write(reinterpret_cast<const char*>(entry.data()), kArchiveEntryBytes);
    }
    if (!out) {
        throw ArchiveError(ArchiveError::Kind::IoFailure, "write failed for " + path);
    }
}

std::vector<FlowRecord> FlowStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ArchiveError(ArchiveError::Kind::IoFailure, "cannot open " + path);
    }
    std::uint8_t header[kArchiveHeaderBytes];
    in.read(reinterpret_cast<char*>(header), sizeof header);
    if (in.gcount() != kArchiveHeaderBytes) {
        throw ArchiveError(ArchiveError::Kind::TruncatedArchive, "archive header truncated: " + path);
    }
    if (std::memcmp(header, kArchiveMagic, 8) != 0) {
        throw ArchiveError(ArchiveError::Kind::BadMagic, "bad archive magic in " + path);
    }
    const std::uint32_t version = load_be32(header + 8);
    if (version != kArchiveVersion) {
        throw ArchiveError(ArchiveError::Kind::BadVersion,
                           "unsupported archive version " + std::to_string(version));
    }
    const std::uint64_t count = load_be64(header + 12);

    std::vector<FlowRecord> records;
    records.reserve(static_cast<std::size_t>(count));
    std::vector<std::uint8_t> entry(kArchiveEntryBytes);
    for (std::uint64_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(entry.data()), kArchiveEntryBytes);
        if (in.gcount() != static_cast<std::streamsize>(kArchiveEntryBytes)) {
            throw ArchiveError(ArchiveError::Kind::TruncatedArchive,
                               "archive body truncated at record " + std::to_string(i));
        }
        FlowRecord r;
        r.start_ms = load_be64(entry.data());
        r.end_ms = load_be64(entry.data() + 8);
        r.raw = decode_raw_record(entry.data() + 16);
        records.push_back(r);
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
        throw ArchiveError(ArchiveError::Kind::TruncatedArchive,
                           "trailing bytes after " + std::to_string(count) + " records");
    }
    return records;
}

} // namespace flowmon
