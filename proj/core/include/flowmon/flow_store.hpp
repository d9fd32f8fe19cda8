#ifndef FLOWMON_FLOW_STORE_HPP
#define FLOWMON_FLOW_STORE_HPP

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowmon/netflow.hpp"

namespace flowmon {

inline constexpr std::uint64_t kDefaultStoreCapacity = 50'000'000;
inline constexpr char kArchiveMagic[8] = {'F', 'L', 'O', 'W', 'A', 'R', 'C', '1'};
inline constexpr std::uint32_t kArchiveVersion = 1;
inline constexpr std::size_t kArchiveHeaderBytes = 20; // magic + version + count
inline constexpr std::size_t kArchiveEntryBytes = 64;  // start_ms + end_ms + raw record

class ArchiveError : public std::runtime_error {
public:
    enum class Kind { BadMagic, BadVersion, TruncatedArchive, IoFailure };

    ArchiveError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Immutable copy of the records whose end_ms falls in [start_ms, end_ms),
// taken at a point in the store's append order. Later appends never alter it.
class Snapshot {
public:
    Snapshot(std::vector<FlowRecord> records, std::uint64_t start_ms, std::uint64_t end_ms,
             std::uint64_t base_size)
        : records_(std::move(records)), start_ms_(start_ms), end_ms_(end_ms),
          base_size_(base_size) {}

    std::span<const FlowRecord> records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    std::uint64_t window_start_ms() const { return start_ms_; }
    std::uint64_t window_end_ms() const { return end_ms_; }

    // Store size when the snapshot was taken; feeds mark_analyzed().
    std::uint64_t base_size() const { return base_size_; }

private:
    std::vector<FlowRecord> records_;
    std::uint64_t start_ms_;
    std::uint64_t end_ms_;
    std::uint64_t base_size_;
};

// Bounded in-memory buffer of time-normalized flow records. Single-writer
// appends, any number of concurrent snapshot readers. Records live in
// fixed-size chunks so appends never relocate existing records; snapshot
// creation holds the writer lock only long enough to copy the chunk list.
class FlowStore {
public:
    explicit FlowStore(std::uint64_t capacity = kDefaultStoreCapacity);

    // Appends in order until full. Returns how many records fit; the
    // shortfall is recorded in dropped_records().
    std::size_t append(std::span<const FlowRecord> records);

    Snapshot snapshot(std::uint64_t start_ms, std::uint64_t end_ms) const;

    std::uint64_t size() const;
    std::uint64_t capacity() const { return capacity_; }
    std::uint64_t dropped_records() const;

    // Records already analyzed (an append-order prefix); set by the monitor
    // after each cycle, consumed by flush().
    std::uint64_t watermark() const;
    void mark_analyzed(std::uint64_t prefix_count);

    // Writes the analyzed prefix to an archive file and removes it from
    // memory. Returns the number of records flushed.
    std::uint64_t flush(const std::string& path);

    static std::vector<FlowRecord> load(const std::string& path);
    static void write_archive(const std::string& path, std::span<const FlowRecord> records);

private:
    static constexpr std::size_t kChunkRecords = 1u << 18;

    using Chunk = std::vector<FlowRecord>;

    std::uint64_t capacity_;
    std::vector<std::shared_ptr<Chunk>> chunks_;
    std::uint64_t size_ = 0;
    std::uint64_t dropped_ = 0;
    std::uint64_t watermark_ = 0;
    mutable std::mutex mutex_;
};

} // namespace flowmon

#endif
