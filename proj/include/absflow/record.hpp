#pragma once

#include "absflow/codec.hpp"
#include "absflow/ids.hpp"

#include <cstdint>
#include <string>
#include <variant>

namespace absflow
{
    /// A data record. `source`/`seq` identify the source record it derives
    /// from; `lineage` identifies the channel path it travelled, so that seq
    /// is strictly increasing per (source, lineage) along any FIFO path.
    struct Record
    {
        std::string key;
        std::int64_t value = 0;
        TaskId source;
        std::uint64_t seq = 0;
        std::uint64_t lineage = 0;

        bool operator==(const Record &) const = default;
    };

    struct Barrier
    {
        std::uint64_t epoch = 0;
        bool operator==(const Barrier &) const = default;
    };

    enum class ControlKind : std::uint8_t
    {
        Halt,
        Resume,
        SnapshotRequest,
    };

    /// Control messages are only used by the synchronous baseline.
    struct Control
    {
        ControlKind kind = ControlKind::Halt;
        std::uint64_t epoch = 0;
        bool operator==(const Control &) const = default;
    };

    using Message = std::variant<Record, Barrier, Control>;

    inline bool is_data(const Message &m) noexcept { return std::holds_alternative<Record>(m); }

    /// Salt identifying one output channel in lineage hashes.
    inline std::uint64_t channel_salt(const ChannelId &c) noexcept
    {
        return mix64(fnv1a(c.str()));
    }

    /// Lineage of the k-th record a task emits on one output port while
    /// handling a record of lineage `parent`.
    constexpr std::uint64_t next_lineage(std::uint64_t parent, std::uint64_t salt, std::uint32_t k) noexcept
    {
        return mix64(parent ^ mix64(salt + k));
    }

    void encode(ByteWriter &w, const Record &r);
    Record decode_record(ByteReader &r);
    void encode(ByteWriter &w, const Message &m);
    Message decode_message(ByteReader &r);
} // namespace absflow
