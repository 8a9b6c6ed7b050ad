#pragma once

#include "absflow/codec.hpp"
#include "absflow/ids.hpp"
#include "absflow/record.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>

namespace absflow
{
    /// Highest provenance seq applied per (source, lineage). Records at or
    /// below the cursor are duplicates and never reach the UDF.
    class DedupCursor
    {
    public:
        using Key = std::pair<TaskId, std::uint64_t>;

        std::uint64_t position(const TaskId &source, std::uint64_t lineage) const;

        /// Returns true (keep) and advances when `seq` is beyond the cursor.
        bool admit(const TaskId &source, std::uint64_t lineage, std::uint64_t seq);

        const std::map<Key, std::uint64_t> &entries() const noexcept { return entries_; }
        std::size_t size() const noexcept { return entries_.size(); }

        bool operator==(const DedupCursor &) const = default;

        void encode(ByteWriter &w) const;
        static DedupCursor decode(ByteReader &r);

    private:
        std::map<Key, std::uint64_t> entries_;
    };

    /// Operator state of one task: a source offset, a keyed table used by
    /// aggregates and sinks, and the task's dedup cursor.
    struct OperatorState
    {
        std::uint64_t offset = 0;
        std::map<std::string, std::int64_t> table;
        DedupCursor cursor;

        bool operator==(const OperatorState &) const = default;

        std::string serialize() const;
        static OperatorState deserialize(std::string_view bytes);

        /// Parses a literal such as `offset=3,a=1,b=2`. Empty means default.
        static OperatorState parse_literal(std::string_view literal);
        std::string to_literal() const;
    };

    inline constexpr std::uint8_t kStateFormatVersion = 1;
} // namespace absflow
