#pragma once

#include "absflow/ids.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace absflow
{
    /// Payload of the i-th record a source emits.
    struct SourceItem
    {
        std::string key;
        std::int64_t value = 0;
    };

    /// Records of one source: an explicit list or a seeded generator. Items
    /// are a pure function of the index so replay after recovery re-emits the
    /// same payloads.
    class SourceWorkload
    {
    public:
        struct Generator
        {
            std::uint64_t count = 0;
            std::uint32_t keys = 16;
            std::uint64_t seed = 0;
            std::int64_t value = 1;
        };

        SourceWorkload() = default;
        static SourceWorkload from_items(std::vector<SourceItem> items);
        static SourceWorkload from_keys(const std::vector<std::string> &keys, std::int64_t value = 1);
        static SourceWorkload generated(Generator g);

        std::uint64_t size() const noexcept;
        SourceItem at(std::uint64_t index) const;

        bool is_generated() const noexcept { return generated_; }
        const Generator &generator() const noexcept { return gen_; }
        const std::vector<SourceItem> &items() const noexcept { return items_; }

    private:
        bool generated_ = false;
        Generator gen_;
        std::vector<SourceItem> items_;
    };

    /// Per-source inputs of one run. Sources without an entry use `fallback`.
    struct Workload
    {
        std::map<TaskId, SourceWorkload> sources;
        SourceWorkload fallback;

        const SourceWorkload &for_source(const TaskId &id) const;
    };
} // namespace absflow
