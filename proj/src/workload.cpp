#include "absflow/workload.hpp"

#include "absflow/codec.hpp"

#include <stdexcept>

namespace absflow
{
    SourceWorkload SourceWorkload::from_items(std::vector<SourceItem> items)
    {
        SourceWorkload w;
        w.items_ = std::move(items);
        return w;
    }

    SourceWorkload SourceWorkload::from_keys(const std::vector<std::string> &keys, std::int64_t value)
    {
        std::vector<SourceItem> items;
        items.reserve(keys.size());
        for (const auto &k : keys)
        {
            items.push_back({k, value});
        }
        return from_items(std::move(items));
    }

    SourceWorkload SourceWorkload::generated(Generator g)
    {
        if (g.keys == 0)
        {
            throw std::invalid_argument("generator needs at least one key");
        }
        SourceWorkload w;
        w.generated_ = true;
        w.gen_ = g;
        return w;
    }

    std::uint64_t SourceWorkload::size() const noexcept
    {
        return generated_ ? gen_.count : items_.size();
    }

    SourceItem SourceWorkload::at(std::uint64_t index) const
    {
        if (index >= size())
        {
            throw std::out_of_range("source workload index out of range");
        }
        if (!generated_)
        {
            return items_[index];
        }
        auto k = mix64(gen_.seed ^ mix64(index + 1)) % gen_.keys;
        return {"k" + std::to_string(k), gen_.value};
    }

    const SourceWorkload &Workload::for_source(const TaskId &id) const
    {
        auto it = sources.find(id);
        return it == sources.end() ? fallback : it->second;
    }
} // namespace absflow
