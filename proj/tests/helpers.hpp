#pragma once

#include "absflow/engine.hpp"
#include "absflow/graph.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

namespace testing
{
    /// Fresh directory removed on scope exit.
    class TempDir
    {
    public:
        TempDir()
        {
            static std::atomic<int> n{0};
            path_ = std::filesystem::temp_directory_path() /
                    ("absflow-test-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
            std::filesystem::remove_all(path_);
            std::filesystem::create_directories(path_);
        }
        ~TempDir()
        {
            std::error_code ec;
            std::filesystem::remove_all(path_, ec);
        }
        TempDir(const TempDir &) = delete;
        TempDir &operator=(const TempDir &) = delete;
        const std::filesystem::path &path() const noexcept { return path_; }

    private:
        std::filesystem::path path_;
    };

    /// Plain Kahn sort over `edges`; false when a cycle remains.
    inline bool acyclic(const std::vector<absflow::TaskSpec> &tasks, const std::vector<absflow::ChannelId> &edges)
    {
        std::map<absflow::TaskId, int> indeg;
        for (const auto &t : tasks)
        {
            indeg[t.id] = 0;
        }
        for (const auto &e : edges)
        {
            ++indeg[e.to];
        }
        std::vector<absflow::TaskId> ready;
        for (const auto &[id, d] : indeg)
        {
            if (d == 0)
            {
                ready.push_back(id);
            }
        }
        std::size_t seen = 0;
        while (!ready.empty())
        {
            auto id = ready.back();
            ready.pop_back();
            ++seen;
            for (const auto &e : edges)
            {
                if (e.from == id && --indeg[e.to] == 0)
                {
                    ready.push_back(e.to);
                }
            }
        }
        return seen == tasks.size();
    }

    inline std::vector<absflow::ChannelId> without(const std::vector<absflow::ChannelId> &all,
                                                   const std::set<absflow::ChannelId> &removed)
    {
        std::vector<absflow::ChannelId> out;
        for (const auto &c : all)
        {
            if (!removed.contains(c))
            {
                out.push_back(c);
            }
        }
        return out;
    }

    class SnapshotCollector final : public absflow::EngineObserver
    {
    public:
        void on_complete(const absflow::GlobalSnapshot &s) override { snapshots.push_back(s); }
        std::vector<absflow::GlobalSnapshot> snapshots;
    };

    inline absflow::Workload keys_workload(const std::vector<std::string> &keys, std::int64_t value = 1)
    {
        absflow::Workload w;
        w.fallback = absflow::SourceWorkload::from_keys(keys, value);
        return w;
    }

    inline absflow::EngineConfig config(absflow::Protocol p, absflow::TriggerPolicy t = absflow::TriggerPolicy::never(),
                                        std::uint64_t seed = 1)
    {
        absflow::EngineConfig c;
        c.protocol = p;
        c.trigger = t;
        c.seed = seed;
        return c;
    }
} // namespace testing
