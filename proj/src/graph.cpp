#include "absflow/graph.hpp"

#include "absflow/udf.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>
#include <tuple>

namespace absflow
{
    namespace
    {
        std::map<TaskId, std::size_t> ordinals(const std::vector<TaskSpec> &tasks)
        {
            std::map<TaskId, std::size_t> out;
            for (std::size_t i = 0; i < tasks.size(); ++i)
            {
                out.emplace(tasks[i].id, i);
            }
            return out;
        }

        /// Sort key of a channel: endpoint ordinals then channel ordinal.
        /// Unknown endpoints sort last.
        auto channel_key(const ChannelId &c, const std::map<TaskId, std::size_t> &ord)
        {
            auto lookup = [&](const TaskId &t) {
                auto it = ord.find(t);
                return it == ord.end() ? ord.size() : it->second;
            };
            return std::make_tuple(lookup(c.from), lookup(c.to), c.ordinal, c.from, c.to);
        }

        void sort_channels(std::vector<ChannelId> &channels, const std::vector<TaskSpec> &tasks)
        {
            auto ord = ordinals(tasks);
            std::stable_sort(channels.begin(), channels.end(), [&](const ChannelId &a, const ChannelId &b) {
                return channel_key(a, ord) < channel_key(b, ord);
            });
        }
    } // namespace

    ExecutionGraph::ExecutionGraph(std::vector<TaskSpec> tasks, std::vector<ChannelId> channels,
                                   std::set<ChannelId> back_edges)
        : tasks_(std::move(tasks)), channels_(std::move(channels)), back_edges_(std::move(back_edges))
    {
        sort_channels(channels_, tasks_);
        inputs_.assign(tasks_.size(), {});
        outputs_.assign(tasks_.size(), {});
        is_back_edge_.assign(channels_.size(), false);
        auto ord = ordinals(tasks_);
        for (std::size_t c = 0; c < channels_.size(); ++c)
        {
            auto from = ord.find(channels_[c].from);
            auto to = ord.find(channels_[c].to);
            if (from == ord.end() || to == ord.end())
            {
                endpoints_resolved_ = false;
                continue;
            }
            outputs_[from->second].push_back(c);
            inputs_[to->second].push_back(c);
            is_back_edge_[c] = back_edges_.contains(channels_[c]);
        }
    }

    std::optional<std::size_t> ExecutionGraph::find_task(const TaskId &id) const
    {
        for (std::size_t i = 0; i < tasks_.size(); ++i)
        {
            if (tasks_[i].id == id)
            {
                return i;
            }
        }
        return std::nullopt;
    }

    std::size_t ExecutionGraph::task_index(const TaskId &id) const
    {
        auto i = find_task(id);
        if (!i)
        {
            throw GraphError("unknown task " + id.str());
        }
        return *i;
    }

    std::optional<std::size_t> ExecutionGraph::find_channel(const ChannelId &id) const
    {
        for (std::size_t i = 0; i < channels_.size(); ++i)
        {
            if (channels_[i] == id)
            {
                return i;
            }
        }
        return std::nullopt;
    }

    std::vector<std::size_t> ExecutionGraph::sources() const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < tasks_.size(); ++i)
        {
            if (tasks_[i].kind == TaskKind::Source)
            {
                out.push_back(i);
            }
        }
        return out;
    }

    std::vector<std::size_t> ExecutionGraph::sinks() const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < tasks_.size(); ++i)
        {
            if (tasks_[i].kind == TaskKind::Sink)
            {
                out.push_back(i);
            }
        }
        return out;
    }

    std::set<ChannelId> find_back_edges(const std::vector<TaskSpec> &tasks, const std::vector<ChannelId> &channels)
    {
        ExecutionGraph g(tasks, channels);
        if (!g.endpoints_resolved())
        {
            throw GraphError("channel endpoint names an unknown task");
        }
        enum class Color : std::uint8_t
        {
            White,
            Gray,
            Black,
        };
        std::vector<Color> color(tasks.size(), Color::White);
        std::set<ChannelId> back;

        // Iterative DFS; each frame remembers the next output to explore.
        struct Frame
        {
            std::size_t task;
            std::size_t next;
        };
        for (std::size_t root : g.sources())
        {
            if (color[root] != Color::White)
            {
                continue;
            }
            std::vector<Frame> stack{{root, 0}};
            color[root] = Color::Gray;
            while (!stack.empty())
            {
                auto &top = stack.back();
                const auto &outs = g.outputs_of(top.task);
                if (top.next == outs.size())
                {
                    color[top.task] = Color::Black;
                    stack.pop_back();
                    continue;
                }
                std::size_t c = outs[top.next++];
                std::size_t to = g.task_index(g.channels()[c].to);
                if (color[to] == Color::Gray)
                {
                    back.insert(g.channels()[c]);
                }
                else if (color[to] == Color::White)
                {
                    color[to] = Color::Gray;
                    stack.push_back({to, 0});
                }
            }
        }
        for (std::size_t i = 0; i < tasks.size(); ++i)
        {
            if (color[i] == Color::White)
            {
                throw UnreachableTask(tasks[i].id);
            }
        }
        return back;
    }

    std::vector<TaskId> topological_order(const ExecutionGraph &g)
    {
        const auto n = g.tasks().size();
        std::vector<std::size_t> indegree(n, 0);
        for (std::size_t c = 0; c < g.channels().size(); ++c)
        {
            if (!g.is_back_edge(c))
            {
                ++indegree[g.task_index(g.channels()[c].to)];
            }
        }
        std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
        for (std::size_t i = 0; i < n; ++i)
        {
            if (indegree[i] == 0)
            {
                ready.push(i);
            }
        }
        std::vector<TaskId> order;
        order.reserve(n);
        while (!ready.empty())
        {
            auto t = ready.top();
            ready.pop();
            order.push_back(g.tasks()[t].id);
            for (auto c : g.outputs_of(t))
            {
                if (g.is_back_edge(c))
                {
                    continue;
                }
                auto to = g.task_index(g.channels()[c].to);
                if (--indegree[to] == 0)
                {
                    ready.push(to);
                }
            }
        }
        if (order.size() != n)
        {
            throw CycleDetected("graph has a cycle not broken by its back-edges");
        }
        return order;
    }

    ValidationResult validate(const ExecutionGraph &graph) { return validate(graph, UdfRegistry::builtin()); }

    ValidationResult validate(const ExecutionGraph &g, const UdfRegistry &registry)
    {
        ValidationResult result;
        auto violation = [&](std::string v) { result.violations.push_back(std::move(v)); };

        std::set<TaskId> ids;
        for (const auto &t : g.tasks())
        {
            if (t.id.empty())
            {
                violation("task with empty id");
            }
            if (!ids.insert(t.id).second)
            {
                violation("duplicate task " + t.id.str());
            }
            if (!registry.contains(t.udf))
            {
                violation("task " + t.id.str() + " uses unregistered udf " + t.udf);
            }
        }

        std::set<ChannelId> seen;
        for (const auto &c : g.channels())
        {
            if (!ids.contains(c.from))
            {
                violation("unknown endpoint " + c.from.str() + " in channel " + c.str());
            }
            if (!ids.contains(c.to))
            {
                violation("unknown endpoint " + c.to.str() + " in channel " + c.str());
            }
            if (!seen.insert(c).second)
            {
                violation("duplicate channel " + c.str());
            }
        }
        for (const auto &b : g.back_edges())
        {
            if (!seen.contains(b))
            {
                violation("back-edge " + b.str() + " is not a channel");
            }
        }
        if (!result.ok())
        {
            return result;
        }

        bool has_source = false;
        bool has_sink = false;
        for (std::size_t i = 0; i < g.tasks().size(); ++i)
        {
            const auto &t = g.tasks()[i];
            has_source = has_source || t.kind == TaskKind::Source;
            has_sink = has_sink || t.kind == TaskKind::Sink;
            if (t.kind == TaskKind::Source && !g.inputs_of(i).empty())
            {
                violation("source " + t.id.str() + " has input channels");
            }
            if (t.kind == TaskKind::Sink && !g.outputs_of(i).empty())
            {
                violation("sink " + t.id.str() + " has output channels");
            }
            if (t.kind != TaskKind::Source && g.inputs_of(i).empty())
            {
                violation("task " + t.id.str() + " has no inputs but is not a source");
            }
            if (t.kind != TaskKind::Sink && g.outputs_of(i).empty())
            {
                violation("task " + t.id.str() + " has no outputs but is not a sink");
            }
        }
        if (!has_source)
        {
            violation("graph has no source");
        }
        if (!has_sink)
        {
            violation("graph has no sink");
        }

        // Acyclicity of E \ L and reachability from sources over E \ L.
        try
        {
            (void)topological_order(g);
        }
        catch (const CycleDetected &)
        {
            violation("cycle remains after removing back-edges");
            return result;
        }
        std::vector<bool> reached(g.tasks().size(), false);
        std::vector<std::size_t> frontier = g.sources();
        for (auto s : frontier)
        {
            reached[s] = true;
        }
        while (!frontier.empty())
        {
            auto t = frontier.back();
            frontier.pop_back();
            for (auto c : g.outputs_of(t))
            {
                if (g.is_back_edge(c))
                {
                    continue;
                }
                auto to = g.task_index(g.channels()[c].to);
                if (!reached[to])
                {
                    reached[to] = true;
                    frontier.push_back(to);
                }
            }
        }
        for (std::size_t i = 0; i < reached.size(); ++i)
        {
            if (!reached[i])
            {
                violation("task " + g.tasks()[i].id.str() + " is unreachable from every source");
            }
        }
        return result;
    }

    ExecutionGraph make_graph(std::vector<TaskSpec> tasks, std::vector<ChannelId> channels)
    {
        return make_graph(std::move(tasks), std::move(channels), UdfRegistry::builtin());
    }

    ExecutionGraph make_graph(std::vector<TaskSpec> tasks, std::vector<ChannelId> channels,
                              const UdfRegistry &registry)
    {
        std::set<ChannelId> back;
        ExecutionGraph raw(tasks, channels);
        ValidationResult pre;
        if (raw.endpoints_resolved())
        {
            try
            {
                back = find_back_edges(tasks, channels);
            }
            catch (const UnreachableTask &e)
            {
                pre.violations.push_back(e.what());
            }
        }
        ExecutionGraph g(std::move(tasks), std::move(channels), std::move(back));
        auto result = validate(g, registry);
        result.violations.insert(result.violations.begin(), pre.violations.begin(), pre.violations.end());
        if (!result.ok())
        {
            std::ostringstream msg;
            msg << "invalid execution graph:";
            for (const auto &v : result.violations)
            {
                msg << "\n  " << v;
            }
            throw GraphError(msg.str());
        }
        return g;
    }
} // namespace absflow
