#pragma once

#include "absflow/ids.hpp"
#include "absflow/state.hpp"

#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace absflow
{
    class UdfRegistry;

    class GraphError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class UnreachableTask : public GraphError
    {
    public:
        explicit UnreachableTask(const TaskId &task)
            : GraphError("task " + task.str() + " is not reachable from any source"), task_(task) {}
        const TaskId &task() const noexcept { return task_; }

    private:
        TaskId task_;
    };

    class CycleDetected : public GraphError
    {
    public:
        using GraphError::GraphError;
    };

    struct TaskSpec
    {
        TaskId id;
        TaskKind kind = TaskKind::Operator;
        std::string udf;
        OperatorState initial_state;
    };

    /// Static execution graph. Tasks keep their declaration order; that
    /// position is the task's ordinal and is what "ascending TaskId" means for
    /// every deterministic tie-break (DFS start order, output visit order,
    /// topological ready-queue). Channels are ordered by
    /// (ordinal(from), ordinal(to), channel ordinal).
    class ExecutionGraph
    {
    public:
        ExecutionGraph() = default;

        /// Builds without deriving back-edges or validating; used to feed
        /// validate() with arbitrary input.
        ExecutionGraph(std::vector<TaskSpec> tasks, std::vector<ChannelId> channels,
                       std::set<ChannelId> back_edges = {});

        const std::vector<TaskSpec> &tasks() const noexcept { return tasks_; }
        const std::vector<ChannelId> &channels() const noexcept { return channels_; }
        const std::set<ChannelId> &back_edges() const noexcept { return back_edges_; }

        std::optional<std::size_t> find_task(const TaskId &id) const;
        std::size_t task_index(const TaskId &id) const;
        const TaskSpec &task(const TaskId &id) const { return tasks_[task_index(id)]; }
        std::optional<std::size_t> find_channel(const ChannelId &id) const;

        /// Channel indices, in channel order.
        const std::vector<std::size_t> &inputs_of(std::size_t task) const { return inputs_[task]; }
        const std::vector<std::size_t> &outputs_of(std::size_t task) const { return outputs_[task]; }

        bool is_back_edge(std::size_t channel) const { return is_back_edge_[channel]; }
        bool cyclic() const noexcept { return !back_edges_.empty(); }

        std::vector<std::size_t> sources() const;
        std::vector<std::size_t> sinks() const;

        /// True when every endpoint names a task of this graph.
        bool endpoints_resolved() const noexcept { return endpoints_resolved_; }

    private:
        std::vector<TaskSpec> tasks_;
        std::vector<ChannelId> channels_;
        std::set<ChannelId> back_edges_;
        std::vector<std::vector<std::size_t>> inputs_;
        std::vector<std::vector<std::size_t>> outputs_;
        std::vector<bool> is_back_edge_;
        bool endpoints_resolved_ = true;
    };

    struct ValidationResult
    {
        std::vector<std::string> violations;
        bool ok() const noexcept { return violations.empty(); }
        explicit operator bool() const noexcept { return ok(); }
    };

    /// Checks every ExecutionGraph invariant. Violations are reported as data.
    ValidationResult validate(const ExecutionGraph &graph);
    ValidationResult validate(const ExecutionGraph &graph, const UdfRegistry &registry);

    /// Depth-first search from all sources (declaration order), visiting
    /// outputs in channel order; an edge into a task still on the DFS stack is
    /// a back-edge. Throws UnreachableTask if some task is never visited.
    std::set<ChannelId> find_back_edges(const std::vector<TaskSpec> &tasks, const std::vector<ChannelId> &channels);

    /// Kahn order over channels minus back-edges, lowest ordinal first among
    /// ready tasks. Throws CycleDetected when a cycle survives.
    std::vector<TaskId> topological_order(const ExecutionGraph &graph);

    /// Derives back-edges, validates against `registry` and returns the graph.
    /// Throws GraphError listing all violations.
    ExecutionGraph make_graph(std::vector<TaskSpec> tasks, std::vector<ChannelId> channels);
    ExecutionGraph make_graph(std::vector<TaskSpec> tasks, std::vector<ChannelId> channels,
                              const UdfRegistry &registry);
} // namespace absflow
