#pragma once

#include "absflow/graph.hpp"
#include "absflow/udf.hpp"
#include "absflow/workload.hpp"

#include <stdexcept>
#include <string>
#include <string_view>

namespace absflow
{
    class FormatError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Topology document:
    ///
    ///     {"tasks": [{"id": "src", "kind": "source", "udf": "source",
    ///                 "state": "offset=0"}, ...],
    ///      "channels": [{"from": "src", "to": "map"}, ["map", "sink"], ...]}
    ///
    /// Back-edges are always derived.
    ExecutionGraph parse_topology(std::string_view json, const UdfRegistry &registry = UdfRegistry::builtin());
    std::string topology_to_json(const ExecutionGraph &graph);

    /// Workload document: per-source `items` ([[key, value], ...]), `keys`
    /// (with optional `value`) or `generate` ({count, keys, seed, value});
    /// `default` applies to sources without an entry.
    Workload parse_workload(std::string_view json);

    /// Builtin topology name or path to a topology document.
    ExecutionGraph load_topology(const std::string &spec, const UdfRegistry &registry = UdfRegistry::builtin());

    /// `gen:N[:keys[:turns]]`, `keys:a,b,a` (every source emits that list) or
    /// a path to a workload document.
    Workload load_workload(const std::string &spec, const ExecutionGraph &graph, std::uint64_t seed = 1);
} // namespace absflow
