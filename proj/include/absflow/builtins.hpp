#pragma once

#include "absflow/graph.hpp"
#include "absflow/workload.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace absflow
{
    /// src -> map -> sink, with `map_udf` on the middle task.
    ExecutionGraph chain3(const std::string &map_udf = "count", const std::string &sink_udf = "sink");
    /// src -> {a, b} -> sink; the source partitions keys over a and b.
    ExecutionGraph diamond();
    /// src -> head -> tail -> head (back-edge), head -> sink. Records carry
    /// their remaining turns as value.
    ExecutionGraph loop();
    /// src -> a -> b -> c with back-edges c -> a and c -> b, a -> sink.
    ExecutionGraph double_loop();
    /// Incremental word count: two sources shuffle words over two counters,
    /// each feeding its own sink.
    ExecutionGraph wc2();
    /// Six layers of `parallelism` tasks: source, count, map, sum, project,
    /// sink. Boundaries source/count, map/sum and project/sink are
    /// all-to-all shuffles; the other two are one-to-one.
    ExecutionGraph build_layered_topology(std::size_t parallelism, const std::string &sink_udf = "sink");

    /// `chain3`, `diamond`, `loop`, `double_loop`, `wc2`, `layered` or
    /// `layered:P` (optionally `layered:P:digest` for digest sinks).
    ExecutionGraph builtin_topology(std::string_view name);
    std::vector<std::string> builtin_topology_names();

    /// Splits `total` generated records over the graph's sources (earlier
    /// sources take the remainder). Each source gets its own seed.
    Workload generated_workload(const ExecutionGraph &graph, std::uint64_t total, std::uint32_t keys = 16,
                                std::uint64_t seed = 1, std::int64_t value = 1);

    std::shared_ptr<const ExecutionGraph> share(ExecutionGraph graph);
    std::shared_ptr<const Workload> share(Workload workload);
} // namespace absflow
