#pragma once

#include "absflow/graph.hpp"
#include "absflow/udf.hpp"
#include "absflow/workload.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace absflow
{
    struct ExploreOptions
    {
        /// Exploration aborts (result marked truncated) beyond this many
        /// distinct states.
        std::uint64_t max_states = 20'000'000;
        /// Scheduler seeds used to run each distinct snapshot to completion.
        std::vector<std::uint64_t> replay_seeds{1, 2};
    };

    struct ExploreResult
    {
        std::uint64_t states = 0;
        std::uint64_t snapshots = 0;
        std::uint64_t distinct_snapshots = 0;
        std::uint64_t logged_snapshots = 0;
        std::uint64_t max_backup_log = 0;
        bool truncated = false;
        std::vector<std::string> violations;

        bool ok() const noexcept { return violations.empty() && !truncated; }
    };

    /// Enumerates every interleaving of a run under the barrier protocol,
    /// with the first barrier injected at every possible point, up to the
    /// completion of that snapshot. Interleavings reaching the same state
    /// are explored once. At each completed snapshot it checks:
    ///
    ///  - each task's snapshot state equals the fold of its UDF over the
    ///    records it processed before taking its copy, all of which precede
    ///    the barrier (source seq within the snapshot's source offsets);
    ///  - each back-edge log equals the records its producer sent before
    ///    forwarding the barrier that the consumer had not yet received when
    ///    it took its copy, in order;
    ///  - restoring the snapshot and running to the end reproduces the
    ///    failure-free sink output.
    ///
    /// Folds compare record multisets, so UDF states must not depend on the
    /// order records arrive from different inputs (true for the builtins).
    ExploreResult explore_snapshots(std::shared_ptr<const ExecutionGraph> graph, std::shared_ptr<const Workload> workload,
                                    const ExploreOptions &options = {},
                                    const UdfRegistry &registry = UdfRegistry::builtin());
} // namespace absflow
