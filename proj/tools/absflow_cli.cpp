#include "absflow/bench.hpp"
#include "absflow/builtins.hpp"
#include "absflow/engine.hpp"
#include "absflow/parallel.hpp"
#include "absflow/store.hpp"
#include "absflow/suite.hpp"
#include "absflow/topology_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

using namespace absflow;

namespace
{
    struct RunArgs
    {
        std::string topology = "chain3";
        std::string workload = "gen:1000";
        std::string protocol = "abs";
        std::string interval = "100";
        std::uint32_t workers = 1;
        bool parallel = false;
        std::uint64_t seed = 1;
        std::vector<std::string> kills;
        std::string recover = "auto";
        std::string out;
        std::string store;
        bool no_fsync = false;
        std::size_t keep = 0;
        std::size_t spill = 0;
        std::string spill_dir;
    };

    FailureEvent parse_kill(const std::string &text)
    {
        auto at = text.rfind('@');
        if (at == std::string::npos || at == 0 || at + 1 == text.size())
        {
            throw CLI::ValidationError("--kill", "expected task@step, got '" + text + "'");
        }
        return FailureEvent{TaskId(text.substr(0, at)), std::stoull(text.substr(at + 1))};
    }

    int run_command(const RunArgs &a)
    {
        auto graph = share(load_topology(a.topology));
        auto workload = share(load_workload(a.workload, *graph, a.seed));
        auto protocol = parse_protocol(a.protocol);
        auto trigger = protocol == Protocol::None ? TriggerPolicy::never() : TriggerPolicy::parse(a.interval);

        std::unique_ptr<SnapshotStore> store;
        if (!a.store.empty())
        {
            store = std::make_unique<DirectoryStore>(a.store, StoreOptions{a.keep, !a.no_fsync});
        }
        else if (protocol != Protocol::None)
        {
            store = std::make_unique<MemoryStore>(a.keep);
        }

        RunReport report;
        if (a.parallel || a.workers > 1)
        {
            if (!a.kills.empty())
            {
                throw CLI::ValidationError("--kill", "failure injection needs the deterministic scheduler (--workers 1)");
            }
            ParallelConfig pc;
            pc.protocol = protocol;
            pc.trigger = trigger;
            pc.workers = a.workers;
            pc.seed = a.seed;
            if (a.spill > 0)
            {
                pc.spill_threshold = a.spill;
                pc.spill_dir = a.spill_dir;
            }
            ParallelRunner runner(graph, workload, pc, store.get());
            report = runner.run();
        }
        else
        {
            EngineConfig cfg;
            cfg.protocol = protocol;
            cfg.trigger = trigger;
            cfg.seed = a.seed;
            cfg.recover = a.recover == "off" ? RecoverMode::Off : RecoverMode::Auto;
            for (const auto &k : a.kills)
            {
                cfg.failures.push_back(parse_kill(k));
            }
            if (a.spill > 0)
            {
                cfg.spill_threshold = a.spill;
                cfg.spill_dir = a.spill_dir;
            }
            Engine engine(graph, workload, cfg, store.get());
            report = engine.run();
        }

        std::cout << report.to_text();
        if (!a.out.empty())
        {
            std::ofstream out(a.out);
            out << RunReport::csv_header() << "\n" << report.to_csv_row() << "\n";
            if (!out)
            {
                std::cerr << "cannot write " << a.out << "\n";
                return 1;
            }
        }
        return 0;
    }

    struct BenchArgs
    {
        BenchmarkSpec spec;
        std::vector<std::string> protocols{"abs", "sync"};
        std::vector<std::string> intervals;
        std::vector<std::uint32_t> scaling;
        std::uint64_t per_worker = 250'000;
        bool no_fsync = false;
        std::string out;
    };

    int bench_command(BenchArgs a)
    {
        a.spec.fsync = !a.no_fsync;
        std::vector<BenchRow> rows;
        if (!a.scaling.empty())
        {
            if (a.spec.snapshot_interval.kind == TriggerPolicy::Kind::Never)
            {
                a.spec.snapshot_interval = TriggerPolicy::records(a.spec.record_count / 64);
            }
            a.spec.protocol = Protocol::Abs;
            rows = run_scaling(a.spec, a.scaling, a.per_worker, &std::cerr);
        }
        else
        {
            std::vector<Protocol> protocols;
            for (const auto &p : a.protocols)
            {
                protocols.push_back(parse_protocol(p));
            }
            std::vector<TriggerPolicy> intervals;
            for (const auto &i : a.intervals)
            {
                intervals.push_back(TriggerPolicy::parse(i));
            }
            if (intervals.empty())
            {
                intervals = default_intervals(a.spec.record_count);
            }
            rows = run_sweep(a.spec, protocols, intervals, &std::cerr);
        }
        std::ofstream file;
        if (!a.out.empty())
        {
            file.open(a.out);
        }
        std::ostream &out = a.out.empty() ? std::cout : file;
        out << bench_csv_header() << "\n";
        for (const auto &r : rows)
        {
            out << to_csv(r) << "\n";
        }
        return out ? 0 : 1;
    }

    int verify_command(SuiteOptions options, const std::vector<std::string> &only, bool verbose)
    {
        options.log = verbose ? &std::cerr : nullptr;
        auto results = run_suite(options, only);
        bool ok = true;
        for (const auto &r : results)
        {
            std::cout << format_result(r) << "\n";
            ok = ok && r.pass;
        }
        return ok ? 0 : 1;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Streaming dataflow engine with asynchronous barrier snapshots"};
    app.require_subcommand(1);

    RunArgs run;
    auto *run_cmd = app.add_subcommand("run", "Execute one topology and print its report");
    run_cmd->add_option("--topology", run.topology, "Builtin name or topology JSON file")->capture_default_str();
    run_cmd->add_option("--workload", run.workload, "gen:N[:keys[:turns]], keys:a,b,... or a JSON file")
        ->capture_default_str();
    run_cmd->add_option("--protocol", run.protocol, "none, abs or sync")
        ->check(CLI::IsMember({"none", "abs", "sync"}))
        ->capture_default_str();
    run_cmd->add_option("--interval", run.interval, "Snapshot interval: N records or Tms")->capture_default_str();
    run_cmd->add_option("--workers", run.workers, "Worker threads; 1 uses the deterministic scheduler")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    run_cmd->add_flag("--parallel", run.parallel, "Use the multi-worker runtime even with one worker");
    run_cmd->add_option("--seed", run.seed, "Scheduler and workload seed")->capture_default_str();
    run_cmd->add_option("--kill", run.kills, "Kill task@step (repeatable)");
    run_cmd->add_option("--recover", run.recover, "auto or off")
        ->check(CLI::IsMember({"auto", "off"}))
        ->capture_default_str();
    run_cmd->add_option("--out", run.out, "Write the report as CSV");
    run_cmd->add_option("--store", run.store, "Snapshot directory (in-memory when omitted)");
    run_cmd->add_option("--keep", run.keep, "Committed epochs kept by the store, 0 keeps all");
    run_cmd->add_flag("--no-fsync", run.no_fsync, "Skip fsync in the directory store");
    run_cmd->add_option("--spill", run.spill, "Spill blocked channel buffers beyond N records");
    run_cmd->add_option("--spill-dir", run.spill_dir, "Directory for spill files");

    SuiteOptions suite;
    std::vector<std::string> only;
    bool verbose = false;
    auto *verify_cmd = app.add_subcommand("verify", "Run the correctness and performance property suite");
    verify_cmd->add_flag("--quick", suite.quick, "Reduced sizes for a smoke run");
    verify_cmd->add_option("--only", only, "Run only these criteria")
        ->check(CLI::IsMember(criterion_names()));
    verify_cmd->add_option("--seed", suite.seed, "Base seed of the randomized checks")->capture_default_str();
    verify_cmd->add_option("--records", suite.overhead.record_count, "Records of the overhead benchmark")
        ->capture_default_str();
    verify_cmd->add_option("--reps", suite.overhead.repetitions, "Repetitions of the overhead benchmark")
        ->capture_default_str();
    verify_cmd->add_flag("-v,--verbose", verbose, "Print progress to stderr");

    BenchArgs bench;
    auto *bench_cmd = app.add_subcommand("bench", "Sweep snapshot intervals and print CSV");
    bench_cmd->add_option("--topology", bench.spec.topology, "Builtin topology")->capture_default_str();
    bench_cmd->add_option("--records", bench.spec.record_count, "Total records")->capture_default_str();
    bench_cmd->add_option("--keys", bench.spec.keys, "Distinct keys")->capture_default_str();
    bench_cmd->add_option("--workers", bench.spec.workers, "Worker threads")->capture_default_str();
    bench_cmd->add_option("--reps", bench.spec.repetitions, "Repetitions per configuration")->capture_default_str();
    bench_cmd->add_option("--seed", bench.spec.seed, "Workload seed")->capture_default_str();
    bench_cmd->add_option("--max-in-flight", bench.spec.max_in_flight, "Source back-pressure threshold")
        ->capture_default_str();
    bench_cmd->add_option("--protocols", bench.protocols, "Protocols to sweep")
        ->check(CLI::IsMember({"abs", "sync"}));
    bench_cmd->add_option("--intervals", bench.intervals, "Intervals (default records/1024, /256, /64, /16)");
    bench_cmd->add_option("--scaling", bench.scaling, "Weak scaling over these worker counts instead");
    bench_cmd->add_option("--per-worker", bench.per_worker, "Records per worker for --scaling")
        ->capture_default_str();
    bench_cmd->add_option("--store", bench.spec.store_dir, "Snapshot directory (temporary when omitted)");
    bench_cmd->add_flag("--no-fsync", bench.no_fsync, "Skip fsync in the directory store");
    bench_cmd->add_option("--out", bench.out, "Write CSV here instead of stdout");

    std::string topo_name;
    auto *topo_cmd = app.add_subcommand("topology", "Print a topology as JSON");
    topo_cmd->add_option("name", topo_name, "Builtin name or file")->required();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*run_cmd)
        {
            return run_command(run);
        }
        if (*verify_cmd)
        {
            return verify_command(suite, only, verbose);
        }
        if (*bench_cmd)
        {
            return bench_command(bench);
        }
        if (*topo_cmd)
        {
            std::cout << topology_to_json(load_topology(topo_name)) << "\n";
            return 0;
        }
    }
    catch (const CLI::Error &e)
    {
        return app.exit(e);
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
