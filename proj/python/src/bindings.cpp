#include "absflow/bench.hpp"
#include "absflow/builtins.hpp"
#include "absflow/engine.hpp"
#include "absflow/oracle.hpp"
#include "absflow/parallel.hpp"
#include "absflow/store.hpp"
#include "absflow/suite.hpp"
#include "absflow/topology_io.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

namespace py = pybind11;
using namespace absflow;

namespace
{
    py::dict table_dict(const OperatorState &s)
    {
        py::dict d;
        d["offset"] = s.offset;
        py::dict table;
        for (const auto &[k, v] : s.table)
        {
            table[py::str(k)] = v;
        }
        d["table"] = table;
        d["cursor_entries"] = s.cursor.size();
        return d;
    }

    py::list multiset_list(const SinkMultiset &m)
    {
        py::list out;
        for (const auto &[kv, n] : m)
        {
            out.append(py::make_tuple(kv.first, kv.second, n));
        }
        return out;
    }

    py::dict report_dict(const RunReport &r)
    {
        py::dict d;
        d["protocol"] = r.protocol;
        d["mode"] = r.mode;
        d["trigger"] = r.trigger;
        d["workers"] = r.workers;
        d["records_ingested"] = r.records_ingested;
        d["steps"] = r.steps;
        d["wall_ns"] = r.wall_ns;
        py::list epochs;
        for (const auto &e : r.epochs)
        {
            py::dict m;
            m["epoch"] = e.epoch;
            m["injected_at"] = e.injected_at;
            m["completed_at"] = e.completed_at;
            m["size_bytes"] = e.size_bytes;
            m["channel_records"] = e.channel_records;
            m["in_flight_at_barrier"] = e.in_flight_at_barrier;
            epochs.append(m);
        }
        d["epochs"] = epochs;
        d["blocking_time"] = r.blocking_time;
        d["halt_time"] = r.halt_time;
        d["failures"] = r.failures;
        d["recoveries"] = r.recoveries;
        d["restored_epochs"] = r.restored_epochs;
        d["sink_records"] = r.sink_records;
        d["sink_digest"] = r.sink_digest;
        d["sink_outputs"] = multiset_list(r.sink_outputs());
        d["digest"] = r.digest();
        d["text"] = r.to_text();
        return d;
    }

    py::dict snapshot_dict(const GlobalSnapshot &s)
    {
        py::dict d;
        d["epoch"] = s.epoch;
        py::dict states;
        for (const auto &[id, st] : s.task_states)
        {
            states[py::str(id.str())] = table_dict(st);
        }
        d["task_states"] = states;
        py::dict offsets;
        for (const auto &[id, off] : s.source_offsets)
        {
            offsets[py::str(id.str())] = off;
        }
        d["source_offsets"] = offsets;
        py::dict logs;
        for (const auto &[c, log] : s.back_edge_logs)
        {
            logs[py::str(c.str())] = log.size();
        }
        d["back_edge_logs"] = logs;
        d["size_bytes"] = s.size_bytes;
        return d;
    }

    FailureEvent parse_kill(const std::string &text)
    {
        auto at = text.rfind('@');
        if (at == std::string::npos || at == 0 || at + 1 == text.size())
        {
            throw py::value_error("expected task@step, got '" + text + "'");
        }
        return FailureEvent{TaskId(text.substr(0, at)), std::stoull(text.substr(at + 1))};
    }

    py::dict run(const std::string &topology, const std::string &workload, const std::string &protocol,
                 const std::string &interval, std::uint64_t seed, const std::vector<std::string> &kills,
                 const std::string &store_dir, std::size_t keep, std::uint32_t workers, bool fsync,
                 bool recover)
    {
        auto graph = share(load_topology(topology));
        auto wl = share(load_workload(workload, *graph, seed));
        auto p = parse_protocol(protocol);
        auto trigger = p == Protocol::None ? TriggerPolicy::never() : TriggerPolicy::parse(interval);
        std::unique_ptr<SnapshotStore> store;
        if (!store_dir.empty())
        {
            store = std::make_unique<DirectoryStore>(store_dir, StoreOptions{keep, fsync});
        }
        else if (p != Protocol::None)
        {
            store = std::make_unique<MemoryStore>(keep);
        }

        std::vector<FailureEvent> failures;
        for (const auto &k : kills)
        {
            failures.push_back(parse_kill(k));
        }
        if (workers > 1 && !failures.empty())
        {
            throw py::value_error("failure injection needs workers=1");
        }

        RunReport report;
        {
            py::gil_scoped_release release;
            if (workers > 1)
            {
                ParallelConfig pc;
                pc.protocol = p;
                pc.trigger = trigger;
                pc.workers = workers;
                pc.seed = seed;
                report = ParallelRunner(graph, wl, pc, store.get()).run();
            }
            else
            {
                EngineConfig cfg;
                cfg.protocol = p;
                cfg.trigger = trigger;
                cfg.seed = seed;
                cfg.recover = recover ? RecoverMode::Auto : RecoverMode::Off;
                cfg.failures = std::move(failures);
                report = Engine(graph, wl, cfg, store.get()).run();
            }
        }
        return report_dict(report);
    }

    py::dict oracle(const std::string &topology, const std::string &workload, std::uint64_t seed)
    {
        auto graph = load_topology(topology);
        auto wl = load_workload(workload, graph, seed);
        auto r = run_oracle(graph, wl);
        py::dict d;
        d["sink_records"] = r.sink_records;
        d["sink_digest"] = r.sink_digest;
        d["sink_outputs"] = multiset_list(r.sink_outputs);
        py::dict states;
        for (const auto &[id, st] : r.states)
        {
            states[py::str(id.str())] = table_dict(st);
        }
        d["states"] = states;
        return d;
    }

    py::list verify(const std::vector<std::string> &only, bool quick, std::uint64_t seed)
    {
        SuiteOptions options;
        options.quick = quick;
        options.seed = seed;
        std::vector<CriterionResult> results;
        {
            py::gil_scoped_release release;
            results = run_suite(options, only);
        }
        py::list out;
        for (const auto &r : results)
        {
            py::dict d;
            d["name"] = r.name;
            d["pass"] = r.pass;
            d["detail"] = r.detail;
            d["seconds"] = r.seconds;
            out.append(d);
        }
        return out;
    }

    py::list bench(const std::string &topology, std::uint64_t records, std::uint32_t keys,
                   const std::vector<std::string> &protocols, const std::vector<std::string> &intervals,
                   std::uint32_t workers, std::uint32_t reps, bool fsync, std::uint64_t seed)
    {
        BenchmarkSpec spec;
        spec.topology = topology;
        spec.record_count = records;
        spec.keys = keys;
        spec.workers = workers;
        spec.repetitions = reps;
        spec.fsync = fsync;
        spec.seed = seed;
        std::vector<Protocol> ps;
        for (const auto &p : protocols)
        {
            ps.push_back(parse_protocol(p));
        }
        std::vector<TriggerPolicy> ivs;
        for (const auto &i : intervals)
        {
            ivs.push_back(TriggerPolicy::parse(i));
        }
        if (ivs.empty())
        {
            ivs = default_intervals(records);
        }
        std::vector<BenchRow> rows;
        {
            py::gil_scoped_release release;
            rows = run_sweep(spec, ps, ivs, nullptr);
        }
        py::list out;
        for (const auto &r : rows)
        {
            py::dict d;
            d["topology"] = r.topology;
            d["protocol"] = r.protocol;
            d["interval"] = r.interval;
            d["workers"] = r.workers;
            d["records"] = r.records;
            d["median_runtime_ms"] = r.median_runtime_ms;
            d["overhead_pct"] = r.overhead_pct;
            d["median_epochs"] = r.median_epochs;
            d["snapshot_bytes"] = r.snapshot_bytes;
            d["halt_ms"] = r.halt_ms;
            d["runtimes_ms"] = r.runtimes_ms;
            d["sink_digest"] = r.sink_digest;
            out.append(d);
        }
        return out;
    }

    py::object load_snapshot(const std::string &store_dir, std::optional<std::uint64_t> epoch)
    {
        DirectoryStore store(store_dir, StoreOptions{0, false});
        try
        {
            return snapshot_dict(epoch ? store.load(*epoch) : store.load_latest());
        }
        catch (const NoSnapshot &)
        {
            return py::none();
        }
    }
} // namespace

PYBIND11_MODULE(_absflow, m)
{
    m.doc() = "Streaming dataflow engine with asynchronous barrier snapshots";

    py::register_exception<GraphError>(m, "GraphError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<DecodeError>(m, "DecodeError", PyExc_ValueError);
    py::register_exception<TaskFailure>(m, "TaskFailure", PyExc_RuntimeError);
    py::register_exception<Deadlock>(m, "Deadlock", PyExc_RuntimeError);

    m.def("run", &run, py::arg("topology") = "chain3", py::arg("workload") = "gen:1000",
          py::arg("protocol") = "abs", py::arg("interval") = "100", py::arg("seed") = 1,
          py::arg("kills") = std::vector<std::string>{}, py::arg("store") = "", py::arg("keep") = 0,
          py::arg("workers") = 1, py::arg("fsync") = true, py::arg("recover") = true,
          "Execute one topology and return its report as a dict.");
    m.def("oracle", &oracle, py::arg("topology") = "chain3", py::arg("workload") = "gen:1000",
          py::arg("seed") = 1, "Sequential reference run: final states and sink outputs.");
    m.def("verify", &verify, py::arg("only") = std::vector<std::string>{}, py::arg("quick") = true,
          py::arg("seed") = 1, "Run property criteria; one dict per criterion.");
    m.def("bench", &bench, py::arg("topology") = "layered:4:digest", py::arg("records") = 100000,
          py::arg("keys") = 1024, py::arg("protocols") = std::vector<std::string>{"abs", "sync"},
          py::arg("intervals") = std::vector<std::string>{}, py::arg("workers") = 4, py::arg("reps") = 3,
          py::arg("fsync") = true, py::arg("seed") = 1,
          "Interval sweep against the no-snapshot baseline.");
    m.def("load_snapshot", &load_snapshot, py::arg("store"), py::arg("epoch") = py::none(),
          "Decode a committed snapshot from a store directory, or None when empty.");
    m.def("topology_json", [](const std::string &name) { return topology_to_json(load_topology(name)); },
          py::arg("name"));
    m.def("topology_names", &builtin_topology_names);
    m.def("criterion_names", &criterion_names);
}
