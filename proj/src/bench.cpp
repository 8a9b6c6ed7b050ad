#include "absflow/bench.hpp"

#include "absflow/builtins.hpp"
#include "absflow/parallel.hpp"
#include "absflow/store.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <memory>
#include <ostream>
#include <sstream>
#include <unistd.h>

namespace absflow
{
    namespace
    {
        struct Config
        {
            BenchmarkSpec spec;
            std::shared_ptr<const ExecutionGraph> graph;
            std::shared_ptr<const Workload> workload;
            BenchRow row;
            std::vector<double> epochs;
            std::vector<double> halt;
            std::vector<double> bytes;
        };

        double median(std::vector<double> v)
        {
            if (v.empty())
            {
                return 0.0;
            }
            std::sort(v.begin(), v.end());
            auto n = v.size();
            return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
        }

        std::filesystem::path scratch_dir()
        {
            static std::atomic<std::uint64_t> counter{0};
            auto name = "absflow-bench-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
            return std::filesystem::temp_directory_path() / name;
        }

        Config make_config(const BenchmarkSpec &spec)
        {
            spec.validate();
            Config c;
            c.spec = spec;
            auto graph = builtin_topology(spec.topology);
            auto workload = generated_workload(graph, spec.record_count, spec.keys, spec.seed);
            c.graph = share(std::move(graph));
            c.workload = share(std::move(workload));
            c.row.topology = spec.topology;
            c.row.protocol = std::string(to_string(spec.protocol));
            c.row.interval = spec.protocol == Protocol::None ? "none" : spec.snapshot_interval.str();
            c.row.workers = spec.workers;
            c.row.records = spec.record_count;
            c.row.repetitions = spec.repetitions;
            return c;
        }

        void run_once(Config &c, std::ostream *log)
        {
            const auto &spec = c.spec;
            ParallelConfig pc;
            pc.protocol = spec.protocol;
            pc.trigger = spec.protocol == Protocol::None ? TriggerPolicy::never() : spec.snapshot_interval;
            pc.workers = spec.workers;
            pc.max_in_flight = spec.max_in_flight;
            pc.seed = spec.seed;

            std::unique_ptr<DirectoryStore> store;
            std::filesystem::path dir;
            if (spec.protocol != Protocol::None)
            {
                dir = spec.store_dir.empty() ? scratch_dir() : spec.store_dir;
                std::filesystem::remove_all(dir);
                store = std::make_unique<DirectoryStore>(dir, StoreOptions{2, spec.fsync});
            }

            ParallelRunner runner(c.graph, c.workload, pc, store.get());
            auto report = runner.run();
            if (!dir.empty())
            {
                std::error_code ec;
                std::filesystem::remove_all(dir, ec);
            }

            if (!c.row.runtimes_ms.empty() && report.sink_digest != c.row.sink_digest)
            {
                throw BenchmarkMismatch("sink output differs between repetitions of " + c.row.protocol + " " +
                                        c.row.interval);
            }
            c.row.sink_digest = report.sink_digest;
            double ms = static_cast<double>(report.wall_ns) / 1e6;
            c.row.runtimes_ms.push_back(ms);
            c.epochs.push_back(static_cast<double>(report.epochs.size()));
            c.halt.push_back(static_cast<double>(report.halt_time) / 1e6);
            c.bytes.push_back(static_cast<double>(report.snapshot_bytes()));
            if (log != nullptr)
            {
                char buf[160];
                std::snprintf(buf, sizeof buf, "  %-5s %-10s workers=%u  %9.1f ms  epochs=%zu\n",
                              c.row.protocol.c_str(), c.row.interval.c_str(), spec.workers, ms,
                              report.epochs.size());
                *log << buf << std::flush;
            }
        }

        std::vector<BenchRow> run_interleaved(std::vector<Config> &configs, std::uint32_t reps, std::ostream *log,
                                              bool same_output)
        {
            for (std::uint32_t rep = 0; rep < reps; ++rep)
            {
                if (log != nullptr)
                {
                    *log << "repetition " << (rep + 1) << "/" << reps << "\n";
                }
                for (auto &c : configs)
                {
                    run_once(c, log);
                }
            }
            std::vector<BenchRow> rows;
            for (auto &c : configs)
            {
                if (same_output && c.row.sink_digest != configs.front().row.sink_digest)
                {
                    throw BenchmarkMismatch("sink output of " + c.row.protocol + " " + c.row.interval +
                                            " differs from the baseline");
                }
                c.row.median_runtime_ms = median(c.row.runtimes_ms);
                c.row.median_epochs = median(c.epochs);
                c.row.halt_ms = median(c.halt);
                c.row.snapshot_bytes = static_cast<std::uint64_t>(median(c.bytes));
                rows.push_back(c.row);
            }
            double base = rows.front().median_runtime_ms;
            for (auto &r : rows)
            {
                r.overhead_pct = base > 0.0 ? (r.median_runtime_ms - base) / base * 100.0 : 0.0;
            }
            rows.front().overhead_pct = 0.0;
            return rows;
        }
    } // namespace

    void BenchmarkSpec::validate() const
    {
        if (record_count < 1)
        {
            throw std::invalid_argument("record_count must be at least 1");
        }
        if (repetitions < 1)
        {
            throw std::invalid_argument("repetitions must be at least 1");
        }
        if (workers < 1)
        {
            throw std::invalid_argument("workers must be at least 1");
        }
        if (protocol != Protocol::None && snapshot_interval.kind == TriggerPolicy::Kind::Never)
        {
            throw std::invalid_argument("a snapshot interval is required for " + std::string(to_string(protocol)));
        }
    }

    std::string bench_csv_header()
    {
        return "topology,protocol,interval,workers,records,repetitions,median_runtime_ms,overhead_pct,"
               "median_epochs,snapshot_bytes,halt_ms,runtimes_ms";
    }

    std::string to_csv(const BenchRow &row)
    {
        std::ostringstream out;
        out.precision(6);
        out << row.topology << ',' << row.protocol << ',' << row.interval << ',' << row.workers << ','
            << row.records << ',' << row.repetitions << ',' << row.median_runtime_ms << ',' << row.overhead_pct
            << ',' << row.median_epochs << ',' << row.snapshot_bytes << ',' << row.halt_ms << ',';
        for (std::size_t i = 0; i < row.runtimes_ms.size(); ++i)
        {
            out << (i == 0 ? "" : ";") << row.runtimes_ms[i];
        }
        return out.str();
    }

    std::vector<TriggerPolicy> default_intervals(std::uint64_t record_count)
    {
        std::vector<TriggerPolicy> out;
        for (std::uint64_t d : {1024u, 256u, 64u, 16u})
        {
            out.push_back(TriggerPolicy::records(std::max<std::uint64_t>(1, record_count / d)));
        }
        return out;
    }

    std::vector<BenchRow> run_sweep(const BenchmarkSpec &base, const std::vector<Protocol> &protocols,
                                    const std::vector<TriggerPolicy> &intervals, std::ostream *log)
    {
        std::vector<Config> configs;
        auto none = base;
        none.protocol = Protocol::None;
        configs.push_back(make_config(none));
        for (auto p : protocols)
        {
            if (p == Protocol::None)
            {
                continue;
            }
            for (const auto &iv : intervals)
            {
                auto s = base;
                s.protocol = p;
                s.snapshot_interval = iv;
                configs.push_back(make_config(s));
            }
        }
        return run_interleaved(configs, base.repetitions, log, true);
    }

    std::vector<BenchRow> run_benchmark(const BenchmarkSpec &spec, std::ostream *log)
    {
        if (spec.protocol == Protocol::None)
        {
            std::vector<Config> configs{make_config(spec)};
            return run_interleaved(configs, spec.repetitions, log, true);
        }
        return run_sweep(spec, {spec.protocol}, {spec.snapshot_interval}, log);
    }

    std::vector<BenchRow> run_scaling(const BenchmarkSpec &base, const std::vector<std::uint32_t> &workers,
                                      std::uint64_t per_worker, std::ostream *log)
    {
        if (workers.empty())
        {
            throw std::invalid_argument("no worker counts given");
        }
        auto snapshots = base.snapshot_interval.kind == TriggerPolicy::Kind::Records &&
                                 base.snapshot_interval.every > 0
                             ? std::max<std::uint64_t>(1, base.record_count / base.snapshot_interval.every)
                             : 0;
        std::vector<Config> configs;
        for (auto w : workers)
        {
            auto s = base;
            s.workers = w;
            s.topology = "layered:" + std::to_string(w) + ":digest";
            s.record_count = per_worker * w;
            if (snapshots > 0)
            {
                s.snapshot_interval = TriggerPolicy::records(std::max<std::uint64_t>(1, s.record_count / snapshots));
            }
            configs.push_back(make_config(s));
        }
        return run_interleaved(configs, base.repetitions, log, false);
    }
} // namespace absflow
