#include "absflow/suite.hpp"

#include "absflow/builtins.hpp"
#include "absflow/engine.hpp"
#include "absflow/explore.hpp"
#include "absflow/oracle.hpp"
#include "absflow/random_dag.hpp"
#include "absflow/store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <unistd.h>

namespace absflow
{
    namespace fs = std::filesystem;

    namespace
    {
        using Clock = std::chrono::steady_clock;

        double seconds_since(Clock::time_point start)
        {
            return std::chrono::duration<double>(Clock::now() - start).count();
        }

        class Collector final : public EngineObserver
        {
        public:
            void on_complete(const GlobalSnapshot &s) override { snapshots.push_back(s); }
            std::vector<GlobalSnapshot> snapshots;
        };

        /// First few failure descriptions plus a total count.
        class Failures
        {
        public:
            explicit Failures(std::ostream *log) : log_(log) {}

            void add(const std::string &what)
            {
                if (count_ < 5)
                {
                    first_ += (first_.empty() ? "" : "; ") + what;
                }
                if (log_ != nullptr && count_ < 20)
                {
                    *log_ << "    failure: " << what << "\n";
                }
                ++count_;
            }
            bool empty() const noexcept { return count_ == 0; }
            std::size_t count() const noexcept { return count_; }
            std::string summary() const { return std::to_string(count_) + " failure(s): " + first_; }

        private:
            std::ostream *log_;
            std::size_t count_ = 0;
            std::string first_;
        };

        std::string state_diff(const std::map<TaskId, OperatorState> &expected,
                               const std::map<TaskId, OperatorState> &actual)
        {
            for (const auto &[id, st] : expected)
            {
                auto it = actual.find(id);
                if (it == actual.end())
                {
                    return "missing task " + id.str();
                }
                if (!(it->second == st))
                {
                    return "task " + id.str() + " expected " + st.to_literal() + " got " + it->second.to_literal();
                }
            }
            if (actual.size() != expected.size())
            {
                return "unexpected extra tasks";
            }
            return {};
        }

        struct Scenario
        {
            std::string name;
            std::shared_ptr<const ExecutionGraph> graph;
            std::shared_ptr<const Workload> workload;
            EngineConfig config;
        };

        Scenario scenario(std::string name, ExecutionGraph g, Workload w, Protocol p, TriggerPolicy t,
                          std::uint64_t seed = 1)
        {
            Scenario s;
            s.name = std::move(name);
            s.graph = share(std::move(g));
            s.workload = share(std::move(w));
            s.config.protocol = p;
            s.config.trigger = t;
            s.config.seed = seed;
            return s;
        }

        Scenario random_scenario(std::uint64_t seed, Protocol p)
        {
            auto c = random_dag_case(seed);
            return scenario("random seed=" + std::to_string(seed) + " " + std::string(to_string(p)), std::move(c.graph),
                            std::move(c.workload), p, c.trigger, seed);
        }

        Workload loop_workload(const ExecutionGraph &g, std::uint64_t records, std::int64_t turns,
                               std::uint64_t seed = 1)
        {
            return generated_workload(g, records, 3, seed, turns);
        }

        fs::path scratch_root(const SuiteOptions &o)
        {
            auto base = o.scratch.empty() ? fs::temp_directory_path() : o.scratch;
            return base / ("absflow-suite-" + std::to_string(::getpid()));
        }

        std::map<std::string, std::string> read_tree(const fs::path &dir)
        {
            std::map<std::string, std::string> out;
            if (!fs::exists(dir))
            {
                return out;
            }
            for (const auto &e : fs::recursive_directory_iterator(dir))
            {
                if (!e.is_regular_file())
                {
                    continue;
                }
                std::ifstream in(e.path(), std::ios::binary);
                out[fs::relative(e.path(), dir).string()] =
                    std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
            }
            return out;
        }

        std::uint64_t seed_for(const SuiteOptions &o, std::uint64_t i) { return o.seed * 1'000'003ull + i; }
    } // namespace

    CriterionResult check_feasibility(const SuiteOptions &o)
    {
        auto start = Clock::now();
        Failures failures(o.log);
        std::uint32_t runs = o.quick ? 50 : o.feasibility_runs;
        std::uint64_t snapshots = 0;
        for (std::uint32_t i = 0; i < runs; ++i)
        {
            auto seed = seed_for(o, i);
            auto s = random_scenario(seed, Protocol::Abs);
            try
            {
                Engine engine(s.graph, s.workload, s.config);
                Collector col;
                engine.set_observer(&col);
                auto report = engine.run();
                for (const auto &snap : col.snapshots)
                {
                    ++snapshots;
                    auto expected = prefix_replay_oracle(*s.graph, *s.workload, snap.source_offsets);
                    auto diff = state_diff(expected, snap.task_states);
                    if (!diff.empty())
                    {
                        failures.add(s.name + " epoch " + std::to_string(snap.epoch) + ": " + diff);
                    }
                }
                auto oracle = run_oracle(*s.graph, *s.workload);
                if (report.sink_outputs() != oracle.sink_outputs)
                {
                    failures.add(s.name + ": final sink output differs from the oracle");
                }
            }
            catch (const std::exception &e)
            {
                failures.add(s.name + ": " + e.what());
            }
        }
        CriterionResult r{"feasibility", false, {}, seconds_since(start)};
        r.pass = failures.empty() && snapshots > 0 && r.seconds < 120.0;
        r.detail = std::to_string(runs) + " random DAG runs, " + std::to_string(snapshots) +
                   " snapshots compared with the prefix oracle";
        if (!failures.empty())
        {
            r.detail += "; " + failures.summary();
        }
        if (r.seconds >= 120.0)
        {
            r.detail += "; exceeded 120 s";
        }
        return r;
    }

    CriterionResult check_minimality(const SuiteOptions &o)
    {
        auto start = Clock::now();
        Failures failures(o.log);
        std::vector<Scenario> runs;
        std::uint32_t n = o.quick ? 30 : 300;
        for (std::uint32_t i = 0; i < n; ++i)
        {
            runs.push_back(random_scenario(seed_for(o, 50'000 + i), Protocol::Abs));
        }
        for (const char *name : {"chain3", "diamond", "wc2"})
        {
            auto g = builtin_topology(name);
            auto w = generated_workload(g, 200, 8, o.seed);
            runs.push_back(scenario(name, std::move(g), std::move(w), Protocol::Abs, TriggerPolicy::records(20)));
        }
        {
            auto g = build_layered_topology(2);
            auto w = generated_workload(g, o.quick ? 2000 : 10'000, 64, o.seed);
            runs.push_back(
                scenario("layered:2", std::move(g), std::move(w), Protocol::Abs, TriggerPolicy::records(500)));
        }

        std::uint64_t epochs = 0;
        std::uint64_t with_in_flight = 0;
        for (auto &s : runs)
        {
            try
            {
                MemoryStore store;
                Engine engine(s.graph, s.workload, s.config, &store);
                Collector col;
                engine.set_observer(&col);
                auto report = engine.run();
                for (const auto &snap : col.snapshots)
                {
                    if (!snap.back_edge_logs.empty() || snap.channel_records() != 0)
                    {
                        failures.add(s.name + " epoch " + std::to_string(snap.epoch) + ": channel state persisted");
                    }
                }
                for (const auto &[epoch, files] : store.files())
                {
                    auto text = files.at("manifest.txt");
                    if (text.find("\nchannel_records 0\n") == std::string::npos)
                    {
                        failures.add(s.name + " epoch " + std::to_string(epoch) + ": manifest lists channel records");
                    }
                    for (const auto &[file, bytes] : files)
                    {
                        if (file.rfind("edge-", 0) == 0)
                        {
                            failures.add(s.name + ": back-edge file " + file + " written");
                        }
                    }
                    if (decode_snapshot(files).channel_records() != 0)
                    {
                        failures.add(s.name + ": decoded snapshot holds channel records");
                    }
                }
                for (const auto &m : report.epochs)
                {
                    ++epochs;
                    with_in_flight += m.in_flight_at_barrier > 0 ? 1 : 0;
                    if (m.channel_records != 0)
                    {
                        failures.add(s.name + ": epoch metrics list channel records");
                    }
                }
            }
            catch (const std::exception &e)
            {
                failures.add(s.name + ": " + e.what());
            }
        }
        CriterionResult r{"minimality", false, {}, seconds_since(start)};
        double ratio = epochs == 0 ? 0.0 : static_cast<double>(with_in_flight) / static_cast<double>(epochs);
        r.pass = failures.empty() && epochs > 0 && ratio >= 0.9;
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "%zu acyclic runs, %llu epochs persisted no channel state; records in flight at barrier "
                      "time in %.1f%% of epochs",
                      runs.size(), static_cast<unsigned long long>(epochs), ratio * 100.0);
        r.detail = buf;
        if (!failures.empty())
        {
            r.detail += "; " + failures.summary();
        }
        return r;
    }

    CriterionResult check_termination(const SuiteOptions &o)
    {
        auto start = Clock::now();
        Failures failures(o.log);
        std::vector<Scenario> runs;
        std::uint32_t n = o.quick ? 20 : 200;
        for (std::uint32_t i = 0; i < n; ++i)
        {
            runs.push_back(random_scenario(seed_for(o, 100'000 + i), Protocol::Abs));
            runs.push_back(random_scenario(seed_for(o, 100'000 + i), Protocol::Sync));
        }
        for (const char *name : {"chain3", "diamond", "wc2", "layered:2"})
        {
            for (auto p : {Protocol::Abs, Protocol::Sync})
            {
                auto g = builtin_topology(name);
                auto w = generated_workload(g, 1000, 16, o.seed);
                runs.push_back(scenario(std::string(name) + " " + std::string(to_string(p)), std::move(g),
                                        std::move(w), p, TriggerPolicy::records(50)));
            }
        }
        for (const char *name : {"loop", "double_loop"})
        {
            for (std::uint64_t seed : {1, 2, 3})
            {
                auto g = builtin_topology(name);
                auto w = loop_workload(g, 100, 3, seed);
                runs.push_back(scenario(std::string(name) + " seed=" + std::to_string(seed), std::move(g),
                                        std::move(w), Protocol::Abs, TriggerPolicy::records(10), seed));
            }
        }
        {
            auto g = chain3();
            auto w = generated_workload(g, 300, 8, o.seed);
            auto s = scenario("chain3 millis", std::move(g), std::move(w), Protocol::Abs, TriggerPolicy::millis(40));
            runs.push_back(s);
            s.name = "chain3 with failure";
            s.config.failures.push_back({TaskId("map"), 250});
            runs.push_back(s);
        }

        std::uint64_t epochs = 0;
        std::uint64_t worst = 0;
        for (auto &s : runs)
        {
            try
            {
                MemoryStore store;
                Engine engine(s.graph, s.workload, s.config, &store);
                auto report = engine.run();
                const auto &metrics = engine.coordinator().metrics();
                if (metrics.size() != engine.coordinator().last_injected())
                {
                    failures.add(s.name + ": injected " + std::to_string(engine.coordinator().last_injected()) +
                                 " epochs but reported " + std::to_string(metrics.size()));
                }
                for (std::size_t i = 0; i < metrics.size(); ++i)
                {
                    const auto &m = metrics[i];
                    ++epochs;
                    if (m.epoch != i + 1 || m.completed_at < m.injected_at ||
                        engine.coordinator().latest_complete() < m.epoch)
                    {
                        failures.add(s.name + ": epoch " + std::to_string(m.epoch) + " did not complete");
                        continue;
                    }
                    auto took = m.completed_at - m.injected_at;
                    worst = std::max(worst, took);
                    if (took > 10 * engine.record_budget())
                    {
                        failures.add(s.name + ": epoch " + std::to_string(m.epoch) + " exceeded the watchdog bound");
                    }
                }
                if (engine.coordinator().in_flight())
                {
                    failures.add(s.name + ": an epoch was still in flight at the end");
                }
                if (s.config.protocol != Protocol::None && report.epochs.empty() && s.workload->sources.size() > 0 &&
                    s.config.trigger.kind == TriggerPolicy::Kind::Records)
                {
                    failures.add(s.name + ": no epoch was taken");
                }
            }
            catch (const std::exception &e)
            {
                failures.add(s.name + ": " + e.what());
            }
        }
        CriterionResult r{"termination", false, {}, seconds_since(start)};
        r.pass = failures.empty() && epochs > 0;
        r.detail = std::to_string(runs.size()) + " runs, " + std::to_string(epochs) +
                   " epochs all complete; slowest epoch took " + std::to_string(worst) + " steps";
        if (!failures.empty())
        {
            r.detail += "; " + failures.summary();
        }
        return r;
    }

    CriterionResult check_cyclic(const SuiteOptions &o)
    {
        auto start = Clock::now();
        Failures failures(o.log);
        struct Case
        {
            std::string topology;
            std::uint64_t records;
            std::int64_t turns;
        };
        std::vector<Case> cases;
        std::uint64_t max_loop = o.quick ? 2 : 4;
        for (std::uint64_t n = 1; n <= max_loop; ++n)
        {
            for (std::int64_t turns : {1, 2})
            {
                cases.push_back({"loop", n, turns});
            }
        }
        cases.push_back({"double_loop", 1, 2});
        if (!o.quick)
        {
            cases.push_back({"double_loop", 2, 1});
        }

        std::uint64_t states = 0;
        std::uint64_t snapshots = 0;
        std::uint64_t logged = 0;
        std::uint64_t max_log = 0;
        for (const auto &c : cases)
        {
            auto name = c.topology + " records=" + std::to_string(c.records) + " turns=" + std::to_string(c.turns);
            try
            {
                auto g = builtin_topology(c.topology);
                auto w = loop_workload(g, c.records, c.turns, o.seed);
                auto res = explore_snapshots(share(std::move(g)), share(std::move(w)));
                states += res.states;
                snapshots += res.snapshots;
                logged += res.logged_snapshots;
                max_log = std::max(max_log, res.max_backup_log);
                if (o.log != nullptr)
                {
                    *o.log << "    " << name << ": " << res.states << " states, " << res.distinct_snapshots
                           << " distinct snapshots, max log " << res.max_backup_log << "\n";
                }
                if (res.truncated)
                {
                    failures.add(name + ": exploration truncated");
                }
                for (const auto &v : res.violations)
                {
                    failures.add(name + ": " + v);
                }
            }
            catch (const std::exception &e)
            {
                failures.add(name + ": " + e.what());
            }
        }
        CriterionResult r{"cyclic", false, {}, seconds_since(start)};
        r.pass = failures.empty() && logged > 0 && r.seconds < 300.0;
        r.detail = std::to_string(cases.size()) + " loop workloads, " + std::to_string(states) + " states, " +
                   std::to_string(snapshots) + " snapshots checked (" + std::to_string(logged) +
                   " with back-edge logs, longest " + std::to_string(max_log) + ")";
        if (logged == 0)
        {
            r.detail += "; no snapshot exercised a back-edge log";
        }
        if (!failures.empty())
        {
            r.detail += "; " + failures.summary();
        }
        if (r.seconds >= 300.0)
        {
            r.detail += "; exceeded 300 s";
        }
        return r;
    }

    namespace
    {
        struct KillStats
        {
            std::uint64_t runs = 0;
            std::uint64_t restored = 0;
        };

        /// Runs `s` with one failure injected and checks the sink output.
        void kill_run(const Scenario &s, const TaskId &victim, std::uint64_t at_step, const OracleResult &oracle,
                      bool check_order, Failures &failures, KillStats &stats)
        {
            auto cfg = s.config;
            cfg.failures = {{victim, at_step}};
            auto what = s.name + " kill " + victim.str() + "@" + std::to_string(at_step) + " seed " +
                        std::to_string(cfg.seed);
            try
            {
                MemoryStore store;
                Engine engine(s.graph, s.workload, cfg, &store);
                auto report = engine.run();
                ++stats.runs;
                if (report.recoveries != 1)
                {
                    failures.add(what + ": failure did not fire");
                    return;
                }
                if (report.sink_outputs() != oracle.sink_outputs)
                {
                    failures.add(what + ": sink output differs from the failure-free oracle");
                    return;
                }
                if (check_order)
                {
                    for (const auto &[id, st] : report.sink_states)
                    {
                        if (sink_sequence(st) != sink_sequence(oracle.states.at(id)))
                        {
                            failures.add(what + ": sink order differs");
                        }
                    }
                }
                if (report.restored_epochs.front() > 0)
                {
                    ++stats.restored;
                }
            }
            catch (const std::exception &e)
            {
                failures.add(what + ": " + e.what());
            }
        }

        std::vector<std::uint64_t> failure_free_steps(const Scenario &s)
        {
            Engine engine(s.graph, s.workload, s.config);
            engine.run();
            std::vector<std::uint64_t> out;
            for (const auto &t : engine.tasks())
            {
                out.push_back(t.steps);
            }
            return out;
        }
    } // namespace

    CriterionResult check_exactly_once(const SuiteOptions &o)
    {
        auto start = Clock::now();
        Failures failures(o.log);
        KillStats stats;

        struct Small
        {
            Scenario s;
            bool ordered;
        };
        std::vector<Small> small;
        auto items = [](std::vector<std::string> keys) {
            Workload w;
            w.fallback = SourceWorkload::from_keys(keys);
            return w;
        };
        std::vector<std::uint64_t> seeds = o.quick ? std::vector<std::uint64_t>{1} : std::vector<std::uint64_t>{1, 2, 3};
        for (auto seed : seeds)
        {
            small.push_back({scenario("chain3", chain3(), items({"a", "b", "a", "c", "b", "a"}), Protocol::Abs,
                                      TriggerPolicy::records(2), seed),
                             false});
            small.push_back({scenario("chain3 ordered", chain3("identity", "sink_log"),
                                      items({"a", "b", "a", "c", "b", "a"}), Protocol::Abs, TriggerPolicy::records(2),
                                      seed),
                             true});
            small.push_back({scenario("diamond", diamond(), items({"a", "b", "c", "d", "a", "b"}), Protocol::Abs,
                                      TriggerPolicy::records(2), seed),
                             false});
            auto g = loop();
            auto w = loop_workload(g, 4, 2, seed);
            small.push_back(
                {scenario("loop", std::move(g), std::move(w), Protocol::Abs, TriggerPolicy::records(1), seed), false});
            small.push_back({scenario("chain3 sync", chain3(), items({"a", "b", "a", "c", "b", "a"}), Protocol::Sync,
                                      TriggerPolicy::records(2), seed),
                             false});
        }
        for (const auto &[s, ordered] : small)
        {
            try
            {
                auto oracle = run_oracle(*s.graph, *s.workload);
                auto steps = failure_free_steps(s);
                for (std::size_t t = 0; t < steps.size(); ++t)
                {
                    for (std::uint64_t k = 1; k <= steps[t]; ++k)
                    {
                        kill_run(s, s.graph->tasks()[t].id, k, oracle, ordered, failures, stats);
                    }
                }
            }
            catch (const std::exception &e)
            {
                failures.add(s.name + ": " + e.what());
            }
        }
        auto exhaustive = stats.runs;

        {
            auto g = build_layered_topology(2);
            auto w = generated_workload(g, o.quick ? 2000 : 10'000, 64, o.seed);
            auto s = scenario("layered:2", std::move(g), std::move(w), Protocol::Abs,
                              TriggerPolicy::records(o.quick ? 200 : 1000), o.seed);
            try
            {
                auto oracle = run_oracle(*s.graph, *s.workload);
                auto steps = failure_free_steps(s);
                std::mt19937_64 rng(o.seed);
                auto points = o.quick ? 20u : o.layered_kill_points;
                for (std::uint32_t i = 0; i < points; ++i)
                {
                    auto t = rng() % steps.size();
                    auto k = 1 + rng() % steps[t];
                    kill_run(s, s.graph->tasks()[t].id, k, oracle, false, failures, stats);
                }
            }
            catch (const std::exception &e)
            {
                failures.add(s.name + ": " + e.what());
            }
        }
        CriterionResult r{"exactly_once", false, {}, seconds_since(start)};
        r.pass = failures.empty() && stats.runs > 0 && r.seconds < 600.0;
        r.detail = std::to_string(exhaustive) + " exhaustive kill points on chain3/diamond/loop, " +
                   std::to_string(stats.runs - exhaustive) + " random kill points on layered:2; " +
                   std::to_string(stats.restored) + " recoveries restored from a snapshot";
        if (!failures.empty())
        {
            r.detail += "; " + failures.summary();
        }
        if (r.seconds >= 600.0)
        {
            r.detail += "; exceeded 600 s";
        }
        return r;
    }

    CriterionResult check_overhead(const SuiteOptions &o)
    {
        auto start = Clock::now();
        auto spec = o.overhead;
        if (o.quick)
        {
            spec.record_count = std::min<std::uint64_t>(spec.record_count, 100'000);
            spec.repetitions = std::min<std::uint32_t>(spec.repetitions, 3);
        }
        auto intervals = default_intervals(spec.record_count);
        auto rows = run_sweep(spec, {Protocol::Abs, Protocol::Sync}, intervals, o.log);
        if (o.log != nullptr)
        {
            *o.log << bench_csv_header() << "\n";
            for (const auto &row : rows)
            {
                *o.log << to_csv(row) << "\n";
            }
        }
        std::vector<double> abs;
        std::vector<double> sync;
        for (const auto &row : rows)
        {
            if (row.protocol == "abs")
            {
                abs.push_back(row.overhead_pct);
            }
            else if (row.protocol == "sync")
            {
                sync.push_back(row.overhead_pct);
            }
        }

        CriterionResult r{"overhead", true, {}, 0.0};
        std::ostringstream d;
        d.precision(1);
        d << std::fixed << "median of " << spec.repetitions << " reps, " << spec.record_count
          << " records, baseline " << rows.front().median_runtime_ms << " ms; intervals";
        for (const auto &t : intervals)
        {
            d << " " << t.str();
        }
        d << "; abs%";
        for (auto v : abs)
        {
            d << " " << v;
        }
        d << "; sync%";
        for (auto v : sync)
        {
            d << " " << v;
        }
        for (std::size_t i = 0; i < 2 && i < abs.size(); ++i)
        {
            if (!(sync[i] > abs[i]))
            {
                r.pass = false;
                d << "; sync does not exceed abs at " << intervals[i].str();
            }
        }
        for (std::size_t i = 1; i < sync.size(); ++i)
        {
            if (sync[i] > sync[i - 1])
            {
                r.pass = false;
                d << "; sync overhead grows from " << intervals[i - 1].str() << " to " << intervals[i].str();
            }
        }
        if (!abs.empty())
        {
            d << (abs.back() <= 25.0 ? "; abs at largest interval within 25%" : "; note: abs at largest interval above 25%");
        }
        r.detail = d.str();
        r.seconds = seconds_since(start);
        return r;
    }

    CriterionResult check_durability(const SuiteOptions &o)
    {
        auto start = Clock::now();
        Failures failures(o.log);

        std::vector<GlobalSnapshot> snaps;
        {
            auto g = loop();
            auto w = loop_workload(g, 60, 3, o.seed);
            EngineConfig cfg;
            cfg.trigger = TriggerPolicy::records(3);
            cfg.seed = o.seed;
            Engine engine(share(std::move(g)), share(std::move(w)), cfg);
            Collector col;
            engine.set_observer(&col);
            engine.run();
            snaps = col.snapshots;
        }
        if (snaps.size() < 3)
        {
            return {"durability", false, "could not produce three snapshots to persist", seconds_since(start)};
        }
        snaps.resize(3);
        bool any_log = std::any_of(snaps.begin(), snaps.end(), [](const GlobalSnapshot &s) {
            return s.channel_records() > 0;
        });

        auto root = scratch_root(o) / "durability";
        std::uint64_t crashes = 0;
        std::uint64_t torn = 0;
        auto expect_latest = [&](const DirectoryStore &store, std::size_t committed, const std::string &what) {
            if (committed == 0)
            {
                try
                {
                    store.load_latest();
                    failures.add(what + ": a snapshot loaded from an empty store");
                }
                catch (const NoSnapshot &)
                {
                }
                return;
            }
            auto got = store.load_latest();
            if (!(got == snaps[committed - 1]))
            {
                failures.add(what + ": load_latest returned epoch " + std::to_string(got.epoch) + ", expected " +
                             std::to_string(committed));
            }
            for (auto e : store.epochs())
            {
                if (e > committed || !(store.load(e) == snaps[e - 1]))
                {
                    failures.add(what + ": epoch " + std::to_string(e) + " is not a complete commit");
                }
            }
        };

        for (std::size_t keep : {0, 2})
        {
            for (std::size_t k = 1; k <= snaps.size(); ++k)
            {
                auto dir = root / "dry";
                fs::remove_all(dir);
                WriteFaults counter;
                {
                    DirectoryStore store(dir, StoreOptions{keep, true});
                    for (std::size_t j = 0; j + 1 < k; ++j)
                    {
                        store.persist(snaps[j]);
                    }
                    store.set_faults(&counter);
                    store.persist(snaps[k - 1]);
                }
                const auto &names = counter.log();
                auto rename = std::find_if(names.begin(), names.end(),
                                           [](const std::string &n) { return n.rfind("rename ", 0) == 0; });
                auto commit_index = static_cast<std::size_t>(rename - names.begin());

                for (std::size_t i = 0; i < counter.count(); ++i)
                {
                    auto what = "keep=" + std::to_string(keep) + " epoch " + std::to_string(k) + " crash at '" +
                                names[i] + "'";
                    auto cdir = root / "crash";
                    fs::remove_all(cdir);
                    try
                    {
                        {
                            DirectoryStore store(cdir, StoreOptions{keep, true});
                            for (std::size_t j = 0; j + 1 < k; ++j)
                            {
                                store.persist(snaps[j]);
                            }
                            WriteFaults faults(i);
                            store.set_faults(&faults);
                            try
                            {
                                store.persist(snaps[k - 1]);
                                failures.add(what + ": no crash happened");
                            }
                            catch (const SimulatedCrash &)
                            {
                                ++crashes;
                                torn += names[i].rfind("write ", 0) == 0 ? 1 : 0;
                            }
                        }
                        DirectoryStore reopened(cdir, StoreOptions{keep, true});
                        expect_latest(reopened, i > commit_index ? k : k - 1, what);
                        reopened.persist(snaps[k - 1]);
                        DirectoryStore again(cdir, StoreOptions{keep, true});
                        expect_latest(again, k, what + " after retry");
                    }
                    catch (const std::exception &e)
                    {
                        failures.add(what + ": " + e.what());
                    }
                }
            }
        }

        {
            auto cdir = root / "corrupt";
            fs::remove_all(cdir);
            DirectoryStore store(cdir);
            store.persist(snaps[0]);
            store.persist(snaps[1]);
            auto victim = cdir / DirectoryStore::epoch_dir_name(2) / "task-0000.bin";
            {
                std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
                f.seekp(3);
                f.put('\x5a');
            }
            if (!(store.load_latest() == snaps[0]))
            {
                failures.add("corrupted epoch 2: load_latest did not fall back to epoch 1");
            }
            try
            {
                store.load(2);
                failures.add("corrupted epoch 2 loaded");
            }
            catch (const DecodeError &)
            {
            }
        }
        std::error_code ec;
        fs::remove_all(root, ec);

        CriterionResult r{"durability", false, {}, seconds_since(start)};
        r.pass = failures.empty() && crashes > 0 && torn > 0 && any_log;
        r.detail = std::to_string(crashes) + " simulated crashes (" + std::to_string(torn) +
                   " torn writes) across every commit boundary; load_latest always returned the last commit";
        if (!any_log)
        {
            r.detail += "; no snapshot with back-edge logs was exercised";
        }
        if (!failures.empty())
        {
            r.detail += "; " + failures.summary();
        }
        return r;
    }

    CriterionResult check_determinism(const SuiteOptions &o)
    {
        auto start = Clock::now();
        Failures failures(o.log);
        std::vector<Scenario> runs;
        for (std::uint64_t i = 0; i < (o.quick ? 5u : 40u); ++i)
        {
            runs.push_back(random_scenario(seed_for(o, 200'000 + i), i % 2 == 0 ? Protocol::Abs : Protocol::Sync));
        }
        {
            auto g = loop();
            auto w = loop_workload(g, 50, 3, o.seed);
            runs.push_back(scenario("loop", std::move(g), std::move(w), Protocol::Abs, TriggerPolicy::records(7)));
        }
        {
            auto g = build_layered_topology(2);
            auto w = generated_workload(g, 5000, 64, o.seed);
            auto s = scenario("layered:2", std::move(g), std::move(w), Protocol::Abs, TriggerPolicy::records(500));
            runs.push_back(s);
            s.name = "layered:2 with failure";
            s.config.failures.push_back({TaskId("sum1"), 3000});
            runs.push_back(s);
            s.name = "layered:2 sync";
            s.config.protocol = Protocol::Sync;
            s.config.failures.clear();
            runs.push_back(s);
        }
        auto root = scratch_root(o) / "determinism";
        std::uint64_t files = 0;
        for (const auto &s : runs)
        {
            try
            {
                std::uint64_t digests[2];
                std::map<std::string, std::string> trees[2];
                for (int k = 0; k < 2; ++k)
                {
                    auto dir = root / (k == 0 ? "a" : "b");
                    fs::remove_all(dir);
                    DirectoryStore store(dir, StoreOptions{0, false});
                    Engine engine(s.graph, s.workload, s.config, &store);
                    digests[k] = engine.run().digest();
                    trees[k] = read_tree(dir);
                }
                if (digests[0] != digests[1])
                {
                    failures.add(s.name + ": report digests differ");
                }
                if (trees[0] != trees[1])
                {
                    failures.add(s.name + ": snapshot files differ");
                }
                files += trees[0].size();
            }
            catch (const std::exception &e)
            {
                failures.add(s.name + ": " + e.what());
            }
        }
        std::error_code ec;
        fs::remove_all(root, ec);
        CriterionResult r{"determinism", false, {}, seconds_since(start)};
        r.pass = failures.empty() && files > 0;
        r.detail = std::to_string(runs.size()) + " scenarios run twice; digests and " + std::to_string(files) +
                   " snapshot files identical";
        if (!failures.empty())
        {
            r.detail += "; " + failures.summary();
        }
        return r;
    }

    std::vector<std::string> criterion_names()
    {
        return {"feasibility", "minimality", "termination", "cyclic",
                "exactly_once", "overhead",  "durability",  "determinism"};
    }

    std::vector<CriterionResult> run_suite(const SuiteOptions &options, const std::vector<std::string> &only)
    {
        using Check = std::function<CriterionResult(const SuiteOptions &)>;
        const std::map<std::string, Check> checks{
            {"feasibility", check_feasibility}, {"minimality", check_minimality},
            {"termination", check_termination}, {"cyclic", check_cyclic},
            {"exactly_once", check_exactly_once}, {"overhead", check_overhead},
            {"durability", check_durability}, {"determinism", check_determinism},
        };
        for (const auto &name : only)
        {
            if (!checks.contains(name))
            {
                throw std::invalid_argument("unknown criterion '" + name + "'");
            }
        }
        std::vector<CriterionResult> out;
        for (const auto &name : criterion_names())
        {
            if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end())
            {
                continue;
            }
            if (options.log != nullptr)
            {
                *options.log << "== " << name << "\n" << std::flush;
            }
            auto start = Clock::now();
            CriterionResult r;
            try
            {
                r = checks.at(name)(options);
            }
            catch (const std::exception &e)
            {
                r = {name, false, std::string("error: ") + e.what(), seconds_since(start)};
            }
            out.push_back(std::move(r));
        }
        std::error_code ec;
        fs::remove_all(scratch_root(options), ec);
        return out;
    }

    std::string format_result(const CriterionResult &r)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, " (%.1f s) ", r.seconds);
        return std::string(r.pass ? "PASS " : "FAIL ") + r.name + buf + r.detail;
    }
} // namespace absflow
