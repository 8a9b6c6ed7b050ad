#include "absflow/report.hpp"

#include <cstdio>
#include <sstream>

namespace absflow
{
    namespace
    {
        constexpr const char *kDigestCount = "#n";
        constexpr const char *kDigestHash = "#h";

        std::int64_t table_value(const OperatorState &s, const char *key)
        {
            auto it = s.table.find(key);
            return it == s.table.end() ? 0 : it->second;
        }

        std::string fixed(double v, int digits)
        {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.*f", digits, v);
            return buf;
        }
    } // namespace

    SinkMultiset RunReport::sink_outputs() const
    {
        SinkMultiset merged;
        for (const auto &[_, state] : sink_states)
        {
            for (const auto &[kv, n] : sink_multiset(state))
            {
                merged[kv] += n;
            }
        }
        return merged;
    }

    void RunReport::finalize_sinks()
    {
        auto merged = sink_outputs();
        sink_records = 0;
        for (const auto &[_, n] : merged)
        {
            sink_records += static_cast<std::uint64_t>(n);
        }
        sink_digest = multiset_digest(merged);
        for (const auto &[_, state] : sink_states)
        {
            sink_records += static_cast<std::uint64_t>(table_value(state, kDigestCount));
            sink_digest += static_cast<std::uint64_t>(table_value(state, kDigestHash));
        }
    }

    std::uint64_t RunReport::snapshot_bytes() const noexcept
    {
        std::uint64_t n = 0;
        for (const auto &e : epochs)
        {
            n += e.size_bytes;
        }
        return n;
    }

    std::string RunReport::to_text() const
    {
        std::ostringstream out;
        out << "protocol " << protocol << "\n";
        out << "mode " << mode << "\n";
        out << "trigger " << trigger << "\n";
        out << "workers " << workers << "\n";
        out << "seed " << seed << "\n";
        out << "records_ingested " << records_ingested << "\n";
        out << "steps " << steps << "\n";
        out << "wall_ns " << wall_ns << "\n";
        out << "throughput " << fixed(throughput, 1) << "\n";
        out << "epochs " << epochs.size() << "\n";
        for (const auto &e : epochs)
        {
            out << "epoch " << e.epoch << " injected_at=" << e.injected_at << " completed_at=" << e.completed_at
                << " duration=" << (e.completed_at >= e.injected_at ? e.completed_at - e.injected_at : 0)
                << " size_bytes=" << e.size_bytes << " channel_records=" << e.channel_records
                << " in_flight_at_barrier=" << e.in_flight_at_barrier << "\n";
        }
        out << "snapshot_bytes " << snapshot_bytes() << "\n";
        out << "blocking_time " << blocking_time << "\n";
        out << "halt_time " << halt_time << "\n";
        out << "halt_in_flight " << halt_in_flight << "\n";
        out << "sink_outputs_during_halt " << sink_outputs_during_halt << "\n";
        out << "failures " << failures << "\n";
        out << "recoveries " << recoveries << "\n";
        for (auto e : restored_epochs)
        {
            out << "restored_from_epoch " << e << "\n";
        }
        out << "failed " << (failed ? 1 : 0) << "\n";
        out << "sink_records " << sink_records << "\n";
        out << "sink_digest " << std::hex << sink_digest << std::dec << "\n";
        out << "report_digest " << std::hex << digest() << std::dec << "\n";
        return out.str();
    }

    std::string RunReport::csv_header()
    {
        return "protocol,mode,trigger,workers,seed,records_ingested,steps,wall_ns,throughput,epochs,snapshot_bytes,"
               "blocking_time,halt_time,halt_in_flight,failures,recoveries,sink_records,sink_digest";
    }

    std::string RunReport::to_csv_row() const
    {
        std::ostringstream out;
        out << protocol << ',' << mode << ',' << trigger << ',' << workers << ',' << seed << ',' << records_ingested
            << ',' << steps << ',' << wall_ns << ',' << fixed(throughput, 1) << ',' << epochs.size() << ','
            << snapshot_bytes() << ',' << blocking_time << ',' << halt_time << ',' << halt_in_flight << ','
            << failures << ',' << recoveries << ',' << sink_records << ',' << std::hex << sink_digest << std::dec;
        return out.str();
    }

    std::uint64_t RunReport::digest() const
    {
        ByteWriter w;
        w.put_string(protocol);
        w.put_string(mode);
        w.put_string(trigger);
        w.put(workers);
        w.put(seed);
        w.put(records_ingested);
        w.put(steps);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(epochs.size()));
        for (const auto &e : epochs)
        {
            w.put(e.epoch);
            w.put(e.injected_at);
            w.put(e.completed_at);
            w.put(e.size_bytes);
            w.put(e.channel_records);
            w.put(e.in_flight_at_barrier);
        }
        w.put(blocking_time);
        w.put(halt_time);
        w.put(halt_in_flight);
        w.put(sink_outputs_during_halt);
        w.put(failures);
        w.put(recoveries);
        for (auto e : restored_epochs)
        {
            w.put(e);
        }
        w.put_bool(failed);
        for (const auto &[id, state] : sink_states)
        {
            w.put_string(id.str());
            w.put_string(state.serialize());
        }
        w.put(sink_records);
        w.put(sink_digest);
        return mix64(fnv1a(w.bytes()));
    }
} // namespace absflow
