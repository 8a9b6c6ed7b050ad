#include "absflow/topology_io.hpp"

#include "absflow/builtins.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace absflow
{
    using nlohmann::json;

    namespace
    {
        std::string read_file(const std::string &path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                throw FormatError("cannot read " + path);
            }
            std::ostringstream s;
            s << in.rdbuf();
            return s.str();
        }

        json parse_json(std::string_view text)
        {
            try
            {
                return json::parse(text);
            }
            catch (const json::parse_error &e)
            {
                throw FormatError(std::string("malformed document: ") + e.what());
            }
        }

        SourceWorkload parse_source(const json &j)
        {
            if (j.contains("items"))
            {
                std::vector<SourceItem> items;
                for (const auto &it : j.at("items"))
                {
                    if (it.is_array())
                    {
                        items.push_back({it.at(0).get<std::string>(), it.at(1).get<std::int64_t>()});
                    }
                    else
                    {
                        items.push_back({it.at("key").get<std::string>(), it.value("value", std::int64_t{1})});
                    }
                }
                return SourceWorkload::from_items(std::move(items));
            }
            if (j.contains("keys"))
            {
                return SourceWorkload::from_keys(j.at("keys").get<std::vector<std::string>>(),
                                                 j.value("value", std::int64_t{1}));
            }
            if (j.contains("generate"))
            {
                const auto &g = j.at("generate");
                SourceWorkload::Generator gen;
                gen.count = g.at("count").get<std::uint64_t>();
                gen.keys = g.value("keys", std::uint32_t{16});
                gen.seed = g.value("seed", std::uint64_t{0});
                gen.value = g.value("value", std::int64_t{1});
                return SourceWorkload::generated(gen);
            }
            throw FormatError("source workload needs items, keys or generate");
        }
    } // namespace

    ExecutionGraph parse_topology(std::string_view text, const UdfRegistry &registry)
    {
        auto doc = parse_json(text);
        try
        {
            std::vector<TaskSpec> tasks;
            for (const auto &t : doc.at("tasks"))
            {
                TaskSpec spec;
                spec.id = TaskId(t.at("id").get<std::string>());
                spec.kind = parse_task_kind(t.value("kind", std::string("operator")));
                spec.udf = t.value("udf", std::string(spec.kind == TaskKind::Source ? "source" : "identity"));
                spec.initial_state = OperatorState::parse_literal(t.value("state", std::string()));
                tasks.push_back(std::move(spec));
            }
            std::vector<ChannelId> channels;
            for (const auto &c : doc.at("channels"))
            {
                ChannelId id;
                if (c.is_array())
                {
                    id.from = TaskId(c.at(0).get<std::string>());
                    id.to = TaskId(c.at(1).get<std::string>());
                    id.ordinal = c.size() > 2 ? c.at(2).get<std::uint32_t>() : 0;
                }
                else
                {
                    id.from = TaskId(c.at("from").get<std::string>());
                    id.to = TaskId(c.at("to").get<std::string>());
                    id.ordinal = c.value("ordinal", std::uint32_t{0});
                }
                channels.push_back(std::move(id));
            }
            return make_graph(std::move(tasks), std::move(channels), registry);
        }
        catch (const json::exception &e)
        {
            throw FormatError(std::string("bad topology document: ") + e.what());
        }
    }

    std::string topology_to_json(const ExecutionGraph &graph)
    {
        json doc;
        doc["tasks"] = json::array();
        for (const auto &t : graph.tasks())
        {
            json jt{{"id", t.id.str()}, {"kind", std::string(to_string(t.kind))}, {"udf", t.udf}};
            auto literal = t.initial_state.to_literal();
            if (!literal.empty())
            {
                jt["state"] = literal;
            }
            doc["tasks"].push_back(std::move(jt));
        }
        doc["channels"] = json::array();
        for (const auto &c : graph.channels())
        {
            json jc{{"from", c.from.str()}, {"to", c.to.str()}};
            if (c.ordinal != 0)
            {
                jc["ordinal"] = c.ordinal;
            }
            doc["channels"].push_back(std::move(jc));
        }
        return doc.dump(2) + "\n";
    }

    Workload parse_workload(std::string_view text)
    {
        auto doc = parse_json(text);
        try
        {
            Workload w;
            if (doc.contains("sources"))
            {
                for (const auto &[id, j] : doc.at("sources").items())
                {
                    w.sources[TaskId(id)] = parse_source(j);
                }
            }
            if (doc.contains("default"))
            {
                w.fallback = parse_source(doc.at("default"));
            }
            return w;
        }
        catch (const json::exception &e)
        {
            throw FormatError(std::string("bad workload document: ") + e.what());
        }
    }

    ExecutionGraph load_topology(const std::string &spec, const UdfRegistry &registry)
    {
        if (std::filesystem::exists(spec) && std::filesystem::is_regular_file(spec))
        {
            return parse_topology(read_file(spec), registry);
        }
        return builtin_topology(spec);
    }

    Workload load_workload(const std::string &spec, const ExecutionGraph &graph, std::uint64_t seed)
    {
        if (spec.rfind("gen:", 0) == 0)
        {
            std::vector<std::string> parts;
            std::stringstream ss(spec.substr(4));
            for (std::string p; std::getline(ss, p, ':');)
            {
                parts.push_back(p);
            }
            if (parts.empty() || parts.size() > 3)
            {
                throw FormatError("expected gen:N[:keys[:turns]], got " + spec);
            }
            auto n = std::stoull(parts[0]);
            auto keys = parts.size() > 1 ? static_cast<std::uint32_t>(std::stoul(parts[1])) : 16u;
            auto turns = parts.size() > 2 ? std::stoll(parts[2]) : 1;
            return generated_workload(graph, n, keys, seed, turns);
        }
        if (spec.rfind("keys:", 0) == 0)
        {
            std::vector<std::string> keys;
            std::stringstream ss(spec.substr(5));
            for (std::string k; std::getline(ss, k, ',');)
            {
                keys.push_back(k);
            }
            Workload w;
            w.fallback = SourceWorkload::from_keys(keys);
            return w;
        }
        return parse_workload(read_file(spec));
    }
} // namespace absflow
