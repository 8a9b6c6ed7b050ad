#include "absflow/state.hpp"

#include <charconv>
#include <stdexcept>
#include <string>

namespace absflow
{
    std::uint64_t DedupCursor::position(const TaskId &source, std::uint64_t lineage) const
    {
        auto it = entries_.find(Key{source, lineage});
        return it == entries_.end() ? 0 : it->second;
    }

    bool DedupCursor::admit(const TaskId &source, std::uint64_t lineage, std::uint64_t seq)
    {
        auto [it, inserted] = entries_.try_emplace(Key{source, lineage}, seq);
        if (inserted)
        {
            return true;
        }
        if (seq <= it->second)
        {
            return false;
        }
        it->second = seq;
        return true;
    }

    void DedupCursor::encode(ByteWriter &w) const
    {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(entries_.size()));
        for (const auto &[key, seq] : entries_)
        {
            w.put_string(key.first.str());
            w.put(key.second);
            w.put(seq);
        }
    }

    DedupCursor DedupCursor::decode(ByteReader &r)
    {
        DedupCursor c;
        auto n = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < n; ++i)
        {
            TaskId source(r.get_string());
            auto lineage = r.get<std::uint64_t>();
            auto seq = r.get<std::uint64_t>();
            c.entries_.emplace(Key{std::move(source), lineage}, seq);
        }
        return c;
    }

    std::string OperatorState::serialize() const
    {
        ByteWriter w;
        w.put(kStateFormatVersion);
        w.put(offset);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(table.size()));
        for (const auto &[k, v] : table)
        {
            w.put_string(k);
            w.put(v);
        }
        cursor.encode(w);
        return std::move(w).take();
    }

    OperatorState OperatorState::deserialize(std::string_view bytes)
    {
        ByteReader r(bytes);
        if (r.get<std::uint8_t>() != kStateFormatVersion)
        {
            throw DecodeError("unsupported operator state version");
        }
        OperatorState s;
        s.offset = r.get<std::uint64_t>();
        auto n = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < n; ++i)
        {
            auto k = r.get_string();
            auto v = r.get<std::int64_t>();
            s.table.emplace(std::move(k), v);
        }
        s.cursor = DedupCursor::decode(r);
        r.expect_done();
        return s;
    }

    namespace
    {
        std::string_view trim(std::string_view s)
        {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
            {
                s.remove_prefix(1);
            }
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t'))
            {
                s.remove_suffix(1);
            }
            return s;
        }

        template <typename T>
        T parse_number(std::string_view text, std::string_view literal)
        {
            T v{};
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc{} || p != text.data() + text.size())
            {
                throw std::invalid_argument("bad number in state literal: " + std::string(literal));
            }
            return v;
        }
    } // namespace

    OperatorState OperatorState::parse_literal(std::string_view literal)
    {
        OperatorState s;
        std::string_view rest = trim(literal);
        if (rest.size() >= 2 && rest.front() == '{' && rest.back() == '}')
        {
            rest = trim(rest.substr(1, rest.size() - 2));
        }
        while (!rest.empty())
        {
            auto comma = rest.find(',');
            auto item = trim(rest.substr(0, comma));
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
            if (item.empty())
            {
                continue;
            }
            auto eq = item.find_first_of("=:");
            if (eq == std::string_view::npos)
            {
                throw std::invalid_argument("expected name=value in state literal: " + std::string(literal));
            }
            auto name = trim(item.substr(0, eq));
            auto value = trim(item.substr(eq + 1));
            if (name == "offset")
            {
                s.offset = parse_number<std::uint64_t>(value, literal);
            }
            else
            {
                s.table[std::string(name)] = parse_number<std::int64_t>(value, literal);
            }
        }
        return s;
    }

    std::string OperatorState::to_literal() const
    {
        std::string out;
        if (offset != 0)
        {
            out = "offset=" + std::to_string(offset);
        }
        for (const auto &[k, v] : table)
        {
            if (!out.empty())
            {
                out += ',';
            }
            out += k + "=" + std::to_string(v);
        }
        return out;
    }
} // namespace absflow
