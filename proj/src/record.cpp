#include "absflow/record.hpp"

namespace absflow
{
    namespace
    {
        enum class Tag : std::uint8_t
        {
            Data = 1,
            Marker = 2,
            Control = 3,
        };
    }

    void encode(ByteWriter &w, const Record &r)
    {
        w.put_string(r.key);
        w.put(r.value);
        w.put_string(r.source.str());
        w.put(r.seq);
        w.put(r.lineage);
    }

    Record decode_record(ByteReader &r)
    {
        Record rec;
        rec.key = r.get_string();
        rec.value = r.get<std::int64_t>();
        rec.source = TaskId(r.get_string());
        rec.seq = r.get<std::uint64_t>();
        rec.lineage = r.get<std::uint64_t>();
        return rec;
    }

    void encode(ByteWriter &w, const Message &m)
    {
        if (const auto *rec = std::get_if<Record>(&m))
        {
            w.put(static_cast<std::uint8_t>(Tag::Data));
            encode(w, *rec);
        }
        else if (const auto *b = std::get_if<Barrier>(&m))
        {
            w.put(static_cast<std::uint8_t>(Tag::Marker));
            w.put(b->epoch);
        }
        else
        {
            const auto &c = std::get<Control>(m);
            w.put(static_cast<std::uint8_t>(Tag::Control));
            w.put(static_cast<std::uint8_t>(c.kind));
            w.put(c.epoch);
        }
    }

    Message decode_message(ByteReader &r)
    {
        switch (static_cast<Tag>(r.get<std::uint8_t>()))
        {
        case Tag::Data:
            return decode_record(r);
        case Tag::Marker:
            return Barrier{r.get<std::uint64_t>()};
        case Tag::Control:
        {
            auto kind = r.get<std::uint8_t>();
            if (kind > static_cast<std::uint8_t>(ControlKind::SnapshotRequest))
            {
                throw DecodeError("invalid control kind");
            }
            Control c;
            c.kind = static_cast<ControlKind>(kind);
            c.epoch = r.get<std::uint64_t>();
            return c;
        }
        }
        throw DecodeError("invalid message tag");
    }
} // namespace absflow
