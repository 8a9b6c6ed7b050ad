#include "absflow/channel.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <random>

using namespace absflow;

namespace
{
    Message data(std::uint64_t seq)
    {
        return Record{"k" + std::to_string(seq), static_cast<std::int64_t>(seq), TaskId("src"), seq, 0};
    }

    std::uint64_t seq_of(const Message &m) { return std::get<Record>(m).seq; }

    const ChannelId kId{TaskId("a"), TaskId("b"), 0};
} // namespace

TEST_CASE("channel delivers in FIFO order")
{
    Channel c(kId);
    c.send(data(1));
    c.send(data(2));
    CHECK(seq_of(*c.receive()) == 1);
    CHECK(seq_of(*c.receive()) == 2);
    CHECK_FALSE(c.receive().has_value());
}

TEST_CASE("blocked channel buffers without delivering")
{
    Channel c(kId);
    c.block();
    c.send(data(3));
    CHECK_FALSE(c.deliverable());
    CHECK_FALSE(c.receive().has_value());
    CHECK(c.size() == 1);
    c.unblock();
    CHECK(seq_of(*c.receive()) == 3);
}

TEST_CASE("block and unblock are idempotent")
{
    Channel c(kId);
    c.unblock();
    CHECK_FALSE(c.blocked());
    c.block();
    c.block();
    CHECK(c.blocked());
    c.unblock();
    c.unblock();
    CHECK_FALSE(c.blocked());
}

TEST_CASE("blocked channel spills beyond its threshold and preserves order")
{
    testing::TempDir dir;
    Channel c(kId, 100, dir.path());
    c.block();
    for (std::uint64_t i = 1; i <= 1000; ++i)
    {
        c.send(data(i));
    }
    CHECK(c.in_memory() == 100);
    CHECK(c.spilled() == 900);
    CHECK(c.size() == 1000);
    CHECK(c.data_count() == 1000);

    auto copy = c;
    CHECK(copy.spilled() == 900);

    c.unblock();
    std::vector<std::uint64_t> got;
    while (auto m = c.receive())
    {
        got.push_back(seq_of(*m));
    }
    REQUIRE(got.size() == 1000);
    for (std::uint64_t i = 0; i < 1000; ++i)
    {
        CHECK(got[i] == i + 1);
    }
    CHECK(c.spilled() == 0);

    copy.unblock();
    std::uint64_t expect = 1;
    bool ordered = true;
    while (auto m = copy.receive())
    {
        ordered = ordered && seq_of(*m) == expect++;
    }
    CHECK(ordered);
    CHECK(expect == 1001);
}

TEST_CASE("push_front puts replayed messages ahead of the queue")
{
    Channel c(kId);
    c.send(data(5));
    c.push_front({data(1), data(2)});
    CHECK(seq_of(*c.receive()) == 1);
    CHECK(seq_of(*c.receive()) == 2);
    CHECK(seq_of(*c.receive()) == 5);
}

TEST_CASE("closed channel rejects sends")
{
    Channel c(kId);
    c.close();
    CHECK_THROWS_AS(c.send(data(1)), ChannelClosed);
}

TEST_CASE("data_count ignores barriers and clear drops everything")
{
    Channel c(kId);
    c.send(data(1));
    c.send(Barrier{1});
    c.send(data(2));
    CHECK(c.data_count() == 2);
    CHECK(c.size() == 3);
    c.clear();
    CHECK(c.empty());
    CHECK(c.data_count() == 0);
}

TEST_CASE("FIFO holds under random block, unblock, send and receive")
{
    for (std::uint64_t seed = 1; seed <= 50; ++seed)
    {
        CAPTURE(seed);
        testing::TempDir dir;
        std::mt19937_64 rng(seed);
        std::optional<std::size_t> threshold;
        if (seed % 2 == 0)
        {
            threshold = 1 + rng() % 8;
        }
        Channel c(kId, threshold, dir.path());
        std::uint64_t sent = 0;
        std::vector<std::uint64_t> delivered;
        for (int step = 0; step < 2000; ++step)
        {
            switch (rng() % 5)
            {
            case 0:
                c.block();
                break;
            case 1:
                c.unblock();
                break;
            case 2:
            case 3:
                c.send(data(++sent));
                break;
            default:
                if (auto m = c.receive())
                {
                    CHECK_FALSE(c.blocked());
                    delivered.push_back(seq_of(*m));
                }
            }
        }
        c.unblock();
        while (auto m = c.receive())
        {
            delivered.push_back(seq_of(*m));
        }
        REQUIRE(delivered.size() == sent);
        bool prefix = true;
        for (std::size_t i = 0; i < delivered.size(); ++i)
        {
            prefix = prefix && delivered[i] == i + 1;
        }
        CHECK(prefix);
    }
}

TEST_CASE("messages round-trip through the codec")
{
    std::vector<Message> msgs{data(9), Barrier{4}, Control{ControlKind::SnapshotRequest, 3}};
    for (const auto &m : msgs)
    {
        ByteWriter w;
        encode(w, m);
        ByteReader r(w.bytes());
        CHECK(decode_message(r) == m);
        CHECK(r.done());
    }
}
