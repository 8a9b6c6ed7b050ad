#include "absflow/builtins.hpp"
#include "absflow/codec.hpp"
#include "absflow/store.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <fstream>
#include <random>

using namespace absflow;
namespace fs = std::filesystem;

namespace
{
    GlobalSnapshot chain_snapshot(std::uint64_t epoch)
    {
        GlobalSnapshot s;
        s.epoch = epoch;
        s.task_states[TaskId("src")] = OperatorState::parse_literal("offset=" + std::to_string(epoch * 10));
        s.task_states[TaskId("map")] = OperatorState::parse_literal("a=" + std::to_string(epoch) + ",b=2");
        s.task_states[TaskId("sink")] = OperatorState::parse_literal("a=1");
        s.source_offsets[TaskId("src")] = epoch * 10;
        s.created_at = 100 + epoch;
        s.size_bytes = payload_bytes(s);
        return s;
    }

    GlobalSnapshot loop_snapshot()
    {
        GlobalSnapshot s;
        s.epoch = 3;
        for (const char *id : {"src", "head", "tail", "sink"})
        {
            s.task_states[TaskId(id)] = OperatorState{};
        }
        s.task_states[TaskId("src")].offset = 4;
        s.source_offsets[TaskId("src")] = 4;
        s.back_edge_logs[ChannelId{"tail", "head", 0}] = {Record{"k", 2, TaskId("src"), 3, 77},
                                                          Record{"j", 1, TaskId("src"), 4, 78}};
        s.size_bytes = payload_bytes(s);
        return s;
    }

    std::string slurp(const fs::path &p)
    {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }

    /// Boundary index of `what` in a fault-free persist of `s`.
    std::size_t boundary_index(const GlobalSnapshot &s, const std::string &what)
    {
        testing::TempDir dir;
        DirectoryStore probe(dir.path(), StoreOptions{0, true});
        WriteFaults counting;
        probe.set_faults(&counting);
        probe.persist(s);
        const auto &log = counting.log();
        auto it = std::find(log.begin(), log.end(), what);
        REQUIRE(it != log.end());
        return static_cast<std::size_t>(it - log.begin());
    }
} // namespace

TEST_CASE("directory and memory stores round-trip snapshots")
{
    testing::TempDir dir;
    DirectoryStore disk(dir.path(), StoreOptions{0, false});
    MemoryStore mem;
    for (SnapshotStore *store : {static_cast<SnapshotStore *>(&disk), static_cast<SnapshotStore *>(&mem)})
    {
        CHECK_THROWS_AS(store->load_latest(), NoSnapshot);
        CHECK_FALSE(store->latest_complete());
        CHECK(store->persist(chain_snapshot(1)) == 1);
        CHECK(store->persist(chain_snapshot(2)) == 2);
        CHECK(store->latest_complete() == std::optional<std::uint64_t>{2});
        CHECK(store->epochs() == std::vector<std::uint64_t>{1, 2});
        CHECK(store->load_latest() == chain_snapshot(2));
    }
    DirectoryStore reopened(dir.path());
    CHECK(reopened.load(1) == chain_snapshot(1));
    CHECK(reopened.load_latest() == chain_snapshot(2));
}

TEST_CASE("back-edge logs survive encoding")
{
    auto s = loop_snapshot();
    CHECK(decode_snapshot(encode_snapshot(s)) == s);
    CHECK(s.channel_records() == 2);
    testing::TempDir dir;
    DirectoryStore store(dir.path(), StoreOptions{0, false});
    store.persist(s);
    CHECK(fs::exists(dir.path() / "epoch-00000003" / "edge-0000.bin"));
    CHECK(store.load_latest() == s);
}

TEST_CASE("epoch directory layout and format version")
{
    testing::TempDir dir;
    DirectoryStore store(dir.path(), StoreOptions{0, true});
    store.persist(chain_snapshot(1));
    auto epoch_dir = dir.path() / DirectoryStore::epoch_dir_name(1);
    CHECK(epoch_dir.filename() == "epoch-00000001");

    std::set<std::string> names;
    for (const auto &entry : fs::directory_iterator(epoch_dir))
    {
        names.insert(entry.path().filename().string());
    }
    CHECK(names == std::set<std::string>{"manifest.bin", "manifest.txt", "task-0000.bin", "task-0001.bin",
                                         "task-0002.bin"});
    for (const char *f : {"manifest.bin", "task-0000.bin", "task-0002.bin"})
    {
        auto bytes = slurp(epoch_dir / f);
        REQUIRE_FALSE(bytes.empty());
        CHECK(static_cast<std::uint8_t>(bytes[0]) == kSnapshotFormatVersion);
    }
    auto text = slurp(epoch_dir / "manifest.txt");
    CHECK(text.find("epoch 1\n") != std::string::npos);
    CHECK(text.find("\nchannel_records 0\n") != std::string::npos);
    CHECK_FALSE(fs::exists(dir.path() / "epoch-00000001.tmp"));
}

TEST_CASE("a crash between task-file writes leaves the previous epoch visible")
{
    auto crash_at = boundary_index(chain_snapshot(2), "write task-0001.bin");
    testing::TempDir dir;
    {
        DirectoryStore store(dir.path(), StoreOptions{0, true});
        store.persist(chain_snapshot(1));
        WriteFaults faults(crash_at);
        store.set_faults(&faults);
        CHECK_THROWS_AS(store.persist(chain_snapshot(2)), SimulatedCrash);
    }
    CHECK(fs::exists(dir.path() / "epoch-00000002.tmp" / "task-0000.bin"));
    DirectoryStore reopened(dir.path());
    CHECK(reopened.latest_complete() == std::optional<std::uint64_t>{1});
    CHECK(reopened.load_latest() == chain_snapshot(1));
    CHECK(reopened.persist(chain_snapshot(2)) == 2);
    CHECK(reopened.load_latest() == chain_snapshot(2));
}

TEST_CASE("a crash after the rename keeps the new epoch")
{
    auto crash_at = boundary_index(chain_snapshot(1), "fsync store");
    testing::TempDir dir;
    {
        DirectoryStore store(dir.path(), StoreOptions{0, true});
        WriteFaults faults(crash_at);
        store.set_faults(&faults);
        CHECK_THROWS_AS(store.persist(chain_snapshot(1)), SimulatedCrash);
    }
    DirectoryStore reopened(dir.path());
    CHECK(reopened.latest_complete() == std::optional<std::uint64_t>{1});
}

TEST_CASE("keep_last collects older epochs")
{
    testing::TempDir dir;
    DirectoryStore store(dir.path(), StoreOptions{2, false});
    MemoryStore mem(2);
    for (std::uint64_t e = 1; e <= 5; ++e)
    {
        store.persist(chain_snapshot(e));
        mem.persist(chain_snapshot(e));
    }
    CHECK(store.epochs() == std::vector<std::uint64_t>{4, 5});
    CHECK(mem.epochs() == std::vector<std::uint64_t>{4, 5});
    std::size_t dirs = 0;
    for ([[maybe_unused]] const auto &entry : fs::directory_iterator(dir.path()))
    {
        ++dirs;
    }
    CHECK(dirs == 2);
}

TEST_CASE("corrupted files fail to decode and are skipped by load_latest")
{
    testing::TempDir dir;
    DirectoryStore store(dir.path(), StoreOptions{0, false});
    store.persist(chain_snapshot(1));
    store.persist(chain_snapshot(2));
    auto victim = dir.path() / "epoch-00000002" / "task-0001.bin";
    auto bytes = slurp(victim);
    bytes[bytes.size() / 2] ^= 0x5a;
    std::ofstream(victim, std::ios::binary | std::ios::trunc) << bytes;

    CHECK_THROWS_AS(store.load(2), DecodeError);
    CHECK(store.load_latest() == chain_snapshot(1));

    auto files = encode_snapshot(chain_snapshot(1));
    files.erase("task-0002.bin");
    CHECK_THROWS_AS(decode_snapshot(files), DecodeError);
    files = encode_snapshot(chain_snapshot(1));
    files["manifest.bin"][0] = 9;
    CHECK_THROWS_AS(decode_snapshot(files), DecodeError);
}

TEST_CASE("operator state serialization round-trips random states")
{
    std::mt19937_64 rng(42);
    for (int i = 0; i < 500; ++i)
    {
        OperatorState s;
        s.offset = rng() % 100000;
        auto n = rng() % 12;
        for (std::uint64_t k = 0; k < n; ++k)
        {
            s.table["k" + std::to_string(rng() % 50)] = static_cast<std::int64_t>(rng()) / 3;
        }
        auto m = rng() % 6;
        for (std::uint64_t k = 0; k < m; ++k)
        {
            s.cursor.admit(TaskId("s" + std::to_string(rng() % 3)), rng(), 1 + rng() % 1000);
        }
        auto bytes = s.serialize();
        CHECK(OperatorState::deserialize(bytes) == s);
        if (!bytes.empty())
        {
            CHECK_THROWS_AS(OperatorState::deserialize(bytes.substr(0, bytes.size() - 1)), DecodeError);
        }
    }
}
