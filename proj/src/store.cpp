#include "absflow/store.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

namespace absflow
{
    namespace fs = std::filesystem;

    namespace
    {
        std::uint32_t crc32_of(const std::string &bytes)
        {
            uLong crc = crc32(0L, Z_NULL, 0);
            return static_cast<std::uint32_t>(
                crc32(crc, reinterpret_cast<const Bytef *>(bytes.data()), static_cast<uInt>(bytes.size())));
        }

        std::string numbered(const char *prefix, std::size_t i)
        {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s-%04zu.bin", prefix, i);
            return buf;
        }

        std::string encode_task_file(const TaskId &id, const OperatorState &state)
        {
            ByteWriter w;
            w.put(kSnapshotFormatVersion);
            w.put_string(id.str());
            w.put_string(state.serialize());
            return std::move(w).take();
        }

        std::string encode_edge_file(const ChannelId &c, const std::vector<Record> &log)
        {
            ByteWriter w;
            w.put(kSnapshotFormatVersion);
            w.put_string(c.from.str());
            w.put_string(c.to.str());
            w.put(c.ordinal);
            w.put<std::uint32_t>(static_cast<std::uint32_t>(log.size()));
            for (const auto &r : log)
            {
                encode(w, r);
            }
            return std::move(w).take();
        }

        void expect_version(ByteReader &r)
        {
            if (r.get<std::uint8_t>() != kSnapshotFormatVersion)
            {
                throw DecodeError("unsupported snapshot format version");
            }
        }

        const std::string &file_or_throw(const SnapshotFiles &files, const std::string &name)
        {
            auto it = files.find(name);
            if (it == files.end())
            {
                throw DecodeError("snapshot file missing: " + name);
            }
            return it->second;
        }

        void verify(const std::string &bytes, std::uint64_t size, std::uint32_t crc, const std::string &name)
        {
            if (bytes.size() != size || crc32_of(bytes) != crc)
            {
                throw DecodeError("snapshot file corrupt: " + name);
            }
        }
    } // namespace

    std::uint64_t payload_bytes(const GlobalSnapshot &snapshot)
    {
        std::uint64_t n = 0;
        for (const auto &[id, state] : snapshot.task_states)
        {
            n += encode_task_file(id, state).size();
        }
        for (const auto &[c, log] : snapshot.back_edge_logs)
        {
            n += encode_edge_file(c, log).size();
        }
        return n;
    }

    std::string manifest_text(const GlobalSnapshot &s)
    {
        std::ostringstream out;
        out << "epoch " << s.epoch << "\n";
        out << "created_at " << s.created_at << "\n";
        out << "size_bytes " << s.size_bytes << "\n";
        out << "channel_records " << s.channel_records() << "\n";
        std::size_t i = 0;
        for (const auto &[id, state] : s.task_states)
        {
            out << "task " << id << " " << numbered("task", i++) << " offset=" << state.offset
                << " entries=" << state.table.size() << "\n";
        }
        for (const auto &[id, off] : s.source_offsets)
        {
            out << "source_offset " << id << " " << off << "\n";
        }
        i = 0;
        for (const auto &[c, log] : s.back_edge_logs)
        {
            out << "back_edge " << c << " " << numbered("edge", i++) << " records=" << log.size() << "\n";
        }
        return out.str();
    }

    SnapshotFiles encode_snapshot(const GlobalSnapshot &s)
    {
        SnapshotFiles files;
        ByteWriter m;
        m.put(kSnapshotFormatVersion);
        m.put(s.epoch);
        m.put(s.created_at);
        m.put(s.size_bytes);
        m.put(s.channel_records());

        m.put<std::uint32_t>(static_cast<std::uint32_t>(s.task_states.size()));
        std::size_t i = 0;
        for (const auto &[id, state] : s.task_states)
        {
            auto name = numbered("task", i++);
            auto bytes = encode_task_file(id, state);
            m.put_string(id.str());
            m.put_string(name);
            m.put<std::uint64_t>(bytes.size());
            m.put(crc32_of(bytes));
            files.emplace(name, std::move(bytes));
        }

        m.put<std::uint32_t>(static_cast<std::uint32_t>(s.source_offsets.size()));
        for (const auto &[id, off] : s.source_offsets)
        {
            m.put_string(id.str());
            m.put(off);
        }

        m.put<std::uint32_t>(static_cast<std::uint32_t>(s.back_edge_logs.size()));
        i = 0;
        for (const auto &[c, log] : s.back_edge_logs)
        {
            auto name = numbered("edge", i++);
            auto bytes = encode_edge_file(c, log);
            m.put_string(c.from.str());
            m.put_string(c.to.str());
            m.put(c.ordinal);
            m.put_string(name);
            m.put<std::uint64_t>(bytes.size());
            m.put(crc32_of(bytes));
            m.put<std::uint64_t>(log.size());
            files.emplace(name, std::move(bytes));
        }
        auto manifest = std::move(m).take();
        ByteWriter framed;
        framed.put_raw(manifest);
        framed.put(crc32_of(manifest));
        files.emplace("manifest.bin", std::move(framed).take());
        files.emplace("manifest.txt", manifest_text(s));
        return files;
    }

    GlobalSnapshot decode_snapshot(const SnapshotFiles &files)
    {
        const auto &framed = file_or_throw(files, "manifest.bin");
        if (framed.size() < 4)
        {
            throw DecodeError("manifest truncated");
        }
        std::string manifest = framed.substr(0, framed.size() - 4);
        ByteReader tail(std::string_view(framed).substr(framed.size() - 4));
        if (tail.get<std::uint32_t>() != crc32_of(manifest))
        {
            throw DecodeError("manifest checksum mismatch");
        }

        ByteReader m(manifest);
        expect_version(m);
        GlobalSnapshot s;
        s.epoch = m.get<std::uint64_t>();
        s.created_at = m.get<std::uint64_t>();
        s.size_bytes = m.get<std::uint64_t>();
        auto channel_records = m.get<std::uint64_t>();

        auto ntasks = m.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < ntasks; ++i)
        {
            TaskId id(m.get_string());
            auto name = m.get_string();
            auto size = m.get<std::uint64_t>();
            auto crc = m.get<std::uint32_t>();
            const auto &bytes = file_or_throw(files, name);
            verify(bytes, size, crc, name);
            ByteReader r(bytes);
            expect_version(r);
            if (TaskId(r.get_string()) != id)
            {
                throw DecodeError("task file " + name + " names a different task");
            }
            auto state = OperatorState::deserialize(r.get_string());
            r.expect_done();
            s.task_states.emplace(std::move(id), std::move(state));
        }

        auto nsources = m.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < nsources; ++i)
        {
            TaskId id(m.get_string());
            s.source_offsets.emplace(std::move(id), m.get<std::uint64_t>());
        }

        auto nedges = m.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < nedges; ++i)
        {
            ChannelId c;
            c.from = TaskId(m.get_string());
            c.to = TaskId(m.get_string());
            c.ordinal = m.get<std::uint32_t>();
            auto name = m.get_string();
            auto size = m.get<std::uint64_t>();
            auto crc = m.get<std::uint32_t>();
            auto count = m.get<std::uint64_t>();
            const auto &bytes = file_or_throw(files, name);
            verify(bytes, size, crc, name);
            ByteReader r(bytes);
            expect_version(r);
            ChannelId stored;
            stored.from = TaskId(r.get_string());
            stored.to = TaskId(r.get_string());
            stored.ordinal = r.get<std::uint32_t>();
            if (stored != c)
            {
                throw DecodeError("edge file " + name + " names a different channel");
            }
            auto n = r.get<std::uint32_t>();
            if (n != count)
            {
                throw DecodeError("edge file " + name + " record count mismatch");
            }
            std::vector<Record> log;
            log.reserve(n);
            for (std::uint32_t k = 0; k < n; ++k)
            {
                log.push_back(decode_record(r));
            }
            r.expect_done();
            s.back_edge_logs.emplace(std::move(c), std::move(log));
        }
        m.expect_done();
        if (s.channel_records() != channel_records)
        {
            throw DecodeError("manifest channel record count mismatch");
        }
        return s;
    }

    bool WriteFaults::hit(const std::string &what)
    {
        log_.push_back(what);
        auto index = count_++;
        return crash_at_ && index == *crash_at_;
    }

    DirectoryStore::DirectoryStore(fs::path dir, StoreOptions options) : dir_(std::move(dir)), options_(options)
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec)
        {
            throw StoreIo("cannot create store directory " + dir_.string() + ": " + ec.message());
        }
    }

    std::string DirectoryStore::epoch_dir_name(std::uint64_t epoch)
    {
        char buf[40];
        std::snprintf(buf, sizeof buf, "epoch-%08llu", static_cast<unsigned long long>(epoch));
        return buf;
    }

    void DirectoryStore::boundary(const std::string &what, bool *tear)
    {
        if (faults_ == nullptr)
        {
            return;
        }
        if (faults_->hit(what))
        {
            if (tear != nullptr)
            {
                *tear = true;
                return;
            }
            throw SimulatedCrash("crash at " + what);
        }
    }

    namespace
    {
        void fsync_path(const fs::path &p, bool directory)
        {
            int fd = ::open(p.c_str(), directory ? (O_RDONLY | O_DIRECTORY) : O_RDONLY);
            if (fd < 0)
            {
                throw StoreIo("open for fsync failed: " + p.string() + ": " + std::strerror(errno));
            }
            int rc = ::fsync(fd);
            ::close(fd);
            if (rc != 0)
            {
                throw StoreIo("fsync failed: " + p.string());
            }
        }
    } // namespace

    void DirectoryStore::write_file(const fs::path &path, const std::string &bytes)
    {
        bool tear = false;
        boundary("write " + path.filename().string(), &tear);
        int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
        if (fd < 0)
        {
            throw StoreIo("cannot create " + path.string() + ": " + std::strerror(errno));
        }
        std::size_t len = tear ? bytes.size() / 2 : bytes.size();
        std::size_t done = 0;
        while (done < len)
        {
            auto n = ::write(fd, bytes.data() + done, len - done);
            if (n < 0)
            {
                ::close(fd);
                throw StoreIo("write failed: " + path.string());
            }
            done += static_cast<std::size_t>(n);
        }
        if (tear)
        {
            ::close(fd);
            throw SimulatedCrash("torn write of " + path.filename().string());
        }
        if (options_.fsync && ::fsync(fd) != 0)
        {
            ::close(fd);
            throw StoreIo("fsync failed: " + path.string());
        }
        ::close(fd);
    }

    std::uint64_t DirectoryStore::persist(const GlobalSnapshot &snapshot)
    {
        auto files = encode_snapshot(snapshot);
        auto name = epoch_dir_name(snapshot.epoch);
        auto tmp = dir_ / (name + ".tmp");
        auto final_dir = dir_ / name;
        try
        {
            boundary("mkdir " + tmp.filename().string());
            fs::remove_all(tmp);
            fs::create_directories(tmp);
            // Manifest last: a directory without a verifying manifest is
            // never considered, even if renamed.
            for (const auto &[file, bytes] : files)
            {
                if (file.rfind("manifest", 0) != 0)
                {
                    write_file(tmp / file, bytes);
                }
            }
            write_file(tmp / "manifest.txt", files.at("manifest.txt"));
            write_file(tmp / "manifest.bin", files.at("manifest.bin"));
            if (options_.fsync)
            {
                boundary("fsync " + tmp.filename().string());
                fsync_path(tmp, true);
            }
            boundary("rename " + name);
            fs::remove_all(final_dir);
            fs::rename(tmp, final_dir);
            if (options_.fsync)
            {
                boundary("fsync store");
                fsync_path(dir_, true);
            }
        }
        catch (const fs::filesystem_error &e)
        {
            throw StoreIo(e.what());
        }
        collect_garbage();
        return snapshot.epoch;
    }

    void DirectoryStore::collect_garbage()
    {
        if (options_.keep_last == 0)
        {
            return;
        }
        auto committed = committed_epochs();
        if (committed.size() <= options_.keep_last)
        {
            return;
        }
        std::sort(committed.begin(), committed.end());
        for (std::size_t i = 0; i + options_.keep_last < committed.size(); ++i)
        {
            boundary("gc " + epoch_dir_name(committed[i]));
            std::error_code ec;
            fs::remove_all(dir_ / epoch_dir_name(committed[i]), ec);
        }
    }

    std::vector<std::uint64_t> DirectoryStore::committed_epochs() const
    {
        std::vector<std::uint64_t> out;
        std::error_code ec;
        for (const auto &entry : fs::directory_iterator(dir_, ec))
        {
            if (!entry.is_directory())
            {
                continue;
            }
            auto n = entry.path().filename().string();
            if (n.size() != 14 || n.rfind("epoch-", 0) != 0)
            {
                continue;
            }
            auto digits = n.substr(6);
            if (!std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; }))
            {
                continue;
            }
            out.push_back(std::stoull(digits));
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    GlobalSnapshot DirectoryStore::load(std::uint64_t epoch) const
    {
        auto d = dir_ / epoch_dir_name(epoch);
        SnapshotFiles files;
        std::error_code ec;
        for (const auto &entry : fs::directory_iterator(d, ec))
        {
            std::ifstream in(entry.path(), std::ios::binary);
            files.emplace(entry.path().filename().string(),
                          std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
        }
        if (ec)
        {
            throw StoreIo("cannot read " + d.string() + ": " + ec.message());
        }
        auto s = decode_snapshot(files);
        if (s.epoch != epoch)
        {
            throw DecodeError("manifest epoch does not match directory");
        }
        return s;
    }

    GlobalSnapshot DirectoryStore::load_latest() const
    {
        auto committed = committed_epochs();
        for (auto it = committed.rbegin(); it != committed.rend(); ++it)
        {
            try
            {
                return load(*it);
            }
            catch (const DecodeError &)
            {
            }
            catch (const StoreIo &)
            {
            }
        }
        throw NoSnapshot();
    }

    std::optional<std::uint64_t> DirectoryStore::latest_complete() const
    {
        try
        {
            return load_latest().epoch;
        }
        catch (const NoSnapshot &)
        {
            return std::nullopt;
        }
    }

    std::vector<std::uint64_t> DirectoryStore::epochs() const { return committed_epochs(); }

    std::uint64_t MemoryStore::persist(const GlobalSnapshot &snapshot)
    {
        epochs_[snapshot.epoch] = encode_snapshot(snapshot);
        while (keep_last_ != 0 && epochs_.size() > keep_last_)
        {
            epochs_.erase(epochs_.begin());
        }
        return snapshot.epoch;
    }

    GlobalSnapshot MemoryStore::load_latest() const
    {
        if (epochs_.empty())
        {
            throw NoSnapshot();
        }
        return decode_snapshot(epochs_.rbegin()->second);
    }

    std::optional<std::uint64_t> MemoryStore::latest_complete() const
    {
        if (epochs_.empty())
        {
            return std::nullopt;
        }
        return epochs_.rbegin()->first;
    }

    std::vector<std::uint64_t> MemoryStore::epochs() const
    {
        std::vector<std::uint64_t> out;
        for (const auto &[e, _] : epochs_)
        {
            out.push_back(e);
        }
        return out;
    }
} // namespace absflow
