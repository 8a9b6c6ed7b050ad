#include "absflow/channel.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <system_error>

#include <unistd.h>

namespace absflow
{
    namespace
    {
        std::filesystem::path fresh_spill_path(const std::filesystem::path &dir)
        {
            static std::atomic<std::uint64_t> counter{0};
            auto base = dir.empty() ? std::filesystem::temp_directory_path() : dir;
            std::filesystem::create_directories(base);
            return base / ("absflow-spill-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".bin");
        }

        std::vector<Message> read_all(const std::filesystem::path &path, std::size_t expected)
        {
            std::ifstream in(path, std::ios::binary);
            std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            ByteReader r(bytes);
            std::vector<Message> out;
            out.reserve(expected);
            while (!r.done())
            {
                auto len = r.get<std::uint32_t>();
                (void)len;
                out.push_back(decode_message(r));
            }
            return out;
        }
    } // namespace

    SpillFile::SpillFile(std::filesystem::path dir) : path_(fresh_spill_path(dir))
    {
        std::ofstream(path_, std::ios::binary | std::ios::trunc);
    }

    SpillFile::SpillFile(const SpillFile &other) : path_(fresh_spill_path(other.path_.parent_path())), count_(other.count_)
    {
        std::filesystem::copy_file(other.path_, path_, std::filesystem::copy_options::overwrite_existing);
    }

    SpillFile::~SpillFile()
    {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }

    void SpillFile::append(const Message &m)
    {
        ByteWriter body;
        encode(body, m);
        ByteWriter frame;
        frame.put<std::uint32_t>(static_cast<std::uint32_t>(body.size()));
        frame.put_raw(body.bytes());
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        out.write(frame.bytes().data(), static_cast<std::streamsize>(frame.size()));
        if (!out)
        {
            throw std::runtime_error("spill write failed: " + path_.string());
        }
        ++count_;
    }

    std::vector<Message> SpillFile::drain()
    {
        auto out = read_all(path_, count_);
        std::ofstream(path_, std::ios::binary | std::ios::trunc);
        count_ = 0;
        return out;
    }

    std::vector<Message> SpillFile::peek() const { return read_all(path_, count_); }

    Channel::Channel(ChannelId id, std::optional<std::size_t> spill_threshold, std::filesystem::path spill_dir)
        : id_(std::move(id)), spill_threshold_(spill_threshold), spill_dir_(std::move(spill_dir))
    {
    }

    Channel::Channel(const Channel &other)
        : id_(other.id_), memory_(other.memory_),
          spill_(other.spill_ ? std::make_unique<SpillFile>(*other.spill_) : nullptr),
          spill_threshold_(other.spill_threshold_), spill_dir_(other.spill_dir_), data_count_(other.data_count_),
          enqueued_(other.enqueued_), dequeued_(other.dequeued_), blocked_(other.blocked_), closed_(other.closed_)
    {
    }

    Channel &Channel::operator=(const Channel &other)
    {
        if (this != &other)
        {
            Channel copy(other);
            *this = std::move(copy);
        }
        return *this;
    }

    void Channel::send(Message m)
    {
        if (closed_)
        {
            throw ChannelClosed(id_);
        }
        if (is_data(m))
        {
            ++data_count_;
        }
        ++enqueued_;
        bool to_disk = spilled() > 0 || (blocked_ && spill_threshold_ && memory_.size() >= *spill_threshold_);
        if (to_disk)
        {
            if (!spill_)
            {
                spill_ = std::make_unique<SpillFile>(spill_dir_);
            }
            spill_->append(m);
            return;
        }
        memory_.push_back(std::move(m));
    }

    void Channel::push_front(std::vector<Message> msgs)
    {
        for (auto it = msgs.rbegin(); it != msgs.rend(); ++it)
        {
            if (is_data(*it))
            {
                ++data_count_;
            }
            ++enqueued_;
            memory_.push_front(std::move(*it));
        }
    }

    void Channel::unblock()
    {
        blocked_ = false;
        if (spilled() > 0)
        {
            for (auto &m : spill_->drain())
            {
                memory_.push_back(std::move(m));
            }
        }
    }

    std::optional<Message> Channel::receive()
    {
        if (!deliverable())
        {
            return std::nullopt;
        }
        Message m = std::move(memory_.front());
        memory_.pop_front();
        if (is_data(m))
        {
            --data_count_;
        }
        ++dequeued_;
        return m;
    }

    const Message *Channel::peek() const noexcept { return deliverable() ? &memory_.front() : nullptr; }

    std::vector<Message> Channel::contents() const
    {
        std::vector<Message> out(memory_.begin(), memory_.end());
        if (spilled() > 0)
        {
            for (auto &m : spill_->peek())
            {
                out.push_back(std::move(m));
            }
        }
        return out;
    }

    void Channel::clear()
    {
        memory_.clear();
        if (spill_)
        {
            spill_->drain();
        }
        data_count_ = 0;
        blocked_ = false;
    }
} // namespace absflow
