#pragma once

#include "absflow/ids.hpp"
#include "absflow/record.hpp"

#include <cstddef>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace absflow
{
    class ChannelClosed : public std::runtime_error
    {
    public:
        explicit ChannelClosed(const ChannelId &id) : std::runtime_error("channel closed: " + id.str()) {}
    };

    /// Append-only on-disk message file holding the overflow of a blocked
    /// channel. Copying duplicates the file.
    class SpillFile
    {
    public:
        explicit SpillFile(std::filesystem::path dir);
        SpillFile(const SpillFile &other);
        SpillFile &operator=(const SpillFile &) = delete;
        ~SpillFile();

        void append(const Message &m);
        /// Reads every spilled message in order and truncates the file.
        std::vector<Message> drain();
        std::vector<Message> peek() const;
        std::size_t size() const noexcept { return count_; }

    private:
        std::filesystem::path path_;
        std::size_t count_ = 0;
    };

    /// FIFO link between two tasks. While blocked, messages are accepted and
    /// buffered but nothing is delivered. Above `spill_threshold` buffered
    /// messages, a blocked channel moves further arrivals to disk; unblocking
    /// reloads them behind the in-memory queue.
    class Channel
    {
    public:
        Channel() = default;
        explicit Channel(ChannelId id, std::optional<std::size_t> spill_threshold = std::nullopt,
                         std::filesystem::path spill_dir = {});

        Channel(const Channel &other);
        Channel &operator=(const Channel &other);
        Channel(Channel &&) noexcept = default;
        Channel &operator=(Channel &&) noexcept = default;

        const ChannelId &id() const noexcept { return id_; }

        void send(Message m);
        /// Puts messages ahead of everything queued, preserving their order.
        void push_front(std::vector<Message> msgs);

        void block() noexcept { blocked_ = true; }
        void unblock();
        bool blocked() const noexcept { return blocked_; }

        bool deliverable() const noexcept { return !blocked_ && !memory_.empty(); }
        std::optional<Message> receive();
        const Message *peek() const noexcept;

        std::size_t size() const noexcept { return memory_.size() + spilled(); }
        std::size_t spilled() const noexcept { return spill_ ? spill_->size() : 0; }
        std::size_t in_memory() const noexcept { return memory_.size(); }
        bool empty() const noexcept { return size() == 0; }
        /// Queued data records (barriers and control excluded).
        std::size_t data_count() const noexcept { return data_count_; }

        /// Full queue contents in delivery order, including spilled messages.
        std::vector<Message> contents() const;

        /// Drops all queued messages (used when the consumer task dies).
        void clear();
        void close() noexcept { closed_ = true; }
        bool closed() const noexcept { return closed_; }

        std::uint64_t enqueued_total() const noexcept { return enqueued_; }
        std::uint64_t dequeued_total() const noexcept { return dequeued_; }

    private:
        ChannelId id_;
        std::deque<Message> memory_;
        std::unique_ptr<SpillFile> spill_;
        std::optional<std::size_t> spill_threshold_;
        std::filesystem::path spill_dir_;
        std::size_t data_count_ = 0;
        std::uint64_t enqueued_ = 0;
        std::uint64_t dequeued_ = 0;
        bool blocked_ = false;
        bool closed_ = false;
    };
} // namespace absflow
