#pragma once

#include "absflow/snapshot.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace absflow
{
    class StoreIo : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    class NoSnapshot : public std::runtime_error
    {
    public:
        NoSnapshot() : std::runtime_error("no complete snapshot in store") {}
    };

    /// Thrown by WriteFaults to simulate a process crash at a write boundary.
    class SimulatedCrash : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    inline constexpr std::uint8_t kSnapshotFormatVersion = 1;

    /// Files making up one epoch. Keys are file names inside the epoch
    /// directory: `manifest.bin`, `manifest.txt`, `task-NNNN.bin`,
    /// `edge-NNNN.bin`.
    using SnapshotFiles = std::map<std::string, std::string>;

    /// Encodes a complete snapshot into its file set.
    SnapshotFiles encode_snapshot(const GlobalSnapshot &snapshot);
    /// Decodes and verifies checksums. Throws DecodeError on any mismatch.
    GlobalSnapshot decode_snapshot(const SnapshotFiles &files);
    /// Encoded size of the task-state and back-edge-log files of a snapshot.
    std::uint64_t payload_bytes(const GlobalSnapshot &snapshot);

    /// Human-readable manifest.
    std::string manifest_text(const GlobalSnapshot &snapshot);

    class SnapshotStore
    {
    public:
        virtual ~SnapshotStore() = default;

        /// Durably stores a complete snapshot and returns its epoch.
        virtual std::uint64_t persist(const GlobalSnapshot &snapshot) = 0;
        /// Latest committed snapshot. Throws NoSnapshot when there is none.
        virtual GlobalSnapshot load_latest() const = 0;
        virtual std::optional<std::uint64_t> latest_complete() const = 0;
        virtual std::vector<std::uint64_t> epochs() const = 0;
    };

    /// Deterministic crash injection for the directory store's commit
    /// protocol. Every write boundary bumps a counter; reaching `crash_at`
    /// throws SimulatedCrash. File writes crash half-way through (torn).
    class WriteFaults
    {
    public:
        WriteFaults() = default;
        explicit WriteFaults(std::size_t crash_at) : crash_at_(crash_at) {}

        /// Called before each boundary; returns true if this boundary should
        /// tear (write partially) before throwing.
        bool hit(const std::string &what);
        std::size_t count() const noexcept { return count_; }
        const std::vector<std::string> &log() const noexcept { return log_; }

    private:
        std::optional<std::size_t> crash_at_;
        std::size_t count_ = 0;
        std::vector<std::string> log_;
    };

    struct StoreOptions
    {
        /// Number of committed epochs kept; 0 keeps everything.
        std::size_t keep_last = 0;
        bool fsync = true;
    };

    /// Local directory store. Each epoch is written into `epoch-N.tmp/`,
    /// flushed, then renamed to `epoch-N/`; only renamed directories with a
    /// verifying manifest are visible to load_latest.
    class DirectoryStore final : public SnapshotStore
    {
    public:
        explicit DirectoryStore(std::filesystem::path dir, StoreOptions options = {});

        std::uint64_t persist(const GlobalSnapshot &snapshot) override;
        GlobalSnapshot load_latest() const override;
        std::optional<std::uint64_t> latest_complete() const override;
        std::vector<std::uint64_t> epochs() const override;

        GlobalSnapshot load(std::uint64_t epoch) const;
        const std::filesystem::path &dir() const noexcept { return dir_; }
        static std::string epoch_dir_name(std::uint64_t epoch);

        /// Installs crash injection for subsequent persists (test hook).
        void set_faults(WriteFaults *faults) noexcept { faults_ = faults; }

    private:
        void boundary(const std::string &what, bool *tear = nullptr);
        void write_file(const std::filesystem::path &path, const std::string &bytes);
        std::vector<std::uint64_t> committed_epochs() const;
        void collect_garbage();

        std::filesystem::path dir_;
        StoreOptions options_;
        WriteFaults *faults_ = nullptr;
    };

    /// In-memory store holding the same encoded file sets as DirectoryStore.
    class MemoryStore final : public SnapshotStore
    {
    public:
        explicit MemoryStore(std::size_t keep_last = 0) : keep_last_(keep_last) {}

        std::uint64_t persist(const GlobalSnapshot &snapshot) override;
        GlobalSnapshot load_latest() const override;
        std::optional<std::uint64_t> latest_complete() const override;
        std::vector<std::uint64_t> epochs() const override;

        const std::map<std::uint64_t, SnapshotFiles> &files() const noexcept { return epochs_; }

    private:
        std::size_t keep_last_;
        std::map<std::uint64_t, SnapshotFiles> epochs_;
    };
} // namespace absflow
