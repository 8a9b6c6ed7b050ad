#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace absflow
{
    class DecodeError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Little-endian, length-prefixed binary writer used for every on-disk and
    /// in-memory encoding in the engine.
    class ByteWriter
    {
    public:
        template <typename T>
            requires std::is_integral_v<T>
        void put(T v)
        {
            using U = std::make_unsigned_t<T>;
            auto u = static_cast<U>(v);
            for (std::size_t i = 0; i < sizeof(T); ++i)
            {
                buf_.push_back(static_cast<char>((u >> (8 * i)) & 0xffu));
            }
        }

        void put_bool(bool b) { put<std::uint8_t>(b ? 1 : 0); }

        void put_string(std::string_view s)
        {
            put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
            buf_.append(s.data(), s.size());
        }

        void put_raw(std::string_view s) { buf_.append(s.data(), s.size()); }

        const std::string &bytes() const & noexcept { return buf_; }
        std::string take() && { return std::move(buf_); }
        std::size_t size() const noexcept { return buf_.size(); }

    private:
        std::string buf_;
    };

    class ByteReader
    {
    public:
        explicit ByteReader(std::string_view data) : data_(data) {}

        template <typename T>
            requires std::is_integral_v<T>
        T get()
        {
            need(sizeof(T));
            using U = std::make_unsigned_t<T>;
            U u = 0;
            for (std::size_t i = 0; i < sizeof(T); ++i)
            {
                u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i));
            }
            pos_ += sizeof(T);
            return static_cast<T>(u);
        }

        bool get_bool()
        {
            auto v = get<std::uint8_t>();
            if (v > 1)
            {
                throw DecodeError("invalid boolean byte");
            }
            return v == 1;
        }

        std::string get_string()
        {
            auto n = get<std::uint32_t>();
            need(n);
            std::string s(data_.substr(pos_, n));
            pos_ += n;
            return s;
        }

        bool done() const noexcept { return pos_ == data_.size(); }
        std::size_t remaining() const noexcept { return data_.size() - pos_; }

        void expect_done() const
        {
            if (!done())
            {
                throw DecodeError("trailing bytes after decode");
            }
        }

    private:
        void need(std::size_t n) const
        {
            if (data_.size() - pos_ < n)
            {
                throw DecodeError("truncated input");
            }
        }

        std::string_view data_;
        std::size_t pos_ = 0;
    };

    /// 64-bit FNV-1a. Stable across platforms; used for routing and digests.
    constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) noexcept
    {
        for (char c : s)
        {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        return h;
    }

    /// splitmix64 finalizer.
    constexpr std::uint64_t mix64(std::uint64_t x) noexcept
    {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }
} // namespace absflow
