#include "absflow/snapshot.hpp"

namespace absflow
{
    std::uint64_t GlobalSnapshot::channel_records() const noexcept
    {
        std::uint64_t n = 0;
        for (const auto &[_, log] : back_edge_logs)
        {
            n += log.size();
        }
        return n;
    }
} // namespace absflow
