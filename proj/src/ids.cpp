#include "absflow/ids.hpp"

#include <stdexcept>
#include <string>

namespace absflow
{
    std::string_view to_string(TaskKind kind) noexcept
    {
        switch (kind)
        {
        case TaskKind::Source:
            return "source";
        case TaskKind::Operator:
            return "operator";
        case TaskKind::Sink:
            return "sink";
        }
        return "?";
    }

    TaskKind parse_task_kind(std::string_view text)
    {
        if (text == "source" || text == "Source")
        {
            return TaskKind::Source;
        }
        if (text == "operator" || text == "Operator" || text == "op")
        {
            return TaskKind::Operator;
        }
        if (text == "sink" || text == "Sink")
        {
            return TaskKind::Sink;
        }
        throw std::invalid_argument("unknown task kind: " + std::string(text));
    }
} // namespace absflow
