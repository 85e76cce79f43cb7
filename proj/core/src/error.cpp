#include "ralm/error.hpp"

namespace ralm {

const char* to_string(error_kind kind) noexcept
{
    switch (kind) {
    case error_kind::usage: return "usage";
    case error_kind::data: return "data";
    case error_kind::backend: return "backend";
    }
    return "unknown";
}

}  // namespace ralm
