#pragma once

#include <cstddef>

namespace vqpl {

// Byte range into the source text. Spans are carried for diagnostics only
// and never participate in equality or canonical keys.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;
};

} // namespace vqpl
