#include "autoamg/format.hpp"

#include <charconv>
#include <cmath>

#include "autoamg/sparse.hpp"

namespace autoamg {

std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text)
{
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw Error("cannot parse number '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace autoamg
