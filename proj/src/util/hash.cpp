#include "taleweaver/util/hash.hpp"

#include <cstdio>

namespace taleweaver {

std::string hash_to_hex(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace taleweaver
