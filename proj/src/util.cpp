#include "ttc/clock.hpp"
#include "ttc/hash.hpp"

#include "ttc/errors.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ttc {

const Clock &steady_clock_instance() {
    static SteadyClock clock;
    return clock;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string digest_bytes(std::string_view data) {
    return "fnv1a64:" + hex64(fnv1a64(data));
}

std::string digest_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file for digest: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return digest_bytes(buf.str());
}

} // namespace ttc
