#include "kginstruct/digest.hpp"

#include <array>
#include <fstream>

#include "kginstruct/errors.hpp"

namespace kgi {

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::string digest_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in)
        throw Error(Err::MissingFile, "cannot read " + p.string());
    uint64_t h = 1469598103934665603ull;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h = fnv1a64(std::string_view(buf.data(), static_cast<size_t>(in.gcount())), h);
    }
    return "fnv64:" + hex64(h);
}

}  // namespace kgi
