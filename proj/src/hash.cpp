#include "ccrec/hash.hpp"

#include <array>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ccrec
{
    std::string hex64(std::uint64_t v)
    {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        for (int i = 15; i >= 0; --i)
        {
            out[static_cast<std::size_t>(i)] = digits[v & 0xf];
            v >>= 4;
        }
        return out;
    }

    std::uint64_t hash_file(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw std::runtime_error("hash_file: cannot open " + path);
        }
        std::uint64_t h = kFnvOffset;
        std::array<char, 65536> buf;
        while (in)
        {
            in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
            const auto got = static_cast<std::size_t>(in.gcount());
            h = fnv1a64(std::span<const std::uint8_t>(
                            reinterpret_cast<const std::uint8_t*>(buf.data()), got),
                        h);
        }
        return h;
    }
}
