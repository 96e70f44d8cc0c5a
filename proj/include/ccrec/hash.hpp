#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace ccrec
{
    inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

    inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h = kFnvOffset)
    {
        for (std::uint8_t b : bytes)
        {
            h ^= b;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset)
    {
        return fnv1a64(std::span<const std::uint8_t>(
                           reinterpret_cast<const std::uint8_t*>(s.data()), s.size()),
                       h);
    }

    inline std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t h = kFnvOffset)
    {
        for (double v : values)
        {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            for (int i = 0; i < 8; ++i)
            {
                h ^= (bits >> (8 * i)) & 0xffU;
                h *= 0x100000001b3ULL;
            }
        }
        return h;
    }

    std::string hex64(std::uint64_t v);

    // FNV-1a over a file's raw bytes; throws std::runtime_error if unreadable.
    std::uint64_t hash_file(const std::string& path);
}
