#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace ccrec
{
    // Deterministic RNG facade. The mt19937_64 engine is fully specified by
    // the standard; every draw below avoids std distributions (whose output
    // is implementation-defined), so a seed pins the stream on any platform.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed) : m_engine(seed) {}

        std::uint64_t next() { return m_engine(); }

        // Uniform in [0, 1), 53 bits of mantissa.
        double uniform() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }

        double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

        // Unbiased uniform integer in [0, n); n must be > 0.
        std::uint64_t below(std::uint64_t n)
        {
            const std::uint64_t limit = (std::numeric_limits<std::uint64_t>::max() / n) * n;
            std::uint64_t x = m_engine();
            while (x >= limit)
            {
                x = m_engine();
            }
            return x % n;
        }

        std::size_t index(std::size_t n) { return static_cast<std::size_t>(below(n)); }

        bool chance(double p) { return uniform() < p; }

        template <typename T>
        void shuffle(std::vector<T>& v)
        {
            for (std::size_t i = v.size(); i > 1; --i)
            {
                std::swap(v[i - 1], v[index(i)]);
            }
        }

        // Index drawn proportionally to non-negative weights.
        std::size_t weighted(const std::vector<double>& w)
        {
            double total = 0;
            for (double x : w)
            {
                total += x;
            }
            double r = uniform() * total;
            for (std::size_t i = 0; i + 1 < w.size(); ++i)
            {
                r -= w[i];
                if (r < 0)
                {
                    return i;
                }
            }
            return w.empty() ? 0 : w.size() - 1;
        }

        // Independent child stream, e.g. one per user.
        Rng fork() { return Rng(next() ^ 0x9e3779b97f4a7c15ULL); }

    private:
        std::mt19937_64 m_engine;
    };
}
