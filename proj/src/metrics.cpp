#include "ccrec/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ccrec
{
    namespace
    {
        void check(std::span<const RankedPrediction> predictions, std::size_t k)
        {
            if (predictions.empty())
            {
                throw std::invalid_argument("ranking metrics need at least one prediction");
            }
            if (k < 1)
            {
                throw std::invalid_argument("ranking metrics need k >= 1");
            }
        }
    }

    double recall_at_k(std::span<const RankedPrediction> predictions, std::size_t k)
    {
        check(predictions, k);
        std::size_t hits = 0;
        for (const auto& p : predictions)
        {
            const std::size_t top = std::min(k, p.ranking.size());
            for (std::size_t i = 0; i < top; ++i)
            {
                if (p.ranking[i] == p.truth)
                {
                    ++hits;
                    break;
                }
            }
        }
        return static_cast<double>(hits) / static_cast<double>(predictions.size());
    }

    double mrr_at_k(std::span<const RankedPrediction> predictions, std::size_t k)
    {
        check(predictions, k);
        double total = 0;
        for (const auto& p : predictions)
        {
            const std::size_t top = std::min(k, p.ranking.size());
            for (std::size_t i = 0; i < top; ++i)
            {
                if (p.ranking[i] == p.truth)
                {
                    total += 1.0 / static_cast<double>(i + 1);
                    break;
                }
            }
        }
        return total / static_cast<double>(predictions.size());
    }

    std::vector<std::int64_t> rank_top_k(std::span<const double> scores,
                                         std::span<const std::int64_t> ids, std::size_t k)
    {
        if (scores.size() != ids.size())
        {
            throw std::invalid_argument("rank_top_k: scores and ids must align");
        }
        std::vector<std::size_t> order(scores.size());
        std::iota(order.begin(), order.end(), 0);
        const auto better = [&](std::size_t a, std::size_t b) {
            if (scores[a] != scores[b])
            {
                return scores[a] > scores[b];
            }
            return ids[a] < ids[b];
        };
        const std::size_t take = std::min(k, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                          order.end(), better);
        std::vector<std::int64_t> out;
        out.reserve(take);
        for (std::size_t i = 0; i < take; ++i)
        {
            out.push_back(ids[order[i]]);
        }
        return out;
    }
}
