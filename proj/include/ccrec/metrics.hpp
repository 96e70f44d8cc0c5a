#pragma once

// Top-K ranking metrics over next-click predictions.

#include <cstdint>
#include <span>
#include <vector>

namespace ccrec
{
    struct RankedPrediction
    {
        std::vector<std::int64_t> ranking; // descending score, ties by ascending id
        std::int64_t truth = 0;
    };

    // Fraction of instances whose truth appears in the top k.
    double recall_at_k(std::span<const RankedPrediction> predictions, std::size_t k);

    // Mean of 1/rank for truths inside the top k, 0 otherwise.
    double mrr_at_k(std::span<const RankedPrediction> predictions, std::size_t k);

    // Top-k ids by descending score with ties broken by ascending id.
    std::vector<std::int64_t> rank_top_k(std::span<const double> scores,
                                         std::span<const std::int64_t> ids, std::size_t k);
}
