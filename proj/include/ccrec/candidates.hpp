#pragma once

// Item-based collaborative filtering over purchase records: binary
// user-item matrix, cosine column similarity, click-probability scores,
// and per-user candidate sets.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ccrec/data.hpp"

namespace ccrec
{
    // Binary purchase matrix with deterministic (sorted-id) index
    // assignment; duplicates collapse to a single entry.
    struct InteractionMatrix
    {
        std::vector<std::int64_t> user_ids; // sorted
        std::vector<std::int64_t> item_ids; // sorted
        std::vector<std::vector<std::int32_t>> item_users; // column: sorted user indices
        std::vector<std::vector<std::int32_t>> user_items; // row: sorted item indices

        std::size_t user_count() const { return user_ids.size(); }
        std::size_t item_count() const { return item_ids.size(); }
        std::optional<std::size_t> find_user(std::int64_t id) const;
        std::optional<std::size_t> find_item(std::int64_t id) const;
        bool purchased(std::size_t user, std::size_t item) const;
    };

    // Rejects non-purchase records.
    InteractionMatrix build_matrix(std::span<const InteractionRecord> purchases);

    // Cosine of two binary columns; 0 when either has no purchases.
    double item_similarity(const InteractionMatrix& m, std::size_t item_a, std::size_t item_b);

    // p = sum_b sim(item, b) * x[user, b] / sum_b sim(item, b), both sums over
    // the same neighbor set: all items when k_neighbors < 0, otherwise the
    // k most similar items (ties broken by ascending item index).
    double predict_click_prob(const InteractionMatrix& m, std::size_t user, std::size_t item,
                              std::ptrdiff_t k_neighbors = -1);

    struct CandidateSelection
    {
        enum class Kind : std::uint8_t
        {
            Threshold,  // all items with p strictly above the value
            Proportion, // top ceil(value * item_count) items by p
        };
        Kind kind = Kind::Proportion;
        double value = 0.1;
        std::ptrdiff_t k_neighbors = -1;

        void validate() const;
    };

    struct CandidateSet
    {
        std::int64_t user_id = 0;
        std::vector<std::int64_t> items; // descending p, ties by ascending id
        std::vector<double> scores;
        CandidateSelection params;
    };

    // Precomputed pairwise similarities; rebuildable from the matrix alone.
    struct SimilarityIndex
    {
        std::vector<std::vector<double>> sim; // item_count x item_count
        std::vector<double> row_sum;          // sum_b sim(m, b)
    };

    SimilarityIndex build_similarity(const InteractionMatrix& m);

    CandidateSet candidate_set(const InteractionMatrix& m, const SimilarityIndex& index,
                               std::int64_t user_id, const CandidateSelection& sel);
    CandidateSet candidate_set(const InteractionMatrix& m, std::int64_t user_id,
                               const CandidateSelection& sel);
}
