#pragma once

// Experiment harness: vocabulary mapping, per-approach training/evaluation,
// and the four-approach comparison matrix with its ablations.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccrec/candidates.hpp"
#include "ccrec/data.hpp"
#include "ccrec/metrics.hpp"
#include "ccrec/model.hpp"

namespace ccrec
{
    // Contiguous model indices over the items seen in any training stage.
    struct Vocab
    {
        std::vector<std::int64_t> ids; // sorted; index -> raw id
        std::unordered_map<std::int64_t, std::int32_t> index;

        static Vocab from_split(const DatasetSplit& split);
        std::size_t size() const { return ids.size(); }
        std::optional<std::int32_t> find(std::int64_t id) const;
        std::int32_t at(std::int64_t id) const; // throws on unknown
    };

    IndexSeq to_indices(const Session& session, const Vocab& vocab);
    std::vector<IndexSeq> to_indices(std::span<const Session> sessions, const Vocab& vocab);

    enum class Approach
    {
        GlobalPersonal,    // global through t_test, then per-user fine-tuning
        CloudClient,       // global to t_device, fine-tuned on the personal stage
        OnlyGlobal,        // global through t_test, no fine-tuning
        OnlyPersonal,      // per-user training from scratch on own clicks
        TransactionalOnly, // CloudClient trained on transactional sequences
    };

    const char* approach_name(Approach a);

    struct ExperimentConfig
    {
        ModelConfig model; // vocab_size is filled from the split
        TrainConfig train;
        FineTuneConfig fine_tune;
        // When set, scoring is restricted to per-user CF candidate sets built
        // from pre-t_test purchases; otherwise the full vocabulary is scored.
        std::optional<CandidateSelection> candidates;
        std::size_t top_k = 20;
    };

    struct UserMetrics
    {
        double recall = 0;
        double mrr = 0;
        std::size_t instances = 0;
    };

    struct ApproachMetrics
    {
        Approach approach = Approach::CloudClient;
        double recall = 0;
        double mrr = 0;
        std::size_t instances = 0;
        std::map<std::int64_t, UserMetrics> per_user;
    };

    ApproachMetrics evaluate_approach(const DatasetSplit& split, Approach approach,
                                      const ExperimentConfig& cfg, std::uint64_t seed,
                                      const PartitionConfig& partition);

    // The four baselines on identical test data, in fixed row order.
    std::vector<ApproachMetrics> run_experiment_matrix(const DatasetSplit& split,
                                                       const ExperimentConfig& cfg,
                                                       std::uint64_t seed,
                                                       const PartitionConfig& partition);

    // Evaluates already-personalized models (user -> model) on the test
    // stage; models score candidate ids when provided, else the vocabulary.
    ApproachMetrics evaluate_models(
        const DatasetSplit& split, const Vocab& vocab,
        const std::function<const RecModel&(std::int64_t)>& model_for_user,
        const std::optional<CandidateSelection>& candidates, std::size_t top_k,
        const PartitionConfig& partition);
}
