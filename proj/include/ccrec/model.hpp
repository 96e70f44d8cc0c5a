#pragma once

// The next-click network: embedding table, GRU stack, feed-forward scoring
// head, with the truncation layer after the embedding table in pull mode
// and after the GRU output in push mode. Global training, per-user
// fine-tuning, user-embedding extraction, and candidate scoring.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccrec/autodiff.hpp"
#include "ccrec/sparsity.hpp"

namespace ccrec
{
    enum class Mode : std::uint8_t
    {
        Pull,
        Push,
    };

    const char* mode_name(Mode mode);
    Mode parse_mode(const std::string& name);

    struct ModelConfig
    {
        std::size_t vocab_size = 0;
        std::size_t embedding_dim = 32;
        std::size_t gru_layers = 1;
        std::size_t hidden_dim = 100;
        std::size_t batch_size = 50;
        Mode mode = Mode::Pull;
        LassoConfig lasso;
        bool prune_embedding = true;

        void validate() const;
        bool operator==(const ModelConfig&) const = default;
    };

    struct UserEmbedding
    {
        std::int64_t user_id = -1;
        std::vector<double> vector;
        std::int64_t produced_at = 0;
    };

    // Item indices into the model's vocabulary.
    using IndexSeq = std::vector<std::int32_t>;

    // Incremental inference state: one hidden vector per GRU layer.
    struct GruState
    {
        std::vector<std::vector<double>> hidden;
        std::size_t steps = 0;
    };

    struct EpochStats
    {
        std::size_t epoch = 0;
        double mean_loss = 0;
        double target_sparsity = 0;
        double achieved_sparsity = 0;
        double seconds = 0;
        std::size_t prediction_steps = 0;
    };

    struct TrainReport
    {
        std::vector<EpochStats> epochs;
    };

    struct TrainConfig
    {
        std::size_t epochs = 4;
        double learning_rate = 0.01;
        std::optional<PruningSchedule> pruning;
        std::uint64_t seed = 1; // epoch shuffling
    };

    struct FineTuneConfig
    {
        std::size_t passes = 3;
        std::size_t update_batch_size = 25;
        double learning_rate = 0.01;
    };

    class RecModel
    {
    public:
        RecModel() = default;
        RecModel(const ModelConfig& cfg, std::uint64_t seed);

        const ModelConfig& config() const { return m_cfg; }
        std::vector<ParamTensor*> params();
        std::vector<const ParamTensor*> params() const;
        // Weight tensors subject to magnitude pruning (biases excluded;
        // the embedding table per config).
        std::vector<ParamTensor*> prunable_params();

        const ParamTensor& embedding() const { return m_embedding; }
        const ParamTensor& output_weight() const { return m_out_w; }
        const ParamTensor& output_bias() const { return m_out_b; }

        // -- inference (plain, stateful) --
        GruState initial_state() const;
        void advance(GruState& state, std::int32_t item) const;
        // Mode-dependent: dense final hidden state in pull mode, truncated in
        // push mode. Throws before the first advance.
        std::vector<double> user_representation(const GruState& state) const;
        std::vector<double> scores_from(std::span<const double> user_rep,
                                        std::span<const std::int32_t> candidates) const;
        std::vector<double> full_scores_from(std::span<const double> user_rep) const;

        std::vector<double> forward_scores(std::span<const std::int32_t> prefix) const;
        std::vector<double> forward_scores(std::span<const std::int32_t> prefix,
                                           std::span<const std::int32_t> candidates) const;
        UserEmbedding extract_user_embedding(std::span<const std::int32_t> prefix,
                                             std::int64_t user_id = -1,
                                             std::int64_t produced_at = 0) const;

        // -- training --
        // Teacher-forced next-click loss over one session: sum over positions
        // t >= 1 of cross-entropy plus the weighted truncation penalty.
        // Returns the scalar root; sessions shorter than 2 yield no steps.
        Tape::NodeId session_loss(Tape& tape, std::span<const std::int32_t> items,
                                  std::size_t* steps_out);

        // Truncation threshold used by the sparsity layer on a given vector.
        double truncation_gamma(std::span<const double> v) const;

    private:
        void check_item(std::int32_t item) const;

        ModelConfig m_cfg;
        ParamTensor m_embedding;
        std::vector<GruCellParams> m_layers;
        ParamTensor m_out_w;
        ParamTensor m_out_b;
    };

    RecModel build_model(const ModelConfig& cfg, std::uint64_t seed);

    // Trains in place over index sessions; throws on an empty training set.
    // The pruning schedule (when configured) fires at each due epoch.
    TrainReport train_global(RecModel& model, std::span<const IndexSeq> sessions,
                             const TrainConfig& cfg);

    // Returns a personalized copy; the input model is never mutated. Updates
    // fire once a full update_batch_size of prediction steps accumulated.
    RecModel fine_tune(const RecModel& global, std::span<const IndexSeq> user_sessions,
                       const FineTuneConfig& cfg);

    std::uint64_t params_hash(const RecModel& model);
}
