#include "ccrec/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ccrec/hash.hpp"

namespace ccrec
{
    const char* mode_name(Mode mode)
    {
        return mode == Mode::Pull ? "pull" : "push";
    }

    Mode parse_mode(const std::string& name)
    {
        if (name == "pull")
        {
            return Mode::Pull;
        }
        if (name == "push")
        {
            return Mode::Push;
        }
        throw std::invalid_argument("unknown mode '" + name + "' (expected pull or push)");
    }

    void ModelConfig::validate() const
    {
        if (vocab_size < 1 || embedding_dim < 1 || gru_layers < 1 || hidden_dim < 1 ||
            batch_size < 1)
        {
            throw std::invalid_argument("ModelConfig: all sizes must be >= 1");
        }
        lasso.validate();
    }

    RecModel::RecModel(const ModelConfig& cfg, std::uint64_t seed) : m_cfg(cfg)
    {
        m_cfg.validate();
        Rng rng(seed);
        m_embedding = ParamTensor("embedding", {cfg.vocab_size, cfg.embedding_dim},
                                  cfg.prune_embedding);
        init_uniform(m_embedding, rng);
        m_layers.reserve(cfg.gru_layers);
        for (std::size_t l = 0; l < cfg.gru_layers; ++l)
        {
            const std::size_t input_dim = (l == 0) ? cfg.embedding_dim : cfg.hidden_dim;
            m_layers.emplace_back(input_dim, cfg.hidden_dim, "gru" + std::to_string(l));
            m_layers.back().init(rng);
        }
        m_out_w = ParamTensor("out.weight", {cfg.vocab_size, cfg.hidden_dim});
        init_uniform(m_out_w, rng);
        m_out_b = ParamTensor("out.bias", {cfg.vocab_size}, false);
    }

    std::vector<ParamTensor*> RecModel::params()
    {
        std::vector<ParamTensor*> out{&m_embedding};
        for (auto& layer : m_layers)
        {
            for (ParamTensor* p : layer.params())
            {
                out.push_back(p);
            }
        }
        out.push_back(&m_out_w);
        out.push_back(&m_out_b);
        return out;
    }

    std::vector<const ParamTensor*> RecModel::params() const
    {
        std::vector<const ParamTensor*> out{&m_embedding};
        for (const auto& layer : m_layers)
        {
            for (const ParamTensor* p : layer.params())
            {
                out.push_back(p);
            }
        }
        out.push_back(&m_out_w);
        out.push_back(&m_out_b);
        return out;
    }

    std::vector<ParamTensor*> RecModel::prunable_params()
    {
        std::vector<ParamTensor*> out;
        for (ParamTensor* p : params())
        {
            if (p->prunable)
            {
                out.push_back(p);
            }
        }
        return out;
    }

    void RecModel::check_item(std::int32_t item) const
    {
        if (item < 0 || static_cast<std::size_t>(item) >= m_cfg.vocab_size)
        {
            throw std::out_of_range("unknown item index " + std::to_string(item));
        }
    }

    double RecModel::truncation_gamma(std::span<const double> v) const
    {
        return effective_gamma(v, m_cfg.lasso);
    }

    GruState RecModel::initial_state() const
    {
        GruState state;
        state.hidden.assign(m_cfg.gru_layers, std::vector<double>(m_cfg.hidden_dim, 0.0));
        return state;
    }

    void RecModel::advance(GruState& state, std::int32_t item) const
    {
        check_item(item);
        const std::size_t base = static_cast<std::size_t>(item) * m_cfg.embedding_dim;
        std::vector<double> x(m_cfg.embedding_dim);
        for (std::size_t j = 0; j < m_cfg.embedding_dim; ++j)
        {
            x[j] = m_embedding.at(base + j);
        }
        if (m_cfg.mode == Mode::Pull && m_cfg.lasso.active())
        {
            x = lasso_truncate(x, truncation_gamma(x)).truncated;
        }
        for (std::size_t l = 0; l < m_layers.size(); ++l)
        {
            state.hidden[l] = gru_step(m_layers[l], x, state.hidden[l]);
            x = state.hidden[l];
        }
        state.steps += 1;
    }

    std::vector<double> RecModel::user_representation(const GruState& state) const
    {
        if (state.steps == 0)
        {
            throw std::invalid_argument("user_representation: empty prefix");
        }
        const std::vector<double>& h = state.hidden.back();
        if (m_cfg.mode == Mode::Push && m_cfg.lasso.active())
        {
            return lasso_truncate(h, truncation_gamma(h)).truncated;
        }
        return h;
    }

    std::vector<double> RecModel::scores_from(std::span<const double> user_rep,
                                              std::span<const std::int32_t> candidates) const
    {
        std::vector<double> scores(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i)
        {
            check_item(candidates[i]);
            const auto row = static_cast<std::size_t>(candidates[i]);
            const std::size_t base = row * m_cfg.hidden_dim;
            double acc = m_out_b.at(row);
            for (std::size_t j = 0; j < m_cfg.hidden_dim; ++j)
            {
                acc += m_out_w.at(base + j) * user_rep[j];
            }
            scores[i] = acc;
        }
        return scores;
    }

    std::vector<double> RecModel::full_scores_from(std::span<const double> user_rep) const
    {
        return dense_forward(m_out_w, m_out_b, user_rep);
    }

    namespace
    {
        GruState state_after(const RecModel& model, std::span<const std::int32_t> prefix)
        {
            if (prefix.empty())
            {
                throw std::invalid_argument("forward: prefix must contain at least one click");
            }
            GruState state = model.initial_state();
            for (std::int32_t item : prefix)
            {
                model.advance(state, item);
            }
            return state;
        }
    }

    std::vector<double> RecModel::forward_scores(std::span<const std::int32_t> prefix) const
    {
        return full_scores_from(user_representation(state_after(*this, prefix)));
    }

    std::vector<double> RecModel::forward_scores(std::span<const std::int32_t> prefix,
                                                 std::span<const std::int32_t> candidates) const
    {
        return scores_from(user_representation(state_after(*this, prefix)), candidates);
    }

    UserEmbedding RecModel::extract_user_embedding(std::span<const std::int32_t> prefix,
                                                   std::int64_t user_id,
                                                   std::int64_t produced_at) const
    {
        UserEmbedding out;
        out.user_id = user_id;
        out.produced_at = produced_at;
        out.vector = user_representation(state_after(*this, prefix));
        return out;
    }

    Tape::NodeId RecModel::session_loss(Tape& tape, std::span<const std::int32_t> items,
                                        std::size_t* steps_out)
    {
        for (std::int32_t item : items)
        {
            check_item(item);
        }
        const bool sparsify = m_cfg.lasso.active();
        const double lambda = m_cfg.lasso.lambda;
        std::vector<Tape::NodeId> hidden(m_layers.size(), -1);
        for (std::size_t l = 0; l < m_layers.size(); ++l)
        {
            hidden[l] = tape.constant(std::vector<double>(m_cfg.hidden_dim, 0.0));
        }
        Tape::NodeId total = -1;
        std::size_t steps = 0;
        for (std::size_t t = 0; t + 1 < items.size(); ++t)
        {
            Tape::NodeId x = tape.embedding_row(m_embedding, static_cast<std::size_t>(items[t]));
            Tape::NodeId penalty = -1;
            if (m_cfg.mode == Mode::Pull && sparsify)
            {
                x = tape.truncate_below(x, truncation_gamma(tape.value(x)));
                penalty = tape.l1_norm(x);
            }
            for (std::size_t l = 0; l < m_layers.size(); ++l)
            {
                hidden[l] = m_layers[l].step(tape, x, hidden[l]);
                x = hidden[l];
            }
            Tape::NodeId rep = hidden.back();
            if (m_cfg.mode == Mode::Push && sparsify)
            {
                rep = tape.truncate_below(rep, truncation_gamma(tape.value(rep)));
                penalty = tape.l1_norm(rep);
            }
            const Tape::NodeId scores = tape.affine(m_out_w, m_out_b, rep);
            Tape::NodeId loss =
                tape.cross_entropy(scores, static_cast<std::size_t>(items[t + 1]));
            if (penalty >= 0 && lambda > 0)
            {
                loss = tape.add_scaled(loss, penalty, lambda);
            }
            total = (total < 0) ? loss : tape.add(total, loss);
            ++steps;
        }
        if (steps_out)
        {
            *steps_out = steps;
        }
        if (total < 0)
        {
            total = tape.constant({0.0});
        }
        return total;
    }

    RecModel build_model(const ModelConfig& cfg, std::uint64_t seed)
    {
        return RecModel(cfg, seed);
    }

    namespace
    {
        void scale_grads(std::span<ParamTensor* const> params, double c)
        {
            for (ParamTensor* p : params)
            {
                for (double& g : p->grad)
                {
                    g *= c;
                }
            }
        }

        void zero_grads(std::span<ParamTensor* const> params)
        {
            for (ParamTensor* p : params)
            {
                p->zero_grad();
            }
        }
    }

    TrainReport train_global(RecModel& model, std::span<const IndexSeq> sessions,
                             const TrainConfig& cfg)
    {
        std::vector<std::size_t> usable;
        for (std::size_t i = 0; i < sessions.size(); ++i)
        {
            if (sessions[i].size() >= 2)
            {
                usable.push_back(i);
            }
        }
        if (usable.empty())
        {
            throw std::invalid_argument("train_global: empty training set");
        }
        if (cfg.pruning)
        {
            cfg.pruning->validate();
        }

        auto params = model.params();
        auto prunable = model.prunable_params();
        Adagrad opt;
        opt.learning_rate = cfg.learning_rate;
        opt.reset(params);

        TrainReport report;
        const std::size_t batch = model.config().batch_size;
        for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch)
        {
            const auto started = std::chrono::steady_clock::now();
            Rng rng(cfg.seed ^ (0x51ed2701ULL * epoch));
            std::vector<std::size_t> order = usable;
            rng.shuffle(order);

            double epoch_loss = 0;
            std::size_t epoch_steps = 0;
            std::size_t cursor = 0;
            while (cursor < order.size())
            {
                zero_grads(params);
                double batch_loss = 0;
                std::size_t batch_steps = 0;
                for (std::size_t k = 0; k < batch && cursor < order.size(); ++k, ++cursor)
                {
                    const IndexSeq& session = sessions[order[cursor]];
                    Tape tape;
                    std::size_t steps = 0;
                    const auto root = model.session_loss(tape, session, &steps);
                    if (steps == 0)
                    {
                        continue;
                    }
                    tape.backward(root);
                    batch_loss += tape.scalar(root);
                    batch_steps += steps;
                }
                if (batch_steps == 0)
                {
                    continue;
                }
                scale_grads(params, 1.0 / static_cast<double>(batch_steps));
                opt.step(params);
                epoch_loss += batch_loss;
                epoch_steps += batch_steps;
            }

            EpochStats stats;
            stats.epoch = epoch;
            stats.mean_loss = epoch_steps ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
            stats.prediction_steps = epoch_steps;
            if (cfg.pruning && cfg.pruning->due(epoch))
            {
                stats.target_sparsity = scheduled_sparsity(*cfg.pruning, epoch);
                apply_magnitude_prune(prunable, stats.target_sparsity);
            }
            {
                std::vector<const ParamTensor*> view(prunable.begin(), prunable.end());
                stats.achieved_sparsity = achieved_sparsity(view);
            }
            stats.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            report.epochs.push_back(stats);
        }
        return report;
    }

    RecModel fine_tune(const RecModel& global, std::span<const IndexSeq> user_sessions,
                       const FineTuneConfig& cfg)
    {
        RecModel personal = global;
        if (cfg.passes == 0 || user_sessions.empty())
        {
            return personal;
        }
        auto params = personal.params();
        Adagrad opt;
        opt.learning_rate = cfg.learning_rate;
        opt.reset(params);

        const std::size_t batch = std::max<std::size_t>(1, cfg.update_batch_size);
        for (std::size_t pass = 0; pass < cfg.passes; ++pass)
        {
            zero_grads(params);
            std::size_t pending_steps = 0;
            for (const IndexSeq& session : user_sessions)
            {
                if (session.size() < 2)
                {
                    continue;
                }
                Tape tape;
                std::size_t steps = 0;
                const auto root = personal.session_loss(tape, session, &steps);
                if (steps == 0)
                {
                    continue;
                }
                tape.backward(root);
                pending_steps += steps;
                if (pending_steps >= batch)
                {
                    scale_grads(params, 1.0 / static_cast<double>(pending_steps));
                    opt.step(params);
                    zero_grads(params);
                    pending_steps = 0;
                }
            }
            // an unfinished mini-batch is not applied
            zero_grads(params);
        }
        return personal;
    }

    std::uint64_t params_hash(const RecModel& model)
    {
        std::uint64_t h = kFnvOffset;
        for (const ParamTensor* p : model.params())
        {
            h = fnv1a64(p->name, h);
            h = fnv1a64(std::span<const double>(p->values), h);
            h = fnv1a64(std::span<const std::uint8_t>(p->mask), h);
        }
        return h;
    }
}
