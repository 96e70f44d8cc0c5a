#include "ccrec/experiment.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <stdexcept>

namespace ccrec
{
    Vocab Vocab::from_split(const DatasetSplit& split)
    {
        std::set<std::int64_t> items;
        for (const Session& s : split.global_train)
        {
            for (const SessionClick& c : s.clicks)
            {
                items.insert(c.item_id);
            }
        }
        for (const auto& [user, sessions] : split.personal_train)
        {
            for (const Session& s : sessions)
            {
                for (const SessionClick& c : s.clicks)
                {
                    items.insert(c.item_id);
                }
            }
        }
        Vocab v;
        v.ids.assign(items.begin(), items.end());
        v.index.reserve(v.ids.size());
        for (std::size_t i = 0; i < v.ids.size(); ++i)
        {
            v.index.emplace(v.ids[i], static_cast<std::int32_t>(i));
        }
        return v;
    }

    std::optional<std::int32_t> Vocab::find(std::int64_t id) const
    {
        const auto it = index.find(id);
        if (it == index.end())
        {
            return std::nullopt;
        }
        return it->second;
    }

    std::int32_t Vocab::at(std::int64_t id) const
    {
        const auto found = find(id);
        if (!found)
        {
            throw std::out_of_range("Vocab: unknown item id " + std::to_string(id));
        }
        return *found;
    }

    IndexSeq to_indices(const Session& session, const Vocab& vocab)
    {
        IndexSeq out;
        out.reserve(session.clicks.size());
        for (const SessionClick& c : session.clicks)
        {
            out.push_back(vocab.at(c.item_id));
        }
        return out;
    }

    std::vector<IndexSeq> to_indices(std::span<const Session> sessions, const Vocab& vocab)
    {
        std::vector<IndexSeq> out;
        out.reserve(sessions.size());
        for (const Session& s : sessions)
        {
            out.push_back(to_indices(s, vocab));
        }
        return out;
    }

    const char* approach_name(Approach a)
    {
        switch (a)
        {
        case Approach::GlobalPersonal:
            return "global_personal";
        case Approach::CloudClient:
            return "cloud_client";
        case Approach::OnlyGlobal:
            return "only_global";
        case Approach::OnlyPersonal:
            return "only_personal";
        case Approach::TransactionalOnly:
            return "transactional_only";
        }
        return "unknown";
    }

    namespace
    {
        std::map<std::int64_t, std::vector<Session>> group_by_user(
            std::span<const Session> sessions)
        {
            std::map<std::int64_t, std::vector<Session>> out;
            for (const Session& s : sessions)
            {
                out[s.user_id].push_back(s);
            }
            return out;
        }

        // Per-user transactional sequences, sessionized with the same idle
        // threshold and cut at t_device like the click pipeline.
        struct TransactionalSets
        {
            std::vector<IndexSeq> global_stage;
            std::map<std::int64_t, std::vector<IndexSeq>> personal_stage;
        };

        TransactionalSets transactional_sequences(const DatasetSplit& split, const Vocab& vocab,
                                                  const PartitionConfig& partition)
        {
            std::map<std::int64_t, std::vector<InteractionRecord>> by_user;
            for (const InteractionRecord& r : split.transactional)
            {
                if (r.timestamp >= partition.t_test || !vocab.find(r.item_id))
                {
                    continue;
                }
                InteractionRecord as_click = r;
                as_click.behavior = Behavior::Click; // sessionize consumes click streams
                by_user[r.user_id].push_back(as_click);
            }
            TransactionalSets out;
            for (auto& [user, records] : by_user)
            {
                for (const Session& s : sessionize(std::move(records),
                                                   partition.idle_threshold_secs))
                {
                    // cut at the boundary like partition_temporal
                    IndexSeq global_piece;
                    IndexSeq personal_piece;
                    for (const SessionClick& c : s.clicks)
                    {
                        (c.timestamp < partition.t_device ? global_piece : personal_piece)
                            .push_back(vocab.at(c.item_id));
                    }
                    if (global_piece.size() >= 2)
                    {
                        out.global_stage.push_back(std::move(global_piece));
                    }
                    if (personal_piece.size() >= 2)
                    {
                        out.personal_stage[user].push_back(std::move(personal_piece));
                    }
                }
            }
            return out;
        }
    }

    ApproachMetrics evaluate_models(
        const DatasetSplit& split, const Vocab& vocab,
        const std::function<const RecModel&(std::int64_t)>& model_for_user,
        const std::optional<CandidateSelection>& candidates, std::size_t top_k,
        const PartitionConfig& partition)
    {
        std::optional<InteractionMatrix> matrix;
        std::optional<SimilarityIndex> similarity;
        if (candidates)
        {
            std::vector<InteractionRecord> purchases;
            for (const InteractionRecord& r : split.transactional)
            {
                if (r.behavior == Behavior::Purchase && r.timestamp < partition.t_test)
                {
                    purchases.push_back(r);
                }
            }
            matrix = build_matrix(purchases);
            similarity = build_similarity(*matrix);
        }

        ApproachMetrics out;
        std::vector<RankedPrediction> all;
        for (const auto& [user, sessions] : split.test)
        {
            const RecModel& model = model_for_user(user);

            std::vector<std::int64_t> universe_ids;
            IndexSeq universe_idx;
            if (candidates)
            {
                if (matrix->find_user(user))
                {
                    const CandidateSet set =
                        candidate_set(*matrix, *similarity, user, *candidates);
                    for (std::int64_t id : set.items)
                    {
                        if (const auto idx = vocab.find(id))
                        {
                            universe_ids.push_back(id);
                            universe_idx.push_back(*idx);
                        }
                    }
                }
                // a user without purchases gets an empty candidate set:
                // every instance becomes a miss
            }
            else
            {
                universe_ids = vocab.ids;
                universe_idx.resize(vocab.size());
                for (std::size_t i = 0; i < vocab.size(); ++i)
                {
                    universe_idx[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(i);
                }
            }

            std::vector<RankedPrediction> mine;
            for (const Session& session : sessions)
            {
                GruState state = model.initial_state();
                for (std::size_t t = 0; t + 1 < session.clicks.size(); ++t)
                {
                    model.advance(state, vocab.at(session.clicks[t].item_id));
                    RankedPrediction pred;
                    pred.truth = session.clicks[t + 1].item_id;
                    if (!universe_idx.empty())
                    {
                        const auto rep = model.user_representation(state);
                        const auto scores = model.scores_from(rep, universe_idx);
                        pred.ranking = rank_top_k(scores, universe_ids, top_k);
                    }
                    mine.push_back(std::move(pred));
                }
            }
            if (!mine.empty())
            {
                UserMetrics um;
                um.recall = recall_at_k(mine, top_k);
                um.mrr = mrr_at_k(mine, top_k);
                um.instances = mine.size();
                out.per_user.emplace(user, um);
                all.insert(all.end(), mine.begin(), mine.end());
            }
        }
        if (!all.empty())
        {
            out.recall = recall_at_k(all, top_k);
            out.mrr = mrr_at_k(all, top_k);
            out.instances = all.size();
        }
        return out;
    }

    ApproachMetrics evaluate_approach(const DatasetSplit& split, Approach approach,
                                      const ExperimentConfig& cfg, std::uint64_t seed,
                                      const PartitionConfig& partition)
    {
        const Vocab vocab = Vocab::from_split(split);
        if (vocab.size() == 0)
        {
            throw std::invalid_argument("evaluate_approach: empty training vocabulary");
        }
        ModelConfig model_cfg = cfg.model;
        model_cfg.vocab_size = vocab.size();
        TrainConfig train_cfg = cfg.train;
        train_cfg.seed = seed ^ 0xa5a5a5a5ULL;

        const auto global_by_user = group_by_user(split.global_train);

        // assemble this approach's global-stage training set
        std::vector<IndexSeq> global_set;
        std::map<std::int64_t, std::vector<IndexSeq>> personal_sets;
        const bool uses_personal_stage_globally =
            approach == Approach::GlobalPersonal || approach == Approach::OnlyGlobal;
        switch (approach)
        {
        case Approach::GlobalPersonal:
        case Approach::OnlyGlobal:
        case Approach::CloudClient:
        {
            global_set = to_indices(split.global_train, vocab);
            if (uses_personal_stage_globally)
            {
                for (const auto& [user, sessions] : split.personal_train)
                {
                    for (const Session& s : sessions)
                    {
                        global_set.push_back(to_indices(s, vocab));
                    }
                }
            }
            if (approach != Approach::OnlyGlobal)
            {
                for (const auto& [user, sessions] : split.personal_train)
                {
                    personal_sets[user] = to_indices(sessions, vocab);
                }
            }
            break;
        }
        case Approach::OnlyPersonal:
        {
            for (const auto& [user, sessions] : global_by_user)
            {
                personal_sets[user] = to_indices(sessions, vocab);
            }
            for (const auto& [user, sessions] : split.personal_train)
            {
                auto& dst = personal_sets[user];
                for (const Session& s : sessions)
                {
                    dst.push_back(to_indices(s, vocab));
                }
            }
            break;
        }
        case Approach::TransactionalOnly:
        {
            TransactionalSets sets = transactional_sequences(split, vocab, partition);
            global_set = std::move(sets.global_stage);
            personal_sets = std::move(sets.personal_stage);
            break;
        }
        }

        RecModel base(model_cfg, seed);
        const bool has_global_data = std::any_of(global_set.begin(), global_set.end(),
                                                 [](const IndexSeq& s) { return s.size() >= 2; });
        if (has_global_data)
        {
            train_global(base, global_set, train_cfg);
        }

        std::map<std::int64_t, RecModel> personalized;
        if (approach != Approach::OnlyGlobal)
        {
            for (const auto& [user, sessions] : split.test)
            {
                const auto it = personal_sets.find(user);
                if (it != personal_sets.end())
                {
                    personalized.emplace(user, fine_tune(base, it->second, cfg.fine_tune));
                }
            }
        }

        auto result = evaluate_models(
            split, vocab,
            [&](std::int64_t user) -> const RecModel& {
                const auto it = personalized.find(user);
                return it == personalized.end() ? base : it->second;
            },
            cfg.candidates, cfg.top_k, partition);
        result.approach = approach;
        return result;
    }

    std::vector<ApproachMetrics> run_experiment_matrix(const DatasetSplit& split,
                                                       const ExperimentConfig& cfg,
                                                       std::uint64_t seed,
                                                       const PartitionConfig& partition)
    {
        std::vector<ApproachMetrics> rows;
        for (Approach a : {Approach::GlobalPersonal, Approach::CloudClient, Approach::OnlyGlobal,
                           Approach::OnlyPersonal})
        {
            rows.push_back(evaluate_approach(split, a, cfg, seed, partition));
        }
        return rows;
    }
}
