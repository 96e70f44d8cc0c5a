#include "ccrec/protocol.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

namespace ccrec
{
    const char* kind_name(MessageKind kind)
    {
        switch (kind)
        {
        case MessageKind::GlobalModel:
            return "GlobalModel";
        case MessageKind::CandidateSetItems:
            return "CandidateSetItems";
        case MessageKind::UserEmbedding:
            return "UserEmbedding";
        case MessageKind::RecommendationList:
            return "RecommendationList";
        }
        return "unknown";
    }

    Bytes MessageLog::deliver(Message msg)
    {
        const bool upload = msg.receiver == kCloudNode;
        const bool download = msg.sender == kCloudNode;
        if (upload == download)
        {
            throw ProtocolViolation("message must travel between the cloud and one device");
        }
        switch (msg.kind)
        {
        case MessageKind::GlobalModel:
        case MessageKind::RecommendationList:
            if (!download)
            {
                throw ProtocolViolation(std::string(kind_name(msg.kind)) +
                                        " only travels cloud to device");
            }
            break;
        case MessageKind::CandidateSetItems:
            if (!download)
            {
                throw ProtocolViolation("CandidateSetItems only travels cloud to device");
            }
            if (m_mode == Mode::Push)
            {
                // push devices never download candidate item data
                throw ProtocolViolation("CandidateSetItems is forbidden in push mode");
            }
            break;
        case MessageKind::UserEmbedding:
            if (!upload)
            {
                throw ProtocolViolation("UserEmbedding only travels device to cloud");
            }
            if (m_mode == Mode::Pull)
            {
                // pull devices never upload model-derived payloads
                throw ProtocolViolation("UserEmbedding is forbidden in pull mode");
            }
            break;
        }
        const std::uint64_t bytes = msg.payload.size();
        m_records.push_back(MessageRecord{msg.kind, msg.sender, msg.receiver, bytes});
        auto& totals = m_by_kind[msg.kind];
        totals.count += 1;
        totals.bytes += bytes;
        (upload ? m_uploaded : m_downloaded) += bytes;
        return std::move(msg.payload);
    }

    std::string MessageLog::to_ndjson() const
    {
        std::ostringstream out;
        for (const MessageRecord& r : m_records)
        {
            out << "{\"kind\":\"" << kind_name(r.kind) << "\",\"from\":" << r.sender
                << ",\"to\":" << r.receiver << ",\"bytes\":" << r.bytes << "}\n";
        }
        return out.str();
    }

    namespace
    {
        constexpr std::int64_t kSecondsPerDay = 86400;

        std::int64_t day_of(std::int64_t timestamp)
        {
            return timestamp / kSecondsPerDay;
        }

        // Candidate sets recomputed per simulated day from the purchases
        // strictly before that day's start.
        class CandidateProvider
        {
        public:
            CandidateProvider(std::span<const InteractionRecord> transactional,
                              const CandidateSelection& selection)
                : m_selection(selection)
            {
                for (const InteractionRecord& r : transactional)
                {
                    if (r.behavior == Behavior::Purchase)
                    {
                        m_purchases.push_back(r);
                    }
                }
                std::stable_sort(m_purchases.begin(), m_purchases.end(),
                                 [](const InteractionRecord& a, const InteractionRecord& b) {
                                     return a.timestamp < b.timestamp;
                                 });
            }

            const CandidateSet& for_user_day(std::int64_t user, std::int64_t day)
            {
                const auto key = std::make_pair(user, day);
                if (const auto it = m_cache.find(key); it != m_cache.end())
                {
                    return it->second;
                }
                const DayIndex& index = day_index(day);
                CandidateSet set;
                set.user_id = user;
                set.params = m_selection;
                if (index.matrix.find_user(user))
                {
                    set = candidate_set(index.matrix, index.similarity, user, m_selection);
                }
                return m_cache.emplace(key, std::move(set)).first->second;
            }

        private:
            struct DayIndex
            {
                InteractionMatrix matrix;
                SimilarityIndex similarity;
            };

            const DayIndex& day_index(std::int64_t day)
            {
                if (const auto it = m_days.find(day); it != m_days.end())
                {
                    return it->second;
                }
                std::vector<InteractionRecord> visible;
                const std::int64_t cutoff = day * kSecondsPerDay;
                for (const InteractionRecord& r : m_purchases)
                {
                    if (r.timestamp < cutoff)
                    {
                        visible.push_back(r);
                    }
                }
                DayIndex index;
                index.matrix = build_matrix(visible);
                index.similarity = build_similarity(index.matrix);
                return m_days.emplace(day, std::move(index)).first->second;
            }

            CandidateSelection m_selection;
            std::vector<InteractionRecord> m_purchases;
            std::map<std::int64_t, DayIndex> m_days;
            std::map<std::pair<std::int64_t, std::int64_t>, CandidateSet> m_cache;
        };

        // Pull payload: candidate ids plus their truncated output-layer rows.
        Bytes encode_candidate_items(const RecModel& global, const Vocab& vocab,
                                     const CandidateSet& set)
        {
            ByteWriter out;
            std::vector<std::pair<std::int64_t, std::int32_t>> usable;
            for (std::int64_t id : set.items)
            {
                if (const auto idx = vocab.find(id))
                {
                    usable.emplace_back(id, *idx);
                }
            }
            out.u32(static_cast<std::uint32_t>(usable.size()));
            const std::size_t hidden = global.config().hidden_dim;
            std::vector<double> row(hidden);
            std::vector<float> truncated(hidden);
            for (const auto& [id, idx] : usable)
            {
                out.u64(static_cast<std::uint64_t>(id));
                const std::size_t base = static_cast<std::size_t>(idx) * hidden;
                for (std::size_t j = 0; j < hidden; ++j)
                {
                    row[j] = global.output_weight().at(base + j);
                }
                out.f32(static_cast<float>(global.output_bias().at(static_cast<std::size_t>(idx))));
                const auto sparse = lasso_truncate(row, global.truncation_gamma(row));
                for (std::size_t j = 0; j < hidden; ++j)
                {
                    truncated[j] = static_cast<float>(sparse.truncated[j]);
                }
                encode_sparse(out, truncated);
            }
            return out.take();
        }

        std::vector<std::int64_t> decode_candidate_ids(std::span<const std::uint8_t> payload)
        {
            ByteReader in(payload);
            const std::uint32_t count = in.u32();
            std::vector<std::int64_t> ids;
            ids.reserve(count);
            for (std::uint32_t i = 0; i < count; ++i)
            {
                ids.push_back(static_cast<std::int64_t>(in.u64()));
                in.f32();          // bias
                decode_sparse(in); // row
            }
            in.expect_exhausted();
            return ids;
        }

        Bytes encode_item_list(std::span<const std::int64_t> items)
        {
            ByteWriter out;
            out.u32(static_cast<std::uint32_t>(items.size()));
            for (std::int64_t id : items)
            {
                out.u64(static_cast<std::uint64_t>(id));
            }
            return out.take();
        }

        std::vector<std::int64_t> decode_item_list(std::span<const std::uint8_t> payload)
        {
            ByteReader in(payload);
            const std::uint32_t count = in.u32();
            std::vector<std::int64_t> items;
            items.reserve(count);
            for (std::uint32_t i = 0; i < count; ++i)
            {
                items.push_back(static_cast<std::int64_t>(in.u64()));
            }
            in.expect_exhausted();
            return items;
        }

        std::vector<float> to_f32(std::span<const double> v)
        {
            std::vector<float> out(v.size());
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                out[i] = static_cast<float>(v[i]);
            }
            return out;
        }

        std::vector<double> to_f64(std::span<const float> v)
        {
            std::vector<double> out(v.size());
            for (std::size_t i = 0; i < v.size(); ++i)
            {
                out[i] = static_cast<double>(v[i]);
            }
            return out;
        }
    }

    SimulationReport run_simulation(const DatasetSplit& split, Mode mode,
                                    const SimulationConfig& cfg, std::uint64_t seed,
                                    MessageLog* log_out)
    {
        const Vocab vocab = Vocab::from_split(split);
        if (vocab.size() == 0)
        {
            throw std::invalid_argument("run_simulation: empty training vocabulary");
        }

        ModelConfig model_cfg = cfg.model;
        model_cfg.mode = mode;
        model_cfg.vocab_size = vocab.size();
        TrainConfig train_cfg = cfg.train;
        train_cfg.seed = seed ^ 0xa5a5a5a5ULL;

        // cloud: train the global model on the pre-deadline stage
        RecModel cloud_model(model_cfg, seed);
        train_global(cloud_model, to_indices(split.global_train, vocab), train_cfg);
        const Bytes model_bytes = encode_model(cloud_model);

        MessageLog local_log(mode);
        MessageLog& log = log_out ? *log_out : local_log;

        CandidateProvider candidates(split.transactional, cfg.candidates);

        SimulationReport report;
        report.mode = mode;
        report.seed = seed;

        std::vector<RankedPrediction> all;
        for (const auto& [user, test_sessions] : split.test)
        {
            // one model download per device per simulation
            const Bytes downloaded =
                log.deliver({MessageKind::GlobalModel, kCloudNode, user, model_bytes});
            RecModel device_model = decode_model(downloaded);
            report.devices += 1;

            if (const auto it = split.personal_train.find(user); it != split.personal_train.end())
            {
                device_model =
                    fine_tune(device_model, to_indices(it->second, vocab), cfg.fine_tune);
            }

            std::map<std::int64_t, std::vector<std::int64_t>> pulled_by_day;
            std::vector<RankedPrediction> mine;
            for (const Session& session : test_sessions)
            {
                GruState state = device_model.initial_state();
                for (std::size_t t = 0; t + 1 < session.clicks.size(); ++t)
                {
                    device_model.advance(state, vocab.at(session.clicks[t].item_id));
                    const std::int64_t now = session.clicks[t].timestamp;
                    const std::int64_t day = day_of(now);

                    RankedPrediction pred;
                    pred.truth = session.clicks[t + 1].item_id;
                    if (mode == Mode::Pull)
                    {
                        auto pulled = pulled_by_day.find(day);
                        if (pulled == pulled_by_day.end())
                        {
                            const CandidateSet& set = candidates.for_user_day(user, day);
                            const Bytes payload = log.deliver(
                                {MessageKind::CandidateSetItems, kCloudNode, user,
                                 encode_candidate_items(cloud_model, vocab, set)});
                            pulled = pulled_by_day
                                         .emplace(day, decode_candidate_ids(payload))
                                         .first;
                        }
                        const auto& ids = pulled->second;
                        if (!ids.empty())
                        {
                            IndexSeq idx;
                            idx.reserve(ids.size());
                            for (std::int64_t id : ids)
                            {
                                idx.push_back(vocab.at(id));
                            }
                            const auto rep = device_model.user_representation(state);
                            const auto scores = device_model.scores_from(rep, idx);
                            pred.ranking = rank_top_k(scores, ids, cfg.top_k);
                        }
                    }
                    else
                    {
                        // device -> cloud: the truncated user embedding only
                        const auto rep = device_model.user_representation(state);
                        const Bytes uploaded = log.deliver({MessageKind::UserEmbedding, user,
                                                            kCloudNode,
                                                            encode_sparse(to_f32(rep))});
                        // cloud scores it against the user's candidate set
                        const std::vector<double> cloud_rep = to_f64(decode_sparse(uploaded));
                        const CandidateSet& set = candidates.for_user_day(user, day);
                        std::vector<std::int64_t> ids;
                        IndexSeq idx;
                        for (std::int64_t id : set.items)
                        {
                            if (const auto found = vocab.find(id))
                            {
                                ids.push_back(id);
                                idx.push_back(*found);
                            }
                        }
                        std::vector<std::int64_t> top;
                        if (!ids.empty())
                        {
                            const auto scores = cloud_model.scores_from(cloud_rep, idx);
                            top = rank_top_k(scores, ids, cfg.top_k);
                        }
                        const Bytes list = log.deliver({MessageKind::RecommendationList,
                                                        kCloudNode, user,
                                                        encode_item_list(top)});
                        pred.ranking = decode_item_list(list);
                    }
                    mine.push_back(std::move(pred));
                }
            }
            if (!mine.empty())
            {
                UserMetrics um;
                um.recall = recall_at_k(mine, cfg.top_k);
                um.mrr = mrr_at_k(mine, cfg.top_k);
                um.instances = mine.size();
                report.per_user.emplace(user, um);
                all.insert(all.end(), mine.begin(), mine.end());
            }
        }

        if (!all.empty())
        {
            report.recall = recall_at_k(all, cfg.top_k);
            report.mrr = mrr_at_k(all, cfg.top_k);
            report.instances = all.size();
        }
        report.uploaded_bytes = log.uploaded_bytes();
        report.downloaded_bytes = log.downloaded_bytes();
        report.by_kind = log.by_kind();
        return report;
    }

    std::string report_to_json(const SimulationReport& report, const SimulationConfig& cfg)
    {
        nlohmann::json j;
        j["mode"] = mode_name(report.mode);
        j["seed"] = report.seed;
        j["devices"] = report.devices;
        j["instances"] = report.instances;
        j["recall_at_20"] = report.recall;
        j["mrr_at_20"] = report.mrr;
        j["uploaded_bytes"] = report.uploaded_bytes;
        j["downloaded_bytes"] = report.downloaded_bytes;
        for (const auto& [kind, totals] : report.by_kind)
        {
            j["by_kind"][kind_name(kind)] = {{"count", totals.count}, {"bytes", totals.bytes}};
        }
        for (const auto& [user, um] : report.per_user)
        {
            j["per_user"][std::to_string(user)] = {
                {"recall_at_20", um.recall},
                {"mrr_at_20", um.mrr},
                {"instances", um.instances},
            };
        }
        j["config"] = {
            {"embedding_dim", cfg.model.embedding_dim},
            {"gru_layers", cfg.model.gru_layers},
            {"hidden_dim", cfg.model.hidden_dim},
            {"batch_size", cfg.model.batch_size},
            {"lasso_gamma", cfg.model.lasso.gamma},
            {"lasso_lambda", cfg.model.lasso.lambda},
            {"lasso_target_sparsity",
             cfg.model.lasso.target_sparsity ? nlohmann::json(*cfg.model.lasso.target_sparsity)
                                             : nlohmann::json(nullptr)},
            {"prune_embedding", cfg.model.prune_embedding},
            {"epochs", cfg.train.epochs},
            {"learning_rate", cfg.train.learning_rate},
            {"fine_tune_passes", cfg.fine_tune.passes},
            {"update_batch_size", cfg.fine_tune.update_batch_size},
            {"candidate_kind",
             cfg.candidates.kind == CandidateSelection::Kind::Proportion ? "proportion"
                                                                         : "threshold"},
            {"candidate_value", cfg.candidates.value},
            {"top_k", cfg.top_k},
        };
        if (cfg.train.pruning)
        {
            j["config"]["pruning"] = {
                {"initial_sparsity", cfg.train.pruning->initial_sparsity},
                {"final_sparsity", cfg.train.pruning->final_sparsity},
                {"start_epoch", cfg.train.pruning->start_epoch},
                {"epochs_per_step", cfg.train.pruning->epochs_per_step},
                {"steps", cfg.train.pruning->steps},
            };
        }
        return j.dump(2) + "\n";
    }
}
