#include "ccrec/reports.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

namespace ccrec
{
    std::string train_report_to_json(const TrainReport& report, bool stable)
    {
        nlohmann::json epochs = nlohmann::json::array();
        for (const EpochStats& e : report.epochs)
        {
            epochs.push_back({
                {"epoch", e.epoch},
                {"mean_loss", e.mean_loss},
                {"target_sparsity", e.target_sparsity},
                {"achieved_sparsity", e.achieved_sparsity},
                {"prediction_steps", e.prediction_steps},
                {"seconds", stable ? 0.0 : e.seconds},
            });
        }
        return nlohmann::json{{"epochs", epochs}}.dump(2) + "\n";
    }

    std::string matrix_to_csv(std::span<const ApproachMetrics> rows)
    {
        std::ostringstream out;
        out << "approach,metric,value\n";
        out.precision(17);
        for (const ApproachMetrics& row : rows)
        {
            out << approach_name(row.approach) << ",recall_at_20," << row.recall << '\n';
            out << approach_name(row.approach) << ",mrr_at_20," << row.mrr << '\n';
            out << approach_name(row.approach) << ",instances," << row.instances << '\n';
        }
        return out.str();
    }

    std::string matrix_to_json(std::span<const ApproachMetrics> rows, std::uint64_t seed,
                               const std::string& data_hash)
    {
        nlohmann::json j;
        j["seed"] = seed;
        j["data_fnv1a64"] = data_hash;
        for (const ApproachMetrics& row : rows)
        {
            nlohmann::json entry;
            entry["recall_at_20"] = row.recall;
            entry["mrr_at_20"] = row.mrr;
            entry["instances"] = row.instances;
            for (const auto& [user, um] : row.per_user)
            {
                entry["per_user"][std::to_string(user)] = {
                    {"recall_at_20", um.recall},
                    {"mrr_at_20", um.mrr},
                    {"instances", um.instances},
                };
            }
            j["approaches"][approach_name(row.approach)] = std::move(entry);
        }
        return j.dump(2) + "\n";
    }
}
