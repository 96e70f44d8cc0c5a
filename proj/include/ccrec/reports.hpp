#pragma once

// JSON/CSV emission for training reports and the experiment matrix.

#include <span>
#include <string>

#include "ccrec/experiment.hpp"
#include "ccrec/model.hpp"

namespace ccrec
{
    // One record per epoch: epoch, loss, sparsity, wall time. The stable
    // variant zeroes timing fields so output hashes stay reproducible.
    std::string train_report_to_json(const TrainReport& report, bool stable = false);

    // Rows `approach,metric,value` (recall_at_20 / mrr_at_20 / instances).
    std::string matrix_to_csv(std::span<const ApproachMetrics> rows);

    std::string matrix_to_json(std::span<const ApproachMetrics> rows, std::uint64_t seed,
                               const std::string& data_hash);
}
