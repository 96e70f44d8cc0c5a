#pragma once

// Lasso truncation layer with L1 penalty, and the gradual-pruning schedule
// driving magnitude pruning of masked parameter tensors.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ccrec/autodiff.hpp"

namespace ccrec
{
    struct LassoConfig
    {
        double gamma = 0.0;  // fixed truncation threshold, >= 0
        double lambda = 0.0; // penalty weight, >= 0
        // When set, the threshold is derived per vector as the magnitude
        // quantile that leaves at most (1 - target_sparsity) * dim survivors,
        // instead of the fixed gamma above.
        std::optional<double> target_sparsity;

        bool active() const
        {
            return gamma > 0.0 || lambda > 0.0 || target_sparsity.has_value();
        }
        void validate() const;
    };

    struct LassoResult
    {
        std::vector<double> truncated;
        double penalty = 0; // L1 norm of the truncated vector
    };

    // Zero every coordinate with |v_i| <= gamma; survivors pass unchanged.
    LassoResult lasso_truncate(std::span<const double> v, double gamma);

    // Gradient wrt the raw vector: survivors get upstream + lambda * sign(v_i),
    // truncated coordinates get 0. Subgradients at the kink and at 0 are 0.
    std::vector<double> lasso_backward(std::span<const double> upstream,
                                       std::span<const double> v, double gamma, double lambda);

    // Threshold realizing the config on a concrete vector (fixed gamma, or
    // the per-vector magnitude quantile under target_sparsity).
    double effective_gamma(std::span<const double> v, const LassoConfig& cfg);

    // Cubic sparsity ramp evaluated at epochs t0, t0+dt, ..., t0+n*dt;
    // later epochs clamp to the final level.
    struct PruningSchedule
    {
        double initial_sparsity = 0.0;   // s_i
        double final_sparsity = 0.9;     // s_f
        std::size_t start_epoch = 1;     // t0
        std::size_t epochs_per_step = 1; // dt
        std::size_t steps = 1;           // n

        void validate() const; // 0 <= s_i <= s_f < 1, dt >= 1, n >= 1
        std::size_t end_epoch() const { return start_epoch + steps * epochs_per_step; }
        bool due(std::size_t epoch) const;
    };

    // s(t) = s_f + (s_i - s_f) * (1 - (t - t0)/(n*dt))^3. Throws for t < t0;
    // clamps to s_f beyond the last scheduled epoch.
    double scheduled_sparsity(const PruningSchedule& schedule, std::size_t epoch);

    // Mask the smallest-magnitude active weights of each prunable tensor
    // until its sparsity reaches the target (ties broken by index order).
    // Masks only ever gain zeros; masked values are set to 0.
    void apply_magnitude_prune(std::span<ParamTensor* const> params, double target_sparsity);

    // Masked fraction across all prunable tensors (weighted by size).
    double achieved_sparsity(std::span<const ParamTensor* const> params);
}
