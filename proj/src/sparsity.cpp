#include "ccrec/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ccrec
{
    void LassoConfig::validate() const
    {
        if (!(gamma >= 0.0) || !std::isfinite(gamma))
        {
            throw std::invalid_argument("LassoConfig: gamma must be finite and >= 0");
        }
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
        {
            throw std::invalid_argument("LassoConfig: lambda must be finite and >= 0");
        }
        if (target_sparsity && !(*target_sparsity >= 0.0 && *target_sparsity < 1.0))
        {
            throw std::invalid_argument("LassoConfig: target_sparsity must lie in [0, 1)");
        }
    }

    LassoResult lasso_truncate(std::span<const double> v, double gamma)
    {
        LassoResult out;
        out.truncated.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            if (std::abs(v[i]) > gamma)
            {
                out.truncated[i] = v[i];
                out.penalty += std::abs(v[i]);
            }
        }
        return out;
    }

    std::vector<double> lasso_backward(std::span<const double> upstream,
                                       std::span<const double> v, double gamma, double lambda)
    {
        if (upstream.size() != v.size())
        {
            throw DimensionError("lasso_backward: size mismatch");
        }
        std::vector<double> out(v.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            if (std::abs(v[i]) > gamma)
            {
                const double sign = v[i] > 0 ? 1.0 : (v[i] < 0 ? -1.0 : 0.0);
                out[i] = upstream[i] + lambda * sign;
            }
        }
        return out;
    }

    double effective_gamma(std::span<const double> v, const LassoConfig& cfg)
    {
        if (!cfg.target_sparsity)
        {
            return cfg.gamma;
        }
        const std::size_t d = v.size();
        const auto k = static_cast<std::size_t>(
            std::ceil(*cfg.target_sparsity * static_cast<double>(d)));
        if (k == 0)
        {
            return -1.0; // keep everything, including exact zeros
        }
        std::vector<double> mags(d);
        for (std::size_t i = 0; i < d; ++i)
        {
            mags[i] = std::abs(v[i]);
        }
        std::nth_element(mags.begin(), mags.begin() + (k - 1), mags.end());
        return mags[k - 1]; // coordinates with |v| <= this are zeroed
    }

    void PruningSchedule::validate() const
    {
        if (!(initial_sparsity >= 0.0 && initial_sparsity <= final_sparsity &&
              final_sparsity < 1.0))
        {
            throw std::invalid_argument("PruningSchedule: need 0 <= s_i <= s_f < 1");
        }
        if (epochs_per_step < 1 || steps < 1)
        {
            throw std::invalid_argument("PruningSchedule: need dt >= 1 and n >= 1");
        }
    }

    bool PruningSchedule::due(std::size_t epoch) const
    {
        if (epoch < start_epoch)
        {
            return false;
        }
        if (epoch >= end_epoch())
        {
            return true; // clamped to the final level
        }
        return (epoch - start_epoch) % epochs_per_step == 0;
    }

    double scheduled_sparsity(const PruningSchedule& schedule, std::size_t epoch)
    {
        schedule.validate();
        if (epoch < schedule.start_epoch)
        {
            throw std::domain_error("scheduled_sparsity: pruning has not started at this epoch");
        }
        const std::size_t span = schedule.steps * schedule.epochs_per_step;
        if (epoch >= schedule.start_epoch + span)
        {
            return schedule.final_sparsity;
        }
        const double frac = static_cast<double>(epoch - schedule.start_epoch) /
                            static_cast<double>(span);
        const double rest = 1.0 - frac;
        return schedule.final_sparsity +
               (schedule.initial_sparsity - schedule.final_sparsity) * rest * rest * rest;
    }

    void apply_magnitude_prune(std::span<ParamTensor* const> params, double target_sparsity)
    {
        if (!(target_sparsity >= 0.0 && target_sparsity < 1.0))
        {
            throw std::invalid_argument("apply_magnitude_prune: target must lie in [0, 1)");
        }
        for (ParamTensor* p : params)
        {
            if (!p->prunable || p->size() == 0)
            {
                continue;
            }
            const std::size_t n = p->size();
            const auto want_masked = static_cast<std::size_t>(
                std::ceil(target_sparsity * static_cast<double>(n)));
            const std::size_t have_masked = n - p->active_count();
            if (have_masked >= want_masked)
            {
                continue; // already at or past the target; masks never reopen
            }
            std::vector<std::size_t> active;
            active.reserve(n - have_masked);
            for (std::size_t i = 0; i < n; ++i)
            {
                if (p->mask[i])
                {
                    active.push_back(i);
                }
            }
            std::stable_sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
                return std::abs(p->values[a]) < std::abs(p->values[b]);
            });
            const std::size_t to_mask = want_masked - have_masked;
            for (std::size_t k = 0; k < to_mask; ++k)
            {
                p->mask[active[k]] = 0;
                p->values[active[k]] = 0.0;
            }
        }
    }

    double achieved_sparsity(std::span<const ParamTensor* const> params)
    {
        std::size_t total = 0;
        std::size_t masked = 0;
        for (const ParamTensor* p : params)
        {
            if (!p->prunable)
            {
                continue;
            }
            total += p->size();
            masked += p->size() - p->active_count();
        }
        return total == 0 ? 0.0 : static_cast<double>(masked) / static_cast<double>(total);
    }
}
