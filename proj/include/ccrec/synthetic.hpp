#pragma once

// Synthetic interaction-log generator: items grouped into categories, a
// shared first-order category chain mixed per user with a private chain
// (weight alpha), per-user preferred items inside categories, and purchases
// drawn from clicked items. Creates the shared-vs-personal signal the
// accuracy experiments depend on, at desk scale.

#include <cstdint>
#include <vector>

#include "ccrec/data.hpp"

namespace ccrec
{
    struct SyntheticConfig
    {
        std::size_t users = 200;
        std::size_t items = 500;
        std::size_t categories = 25;
        double alpha = 0.6; // weight of the private category chain

        std::size_t days = 8;
        std::int64_t t_device_day = 5; // personal stage starts here
        std::int64_t t_test_day = 7;   // test stage starts here
        double new_user_fraction = 0.1;

        std::size_t sessions_per_day = 2;
        std::size_t min_session_len = 6;
        std::size_t max_session_len = 14;
        double daily_activity = 0.9;

        // shared category chain
        double stay_prob = 0.5;
        double succ_prob = 0.3; // remainder jumps uniformly

        // item choice inside a category
        double preferred_item_prob = 0.5; // per-user pinned item
        double popular_item_prob = 0.3;   // shared popular item
        std::size_t favorite_categories = 2;

        double purchase_prob = 0.5; // per session
        double cart_prob = 0.08;
        double favorite_prob = 0.05;

        std::int64_t t_device() const { return t_device_day * 86400; }
        std::int64_t t_test() const { return t_test_day * 86400; }

        PartitionConfig partition() const
        {
            PartitionConfig cfg;
            cfg.t_device = t_device();
            cfg.t_test = t_test();
            return cfg;
        }

        void validate() const;
    };

    // Deterministic in (config, seed); records sorted by timestamp.
    std::vector<InteractionRecord> generate_synthetic(const SyntheticConfig& cfg,
                                                      std::uint64_t seed);
}
