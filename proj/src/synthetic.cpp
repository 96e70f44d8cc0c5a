#include "ccrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ccrec/rng.hpp"

namespace ccrec
{
    void SyntheticConfig::validate() const
    {
        if (users < 1 || items < 1 || categories < 1 || items < categories)
        {
            throw std::invalid_argument("SyntheticConfig: need users, items >= categories >= 1");
        }
        if (!(alpha >= 0.0 && alpha <= 1.0))
        {
            throw std::invalid_argument("SyntheticConfig: alpha must lie in [0, 1]");
        }
        if (t_device_day < 1 || t_test_day <= t_device_day ||
            static_cast<std::size_t>(t_test_day) >= days)
        {
            throw std::invalid_argument("SyntheticConfig: need 1 <= t_device_day < t_test_day < days");
        }
        if (min_session_len < 2 || max_session_len < min_session_len)
        {
            throw std::invalid_argument("SyntheticConfig: bad session length range");
        }
        if (stay_prob + succ_prob > 1.0 || preferred_item_prob + popular_item_prob > 1.0)
        {
            throw std::invalid_argument("SyntheticConfig: probabilities exceed 1");
        }
        if (sessions_per_day < 1 || sessions_per_day > 3)
        {
            throw std::invalid_argument("SyntheticConfig: sessions_per_day must be 1..3");
        }
        if (favorite_categories < 1 || favorite_categories > categories)
        {
            throw std::invalid_argument("SyntheticConfig: bad favorite_categories");
        }
    }

    namespace
    {
        struct UserProfile
        {
            std::vector<std::size_t> favorites;           // distinct categories
            std::vector<std::size_t> private_successor;   // category -> category
            std::vector<std::int64_t> preferred_item;     // category -> item id
            bool is_new = false;
        };
    }

    std::vector<InteractionRecord> generate_synthetic(const SyntheticConfig& cfg,
                                                      std::uint64_t seed)
    {
        cfg.validate();
        Rng rng(seed);

        // block category assignment: category c owns a contiguous id range
        const std::size_t per_cat = cfg.items / cfg.categories;
        const auto cat_begin = [&](std::size_t c) { return c * per_cat; };
        const auto cat_size = [&](std::size_t c) {
            return (c + 1 == cfg.categories) ? cfg.items - c * per_cat : per_cat;
        };
        const auto category_of = [&](std::int64_t item) {
            const auto c = static_cast<std::size_t>(item) / per_cat;
            return std::min(c, cfg.categories - 1);
        };

        std::vector<std::int64_t> popular(cfg.categories);
        for (std::size_t c = 0; c < cfg.categories; ++c)
        {
            popular[c] = static_cast<std::int64_t>(cat_begin(c) + rng.index(cat_size(c)));
        }

        const auto new_user_start =
            static_cast<std::size_t>(std::llround((1.0 - cfg.new_user_fraction) *
                                                  static_cast<double>(cfg.users)));
        std::vector<UserProfile> profiles(cfg.users);
        for (std::size_t u = 0; u < cfg.users; ++u)
        {
            UserProfile& p = profiles[u];
            p.is_new = u >= new_user_start;
            while (p.favorites.size() < cfg.favorite_categories)
            {
                const std::size_t c = rng.index(cfg.categories);
                if (std::find(p.favorites.begin(), p.favorites.end(), c) == p.favorites.end())
                {
                    p.favorites.push_back(c);
                }
            }
            p.private_successor.resize(cfg.categories);
            for (std::size_t c = 0; c < cfg.categories; ++c)
            {
                const auto it = std::find(p.favorites.begin(), p.favorites.end(), c);
                const std::size_t slot =
                    (it == p.favorites.end())
                        ? c % p.favorites.size()
                        : (static_cast<std::size_t>(it - p.favorites.begin()) + 1) %
                              p.favorites.size();
                p.private_successor[c] = p.favorites[slot];
            }
            p.preferred_item.resize(cfg.categories);
            for (std::size_t c = 0; c < cfg.categories; ++c)
            {
                p.preferred_item[c] = static_cast<std::int64_t>(cat_begin(c) +
                                                                rng.index(cat_size(c)));
            }
        }

        const auto next_category = [&](Rng& r, const UserProfile& p, std::size_t current) {
            if (r.chance(cfg.alpha))
            {
                return p.private_successor[current];
            }
            const double roll = r.uniform();
            if (roll < cfg.stay_prob)
            {
                return current;
            }
            if (roll < cfg.stay_prob + cfg.succ_prob)
            {
                return (current + 1) % cfg.categories;
            }
            return r.index(cfg.categories);
        };

        const auto pick_item = [&](Rng& r, const UserProfile& p, std::size_t cat) {
            const double roll = r.uniform();
            if (roll < cfg.preferred_item_prob)
            {
                return p.preferred_item[cat];
            }
            if (roll < cfg.preferred_item_prob + cfg.popular_item_prob)
            {
                return popular[cat];
            }
            return static_cast<std::int64_t>(cat_begin(cat) + r.index(cat_size(cat)));
        };

        std::vector<InteractionRecord> out;
        for (std::size_t u = 0; u < cfg.users; ++u)
        {
            Rng user_rng = rng.fork();
            const UserProfile& p = profiles[u];
            const auto uid = static_cast<std::int64_t>(u);
            const std::size_t first_day =
                p.is_new ? static_cast<std::size_t>(cfg.t_device_day) : 0;
            for (std::size_t day = first_day; day < cfg.days; ++day)
            {
                if (!user_rng.chance(cfg.daily_activity))
                {
                    continue;
                }
                for (std::size_t s = 0; s < cfg.sessions_per_day; ++s)
                {
                    // sessions sit in slots hours apart, so the idle threshold
                    // always separates them
                    std::int64_t ts = static_cast<std::int64_t>(day) * 86400 +
                                      static_cast<std::int64_t>(s) * 28800 + 3600 +
                                      static_cast<std::int64_t>(user_rng.below(7200));
                    const std::size_t len =
                        cfg.min_session_len +
                        user_rng.index(cfg.max_session_len - cfg.min_session_len + 1);
                    std::size_t cat = p.favorites[user_rng.index(p.favorites.size())];
                    std::vector<InteractionRecord> session;
                    for (std::size_t k = 0; k < len; ++k)
                    {
                        const std::int64_t item = pick_item(user_rng, p, cat);
                        session.push_back({uid, item,
                                           static_cast<std::int64_t>(category_of(item)),
                                           Behavior::Click, ts});
                        ts += 20 + static_cast<std::int64_t>(user_rng.below(280));
                        cat = next_category(user_rng, p, cat);
                    }
                    out.insert(out.end(), session.begin(), session.end());
                    if (user_rng.chance(cfg.purchase_prob))
                    {
                        // 1-3 purchases drawn from this session's clicks,
                        // biased toward the pinned preferred items
                        const std::size_t buys = 1 + (user_rng.chance(0.5) ? 1 : 0) +
                                                 (user_rng.chance(0.3) ? 1 : 0);
                        for (std::size_t b = 0; b < buys; ++b)
                        {
                            const InteractionRecord* chosen = nullptr;
                            if (user_rng.chance(0.8))
                            {
                                std::vector<const InteractionRecord*> preferred;
                                for (const auto& r : session)
                                {
                                    const auto c = category_of(r.item_id);
                                    if (r.item_id == p.preferred_item[c])
                                    {
                                        preferred.push_back(&r);
                                    }
                                }
                                if (!preferred.empty())
                                {
                                    chosen = preferred[user_rng.index(preferred.size())];
                                }
                            }
                            if (!chosen)
                            {
                                chosen = &session[user_rng.index(session.size())];
                            }
                            out.push_back({uid, chosen->item_id, chosen->category_id,
                                           Behavior::Purchase, ts});
                            ts += 20 + static_cast<std::int64_t>(user_rng.below(40));
                        }
                    }
                    if (user_rng.chance(cfg.cart_prob))
                    {
                        const auto& r = session[user_rng.index(session.size())];
                        out.push_back({uid, r.item_id, r.category_id, Behavior::Cart, ts});
                        ts += 20;
                    }
                    if (user_rng.chance(cfg.favorite_prob))
                    {
                        const auto& r = session[user_rng.index(session.size())];
                        out.push_back({uid, r.item_id, r.category_id, Behavior::Favorite, ts});
                    }
                }
            }
        }

        std::stable_sort(out.begin(), out.end(),
                         [](const InteractionRecord& a, const InteractionRecord& b) {
                             if (a.timestamp != b.timestamp)
                             {
                                 return a.timestamp < b.timestamp;
                             }
                             return a.user_id < b.user_id;
                         });
        return out;
    }
}
