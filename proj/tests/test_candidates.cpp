#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ccrec/candidates.hpp"
#include "ccrec/rng.hpp"

using namespace ccrec;

namespace
{
    InteractionRecord buy(std::int64_t user, std::int64_t item)
    {
        return {user, item, 0, Behavior::Purchase, 0};
    }

    // the worked 2x2 instance: purchases {(1,1),(2,1),(2,2)}
    InteractionMatrix worked_example()
    {
        return build_matrix(std::vector<InteractionRecord>{buy(1, 1), buy(2, 1), buy(2, 2)});
    }

    // independent reference: dense binary matrix, direct formula evaluation
    struct NaiveCf
    {
        std::vector<std::vector<int>> x; // users x items

        double sim(std::size_t m, std::size_t b) const
        {
            double dot = 0;
            double nm = 0;
            double nb = 0;
            for (std::size_t k = 0; k < x.size(); ++k)
            {
                dot += x[k][m] * x[k][b];
                nm += x[k][m];
                nb += x[k][b];
            }
            if (nm == 0 || nb == 0)
            {
                return 0.0;
            }
            return dot / (std::sqrt(nm) * std::sqrt(nb));
        }

        double p(std::size_t user, std::size_t m) const
        {
            double numerator = 0;
            double denominator = 0;
            for (std::size_t b = 0; b < x[user].size(); ++b)
            {
                const double s = sim(m, b);
                numerator += s * x[user][b];
                denominator += std::abs(s);
            }
            return denominator == 0 ? 0.0 : numerator / denominator;
        }
    };
}

TEST_CASE("build_matrix")
{
    SUBCASE("duplicates collapse to a binary entry")
    {
        const auto m = build_matrix(std::vector<InteractionRecord>{buy(1, 5), buy(1, 5)});
        CHECK(m.user_count() == 1);
        CHECK(m.item_count() == 1);
        CHECK(m.item_users[0] == std::vector<std::int32_t>{0});
    }
    SUBCASE("empty input gives a 0x0 matrix")
    {
        const auto m = build_matrix({});
        CHECK(m.user_count() == 0);
        CHECK(m.item_count() == 0);
    }
    SUBCASE("the worked example has columns [1,1] and [0,1]")
    {
        const auto m = worked_example();
        REQUIRE(m.item_count() == 2);
        CHECK(m.item_users[0] == std::vector<std::int32_t>{0, 1});
        CHECK(m.item_users[1] == std::vector<std::int32_t>{1});
    }
    SUBCASE("non-purchase records are rejected")
    {
        const std::vector<InteractionRecord> records = {{1, 5, 0, Behavior::Click, 0}};
        CHECK_THROWS_AS(build_matrix(records), std::invalid_argument);
    }
}

TEST_CASE("item_similarity")
{
    const auto m = worked_example();
    CHECK(item_similarity(m, 0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(item_similarity(m, 1, 0) == item_similarity(m, 0, 1));
    CHECK(item_similarity(m, 0, 0) == doctest::Approx(1.0));

    // orthogonal columns
    const auto m2 = build_matrix(std::vector<InteractionRecord>{buy(1, 1), buy(2, 2)});
    CHECK(item_similarity(m2, 0, 1) == 0.0);
}

TEST_CASE("predict_click_prob")
{
    const auto m = worked_example();

    SUBCASE("frozen worked value sqrt(2) - 1")
    {
        const auto user = *m.find_user(1);
        const auto item = *m.find_item(2);
        CHECK(predict_click_prob(m, user, item) ==
              doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-15));
    }
    SUBCASE("a user who purchased everything scores 1")
    {
        const auto user = *m.find_user(2);
        CHECK(predict_click_prob(m, user, 0) == doctest::Approx(1.0));
        CHECK(predict_click_prob(m, user, 1) == doctest::Approx(1.0));
    }
    SUBCASE("a user with no overlapping purchases scores 0")
    {
        const auto m2 =
            build_matrix(std::vector<InteractionRecord>{buy(1, 1), buy(2, 2), buy(3, 3)});
        const auto user = *m2.find_user(3);
        CHECK(predict_click_prob(m2, user, *m2.find_item(1)) == 0.0);
    }
}

TEST_CASE("candidate_set selection rules")
{
    const auto m = worked_example();

    SUBCASE("threshold 1 gives an empty set (strict inequality)")
    {
        CandidateSelection sel;
        sel.kind = CandidateSelection::Kind::Threshold;
        sel.value = 1.0;
        CHECK(candidate_set(m, 2, sel).items.empty());
    }
    SUBCASE("proportion 1 returns every item sorted by score")
    {
        CandidateSelection sel;
        sel.kind = CandidateSelection::Kind::Proportion;
        sel.value = 1.0;
        const auto set = candidate_set(m, 1, sel);
        REQUIRE(set.items.size() == 2);
        CHECK(set.scores[0] >= set.scores[1]);
    }
    SUBCASE("unknown user")
    {
        CandidateSelection sel;
        CHECK_THROWS_AS(candidate_set(m, 99, sel), std::out_of_range);
    }
    SUBCASE("invalid selection values")
    {
        CandidateSelection sel;
        sel.kind = CandidateSelection::Kind::Proportion;
        sel.value = 0.0;
        CHECK_THROWS_AS(candidate_set(m, 1, sel), std::invalid_argument);
        sel.kind = CandidateSelection::Kind::Threshold;
        sel.value = 1.5;
        CHECK_THROWS_AS(candidate_set(m, 1, sel), std::invalid_argument);
    }
}

TEST_CASE("candidate_set matches the naive reference on random matrices")
{
    Rng rng(2024);
    for (int trial = 0; trial < 60; ++trial)
    {
        const std::size_t users = 2 + rng.index(8);
        const std::size_t items = 2 + rng.index(8);
        NaiveCf naive;
        naive.x.assign(users, std::vector<int>(items, 0));
        std::vector<InteractionRecord> purchases;
        for (std::size_t k = 0; k < users; ++k)
        {
            for (std::size_t i = 0; i < items; ++i)
            {
                if (rng.chance(0.35))
                {
                    naive.x[k][i] = 1;
                    purchases.push_back(buy(static_cast<std::int64_t>(k),
                                            static_cast<std::int64_t>(i)));
                }
            }
        }
        if (purchases.empty())
        {
            continue;
        }
        const auto m = build_matrix(purchases);

        // naive ids are the raw ids of purchased rows/columns only
        for (std::size_t mu = 0; mu < m.user_count(); ++mu)
        {
            const auto raw_user = static_cast<std::size_t>(m.user_ids[mu]);
            for (std::size_t mi = 0; mi < m.item_count(); ++mi)
            {
                const auto raw_item = static_cast<std::size_t>(m.item_ids[mi]);
                CHECK(predict_click_prob(m, mu, mi) ==
                      doctest::Approx(naive.p(raw_user, raw_item)).epsilon(1e-12));
            }
        }

        CandidateSelection sel;
        sel.kind = CandidateSelection::Kind::Proportion;
        sel.value = 0.5;
        const auto index = build_similarity(m);
        for (std::size_t mu = 0; mu < m.user_count(); ++mu)
        {
            const auto set = candidate_set(m, index, m.user_ids[mu], sel);
            // exact equality against scores recomputed naively
            for (std::size_t i = 0; i < set.items.size(); ++i)
            {
                const auto raw_user = static_cast<std::size_t>(m.user_ids[mu]);
                const auto raw_item = static_cast<std::size_t>(set.items[i]);
                CHECK(set.scores[i] == naive.p(raw_user, raw_item));
            }
        }
    }
}

TEST_CASE("candidate threshold monotonicity: raising it never adds items")
{
    Rng rng(7);
    std::vector<InteractionRecord> purchases;
    for (int k = 0; k < 8; ++k)
    {
        for (int i = 0; i < 10; ++i)
        {
            if (rng.chance(0.4))
            {
                purchases.push_back(buy(k, i));
            }
        }
    }
    const auto m = build_matrix(purchases);
    const auto index = build_similarity(m);
    CandidateSelection sel;
    sel.kind = CandidateSelection::Kind::Threshold;
    std::size_t previous = m.item_count() + 1;
    for (double threshold : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0})
    {
        sel.value = threshold;
        const auto set = candidate_set(m, index, m.user_ids[0], sel);
        CHECK(set.items.size() <= previous);
        previous = set.items.size();
    }
}

TEST_CASE("k-nearest restriction reduces to the full formula when k >= item count")
{
    Rng rng(15);
    std::vector<InteractionRecord> purchases;
    for (int k = 0; k < 6; ++k)
    {
        for (int i = 0; i < 7; ++i)
        {
            if (rng.chance(0.5))
            {
                purchases.push_back(buy(k, i));
            }
        }
    }
    const auto m = build_matrix(purchases);
    for (std::size_t u = 0; u < m.user_count(); ++u)
    {
        for (std::size_t i = 0; i < m.item_count(); ++i)
        {
            CHECK(predict_click_prob(m, u, i, static_cast<std::ptrdiff_t>(m.item_count())) ==
                  predict_click_prob(m, u, i));
            CHECK(predict_click_prob(m, u, i, 1000) == predict_click_prob(m, u, i));
        }
    }

    // restricted sums only see the chosen neighbors
    CandidateSelection full;
    full.value = 1.0;
    CandidateSelection knn = full;
    knn.k_neighbors = 2;
    const auto index = build_similarity(m);
    const auto a = candidate_set(m, index, m.user_ids[0], full);
    const auto b = candidate_set(m, index, m.user_ids[0], knn);
    CHECK(a.items.size() == b.items.size()); // same universe, possibly different order
}
