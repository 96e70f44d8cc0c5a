#include "ccrec/candidates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ccrec
{
    namespace
    {
        std::optional<std::size_t> find_sorted(const std::vector<std::int64_t>& ids,
                                               std::int64_t id)
        {
            const auto it = std::lower_bound(ids.begin(), ids.end(), id);
            if (it == ids.end() || *it != id)
            {
                return std::nullopt;
            }
            return static_cast<std::size_t>(it - ids.begin());
        }

        std::size_t intersection_size(const std::vector<std::int32_t>& a,
                                      const std::vector<std::int32_t>& b)
        {
            std::size_t count = 0;
            auto ia = a.begin();
            auto ib = b.begin();
            while (ia != a.end() && ib != b.end())
            {
                if (*ia < *ib)
                {
                    ++ia;
                }
                else if (*ib < *ia)
                {
                    ++ib;
                }
                else
                {
                    ++count;
                    ++ia;
                    ++ib;
                }
            }
            return count;
        }
    }

    std::optional<std::size_t> InteractionMatrix::find_user(std::int64_t id) const
    {
        return find_sorted(user_ids, id);
    }

    std::optional<std::size_t> InteractionMatrix::find_item(std::int64_t id) const
    {
        return find_sorted(item_ids, id);
    }

    bool InteractionMatrix::purchased(std::size_t user, std::size_t item) const
    {
        const auto& items = user_items[user];
        return std::binary_search(items.begin(), items.end(), static_cast<std::int32_t>(item));
    }

    InteractionMatrix build_matrix(std::span<const InteractionRecord> purchases)
    {
        std::set<std::int64_t> users;
        std::set<std::int64_t> items;
        for (const auto& r : purchases)
        {
            if (r.behavior != Behavior::Purchase)
            {
                throw std::invalid_argument(
                    "build_matrix: the interactive matrix is built from purchase records only");
            }
            users.insert(r.user_id);
            items.insert(r.item_id);
        }
        InteractionMatrix m;
        m.user_ids.assign(users.begin(), users.end());
        m.item_ids.assign(items.begin(), items.end());
        m.item_users.resize(m.item_ids.size());
        m.user_items.resize(m.user_ids.size());
        std::set<std::pair<std::int32_t, std::int32_t>> seen;
        for (const auto& r : purchases)
        {
            const auto u = static_cast<std::int32_t>(*m.find_user(r.user_id));
            const auto i = static_cast<std::int32_t>(*m.find_item(r.item_id));
            if (seen.insert({u, i}).second)
            {
                m.item_users[static_cast<std::size_t>(i)].push_back(u);
                m.user_items[static_cast<std::size_t>(u)].push_back(i);
            }
        }
        for (auto& col : m.item_users)
        {
            std::sort(col.begin(), col.end());
        }
        for (auto& row : m.user_items)
        {
            std::sort(row.begin(), row.end());
        }
        return m;
    }

    double item_similarity(const InteractionMatrix& m, std::size_t item_a, std::size_t item_b)
    {
        if (item_a >= m.item_count() || item_b >= m.item_count())
        {
            throw std::out_of_range("item_similarity: item index out of range");
        }
        const auto& a = m.item_users[item_a];
        const auto& b = m.item_users[item_b];
        if (a.empty() || b.empty())
        {
            return 0.0; // an unpurchased item carries no similarity evidence
        }
        const std::size_t common = intersection_size(a, b);
        return static_cast<double>(common) /
               (std::sqrt(static_cast<double>(a.size())) * std::sqrt(static_cast<double>(b.size())));
    }

    namespace
    {
        // Neighbor set for an item: all columns, or the k most similar
        // (similarity descending, index ascending on ties).
        std::vector<std::size_t> neighbor_items(const InteractionMatrix& m, std::size_t item,
                                                std::ptrdiff_t k_neighbors)
        {
            std::vector<std::size_t> all(m.item_count());
            std::iota(all.begin(), all.end(), 0);
            if (k_neighbors < 0 || static_cast<std::size_t>(k_neighbors) >= m.item_count())
            {
                return all;
            }
            std::vector<double> sims(m.item_count());
            for (std::size_t b = 0; b < m.item_count(); ++b)
            {
                sims[b] = item_similarity(m, item, b);
            }
            std::stable_sort(all.begin(), all.end(), [&](std::size_t x, std::size_t y) {
                return sims[x] > sims[y];
            });
            all.resize(static_cast<std::size_t>(k_neighbors));
            std::sort(all.begin(), all.end());
            return all;
        }
    }

    double predict_click_prob(const InteractionMatrix& m, std::size_t user, std::size_t item,
                              std::ptrdiff_t k_neighbors)
    {
        if (user >= m.user_count())
        {
            throw std::out_of_range("predict_click_prob: user index out of range");
        }
        double numerator = 0;
        double denominator = 0;
        for (std::size_t b : neighbor_items(m, item, k_neighbors))
        {
            const double s = item_similarity(m, item, b);
            denominator += s; // binary columns make every similarity non-negative
            if (m.purchased(user, b))
            {
                numerator += s;
            }
        }
        return denominator == 0.0 ? 0.0 : numerator / denominator;
    }

    void CandidateSelection::validate() const
    {
        if (kind == Kind::Threshold)
        {
            if (!(value >= 0.0 && value <= 1.0))
            {
                throw std::invalid_argument("CandidateSelection: threshold must lie in [0, 1]");
            }
        }
        else if (!(value > 0.0 && value <= 1.0))
        {
            throw std::invalid_argument("CandidateSelection: proportion must lie in (0, 1]");
        }
    }

    SimilarityIndex build_similarity(const InteractionMatrix& m)
    {
        const std::size_t n = m.item_count();
        SimilarityIndex index;
        index.sim.assign(n, std::vector<double>(n, 0.0));
        for (std::size_t a = 0; a < n; ++a)
        {
            for (std::size_t b = a; b < n; ++b)
            {
                const double s = item_similarity(m, a, b);
                index.sim[a][b] = s;
                index.sim[b][a] = s;
            }
        }
        index.row_sum.assign(n, 0.0);
        for (std::size_t a = 0; a < n; ++a)
        {
            double acc = 0;
            for (std::size_t b = 0; b < n; ++b)
            {
                acc += index.sim[a][b]; // ascending b, matching the naive sum order
            }
            index.row_sum[a] = acc;
        }
        return index;
    }

    CandidateSet candidate_set(const InteractionMatrix& m, const SimilarityIndex& index,
                               std::int64_t user_id, const CandidateSelection& sel)
    {
        sel.validate();
        const auto user = m.find_user(user_id);
        if (!user)
        {
            throw std::out_of_range("candidate_set: unknown user id " + std::to_string(user_id));
        }
        const std::size_t n = m.item_count();
        std::vector<double> p(n, 0.0);
        const auto& owned = m.user_items[*user];
        if (sel.k_neighbors < 0 || static_cast<std::size_t>(sel.k_neighbors) >= n)
        {
            for (std::size_t item = 0; item < n; ++item)
            {
                double numerator = 0;
                for (std::int32_t b : owned)
                {
                    numerator += index.sim[item][static_cast<std::size_t>(b)];
                }
                p[item] = index.row_sum[item] == 0.0 ? 0.0 : numerator / index.row_sum[item];
            }
        }
        else
        {
            for (std::size_t item = 0; item < n; ++item)
            {
                double numerator = 0;
                double denominator = 0;
                for (std::size_t b : neighbor_items(m, item, sel.k_neighbors))
                {
                    const double s = index.sim[item][b];
                    denominator += s;
                    if (m.purchased(*user, b))
                    {
                        numerator += s;
                    }
                }
                p[item] = denominator == 0.0 ? 0.0 : numerator / denominator;
            }
        }

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (p[a] != p[b])
            {
                return p[a] > p[b];
            }
            return m.item_ids[a] < m.item_ids[b];
        });

        CandidateSet out;
        out.user_id = user_id;
        out.params = sel;
        if (sel.kind == CandidateSelection::Kind::Threshold)
        {
            for (std::size_t idx : order)
            {
                if (p[idx] > sel.value)
                {
                    out.items.push_back(m.item_ids[idx]);
                    out.scores.push_back(p[idx]);
                }
            }
        }
        else
        {
            const auto take = static_cast<std::size_t>(
                std::ceil(sel.value * static_cast<double>(n)));
            for (std::size_t k = 0; k < std::min(take, n); ++k)
            {
                out.items.push_back(m.item_ids[order[k]]);
                out.scores.push_back(p[order[k]]);
            }
        }
        return out;
    }

    CandidateSet candidate_set(const InteractionMatrix& m, std::int64_t user_id,
                               const CandidateSelection& sel)
    {
        return candidate_set(m, build_similarity(m), user_id, sel);
    }
}
