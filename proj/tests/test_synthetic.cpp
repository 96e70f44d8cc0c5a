#include <doctest.h>

#include <map>
#include <set>
#include <sstream>

#include "ccrec/data.hpp"
#include "ccrec/synthetic.hpp"

using namespace ccrec;

namespace
{
    SyntheticConfig small_config()
    {
        SyntheticConfig cfg;
        cfg.users = 30;
        cfg.items = 120;
        cfg.categories = 12;
        return cfg;
    }
}

TEST_CASE("generation is deterministic in the seed")
{
    const SyntheticConfig cfg = small_config();
    const auto a = generate_synthetic(cfg, 42);
    const auto b = generate_synthetic(cfg, 42);
    CHECK(a == b);
    const auto c = generate_synthetic(cfg, 43);
    CHECK(a != c);

    std::ostringstream csv_a;
    std::ostringstream csv_b;
    write_interactions(csv_a, a);
    write_interactions(csv_b, b);
    CHECK(csv_a.str() == csv_b.str());
}

TEST_CASE("generated output passes pipeline validation unchanged")
{
    const SyntheticConfig cfg = small_config();
    const auto records = generate_synthetic(cfg, 7);
    REQUIRE(!records.empty());

    // CSV round trip parses cleanly
    std::ostringstream csv;
    write_interactions(csv, records);
    std::istringstream in(csv.str());
    const auto parsed = parse_interactions(in);
    CHECK(parsed == records);

    // partitions into non-empty stages with sane counts
    const PartitionConfig pc = cfg.partition();
    const auto split = filter_dataset(partition_temporal(records, pc), pc);
    CHECK(split.global_clicks() > 0);
    CHECK(split.personal_clicks() > 0);
    CHECK(split.test_clicks() > 0);
    CHECK(!split.transactional.empty());

    std::uint64_t clicks = 0;
    for (const auto& r : records)
    {
        clicks += (r.behavior == Behavior::Click);
    }
    CHECK(split.click_count() + split.filtered_clicks == clicks);
}

TEST_CASE("timestamps are sorted and sessions respect the idle threshold")
{
    const auto records = generate_synthetic(small_config(), 11);
    for (std::size_t i = 1; i < records.size(); ++i)
    {
        CHECK(records[i].timestamp >= records[i - 1].timestamp);
    }

    // reconstructed per-user click streams split exactly at generator session
    // boundaries: every within-session gap stays at or below the threshold
    std::map<std::int64_t, std::vector<InteractionRecord>> by_user;
    for (const auto& r : records)
    {
        if (r.behavior == Behavior::Click)
        {
            by_user[r.user_id].push_back(r);
        }
    }
    for (auto& [user, clicks] : by_user)
    {
        const auto sessions = sessionize(std::move(clicks), 706);
        for (const Session& s : sessions)
        {
            CHECK(s.clicks.size() >= small_config().min_session_len);
        }
    }
}

TEST_CASE("purchases are drawn from clicked items")
{
    const auto records = generate_synthetic(small_config(), 23);
    std::map<std::int64_t, std::set<std::int64_t>> clicked;
    for (const auto& r : records)
    {
        if (r.behavior == Behavior::Click)
        {
            clicked[r.user_id].insert(r.item_id);
        }
    }
    std::size_t transactional = 0;
    for (const auto& r : records)
    {
        if (r.transactional())
        {
            ++transactional;
            CHECK(clicked[r.user_id].contains(r.item_id));
        }
    }
    CHECK(transactional > 0);
}

TEST_CASE("planted cohorts are recovered by the quantile split")
{
    SyntheticConfig cfg = small_config();
    cfg.users = 40;
    cfg.new_user_fraction = 0.1;
    const auto records = generate_synthetic(cfg, 3);

    // new users only ever act after t_device
    std::map<std::int64_t, std::int64_t> first_seen;
    for (const auto& r : records)
    {
        if (!first_seen.contains(r.user_id))
        {
            first_seen[r.user_id] = r.timestamp;
        }
    }
    std::set<std::int64_t> planted_new;
    for (std::int64_t u = 36; u < 40; ++u)
    {
        planted_new.insert(u);
    }
    for (const auto& [user, ts] : first_seen)
    {
        if (planted_new.contains(user))
        {
            CHECK(ts >= cfg.t_device());
        }
    }

    const auto [old_users, new_users] = split_users(records, 0.9);
    CHECK(new_users == planted_new);
}

TEST_CASE("preferred items dominate their user's in-category clicks")
{
    const SyntheticConfig cfg = small_config();
    const auto records = generate_synthetic(cfg, 5);
    // for each (user, category) find the most clicked item and its share
    std::map<std::pair<std::int64_t, std::int64_t>, std::map<std::int64_t, std::size_t>> counts;
    for (const auto& r : records)
    {
        if (r.behavior == Behavior::Click)
        {
            counts[{r.user_id, r.category_id}][r.item_id] += 1;
        }
    }
    std::size_t dominated = 0;
    std::size_t considered = 0;
    for (const auto& [key, items] : counts)
    {
        std::size_t total = 0;
        std::size_t best = 0;
        for (const auto& [item, n] : items)
        {
            total += n;
            best = std::max(best, n);
        }
        if (total >= 20)
        {
            ++considered;
            // preferred_item_prob 0.5 plus popularity overlap: expect a clear mode
            if (static_cast<double>(best) / static_cast<double>(total) > 0.35)
            {
                ++dominated;
            }
        }
    }
    REQUIRE(considered > 0);
    CHECK(static_cast<double>(dominated) / static_cast<double>(considered) > 0.8);
}
