#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "ccrec/data.hpp"
#include "ccrec/rng.hpp"
#include "ccrec/synthetic.hpp"

using namespace ccrec;

namespace
{
    InteractionRecord click(std::int64_t user, std::int64_t item, std::int64_t ts)
    {
        return {user, item, item / 10, Behavior::Click, ts};
    }

    // random interaction log for property checks
    std::vector<InteractionRecord> random_records(Rng& rng, std::size_t count)
    {
        std::vector<InteractionRecord> out;
        for (std::size_t i = 0; i < count; ++i)
        {
            InteractionRecord r;
            r.user_id = static_cast<std::int64_t>(rng.index(12));
            r.item_id = static_cast<std::int64_t>(rng.index(40));
            r.category_id = r.item_id / 5;
            r.behavior = rng.chance(0.85) ? Behavior::Click : Behavior::Purchase;
            r.timestamp = static_cast<std::int64_t>(rng.index(500000));
            out.push_back(r);
        }
        return out;
    }
}

TEST_CASE("parse_interactions maps rows to records")
{
    std::istringstream in("1,42,7,pv,100\n1,42,7,buy,100\n");
    const auto records = parse_interactions(in);
    REQUIRE(records.size() == 2);
    CHECK(records[0].user_id == 1);
    CHECK(records[0].item_id == 42);
    CHECK(records[0].category_id == 7);
    CHECK(records[0].behavior == Behavior::Click);
    CHECK(records[0].timestamp == 100);
    CHECK(records[1].behavior == Behavior::Purchase);
}

TEST_CASE("parse_interactions rejects malformed input with line numbers")
{
    SUBCASE("unknown behavior token")
    {
        std::istringstream in("1,42,7,pv,100\n1,42,7,xx,100\n");
        try
        {
            parse_interactions(in);
            FAIL("expected ParseError");
        }
        catch (const ParseError& e)
        {
            CHECK(e.line == 2);
            CHECK(std::string(e.what()).find("xx") != std::string::npos);
        }
    }
    SUBCASE("wrong field count")
    {
        std::istringstream in("1,42,7,pv\n");
        CHECK_THROWS_AS(parse_interactions(in), ParseError);
    }
    SUBCASE("non-numeric id")
    {
        std::istringstream in("a,42,7,pv,100\n");
        CHECK_THROWS_AS(parse_interactions(in), ParseError);
    }
    SUBCASE("negative timestamp")
    {
        std::istringstream in("1,42,7,pv,-5\n");
        CHECK_THROWS_AS(parse_interactions(in), ParseError);
    }
}

TEST_CASE("behavior token table is overridable")
{
    CsvFormat fmt;
    fmt.behavior_tokens = {{"click", Behavior::Click}, {"order", Behavior::Purchase}};
    std::istringstream in("3,9,1,order,50\n");
    const auto records = parse_interactions(in, fmt);
    REQUIRE(records.size() == 1);
    CHECK(records[0].behavior == Behavior::Purchase);

    std::istringstream bad("3,9,1,pv,50\n");
    CHECK_THROWS_AS(parse_interactions(bad, fmt), ParseError);
}

TEST_CASE("sessionize splits on gaps strictly above the threshold")
{
    SUBCASE("gap at the threshold joins, above splits")
    {
        const std::vector<InteractionRecord> clicks = {click(1, 10, 0), click(1, 11, 700),
                                                       click(1, 12, 1500)};
        const auto sessions = sessionize(clicks, 706);
        REQUIRE(sessions.size() == 2);
        CHECK(sessions[0].clicks.size() == 2);
        CHECK(sessions[1].clicks.size() == 1);
        CHECK(sessions[1].clicks[0].timestamp == 1500);
    }
    SUBCASE("boundary gap stays in one session")
    {
        const std::vector<InteractionRecord> clicks = {click(1, 10, 0), click(1, 11, 706)};
        CHECK(sessionize(clicks, 706).size() == 1);
    }
    SUBCASE("single click yields a length-1 session")
    {
        const std::vector<InteractionRecord> clicks = {click(1, 10, 0)};
        const auto sessions = sessionize(clicks, 706);
        REQUIRE(sessions.size() == 1);
        CHECK(sessions[0].clicks.size() == 1);
    }
    SUBCASE("empty input yields no sessions")
    {
        CHECK(sessionize({}, 706).empty());
    }
    SUBCASE("unsorted input is sorted internally")
    {
        const std::vector<InteractionRecord> clicks = {click(1, 12, 1500), click(1, 10, 0),
                                                       click(1, 11, 700)};
        const auto sessions = sessionize(clicks, 706);
        REQUIRE(sessions.size() == 2);
        CHECK(sessions[0].clicks[0].timestamp == 0);
    }
    SUBCASE("mixed users are rejected")
    {
        const std::vector<InteractionRecord> clicks = {click(1, 10, 0), click(2, 11, 10)};
        CHECK_THROWS_AS(sessionize(clicks, 706), std::invalid_argument);
    }
}

TEST_CASE("partition_temporal routes by half-open stages")
{
    PartitionConfig cfg;
    cfg.t_device = 1000;
    cfg.t_test = 2000;

    SUBCASE("boundary clicks")
    {
        const std::vector<InteractionRecord> records = {click(1, 10, 999), click(1, 11, 1000)};
        const auto split = partition_temporal(records, cfg);
        REQUIRE(split.global_train.size() == 1);
        CHECK(split.global_train[0].clicks.size() == 1);
        CHECK(split.global_train[0].clicks[0].timestamp == 999);
        REQUIRE(split.personal_train.contains(1));
        CHECK(split.personal_train.at(1)[0].clicks[0].timestamp == 1000);
    }
    SUBCASE("transactional records survive any timestamp")
    {
        const std::vector<InteractionRecord> records = {
            {1, 10, 1, Behavior::Purchase, 2005},
            click(1, 11, 50),
            click(1, 11, 52),
        };
        const auto split = partition_temporal(records, cfg);
        REQUIRE(split.transactional.size() == 1);
        CHECK(split.transactional[0].timestamp == 2005);
    }
    SUBCASE("a session spanning t_device is cut at the boundary")
    {
        const std::vector<InteractionRecord> records = {click(1, 1, 900), click(1, 2, 950),
                                                        click(1, 3, 1010), click(1, 4, 1100)};
        const auto split = partition_temporal(records, cfg);
        REQUIRE(split.global_train.size() == 1);
        CHECK(split.global_train[0].clicks.size() == 2);
        REQUIRE(split.personal_train.contains(1));
        CHECK(split.personal_train.at(1)[0].clicks.size() == 2);
        CHECK(split.personal_train.at(1)[0].clicks[0].timestamp == 1010);
    }
    SUBCASE("bad config")
    {
        PartitionConfig bad;
        bad.t_device = 5;
        bad.t_test = 5;
        CHECK_THROWS_AS(partition_temporal({}, bad), std::invalid_argument);
    }
}

TEST_CASE("filter_dataset")
{
    PartitionConfig cfg;
    cfg.t_device = 1000;
    cfg.t_test = 2000;
    cfg.min_user_clicks = 12;

    SUBCASE("length-1 sessions are removed")
    {
        std::vector<InteractionRecord> records;
        for (int i = 0; i < 12; ++i)
        {
            records.push_back(click(1, i, i * 10)); // one long session, 12 clicks
        }
        records.push_back(click(1, 30, 900)); // isolated single click
        const auto split = filter_dataset(partition_temporal(records, cfg), cfg);
        CHECK(split.global_train.size() == 1);
        CHECK(split.filtered_clicks == 1);
    }
    SUBCASE("users below the click minimum are removed entirely")
    {
        std::vector<InteractionRecord> records;
        for (int i = 0; i < 11; ++i)
        {
            records.push_back(click(7, i, i * 10)); // 11 clicks < 12
        }
        for (int i = 0; i < 12; ++i)
        {
            records.push_back(click(8, i, i * 10));
        }
        const auto split = filter_dataset(partition_temporal(records, cfg), cfg);
        std::set<std::int64_t> users;
        for (const Session& s : split.global_train)
        {
            users.insert(s.user_id);
        }
        CHECK(users == std::set<std::int64_t>{8});
        CHECK(split.filtered_clicks == 11);
    }
    SUBCASE("per-session reading drops short sessions instead")
    {
        PartitionConfig alt = cfg;
        alt.min_clicks_per_session = true;
        std::vector<InteractionRecord> records;
        for (int i = 0; i < 11; ++i)
        {
            records.push_back(click(7, i, i * 10));
        }
        for (int i = 0; i < 12; ++i)
        {
            records.push_back(click(8, i, i * 10));
        }
        const auto split = filter_dataset(partition_temporal(records, alt), alt);
        std::set<std::int64_t> users;
        for (const Session& s : split.global_train)
        {
            users.insert(s.user_id);
        }
        CHECK(users == std::set<std::int64_t>{8}); // user 7's session has 11 < 12 clicks
    }
    SUBCASE("test clicks on unseen items are removed")
    {
        std::vector<InteractionRecord> records;
        for (int i = 0; i < 12; ++i)
        {
            records.push_back(click(1, i % 3, i * 10));
        }
        records.push_back(click(1, 0, 2100));
        records.push_back(click(1, 99, 2120)); // never trained
        records.push_back(click(1, 1, 2140));
        const auto split = filter_dataset(partition_temporal(records, cfg), cfg);
        REQUIRE(split.test.contains(1));
        REQUIRE(split.test.at(1).size() == 1);
        const auto& session = split.test.at(1)[0];
        CHECK(session.clicks.size() == 2);
        for (const auto& c : session.clicks)
        {
            CHECK(c.item_id != 99);
        }
        CHECK(split.filtered_clicks == 1);
    }
}

TEST_CASE("split_users by quantile of mean click timestamps")
{
    SUBCASE("ten users with distinct means yield exactly one new user")
    {
        std::vector<InteractionRecord> records;
        for (int u = 0; u < 10; ++u)
        {
            records.push_back(click(u, 1, 100 * u));
        }
        const auto [old_users, new_users] = split_users(records, 0.9);
        // independent oracle: sorted means 0..900, h = 0.9*9 = 8.1,
        // cut = 800 + 0.1*100 = 810; only mean 900 is above it
        CHECK(new_users == std::set<std::int64_t>{9});
        CHECK(old_users.size() == 9);
    }
    SUBCASE("identical means put everyone in the old cohort")
    {
        std::vector<InteractionRecord> records;
        for (int u = 0; u < 5; ++u)
        {
            records.push_back(click(u, 1, 500));
        }
        const auto [old_users, new_users] = split_users(records, 0.9);
        CHECK(new_users.empty());
        CHECK(old_users.size() == 5);
    }
    SUBCASE("a single user is old")
    {
        const std::vector<InteractionRecord> records = {click(3, 1, 12345)};
        const auto [old_users, new_users] = split_users(records, 0.9);
        CHECK(old_users == std::set<std::int64_t>{3});
        CHECK(new_users.empty());
    }
    SUBCASE("partition covers all clicking users and is disjoint")
    {
        Rng rng(31);
        const auto records = random_records(rng, 300);
        const auto [old_users, new_users] = split_users(records, 0.9);
        std::set<std::int64_t> expected;
        for (const auto& r : records)
        {
            if (r.behavior == Behavior::Click)
            {
                expected.insert(r.user_id);
            }
        }
        std::set<std::int64_t> got = old_users;
        for (std::int64_t u : new_users)
        {
            CHECK(!old_users.contains(u));
            got.insert(u);
        }
        CHECK(got == expected);
    }
}

TEST_CASE("quantile_linear interpolates")
{
    CHECK(quantile_linear({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 0.9) == doctest::Approx(8.1));
    CHECK(quantile_linear({5}, 0.5) == 5);
    CHECK(quantile_linear({1, 2}, 1.0) == 2);
    CHECK_THROWS_AS(quantile_linear({}, 0.5), std::invalid_argument);
}

TEST_CASE("click partition is lossless and deterministic")
{
    Rng rng(77);
    PartitionConfig cfg;
    cfg.t_device = 200000;
    cfg.t_test = 400000;
    for (int trial = 0; trial < 10; ++trial)
    {
        const auto records = random_records(rng, 400);
        std::uint64_t input_clicks = 0;
        for (const auto& r : records)
        {
            input_clicks += (r.behavior == Behavior::Click);
        }
        const auto split = filter_dataset(partition_temporal(records, cfg), cfg);
        CHECK(split.click_count() + split.filtered_clicks == input_clicks);

        const auto again = filter_dataset(partition_temporal(records, cfg), cfg);
        CHECK(split == again);
    }
}

TEST_CASE("no output session violates the idle threshold")
{
    Rng rng(123);
    PartitionConfig cfg;
    cfg.t_device = 200000;
    cfg.t_test = 400000;
    const auto records = random_records(rng, 600);
    const auto split = filter_dataset(partition_temporal(records, cfg), cfg);
    const auto check_sessions = [&](const std::vector<Session>& sessions) {
        for (const Session& s : sessions)
        {
            for (std::size_t i = 1; i < s.clicks.size(); ++i)
            {
                CHECK(s.clicks[i].timestamp >= s.clicks[i - 1].timestamp);
                CHECK(s.clicks[i].timestamp - s.clicks[i - 1].timestamp <=
                      cfg.idle_threshold_secs);
            }
        }
    };
    check_sessions(split.global_train);
    for (const auto& [user, sessions] : split.personal_train)
    {
        check_sessions(sessions);
    }
    for (const auto& [user, sessions] : split.test)
    {
        check_sessions(sessions);
    }
}

TEST_CASE("write_split and load_split round-trip")
{
    SyntheticConfig syn;
    syn.users = 15;
    syn.items = 60;
    syn.categories = 6;
    const auto records = generate_synthetic(syn, 5);
    const PartitionConfig cfg = syn.partition();
    const auto split = filter_dataset(partition_temporal(records, cfg), cfg);

    const std::string dir = "split_roundtrip_tmp";
    write_split(dir, split, cfg);
    const auto loaded = load_split(dir);
    CHECK(loaded == split);
    std::filesystem::remove_all(dir);
}
