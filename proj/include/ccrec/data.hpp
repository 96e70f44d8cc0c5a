#pragma once

// Interaction-log ingestion, idle-threshold sessionization, filtering, and
// the temporal / user-cohort partitions the training stages are built from.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ccrec
{
    enum class Behavior : std::uint8_t
    {
        Click,
        Purchase,
        Cart,
        Favorite,
    };

    struct InteractionRecord
    {
        std::int64_t user_id = 0;
        std::int64_t item_id = 0;
        std::int64_t category_id = 0;
        Behavior behavior = Behavior::Click;
        std::int64_t timestamp = 0;

        bool transactional() const { return behavior != Behavior::Click; }
        auto operator<=>(const InteractionRecord&) const = default;
    };

    struct ParseError : std::runtime_error
    {
        std::size_t line;
        ParseError(std::size_t line_, const std::string& what)
            : std::runtime_error("line " + std::to_string(line_) + ": " + what), line(line_)
        {
        }
    };

    // CSV layout: no header, columns user_id,item_id,category_id,behavior,timestamp.
    // The behavior token table is overridable; defaults match the public
    // UserBehavior encoding.
    struct CsvFormat
    {
        std::vector<std::pair<std::string, Behavior>> behavior_tokens = {
            {"pv", Behavior::Click},
            {"buy", Behavior::Purchase},
            {"cart", Behavior::Cart},
            {"fav", Behavior::Favorite},
        };

        Behavior parse_behavior(const std::string& token, std::size_t line) const;
        const std::string& token_for(Behavior b) const;
    };

    std::vector<InteractionRecord> parse_interactions(std::istream& in, const CsvFormat& fmt = {});
    std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                     const CsvFormat& fmt = {});
    void write_interactions(std::ostream& out, std::span<const InteractionRecord> records,
                            const CsvFormat& fmt = {});

    struct SessionClick
    {
        std::int64_t item_id = 0;
        std::int64_t category_id = 0;
        std::int64_t timestamp = 0;
        auto operator<=>(const SessionClick&) const = default;
    };

    struct Session
    {
        std::int64_t user_id = 0;
        std::vector<SessionClick> clicks;
        bool operator==(const Session&) const = default;
    };

    struct PartitionConfig
    {
        std::int64_t t_device = 0;
        std::int64_t t_test = 0;
        std::int64_t idle_threshold_secs = 706;
        std::int64_t min_user_clicks = 12;
        // Alternate reading of the click-minimum filter: drop short sessions
        // instead of low-activity users.
        bool min_clicks_per_session = false;
        double new_user_quantile = 0.9;

        void validate() const;
    };

    // Stage routing is half-open: [.., t_device) trains the global model,
    // [t_device, t_test) trains per-user models, [t_test, ..) is test data.
    // Transactional records are never partitioned away.
    struct DatasetSplit
    {
        std::vector<Session> global_train;
        std::map<std::int64_t, std::vector<Session>> personal_train;
        std::map<std::int64_t, std::vector<Session>> test;
        std::vector<InteractionRecord> transactional;
        std::uint64_t filtered_clicks = 0;

        std::uint64_t global_clicks() const;
        std::uint64_t personal_clicks() const;
        std::uint64_t test_clicks() const;
        std::uint64_t click_count() const
        {
            return global_clicks() + personal_clicks() + test_clicks();
        }

        bool operator==(const DatasetSplit&) const = default;
    };

    // Splits one user's clicks into sessions; a gap strictly greater than the
    // threshold starts a new session. Sorts by timestamp internally (stable).
    std::vector<Session> sessionize(std::vector<InteractionRecord> user_clicks,
                                    std::int64_t idle_threshold_secs);

    // Sessionizes every user's clicks and routes them to stages; sessions
    // spanning a stage boundary are cut at the boundary.
    DatasetSplit partition_temporal(std::span<const InteractionRecord> records,
                                    const PartitionConfig& cfg);

    // Drops length-1 sessions, low-activity users (or short sessions, per
    // config), and test clicks on items absent from the training vocabulary.
    // Removed click counts accumulate in filtered_clicks.
    DatasetSplit filter_dataset(DatasetSplit split, const PartitionConfig& cfg);

    // Per-user mean click timestamp; users whose mean lies strictly above the
    // empirical quantile of all means are "new", the rest "old".
    std::pair<std::set<std::int64_t>, std::set<std::int64_t>> split_users(
        std::span<const InteractionRecord> records, double quantile_threshold);

    // Empirical quantile with linear interpolation.
    double quantile_linear(std::vector<double> values, double q);

    // One CSV per stage in the input schema plus manifest.json with config,
    // counts, and content hashes.
    void write_split(const std::string& dir, const DatasetSplit& split, const PartitionConfig& cfg,
                     const CsvFormat& fmt = {});
    DatasetSplit load_split(const std::string& dir, const CsvFormat& fmt = {});
}
