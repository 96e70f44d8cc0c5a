#include "ccrec/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ccrec/hash.hpp"

#include <nlohmann/json.hpp>

namespace ccrec
{
    namespace
    {
        std::int64_t parse_int(std::string_view field, std::size_t line, const char* what)
        {
            std::int64_t value = 0;
            const auto [ptr, ec] =
                std::from_chars(field.data(), field.data() + field.size(), value);
            if (ec != std::errc() || ptr != field.data() + field.size())
            {
                throw ParseError(line, std::string("malformed ") + what + " field '" +
                                           std::string(field) + "'");
            }
            return value;
        }
    }

    Behavior CsvFormat::parse_behavior(const std::string& token, std::size_t line) const
    {
        for (const auto& [tok, behavior] : behavior_tokens)
        {
            if (tok == token)
            {
                return behavior;
            }
        }
        throw ParseError(line, "unknown behavior token '" + token + "'");
    }

    const std::string& CsvFormat::token_for(Behavior b) const
    {
        for (const auto& [tok, behavior] : behavior_tokens)
        {
            if (behavior == b)
            {
                return tok;
            }
        }
        throw std::invalid_argument("CsvFormat: no token configured for behavior");
    }

    std::vector<InteractionRecord> parse_interactions(std::istream& in, const CsvFormat& fmt)
    {
        std::vector<InteractionRecord> out;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line))
        {
            ++line_no;
            if (!line.empty() && line.back() == '\r')
            {
                line.pop_back();
            }
            if (line.empty())
            {
                continue;
            }
            std::array<std::string_view, 5> fields;
            std::string_view rest = line;
            for (std::size_t i = 0; i < 5; ++i)
            {
                const std::size_t comma = rest.find(',');
                if (i < 4)
                {
                    if (comma == std::string_view::npos)
                    {
                        throw ParseError(line_no, "expected 5 comma-separated fields");
                    }
                    fields[i] = rest.substr(0, comma);
                    rest = rest.substr(comma + 1);
                }
                else
                {
                    if (comma != std::string_view::npos)
                    {
                        throw ParseError(line_no, "expected 5 comma-separated fields");
                    }
                    fields[i] = rest;
                }
            }
            InteractionRecord rec;
            rec.user_id = parse_int(fields[0], line_no, "user id");
            rec.item_id = parse_int(fields[1], line_no, "item id");
            rec.category_id = parse_int(fields[2], line_no, "category id");
            rec.behavior = fmt.parse_behavior(std::string(fields[3]), line_no);
            rec.timestamp = parse_int(fields[4], line_no, "timestamp");
            if (rec.user_id < 0 || rec.item_id < 0 || rec.category_id < 0)
            {
                throw ParseError(line_no, "ids must be non-negative");
            }
            if (rec.timestamp < 0)
            {
                throw ParseError(line_no, "timestamp must be non-negative");
            }
            out.push_back(rec);
        }
        return out;
    }

    std::vector<InteractionRecord> load_interactions(const std::string& path,
                                                     const CsvFormat& fmt)
    {
        std::ifstream in(path);
        if (!in)
        {
            throw std::runtime_error("cannot open " + path);
        }
        return parse_interactions(in, fmt);
    }

    void write_interactions(std::ostream& out, std::span<const InteractionRecord> records,
                            const CsvFormat& fmt)
    {
        for (const auto& r : records)
        {
            out << r.user_id << ',' << r.item_id << ',' << r.category_id << ','
                << fmt.token_for(r.behavior) << ',' << r.timestamp << '\n';
        }
    }

    void PartitionConfig::validate() const
    {
        if (!(t_device < t_test))
        {
            throw std::invalid_argument("PartitionConfig: t_device must precede t_test");
        }
        if (idle_threshold_secs <= 0)
        {
            throw std::invalid_argument("PartitionConfig: idle threshold must be positive");
        }
        if (!(new_user_quantile >= 0.0 && new_user_quantile <= 1.0))
        {
            throw std::invalid_argument("PartitionConfig: quantile must lie in [0, 1]");
        }
    }

    namespace
    {
        std::uint64_t count_clicks(const std::vector<Session>& sessions)
        {
            std::uint64_t n = 0;
            for (const auto& s : sessions)
            {
                n += s.clicks.size();
            }
            return n;
        }

        std::uint64_t count_clicks(const std::map<std::int64_t, std::vector<Session>>& by_user)
        {
            std::uint64_t n = 0;
            for (const auto& [user, sessions] : by_user)
            {
                n += count_clicks(sessions);
            }
            return n;
        }
    }

    std::uint64_t DatasetSplit::global_clicks() const { return count_clicks(global_train); }
    std::uint64_t DatasetSplit::personal_clicks() const { return count_clicks(personal_train); }
    std::uint64_t DatasetSplit::test_clicks() const { return count_clicks(test); }

    std::vector<Session> sessionize(std::vector<InteractionRecord> user_clicks,
                                    std::int64_t idle_threshold_secs)
    {
        if (idle_threshold_secs <= 0)
        {
            throw std::invalid_argument("sessionize: idle threshold must be positive");
        }
        if (user_clicks.empty())
        {
            return {};
        }
        const std::int64_t user = user_clicks.front().user_id;
        for (const auto& r : user_clicks)
        {
            if (r.user_id != user)
            {
                throw std::invalid_argument("sessionize: records span multiple users");
            }
            if (r.behavior != Behavior::Click)
            {
                throw std::invalid_argument("sessionize: sessions are built from clicks only");
            }
        }
        std::stable_sort(user_clicks.begin(), user_clicks.end(),
                         [](const InteractionRecord& a, const InteractionRecord& b) {
                             return a.timestamp < b.timestamp;
                         });
        std::vector<Session> sessions;
        for (const auto& r : user_clicks)
        {
            const bool fresh = sessions.empty() ||
                               r.timestamp - sessions.back().clicks.back().timestamp >
                                   idle_threshold_secs;
            if (fresh)
            {
                sessions.push_back(Session{user, {}});
            }
            sessions.back().clicks.push_back(SessionClick{r.item_id, r.category_id, r.timestamp});
        }
        return sessions;
    }

    DatasetSplit partition_temporal(std::span<const InteractionRecord> records,
                                    const PartitionConfig& cfg)
    {
        cfg.validate();
        DatasetSplit split;
        std::map<std::int64_t, std::vector<InteractionRecord>> clicks_by_user;
        for (const auto& r : records)
        {
            if (r.behavior == Behavior::Click)
            {
                clicks_by_user[r.user_id].push_back(r);
            }
            else
            {
                split.transactional.push_back(r);
            }
        }
        const auto stage_of = [&](std::int64_t ts) {
            return ts < cfg.t_device ? 0 : (ts < cfg.t_test ? 1 : 2);
        };
        for (auto& [user, clicks] : clicks_by_user)
        {
            for (Session& session : sessionize(std::move(clicks), cfg.idle_threshold_secs))
            {
                // cut at stage boundaries so no piece crosses a deadline
                std::vector<Session> pieces;
                for (const SessionClick& c : session.clicks)
                {
                    const bool fresh = pieces.empty() ||
                                       stage_of(pieces.back().clicks.back().timestamp) !=
                                           stage_of(c.timestamp);
                    if (fresh)
                    {
                        pieces.push_back(Session{user, {}});
                    }
                    pieces.back().clicks.push_back(c);
                }
                for (Session& piece : pieces)
                {
                    switch (stage_of(piece.clicks.front().timestamp))
                    {
                    case 0:
                        split.global_train.push_back(std::move(piece));
                        break;
                    case 1:
                        split.personal_train[user].push_back(std::move(piece));
                        break;
                    default:
                        split.test[user].push_back(std::move(piece));
                        break;
                    }
                }
            }
        }
        return split;
    }

    namespace
    {
        // Drops sessions shorter than min_len, returning removed click count.
        std::uint64_t drop_short_sessions(std::vector<Session>& sessions, std::size_t min_len)
        {
            std::uint64_t removed = 0;
            std::erase_if(sessions, [&](const Session& s) {
                if (s.clicks.size() < min_len)
                {
                    removed += s.clicks.size();
                    return true;
                }
                return false;
            });
            return removed;
        }

        std::uint64_t drop_short_sessions(std::map<std::int64_t, std::vector<Session>>& by_user,
                                          std::size_t min_len)
        {
            std::uint64_t removed = 0;
            for (auto it = by_user.begin(); it != by_user.end();)
            {
                removed += drop_short_sessions(it->second, min_len);
                it = it->second.empty() ? by_user.erase(it) : std::next(it);
            }
            return removed;
        }

        std::uint64_t drop_user(DatasetSplit& split, std::int64_t user)
        {
            std::uint64_t removed = 0;
            std::erase_if(split.global_train, [&](const Session& s) {
                if (s.user_id == user)
                {
                    removed += s.clicks.size();
                    return true;
                }
                return false;
            });
            for (auto* stage : {&split.personal_train, &split.test})
            {
                if (auto it = stage->find(user); it != stage->end())
                {
                    for (const Session& s : it->second)
                    {
                        removed += s.clicks.size();
                    }
                    stage->erase(it);
                }
            }
            return removed;
        }
    }

    DatasetSplit filter_dataset(DatasetSplit split, const PartitionConfig& cfg)
    {
        // 1. sessions of length 1 (or 0) carry no prediction step
        split.filtered_clicks += drop_short_sessions(split.global_train, 2);
        split.filtered_clicks += drop_short_sessions(split.personal_train, 2);
        split.filtered_clicks += drop_short_sessions(split.test, 2);

        // 2. the click-minimum filter, in its configured reading
        if (cfg.min_user_clicks > 0)
        {
            if (cfg.min_clicks_per_session)
            {
                const auto min_len = static_cast<std::size_t>(cfg.min_user_clicks);
                split.filtered_clicks += drop_short_sessions(split.global_train, min_len);
                split.filtered_clicks += drop_short_sessions(split.personal_train, min_len);
                split.filtered_clicks += drop_short_sessions(split.test, min_len);
            }
            else
            {
                std::map<std::int64_t, std::uint64_t> totals;
                for (const Session& s : split.global_train)
                {
                    totals[s.user_id] += s.clicks.size();
                }
                for (const auto* stage : {&split.personal_train, &split.test})
                {
                    for (const auto& [user, sessions] : *stage)
                    {
                        totals[user] += count_clicks(sessions);
                    }
                }
                for (const auto& [user, total] : totals)
                {
                    if (total < static_cast<std::uint64_t>(cfg.min_user_clicks))
                    {
                        split.filtered_clicks += drop_user(split, user);
                    }
                }
            }
        }

        // 3. test clicks must be scorable: item seen in some training stage
        std::set<std::int64_t> vocab;
        for (const Session& s : split.global_train)
        {
            for (const SessionClick& c : s.clicks)
            {
                vocab.insert(c.item_id);
            }
        }
        for (const auto& [user, sessions] : split.personal_train)
        {
            for (const Session& s : sessions)
            {
                for (const SessionClick& c : s.clicks)
                {
                    vocab.insert(c.item_id);
                }
            }
        }
        for (auto it = split.test.begin(); it != split.test.end();)
        {
            std::vector<Session> rebuilt;
            for (const Session& s : it->second)
            {
                // removing clicks can open idle gaps; re-split at the threshold
                Session current{s.user_id, {}};
                const auto flush = [&]() {
                    if (current.clicks.size() >= 2)
                    {
                        rebuilt.push_back(std::move(current));
                    }
                    else
                    {
                        split.filtered_clicks += current.clicks.size();
                    }
                    current = Session{s.user_id, {}};
                };
                for (const SessionClick& c : s.clicks)
                {
                    if (!vocab.contains(c.item_id))
                    {
                        split.filtered_clicks += 1;
                        continue;
                    }
                    if (!current.clicks.empty() &&
                        c.timestamp - current.clicks.back().timestamp > cfg.idle_threshold_secs)
                    {
                        flush();
                    }
                    current.clicks.push_back(c);
                }
                flush();
            }
            it->second = std::move(rebuilt);
            it = it->second.empty() ? split.test.erase(it) : std::next(it);
        }
        return split;
    }

    double quantile_linear(std::vector<double> values, double q)
    {
        if (values.empty())
        {
            throw std::invalid_argument("quantile_linear: empty input");
        }
        if (!(q >= 0.0 && q <= 1.0))
        {
            throw std::invalid_argument("quantile_linear: q must lie in [0, 1]");
        }
        std::sort(values.begin(), values.end());
        const double h = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(h);
        if (lo + 1 >= values.size())
        {
            return values.back();
        }
        const double frac = h - static_cast<double>(lo);
        return values[lo] + frac * (values[lo + 1] - values[lo]);
    }

    std::pair<std::set<std::int64_t>, std::set<std::int64_t>> split_users(
        std::span<const InteractionRecord> records, double quantile_threshold)
    {
        std::map<std::int64_t, std::pair<double, std::uint64_t>> sums;
        for (const auto& r : records)
        {
            if (r.behavior != Behavior::Click)
            {
                continue;
            }
            auto& [sum, count] = sums[r.user_id];
            sum += static_cast<double>(r.timestamp);
            count += 1;
        }
        std::pair<std::set<std::int64_t>, std::set<std::int64_t>> out;
        if (sums.empty())
        {
            return out;
        }
        std::vector<double> means;
        means.reserve(sums.size());
        for (const auto& [user, sc] : sums)
        {
            means.push_back(sc.first / static_cast<double>(sc.second));
        }
        const double cut = quantile_linear(means, quantile_threshold);
        for (const auto& [user, sc] : sums)
        {
            const double mean = sc.first / static_cast<double>(sc.second);
            if (mean > cut)
            {
                out.second.insert(user); // new user
            }
            else
            {
                out.first.insert(user); // ties at the quantile stay old
            }
        }
        return out;
    }

    namespace
    {
        void append_session_rows(std::ostream& out, const Session& s, const CsvFormat& fmt)
        {
            const std::string& click_token = fmt.token_for(Behavior::Click);
            for (const SessionClick& c : s.clicks)
            {
                out << s.user_id << ',' << c.item_id << ',' << c.category_id << ','
                    << click_token << ',' << c.timestamp << '\n';
            }
        }

        void write_stage_csv(const std::string& path, const std::vector<Session>& sessions,
                             const CsvFormat& fmt)
        {
            std::ofstream out(path, std::ios::binary);
            if (!out)
            {
                throw std::runtime_error("cannot write " + path);
            }
            for (const Session& s : sessions)
            {
                append_session_rows(out, s, fmt);
            }
        }

        void write_stage_csv(const std::string& path,
                             const std::map<std::int64_t, std::vector<Session>>& by_user,
                             const CsvFormat& fmt)
        {
            std::ofstream out(path, std::ios::binary);
            if (!out)
            {
                throw std::runtime_error("cannot write " + path);
            }
            for (const auto& [user, sessions] : by_user)
            {
                for (const Session& s : sessions)
                {
                    append_session_rows(out, s, fmt);
                }
            }
        }
    }

    void write_split(const std::string& dir, const DatasetSplit& split, const PartitionConfig& cfg,
                     const CsvFormat& fmt)
    {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        write_stage_csv(dir + "/global_train.csv", split.global_train, fmt);
        write_stage_csv(dir + "/personal_train.csv", split.personal_train, fmt);
        write_stage_csv(dir + "/test.csv", split.test, fmt);
        {
            std::ofstream out(dir + "/transactional.csv", std::ios::binary);
            if (!out)
            {
                throw std::runtime_error("cannot write " + dir + "/transactional.csv");
            }
            write_interactions(out, split.transactional, fmt);
        }

        nlohmann::json manifest;
        manifest["config"] = {
            {"t_device", cfg.t_device},
            {"t_test", cfg.t_test},
            {"idle_threshold_secs", cfg.idle_threshold_secs},
            {"min_user_clicks", cfg.min_user_clicks},
            {"min_clicks_per_session", cfg.min_clicks_per_session},
            {"new_user_quantile", cfg.new_user_quantile},
        };
        manifest["counts"] = {
            {"global_clicks", split.global_clicks()},
            {"personal_clicks", split.personal_clicks()},
            {"test_clicks", split.test_clicks()},
            {"transactional_records", split.transactional.size()},
            {"filtered_clicks", split.filtered_clicks},
            {"personal_users", split.personal_train.size()},
            {"test_users", split.test.size()},
        };
        for (const char* name :
             {"global_train.csv", "personal_train.csv", "test.csv", "transactional.csv"})
        {
            const std::string path = dir + "/" + name;
            manifest["files"][name] = {
                {"bytes", fs::file_size(path)},
                {"fnv1a64", hex64(hash_file(path))},
            };
        }
        std::ofstream out(dir + "/manifest.json", std::ios::binary);
        out << manifest.dump(2) << '\n';
    }

    DatasetSplit load_split(const std::string& dir, const CsvFormat& fmt)
    {
        nlohmann::json manifest;
        {
            std::ifstream in(dir + "/manifest.json");
            if (!in)
            {
                throw std::runtime_error("cannot open " + dir + "/manifest.json");
            }
            in >> manifest;
        }
        const auto threshold = manifest["config"]["idle_threshold_secs"].get<std::int64_t>();

        const auto load_stage = [&](const std::string& name) {
            std::map<std::int64_t, std::vector<Session>> by_user;
            for (auto& [user, clicks] : [&] {
                     std::map<std::int64_t, std::vector<InteractionRecord>> grouped;
                     for (const auto& r : load_interactions(dir + "/" + name, fmt))
                     {
                         grouped[r.user_id].push_back(r);
                     }
                     return grouped;
                 }())
            {
                by_user[user] = sessionize(std::move(clicks), threshold);
            }
            return by_user;
        };

        DatasetSplit split;
        for (auto& [user, sessions] : load_stage("global_train.csv"))
        {
            for (Session& s : sessions)
            {
                split.global_train.push_back(std::move(s));
            }
        }
        split.personal_train = load_stage("personal_train.csv");
        split.test = load_stage("test.csv");
        split.transactional = load_interactions(dir + "/transactional.csv", fmt);
        split.filtered_clicks = manifest["counts"]["filtered_clicks"].get<std::uint64_t>();
        return split;
    }
}
