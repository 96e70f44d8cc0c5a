// Command-line front end: synthetic data generation, ingestion, temporal
// partitioning, global training, pull/push simulation, evaluation, and the
// approach comparison matrix. Every artifact lands under --out next to a
// manifest.json with config echo and content hashes.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ccrec/data.hpp"
#include "ccrec/experiment.hpp"
#include "ccrec/hash.hpp"
#include "ccrec/metrics.hpp"
#include "ccrec/model.hpp"
#include "ccrec/protocol.hpp"
#include "ccrec/reports.hpp"
#include "ccrec/synthetic.hpp"
#include "ccrec/wire.hpp"

namespace fs = std::filesystem;

namespace
{
    struct ModelFlags
    {
        std::size_t embedding_dim = 32;
        std::size_t hidden_dim = 100;
        std::size_t gru_layers = 1;
        std::size_t batch_size = 50;
        std::string mode = "pull";
        double lasso_gamma = 0.0;
        double lasso_lambda = 0.0;
        double embedding_sparsity = -1.0; // <0: disabled
        double model_sparsity = -1.0;     // <0: pruning disabled
        std::size_t epochs = 4;
        double learning_rate = 0.01;
        std::size_t ft_passes = 3;
        std::size_t update_batch_size = 25;
        double candidate_proportion = 0.1;
        std::size_t top_k = 20;

        void register_options(CLI::App& cmd)
        {
            cmd.add_option("--embedding-dim", embedding_dim, "Item embedding width");
            cmd.add_option("--hidden-dim", hidden_dim, "GRU hidden units");
            cmd.add_option("--gru-layers", gru_layers, "Stacked GRU layers");
            cmd.add_option("--batch-size", batch_size, "Sessions per optimizer step");
            cmd.add_option("--mode", mode, "pull or push")
                ->check(CLI::IsMember({"pull", "push"}));
            cmd.add_option("--lasso-gamma", lasso_gamma, "Fixed truncation threshold");
            cmd.add_option("--lasso-lambda", lasso_lambda, "L1 penalty weight");
            cmd.add_option("--sparsity", embedding_sparsity,
                           "Target embedding sparsity in [0,1); negative disables");
            cmd.add_option("--model-sparsity", model_sparsity,
                           "Final pruned model sparsity in [0,1); negative disables");
            cmd.add_option("--epochs", epochs, "Global training epochs");
            cmd.add_option("--lr", learning_rate, "Adagrad learning rate");
            cmd.add_option("--ft-passes", ft_passes, "Fine-tuning passes per device");
            cmd.add_option("--update-batch-size", update_batch_size,
                           "Prediction steps per on-device update");
            cmd.add_option("--candidate-proportion", candidate_proportion,
                           "Candidate set size as a fraction of the item set");
            cmd.add_option("--top-k", top_k, "Ranking cutoff");
        }

        ccrec::ModelConfig model_config() const
        {
            ccrec::ModelConfig cfg;
            cfg.embedding_dim = embedding_dim;
            cfg.hidden_dim = hidden_dim;
            cfg.gru_layers = gru_layers;
            cfg.batch_size = batch_size;
            cfg.mode = ccrec::parse_mode(mode);
            cfg.lasso.gamma = lasso_gamma;
            cfg.lasso.lambda = lasso_lambda;
            if (embedding_sparsity >= 0.0)
            {
                cfg.lasso.target_sparsity = embedding_sparsity;
            }
            return cfg;
        }

        ccrec::TrainConfig train_config(std::uint64_t seed) const
        {
            ccrec::TrainConfig cfg;
            cfg.epochs = epochs;
            cfg.learning_rate = learning_rate;
            cfg.seed = seed;
            if (model_sparsity >= 0.0 && epochs >= 2)
            {
                ccrec::PruningSchedule schedule;
                schedule.initial_sparsity = 0.0;
                schedule.final_sparsity = model_sparsity;
                schedule.start_epoch = 1;
                schedule.epochs_per_step = 1;
                schedule.steps = epochs - 1;
                cfg.pruning = schedule;
            }
            return cfg;
        }

        ccrec::FineTuneConfig fine_tune_config() const
        {
            ccrec::FineTuneConfig cfg;
            cfg.passes = ft_passes;
            cfg.update_batch_size = update_batch_size;
            cfg.learning_rate = learning_rate;
            return cfg;
        }

        nlohmann::json to_json() const
        {
            return {
                {"embedding_dim", embedding_dim},
                {"hidden_dim", hidden_dim},
                {"gru_layers", gru_layers},
                {"batch_size", batch_size},
                {"mode", mode},
                {"lasso_gamma", lasso_gamma},
                {"lasso_lambda", lasso_lambda},
                {"embedding_sparsity", embedding_sparsity},
                {"model_sparsity", model_sparsity},
                {"epochs", epochs},
                {"learning_rate", learning_rate},
                {"ft_passes", ft_passes},
                {"update_batch_size", update_batch_size},
                {"candidate_proportion", candidate_proportion},
                {"top_k", top_k},
            };
        }
    };

    void write_text(const std::string& path, const std::string& content)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
        {
            throw std::runtime_error("cannot write " + path);
        }
        out << content;
    }

    void write_bytes(const std::string& path, const ccrec::Bytes& bytes)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
        {
            throw std::runtime_error("cannot write " + path);
        }
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }

    // manifest.json: config echo, seed, and a content hash per artifact
    void write_manifest(const std::string& dir, const nlohmann::json& config,
                        std::optional<std::uint64_t> seed, const std::vector<std::string>& files,
                        nlohmann::json extra = {})
    {
        nlohmann::json manifest;
        manifest["config"] = config;
        if (seed)
        {
            manifest["seed"] = *seed;
        }
        for (const std::string& name : files)
        {
            const std::string path = dir + "/" + name;
            manifest["files"][name] = {
                {"bytes", fs::file_size(path)},
                {"fnv1a64", ccrec::hex64(ccrec::hash_file(path))},
            };
        }
        if (!extra.is_null() && !extra.empty())
        {
            manifest["extra"] = std::move(extra);
        }
        write_text(dir + "/manifest.json", manifest.dump(2) + "\n");
    }

    std::string split_content_hash(const ccrec::DatasetSplit& split)
    {
        std::ostringstream buf;
        ccrec::CsvFormat fmt;
        for (const ccrec::Session& s : split.global_train)
        {
            for (const auto& c : s.clicks)
            {
                buf << s.user_id << ',' << c.item_id << ',' << c.timestamp << ';';
            }
        }
        for (const auto* stage : {&split.personal_train, &split.test})
        {
            for (const auto& [user, sessions] : *stage)
            {
                for (const ccrec::Session& s : sessions)
                {
                    for (const auto& c : s.clicks)
                    {
                        buf << user << ',' << c.item_id << ',' << c.timestamp << ';';
                    }
                }
            }
        }
        ccrec::write_interactions(buf, split.transactional, fmt);
        return ccrec::hex64(ccrec::fnv1a64(buf.str()));
    }
}

int main(int argc, char** argv)
{
    CLI::App app{"Cloud-client cooperative next-click recommender"};
    app.require_subcommand(1);

    // --- gen-synthetic ---
    auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic interaction log");
    ccrec::SyntheticConfig syn_cfg;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--users", syn_cfg.users, "User count");
    gen->add_option("--items", syn_cfg.items, "Item count");
    gen->add_option("--categories", syn_cfg.categories, "Category count");
    gen->add_option("--alpha", syn_cfg.alpha, "Private-chain mixing weight");
    gen->add_option("--days", syn_cfg.days, "Simulated days");
    gen->add_option("--sessions-per-day", syn_cfg.sessions_per_day, "Sessions per active day");
    gen->add_option("--seed", gen_seed, "RNG seed")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->set_config("--config");

    // --- ingest ---
    auto* ingest = app.add_subcommand("ingest", "Validate and normalize an interaction CSV");
    std::string ingest_in;
    std::string ingest_out;
    ingest->add_option("--input", ingest_in, "Interaction CSV")
        ->required()
        ->check(CLI::ExistingFile);
    ingest->add_option("--out", ingest_out, "Output directory")->required();
    ingest->set_config("--config");

    // --- partition ---
    auto* part = app.add_subcommand("partition", "Sessionize, filter, and split by deadlines");
    std::string part_in;
    std::string part_out;
    ccrec::PartitionConfig part_cfg;
    part_cfg.t_device = 5 * 86400;
    part_cfg.t_test = 7 * 86400;
    part->add_option("--input", part_in, "Interaction CSV")
        ->required()
        ->check(CLI::ExistingFile);
    part->add_option("--out", part_out, "Output directory")->required();
    part->add_option("--t-device", part_cfg.t_device, "Personal-stage start timestamp");
    part->add_option("--t-test", part_cfg.t_test, "Test-stage start timestamp");
    part->add_option("--idle-threshold", part_cfg.idle_threshold_secs,
                     "Session idle threshold in seconds");
    part->add_option("--min-user-clicks", part_cfg.min_user_clicks,
                     "Minimum clicks per user (or per session with --per-session-min)");
    part->add_flag("--per-session-min", part_cfg.min_clicks_per_session,
                   "Apply the click minimum per session instead of per user");
    part->add_option("--quantile", part_cfg.new_user_quantile, "New-user quantile threshold");
    part->set_config("--config");

    // --- train-global ---
    auto* train = app.add_subcommand("train-global", "Train the global model on a partition");
    std::string train_data;
    std::string train_out;
    std::uint64_t train_seed = 0;
    ModelFlags train_flags;
    train->add_option("--data", train_data, "Partition directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    train->add_option("--out", train_out, "Output directory")->required();
    train->add_option("--seed", train_seed, "RNG seed")->required();
    train_flags.register_options(*train);
    train->set_config("--config");

    // --- simulate ---
    auto* sim = app.add_subcommand("simulate", "Run the cloud-device cooperation protocol");
    std::string sim_data;
    std::string sim_out;
    std::uint64_t sim_seed = 0;
    ModelFlags sim_flags;
    sim->add_option("--data", sim_data, "Partition directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    sim->add_option("--out", sim_out, "Output directory")->required();
    sim->add_option("--seed", sim_seed, "RNG seed")->required();
    sim_flags.register_options(*sim);
    sim->set_config("--config");

    // --- evaluate ---
    auto* eval = app.add_subcommand("evaluate", "Score a trained model on the test stage");
    std::string eval_data;
    std::string eval_model;
    std::string eval_out;
    std::size_t eval_top_k = 20;
    eval->add_option("--data", eval_data, "Partition directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    eval->add_option("--model", eval_model, "Model payload from train-global")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "Output directory")->required();
    eval->add_option("--top-k", eval_top_k, "Ranking cutoff");
    eval->set_config("--config");

    // --- matrix ---
    auto* matrix = app.add_subcommand("matrix", "Compare the four training approaches");
    std::string matrix_data;
    std::string matrix_out;
    std::uint64_t matrix_seed = 0;
    bool matrix_transactional = false;
    bool matrix_cohorts = false;
    bool matrix_use_candidates = false;
    std::vector<std::size_t> matrix_update_sweep;
    ModelFlags matrix_flags;
    matrix->add_option("--data", matrix_data, "Partition directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    matrix->add_option("--out", matrix_out, "Output directory")->required();
    matrix->add_option("--seed", matrix_seed, "RNG seed")->required();
    matrix->add_flag("--with-transactional", matrix_transactional,
                     "Add the transactional-only training row");
    matrix->add_flag("--cohorts", matrix_cohorts, "Break metrics down by old/new users");
    matrix->add_flag("--use-candidates", matrix_use_candidates,
                     "Score over CF candidate sets instead of the full vocabulary");
    matrix->add_option("--update-batch-sweep", matrix_update_sweep,
                       "Extra cloud-client rows at these update batch sizes");
    matrix_flags.register_options(*matrix);
    matrix->set_config("--config");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return 2;
    }

    try
    {
        ccrec::CsvFormat fmt;

        if (*gen)
        {
            fs::create_directories(gen_out);
            const auto records = ccrec::generate_synthetic(syn_cfg, gen_seed);
            std::ostringstream buf;
            ccrec::write_interactions(buf, records, fmt);
            write_text(gen_out + "/interactions.csv", buf.str());
            nlohmann::json config = {
                {"users", syn_cfg.users},         {"items", syn_cfg.items},
                {"categories", syn_cfg.categories}, {"alpha", syn_cfg.alpha},
                {"days", syn_cfg.days},           {"t_device", syn_cfg.t_device()},
                {"t_test", syn_cfg.t_test()},
            };
            write_manifest(gen_out, config, gen_seed, {"interactions.csv"},
                           {{"records", records.size()}});
        }
        else if (*ingest)
        {
            fs::create_directories(ingest_out);
            const auto records = ccrec::load_interactions(ingest_in, fmt);
            std::ostringstream buf;
            ccrec::write_interactions(buf, records, fmt);
            write_text(ingest_out + "/interactions.csv", buf.str());
            std::map<std::string, std::uint64_t> behaviors;
            std::set<std::int64_t> users;
            std::set<std::int64_t> items;
            for (const auto& r : records)
            {
                behaviors[fmt.token_for(r.behavior)] += 1;
                users.insert(r.user_id);
                items.insert(r.item_id);
            }
            write_manifest(ingest_out, {{"input", ingest_in}}, std::nullopt,
                           {"interactions.csv"},
                           {{"records", records.size()},
                            {"users", users.size()},
                            {"items", items.size()},
                            {"behaviors", behaviors}});
        }
        else if (*part)
        {
            const auto records = ccrec::load_interactions(part_in, fmt);
            auto split = ccrec::filter_dataset(ccrec::partition_temporal(records, part_cfg),
                                               part_cfg);
            ccrec::write_split(part_out, split, part_cfg, fmt);
            const auto [old_users, new_users] = ccrec::split_users(records,
                                                                   part_cfg.new_user_quantile);
            std::ostringstream cohorts;
            cohorts << "user_id,cohort\n";
            for (std::int64_t u : old_users)
            {
                cohorts << u << ",old\n";
            }
            for (std::int64_t u : new_users)
            {
                cohorts << u << ",new\n";
            }
            write_text(part_out + "/cohorts.csv", cohorts.str());
        }
        else if (*train)
        {
            fs::create_directories(train_out);
            const auto split = ccrec::load_split(train_data, fmt);
            const ccrec::Vocab vocab = ccrec::Vocab::from_split(split);
            ccrec::ModelConfig model_cfg = train_flags.model_config();
            model_cfg.vocab_size = vocab.size();
            ccrec::RecModel model(model_cfg, train_seed);
            const auto report = ccrec::train_global(
                model, ccrec::to_indices(split.global_train, vocab),
                train_flags.train_config(train_seed ^ 0xa5a5a5a5ULL));
            write_bytes(train_out + "/model.bin", ccrec::encode_model(model));
            write_text(train_out + "/training_report.json",
                       ccrec::train_report_to_json(report));
            nlohmann::json extra;
            extra["training_report_stable_fnv1a64"] = ccrec::hex64(
                ccrec::fnv1a64(ccrec::train_report_to_json(report, /*stable=*/true)));
            extra["note"] = "training_report.json carries wall times; the stable hash zeroes them";
            write_manifest(train_out, train_flags.to_json(), train_seed, {"model.bin"},
                           std::move(extra));
        }
        else if (*sim)
        {
            fs::create_directories(sim_out);
            const auto split = ccrec::load_split(sim_data, fmt);
            ccrec::SimulationConfig cfg;
            cfg.model = sim_flags.model_config();
            cfg.train = sim_flags.train_config(0); // run_simulation derives the seed
            cfg.fine_tune = sim_flags.fine_tune_config();
            cfg.candidates.kind = ccrec::CandidateSelection::Kind::Proportion;
            cfg.candidates.value = sim_flags.candidate_proportion;
            cfg.top_k = sim_flags.top_k;
            ccrec::MessageLog log(ccrec::parse_mode(sim_flags.mode));
            const auto report = ccrec::run_simulation(split, ccrec::parse_mode(sim_flags.mode),
                                                      cfg, sim_seed, &log);
            write_text(sim_out + "/report.json", ccrec::report_to_json(report, cfg));
            write_text(sim_out + "/message_log.ndjson", log.to_ndjson());
            write_manifest(sim_out, sim_flags.to_json(), sim_seed,
                           {"report.json", "message_log.ndjson"});
        }
        else if (*eval)
        {
            fs::create_directories(eval_out);
            const auto split = ccrec::load_split(eval_data, fmt);
            const ccrec::Vocab vocab = ccrec::Vocab::from_split(split);
            std::ifstream in(eval_model, std::ios::binary);
            ccrec::Bytes bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
            const ccrec::RecModel model = ccrec::decode_model(bytes);
            if (model.config().vocab_size != vocab.size())
            {
                throw std::runtime_error("model vocabulary does not match this partition");
            }
            ccrec::PartitionConfig pc; // bounds unused for full-vocabulary scoring
            pc.t_device = 0;
            pc.t_test = 1;
            const auto metrics = ccrec::evaluate_models(
                split, vocab, [&](std::int64_t) -> const ccrec::RecModel& { return model; },
                std::nullopt, eval_top_k, pc);
            nlohmann::json j = {
                {"recall_at_20", metrics.recall},
                {"mrr_at_20", metrics.mrr},
                {"instances", metrics.instances},
            };
            write_text(eval_out + "/metrics.json", j.dump(2) + "\n");
            write_manifest(eval_out, {{"model", eval_model}, {"top_k", eval_top_k}}, std::nullopt,
                           {"metrics.json"});
        }
        else if (*matrix)
        {
            fs::create_directories(matrix_out);
            const auto split = ccrec::load_split(matrix_data, fmt);
            nlohmann::json manifest_cfg;
            ccrec::PartitionConfig pc;
            {
                std::ifstream in(matrix_data + "/manifest.json");
                nlohmann::json m;
                in >> m;
                pc.t_device = m["config"]["t_device"].get<std::int64_t>();
                pc.t_test = m["config"]["t_test"].get<std::int64_t>();
                pc.idle_threshold_secs = m["config"]["idle_threshold_secs"].get<std::int64_t>();
            }
            ccrec::ExperimentConfig cfg;
            cfg.model = matrix_flags.model_config();
            cfg.train = matrix_flags.train_config(0);
            cfg.fine_tune = matrix_flags.fine_tune_config();
            cfg.top_k = matrix_flags.top_k;
            if (matrix_use_candidates)
            {
                ccrec::CandidateSelection sel;
                sel.kind = ccrec::CandidateSelection::Kind::Proportion;
                sel.value = matrix_flags.candidate_proportion;
                cfg.candidates = sel;
            }
            auto rows = ccrec::run_experiment_matrix(split, cfg, matrix_seed, pc);
            if (matrix_transactional)
            {
                rows.push_back(ccrec::evaluate_approach(
                    split, ccrec::Approach::TransactionalOnly, cfg, matrix_seed, pc));
            }
            std::string csv = ccrec::matrix_to_csv(rows);
            for (std::size_t ub : matrix_update_sweep)
            {
                ccrec::ExperimentConfig swept = cfg;
                swept.fine_tune.update_batch_size = ub;
                const auto row = ccrec::evaluate_approach(
                    split, ccrec::Approach::CloudClient, swept, matrix_seed, pc);
                std::ostringstream line;
                line.precision(17);
                line << "cloud_client_ub" << ub << ",recall_at_20," << row.recall << '\n'
                     << "cloud_client_ub" << ub << ",mrr_at_20," << row.mrr << '\n';
                csv += line.str();
            }
            write_text(matrix_out + "/results.csv", csv);
            nlohmann::json bundle = nlohmann::json::parse(
                ccrec::matrix_to_json(rows, matrix_seed, split_content_hash(split)));
            if (matrix_cohorts)
            {
                // aggregate per-user metrics by planted cohort
                std::vector<ccrec::InteractionRecord> records;
                for (const char* stage :
                     {"global_train.csv", "personal_train.csv", "test.csv", "transactional.csv"})
                {
                    const auto part_records =
                        ccrec::load_interactions(matrix_data + std::string("/") + stage, fmt);
                    records.insert(records.end(), part_records.begin(), part_records.end());
                }
                const auto [old_users, new_users] =
                    ccrec::split_users(records, pc.new_user_quantile);
                for (const auto& row : rows)
                {
                    for (const char* cohort : {"old", "new"})
                    {
                        const auto& members = cohort == std::string("old") ? old_users : new_users;
                        double recall_sum = 0;
                        double mrr_sum = 0;
                        std::size_t instances = 0;
                        for (const auto& [user, um] : row.per_user)
                        {
                            if (members.contains(user))
                            {
                                recall_sum += um.recall * static_cast<double>(um.instances);
                                mrr_sum += um.mrr * static_cast<double>(um.instances);
                                instances += um.instances;
                            }
                        }
                        bundle["cohorts"][ccrec::approach_name(row.approach)][cohort] = {
                            {"recall_at_20", instances ? recall_sum / instances : 0.0},
                            {"mrr_at_20", instances ? mrr_sum / instances : 0.0},
                            {"instances", instances},
                        };
                    }
                }
            }
            write_text(matrix_out + "/bundle.json", bundle.dump(2) + "\n");
            write_manifest(matrix_out, matrix_flags.to_json(), matrix_seed,
                           {"results.csv", "bundle.json"});
        }
        return 0;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
