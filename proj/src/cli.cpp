#include "qexgan/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "qexgan/pipeline.hpp"

namespace qexgan::cli {

namespace {

/// Flags shared by every subcommand; resolved into a RunConfig afterwards.
struct CommonFlags {
    std::string config_path;
    std::string workdir;
    std::string strategy;
    std::optional<std::uint64_t> seed;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "run configuration (JSON)");
    cmd->add_option("--workdir", flags.workdir,
                    "artifact directory (falls back to config, then $QEXGAN_WORKDIR)");
    cmd->add_option("--strategy", flags.strategy, "condition strategy")
        ->check(CLI::IsMember({"self", "tfidf", "doc-sim", "word-sim"}));
    cmd->add_option("--seed", flags.seed, "run seed (overrides config)");
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig config =
        flags.config_path.empty() ? RunConfig{} : RunConfig::load(flags.config_path);
    if (!flags.workdir.empty()) config.workdir = flags.workdir;
    if (config.workdir.empty()) {
        if (const char* env = std::getenv("QEXGAN_WORKDIR")) config.workdir = env;
    }
    if (!flags.strategy.empty()) config.strategy = flags.strategy;
    if (flags.seed) config.seed = *flags.seed;
    strategy_from_name(config.strategy);
    return config;
}

std::vector<std::string> read_query_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open queries file: " + path);
    std::vector<std::string> queries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) queries.push_back(line);
    }
    if (queries.empty()) throw ValidationError("queries file has no non-empty lines: " + path);
    return queries;
}

void print_generator_history(const std::vector<GeneratorEpochStats>& history) {
    for (const auto& stats : history) {
        std::cout << "epoch " << stats.epoch << " train_ce " << fmt_double(stats.train_ce);
        if (stats.valid_ce) std::cout << " valid_ce " << fmt_double(*stats.valid_ce);
        if (stats.valid_ppl) std::cout << " valid_ppl " << fmt_double(*stats.valid_ppl);
        std::cout << '\n';
    }
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"conditional GAN query expansion pipeline", "qexgan"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::optional<int> epochs;
    bool half_epochs = false;
    std::string reward_mode;
    std::string synthetic_split = "test";
    std::string corpus_path;
    std::string embeddings_path;
    std::vector<std::string> queries;
    std::string queries_file;
    std::string output_path;

    CLI::App* prepare = app.add_subcommand("prepare", "tokenize, split and index the corpus");
    add_common_flags(prepare, flags);
    prepare->add_option("--corpus", corpus_path, "query/document pair file (overrides config)");
    prepare->add_option("--embeddings", embeddings_path,
                        "word vector file (overrides config)");

    CLI::App* pre_gen = app.add_subcommand("pretrain-gen", "teacher-forced generator training");
    add_common_flags(pre_gen, flags);
    pre_gen->add_option("--epochs", epochs, "epoch count (overrides config)");
    pre_gen->add_flag("--half-epochs", half_epochs, "run half the configured epochs");

    CLI::App* pre_disc =
        app.add_subcommand("pretrain-disc", "train the discriminator on real vs sampled pairs");
    add_common_flags(pre_disc, flags);
    pre_disc->add_option("--epochs", epochs, "epoch count (overrides config)");
    pre_disc->add_flag("--half-epochs", half_epochs, "run half the configured epochs");
    pre_disc->add_option("--synthetic-split", synthetic_split,
                         "split whose queries seed the synthetic examples")
        ->check(CLI::IsMember({"test", "train"}));

    CLI::App* adv = app.add_subcommand("adv-train", "policy-gradient fine-tuning");
    add_common_flags(adv, flags);
    adv->add_option("--epochs", epochs, "epoch count (overrides config)");
    adv->add_option("--reward-mode", reward_mode, "reward signal")
        ->check(CLI::IsMember({"prob-real", "prob_real", "disc-loss", "disc_loss"}));

    CLI::App* expand = app.add_subcommand("expand", "expand queries with the trained generator");
    add_common_flags(expand, flags);
    expand->add_option("--query", queries, "query text (repeatable)");
    expand->add_option("--queries-file", queries_file, "file with one query per line");
    expand->add_option("--output", output_path, "write JSONL here instead of stdout");

    CLI::App* evaluate = app.add_subcommand("evaluate", "score the test split");
    add_common_flags(evaluate, flags);
    evaluate->add_option("--reward-mode", reward_mode, "reward mode recorded in the report")
        ->check(CLI::IsMember({"prob-real", "prob_real", "disc-loss", "disc_loss"}));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    RunConfig config = resolve_config(flags);
    if (!reward_mode.empty()) {
        config.adversarial.reward_mode = reward_mode_from_name(reward_mode);
    }

    if (app.got_subcommand(prepare)) {
        if (!corpus_path.empty()) config.corpus_path = corpus_path;
        if (!embeddings_path.empty()) config.embeddings_path = embeddings_path;
        cmd_prepare(config);
        std::cout << "prepared " << WorkdirLayout(config.workdir).manifest().string() << '\n';
        return 0;
    }
    if (app.got_subcommand(pre_gen)) {
        print_generator_history(cmd_pretrain_gen(config, epochs, half_epochs));
        return 0;
    }
    if (app.got_subcommand(pre_disc)) {
        const auto summary = cmd_pretrain_disc(config, epochs, half_epochs, synthetic_split);
        for (const auto& stats : summary.history) {
            std::cout << "epoch " << stats.epoch << " loss " << fmt_double(stats.loss)
                      << " accuracy " << fmt_double(stats.accuracy) << '\n';
        }
        return 0;
    }
    if (app.got_subcommand(adv)) {
        const auto result = cmd_adv_train(config, epochs);
        for (const auto& warning : result.warnings) std::cerr << "warning: " << warning << '\n';
        for (const auto& stats : result.history) {
            std::cout << "epoch " << stats.epoch << " mean_reward "
                      << fmt_double(stats.mean_reward) << " policy_loss "
                      << fmt_double(stats.policy_loss);
            if (stats.valid_ce) std::cout << " valid_ce " << fmt_double(*stats.valid_ce);
            std::cout << '\n';
        }
        std::cout << "best epoch " << result.best_epoch << '\n';
        return 0;
    }
    if (app.got_subcommand(expand)) {
        std::vector<std::string> all = queries;
        if (!queries_file.empty()) {
            const auto from_file = read_query_lines(queries_file);
            all.insert(all.end(), from_file.begin(), from_file.end());
        }
        if (all.empty()) {
            throw ValidationError("expand needs at least one --query or a --queries-file");
        }
        const auto outputs = cmd_expand(config, all);
        std::ostringstream lines;
        for (const auto& output : outputs) {
            for (const auto& warning : output.warnings) {
                std::cerr << "warning: " << warning << '\n';
            }
            lines << output.to_json().dump() << '\n';
        }
        if (output_path.empty()) {
            std::cout << lines.str();
        } else {
            write_file(output_path, lines.str());
        }
        return 0;
    }
    const auto report = cmd_evaluate(config);
    std::cout << report.table_row() << '\n';
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    try {
        return dispatch(args);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace qexgan::cli
