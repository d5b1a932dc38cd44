#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "qexgan/cli.hpp"
#include "qexgan/pipeline.hpp"
#include "test_util.hpp"

using namespace qexgan;
namespace fs = std::filesystem;

namespace {

struct CaptureStream {
    explicit CaptureStream(std::ostream& stream)
        : stream_(stream), old_(stream.rdbuf(buffer_.rdbuf())) {}
    ~CaptureStream() { stream_.rdbuf(old_); }
    std::string text() const { return buffer_.str(); }

private:
    std::ostream& stream_;
    std::ostringstream buffer_;
    std::streambuf* old_;
};

/// Corpus, embeddings, and a tiny-model config written into the temp dir.
struct PipelineFixture {
    testutil::TempDir dir;
    std::string config_path;
    RunConfig config;

    PipelineFixture() {
        const std::vector<std::string> words = {"red",  "blue", "long", "short", "dress",
                                                "shirt", "shoe", "silk", "wool",  "warm",
                                                "cheap", "nice"};
        std::ostringstream corpus;
        for (int i = 0; i < 20; ++i) {
            const auto& q1 = words[std::size_t(i % 12)];
            const auto& q2 = words[std::size_t((i * 5 + 3) % 12)];
            const auto& d1 = words[std::size_t((i * 7 + 1) % 12)];
            const auto& d2 = words[std::size_t((i * 3 + 4) % 12)];
            corpus << nlohmann::json{{"query", q1 + " " + q2},
                                     {"document", q1 + " " + d1 + " " + d2}}
                          .dump()
                   << "\n";
        }
        dir.file("corpus.jsonl", corpus.str());

        std::ostringstream vectors;
        vectors << words.size() << " 4\n";
        for (std::size_t i = 0; i < words.size(); ++i) {
            vectors << words[i] << " " << 0.1 * double(i + 1) << " "
                    << 0.2 * double(i % 3) << " " << 0.1 * double((i * 7) % 5) << " "
                    << (i % 2 == 0 ? 0.4 : -0.3) << "\n";
        }
        dir.file("embeddings.vec", vectors.str());

        config.corpus_path = (dir.path / "corpus.jsonl").string();
        config.embeddings_path = (dir.path / "embeddings.vec").string();
        config.workdir = (dir.path / "run").string();
        config.strategy = "self";
        config.seed = 1;
        config.conditions.k_docs = 2;
        config.conditions.k_words = 2;
        config.conditions.leaf_size = 4;

        config.generator.token_dim = 4;
        config.generator.condition_dim = 4;
        config.generator.hidden_dim = 8;
        config.generator.encoder_layers = 1;
        config.generator.decoder_layers = 1;
        config.generator.attention_heads = 2;
        config.generator.dropout = 0.0;
        config.generator.max_expansion_len = 4;
        config.generator.learning_rate = 0.01;
        config.generator.pretrain_epochs = 4;
        config.generator.batch_size = 8;

        config.discriminator.token_dim = 4;
        config.discriminator.lstm_hidden = 4;
        config.discriminator.dropout = 0.0;
        config.discriminator.epochs = 4;
        config.discriminator.batch_size = 8;

        config.adversarial.rollout_count = 2;
        config.adversarial.max_expansion_len = 4;
        config.adversarial.epochs = 2;
        config.adversarial.patience = 3;
        config.adversarial.learning_rate = 1e-4;

        config_path = dir.file("config.json", config.to_json().dump(2) + "\n");
    }

    WorkdirLayout layout() const { return WorkdirLayout(config.workdir); }
};

std::map<std::string, std::string> dir_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            out[fs::relative(entry.path(), root).string()] =
                read_file(entry.path().string());
        }
    }
    return out;
}

std::vector<std::string> lines_of(const std::string& path) {
    std::vector<std::string> lines;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace

TEST_CASE("prepare writes hashed artifacts and re-runs byte-identically") {
    PipelineFixture fx;
    CHECK(cli::run({"prepare", "--config", fx.config_path}) == 0);

    const WorkdirLayout layout = fx.layout();
    for (const auto& path : {layout.corpus(), layout.vocabulary(), layout.embeddings(),
                             layout.conditions(), layout.manifest(),
                             layout.corpus_stats_report()}) {
        CHECK(fs::exists(path));
    }

    const auto manifest = nlohmann::json::parse(read_file(layout.manifest().string()));
    CHECK(manifest.at("strategy") == "self");
    CHECK(manifest.at("artifacts").size() == 4);
    for (const auto& [name, entry] : manifest.at("artifacts").items()) {
        const fs::path stored = layout.root / entry.at("path").get<std::string>();
        CHECK(entry.at("hash").get<std::string>() ==
              to_hex(fnv1a64(read_file(stored.string()))));
    }

    const auto before = dir_bytes(layout.artifacts_dir());
    CHECK(cli::run({"prepare", "--config", fx.config_path}) == 0);
    CHECK(dir_bytes(layout.artifacts_dir()) == before);
}

TEST_CASE("the six commands chain into a deterministic end-to-end run") {
    PipelineFixture fx;
    REQUIRE(cli::run({"prepare", "--config", fx.config_path}) == 0);
    const WorkdirLayout layout = fx.layout();

    REQUIRE(cli::run({"pretrain-gen", "--config", fx.config_path}) == 0);
    CHECK(fs::exists(layout.generator_checkpoint()));
    const auto gen_lines = lines_of(layout.generator_history().string());
    REQUIRE(gen_lines.size() == 4);
    for (const auto& line : gen_lines) {
        const auto entry = nlohmann::json::parse(line);
        CHECK(entry.contains("epoch"));
        CHECK(entry.contains("train_ce"));
        if (entry.contains("valid_ce")) {
            CHECK(std::abs(entry.at("valid_ppl").get<double>() -
                           std::exp(entry.at("valid_ce").get<double>())) < 1e-9);
        }
    }

    REQUIRE(cli::run({"pretrain-gen", "--config", fx.config_path, "--half-epochs"}) == 0);
    CHECK(lines_of(layout.generator_history().string()).size() == 2);
    REQUIRE(cli::run({"pretrain-gen", "--config", fx.config_path}) == 0);

    REQUIRE(cli::run({"pretrain-disc", "--config", fx.config_path}) == 0);
    CHECK(fs::exists(layout.discriminator_checkpoint()));
    CHECK(lines_of(layout.discriminator_history().string()).size() == 4);
    const auto disc_report =
        nlohmann::json::parse(read_file(layout.discriminator_report().string()));
    CHECK(disc_report.at("synthetic_split") == "test");
    CHECK(disc_report.at("examples_per_class").get<int>() == 2);

    REQUIRE(cli::run({"adv-train", "--config", fx.config_path}) == 0);
    CHECK(fs::exists(layout.adversarial_checkpoint()));
    CHECK(fs::exists(layout.adversarial_best_checkpoint()));
    CHECK(lines_of(layout.adversarial_history().string()).size() == 2);

    const std::string queries_path =
        fx.dir.file("queries.txt", "red dress\nblue shirt\nwarm wool\n");
    const std::string out_path = (fx.dir.path / "expansions.jsonl").string();
    REQUIRE(cli::run({"expand", "--config", fx.config_path, "--queries-file", queries_path,
                      "--output", out_path}) == 0);
    const auto expansions = lines_of(out_path);
    REQUIRE(expansions.size() == 3);
    const std::vector<std::string> expected_queries = {"red dress", "blue shirt", "warm wool"};
    for (std::size_t i = 0; i < expansions.size(); ++i) {
        const auto entry = nlohmann::json::parse(expansions[i]);
        CHECK(entry.size() == 4);
        CHECK(entry.at("query") == expected_queries[i]);
        CHECK(entry.at("condition_strategy") == "self");
        REQUIRE(entry.contains("expansion_terms"));
        std::string expected = expected_queries[i];
        for (const auto& term : entry.at("expansion_terms")) {
            expected += " " + term.get<std::string>();
        }
        CHECK(entry.at("expanded_query") == expected);
    }

    {
        CaptureStream out(std::cout);
        REQUIRE(cli::run({"evaluate", "--config", fx.config_path}) == 0);
        CHECK(out.text().find(" | ") != std::string::npos);
    }
    CHECK(fs::exists(layout.evaluation_report()));
    const std::string row = read_file(layout.evaluation_row().string());
    CHECK(std::count(row.begin(), row.end(), '|') == 3);

    const auto report_bytes = read_file(layout.evaluation_report().string());
    {
        CaptureStream out(std::cout);
        REQUIRE(cli::run({"evaluate", "--config", fx.config_path}) == 0);
    }
    CHECK(read_file(layout.evaluation_report().string()) == report_bytes);
}

TEST_CASE("a held lock makes commands refuse the workdir") {
    PipelineFixture fx;
    const WorkdirLayout layout = fx.layout();
    fs::create_directories(layout.root);
    write_file(layout.lock_file().string(), "");

    CaptureStream err(std::cerr);
    CHECK(cli::run({"prepare", "--config", fx.config_path}) == 2);
    CHECK(err.text().find("locked") != std::string::npos);

    fs::remove(layout.lock_file());
    CHECK(cli::run({"prepare", "--config", fx.config_path}) == 0);
    CHECK_FALSE(fs::exists(layout.lock_file()));
}

TEST_CASE("checkpoints are refused after the prepared artifacts change") {
    PipelineFixture fx;
    REQUIRE(cli::run({"prepare", "--config", fx.config_path}) == 0);
    REQUIRE(cli::run({"pretrain-gen", "--config", fx.config_path}) == 0);

    std::string vectors = read_file(fx.config.embeddings_path);
    vectors.replace(0, 2, "13");
    vectors += "extra 0.9 0.8 0.7 0.6\n";
    write_file(fx.config.embeddings_path, vectors);
    REQUIRE(cli::run({"prepare", "--config", fx.config_path}) == 0);

    CaptureStream err(std::cerr);
    CHECK(cli::run({"pretrain-disc", "--config", fx.config_path}) == 2);
    CHECK(err.text().find("hash mismatch") != std::string::npos);
    CHECK(err.text().find("checkpoint has") != std::string::npos);
    CHECK(err.text().find("artifacts have") != std::string::npos);
}

TEST_CASE("tampered artifacts are rejected against the manifest") {
    PipelineFixture fx;
    REQUIRE(cli::run({"prepare", "--config", fx.config_path}) == 0);
    const WorkdirLayout layout = fx.layout();
    write_file(layout.vocabulary().string(),
               read_file(layout.vocabulary().string()) + " ");

    CaptureStream err(std::cerr);
    CHECK(cli::run({"pretrain-gen", "--config", fx.config_path}) == 2);
    const std::string message = err.text();
    CHECK(message.find("hash mismatch") != std::string::npos);
    CHECK(message.find("manifest has") != std::string::npos);
    CHECK(message.find("file has") != std::string::npos);
}

TEST_CASE("argument and configuration problems exit with code 2") {
    PipelineFixture fx;
    CaptureStream err(std::cerr);
    CaptureStream out(std::cout);

    CHECK(cli::run({"prepare", "--config", "/no/such/config.json"}) == 2);
    CHECK(cli::run({"no-such-command"}) == 2);
    CHECK(cli::run({}) == 2);
    CHECK(cli::run({"--help"}) == 0);
    CHECK(cli::run({"prepare", "--config", fx.config_path, "--strategy", "magic"}) == 2);
    CHECK(cli::run({"pretrain-disc", "--config", fx.config_path, "--synthetic-split",
                    "valid"}) == 2);
    CHECK(cli::run({"pretrain-gen", "--config", fx.config_path, "--epochs", "zero"}) == 2);

    const std::string broken = fx.dir.file("broken.json", "{\"corpus\": [,]\n");
    CHECK(cli::run({"prepare", "--config", broken}) == 2);

    CHECK(cli::run({"pretrain-gen", "--config", fx.config_path}) == 2);
    CHECK(err.text().find("prepare") != std::string::npos);
}

TEST_CASE("the workdir falls back to QEXGAN_WORKDIR when unset elsewhere") {
    PipelineFixture fx;
    RunConfig config = fx.config;
    config.workdir.clear();
    const std::string cfg = fx.dir.file("no_workdir.json", config.to_json().dump(2) + "\n");

    {
        CaptureStream err(std::cerr);
        CHECK(cli::run({"prepare", "--config", cfg}) == 2);
        CHECK(err.text().find("workdir") != std::string::npos);
    }

    const std::string env_dir = (fx.dir.path / "env_run").string();
    setenv("QEXGAN_WORKDIR", env_dir.c_str(), 1);
    CHECK(cli::run({"prepare", "--config", cfg}) == 0);
    unsetenv("QEXGAN_WORKDIR");
    CHECK(fs::exists(fs::path(env_dir) / "artifacts" / "manifest.json"));

    const std::string flag_dir = (fx.dir.path / "flag_run").string();
    CHECK(cli::run({"prepare", "--config", cfg, "--workdir", flag_dir}) == 0);
    CHECK(fs::exists(fs::path(flag_dir) / "artifacts" / "manifest.json"));
}

TEST_CASE("expand validates queries and flags all-unknown conditions") {
    PipelineFixture fx;
    REQUIRE(cli::run({"prepare", "--config", fx.config_path}) == 0);
    REQUIRE(cli::run({"pretrain-gen", "--config", fx.config_path}) == 0);

    {
        CaptureStream err(std::cerr);
        CHECK(cli::run({"expand", "--config", fx.config_path, "--query", "..."}) == 2);
        CHECK(err.text().find("empty after tokenization") != std::string::npos);
    }

    CaptureStream err(std::cerr);
    CaptureStream out(std::cout);
    CHECK(cli::run({"expand", "--config", fx.config_path, "--query", "zzz qqq"}) == 0);
    CHECK(err.text().find("zero vector") != std::string::npos);
    const auto entry = nlohmann::json::parse(out.text());
    CHECK(entry.at("query") == "zzz qqq");
}

TEST_CASE("the run seed feeds the split and the per-module seeds") {
    PipelineFixture fx;
    REQUIRE(cli::run({"prepare", "--config", fx.config_path}) == 0);
    const std::string other_dir = (fx.dir.path / "other_seed").string();
    REQUIRE(cli::run({"prepare", "--config", fx.config_path, "--workdir", other_dir,
                      "--seed", "2"}) == 0);
    const WorkdirLayout layout = fx.layout();
    CHECK(read_file(layout.corpus().string()) !=
          read_file((fs::path(other_dir) / "artifacts" / "corpus.jsonl").string()));

    const RunConfig resolved = fx.config.resolved();
    CHECK(resolved.generator.seed == derive_seed(fx.config.seed, 0x11));
    CHECK(resolved.discriminator.seed == derive_seed(fx.config.seed, 0x22));
    CHECK(resolved.adversarial.seed == derive_seed(fx.config.seed, 0x33));
}

TEST_CASE("run configs round-trip through JSON") {
    PipelineFixture fx;
    const RunConfig loaded = RunConfig::load(fx.config_path);
    CHECK(loaded.to_json() == fx.config.to_json());
    CHECK(RunConfig::from_json(loaded.to_json()).to_json().dump(2) ==
          loaded.to_json().dump(2));
    CHECK_THROWS_AS(RunConfig::load((fx.dir.path / "absent.json").string()),
                    ValidationError);
}
