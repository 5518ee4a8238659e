#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ner/corpus_io.hpp"
#include "ner/errors.hpp"
#include "ner/experiment.hpp"
#include "testutil.hpp"

using namespace ner;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& stem) {
        path = fs::temp_directory_path() / (stem + "-" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

// Two tiny on-disk datasets (IOB conll) plus a config exercising mono and
// merged-pair regimes with the tiny encoder.
struct Playground {
    TempDir dir{"ner-exp"};
    std::string config_json;

    Playground() {
        auto write_corpus = [&](const std::string& name, const std::string& mark,
                                std::uint64_t seed) {
            const auto lang = testutil::make_synthetic_language(name, mark, "mr", seed, 24, 8);
            io::save_corpus_file(lang.train, (dir.path / (name + ".train.conll")).string());
            io::save_corpus_file(lang.test, (dir.path / (name + ".test.conll")).string());
            io::save_corpus_file(lang.test, (dir.path / (name + ".tune.conll")).string());
        };
        write_corpus("alpha", "अ", 1);
        write_corpus("beta", "ब", 2);

        std::ostringstream config;
        config << R"({
  "seed": 77,
  "output_dir": ")" << (dir.path / "runs").string() << R"(",
  "datasets": [
    {"name": "alpha", "format": "conll", "language": "mr", "tag_map": "ijcnlp_flat",
     "train": ")" << (dir.path / "alpha.train.conll").string() << R"(",
     "test": ")" << (dir.path / "alpha.test.conll").string() << R"(",
     "tune": ")" << (dir.path / "alpha.tune.conll").string() << R"("},
    {"name": "beta", "format": "conll", "language": "mr", "tag_map": "ijcnlp_flat",
     "train": ")" << (dir.path / "beta.train.conll").string() << R"(",
     "test": ")" << (dir.path / "beta.test.conll").string() << R"(",
     "tune": ")" << (dir.path / "beta.tune.conll").string() << R"("}
  ],
  "regimes": [
    {"kind": "mono", "members": ["alpha"]},
    {"kind": "merged-pair", "members": ["alpha", "beta"], "tests": ["alpha"]}
  ],
  "encoders": ["tiny-test"],
  "train": {"epochs": 2, "batch_size": 8, "max_sequence_length": 32}
})";
        config_json = config.str();
    }

    experiment::ExperimentConfig config() const {
        return experiment::parse_config(config_json, "inline");
    }
    experiment::RunOptions options() const {
        experiment::RunOptions opts;
        opts.store = (dir.path / "runs").string();
        return opts;
    }
};

}  // namespace

TEST_CASE("config parsing keeps datasets, regimes, encoders and overrides") {
    const Playground pg;
    const auto config = pg.config();
    CHECK(config.seed == 77);
    REQUIRE(config.datasets.size() == 2);
    CHECK(config.datasets[0].name == "alpha");
    CHECK_FALSE(config.datasets[0].single_file());
    REQUIRE(config.regimes.size() == 2);
    CHECK(config.regimes[1].test_sets() == std::vector<std::string>{"alpha"});
    CHECK(config.regimes[0].test_sets() == std::vector<std::string>{"alpha"});
    CHECK(config.encoders == std::vector<std::string>{"tiny-test"});
    REQUIRE(config.train.epochs.has_value());
    CHECK(*config.train.epochs == 2);
}

TEST_CASE("the mono + restricted merged-pair config yields exactly two records") {
    const Playground pg;
    const auto records = experiment::run_experiment(pg.config(), pg.options());
    CHECK(records.size() == 2);
    std::size_t mono = 0, merged = 0;
    for (const auto& record : records) {
        CHECK(record.test_dataset == "alpha");
        CHECK(record.encoder == "tiny-test");
        CHECK_FALSE(record.run_id.empty());
        CHECK(record.metrics.token_accuracy >= 0.0);
        if (record.regime == "mono") ++mono;
        if (record.regime == "merged-pair") ++merged;
    }
    CHECK(mono == 1);
    CHECK(merged == 1);
}

TEST_CASE("re-running an unchanged config adds zero new records") {
    const Playground pg;
    const auto first = experiment::run_experiment(pg.config(), pg.options());
    const auto store = pg.options().store;
    std::size_t dirs_before = 0;
    for (const auto& entry : fs::directory_iterator(store)) {
        (void)entry;
        ++dirs_before;
    }
    const auto second = experiment::run_experiment(pg.config(), pg.options());
    std::size_t dirs_after = 0;
    for (const auto& entry : fs::directory_iterator(store)) {
        (void)entry;
        ++dirs_after;
    }
    CHECK(dirs_before == dirs_after);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].run_id == second[i].run_id);
        CHECK(first[i].created_at_us == second[i].created_at_us);  // reused, not re-trained
    }
}

TEST_CASE("--force re-executes existing cells") {
    const Playground pg;
    const auto first = experiment::run_experiment(pg.config(), pg.options());
    auto opts = pg.options();
    opts.force = true;
    const auto second = experiment::run_experiment(pg.config(), opts);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].run_id == second[i].run_id);  // same content address
        CHECK(second[i].created_at_us >= first[i].created_at_us);
    }
}

TEST_CASE("run records persist everything needed to re-execute the cell") {
    const Playground pg;
    const auto records = experiment::run_experiment(pg.config(), pg.options());
    for (const auto& record : records) {
        CHECK_FALSE(record.train_fingerprint.empty());
        CHECK_FALSE(record.test_fingerprint.empty());
        CHECK_FALSE(record.tune_fingerprint.empty());
        CHECK_FALSE(record.backend.empty());
        CHECK(record.config_snapshot_json.find("train_config") != std::string::npos);
        const fs::path tagger_dir = fs::path(pg.options().store) / record.run_id / "tagger";
        CHECK(fs::exists(tagger_dir / "manifest.json"));
        CHECK(fs::exists(tagger_dir / "weights.bin"));
    }
}

TEST_CASE("validation fails fast before any training") {
    const Playground pg;
    auto config = pg.config();

    SUBCASE("unreadable dataset path") {
        config.datasets[0].train_path = "/no/such/file.conll";
        CHECK_THROWS_AS(experiment::run_experiment(config, pg.options()), ConfigError);
    }
    SUBCASE("regime referencing an undeclared dataset") {
        config.regimes[0].members = {"gamma"};
        CHECK_THROWS_AS(experiment::run_experiment(config, pg.options()), ConfigError);
    }
    SUBCASE("undeclared designated test set") {
        config.regimes[1].tests = {"gamma"};
        CHECK_THROWS_AS(experiment::run_experiment(config, pg.options()), ConfigError);
    }
    SUBCASE("unknown encoder key") {
        config.encoders = {"bert-large"};
        CHECK_THROWS_AS(experiment::run_experiment(config, pg.options()), ConfigError);
    }
    SUBCASE("mono regime with two members") {
        config.regimes[0].members = {"alpha", "beta"};
        CHECK_THROWS_AS(experiment::run_experiment(config, pg.options()), ConfigError);
    }
    SUBCASE("unknown tag map") {
        config.datasets[0].tag_map = "nope";
        CHECK_THROWS_AS(experiment::run_experiment(config, pg.options()), ConfigError);
    }
    // fail-fast: the store must not even have been created
    CHECK_FALSE(fs::exists(pg.options().store));
}

TEST_CASE("list_runs filters and sorts records") {
    const Playground pg;
    experiment::run_experiment(pg.config(), pg.options());
    const auto store = pg.options().store;

    const auto all = experiment::list_runs(store, "");
    CHECK(all.size() == 2);
    for (std::size_t i = 1; i < all.size(); ++i) {
        CHECK(all[i - 1].created_at_us <= all[i].created_at_us);
    }

    const auto mono = experiment::list_runs(store, "regime=mono");
    REQUIRE(mono.size() == 1);
    CHECK(mono[0].regime == "mono");

    const auto tiny = experiment::list_runs(store, "encoder=tiny-test,test=alpha");
    CHECK(tiny.size() == 2);

    CHECK(experiment::list_runs(store, "encoder=nothing").empty());
    CHECK_THROWS_AS(experiment::list_runs(store, "bogus=1"), ConfigError);
}

TEST_CASE("an empty store lists nothing") {
    TempDir dir("ner-empty-store");
    CHECK(experiment::list_runs(dir.path.string(), "").empty());
}

TEST_CASE("a corrupt record names its file") {
    const Playground pg;
    experiment::run_experiment(pg.config(), pg.options());
    const auto store = pg.options().store;
    fs::path victim;
    for (const auto& entry : fs::directory_iterator(store)) {
        victim = entry.path() / "record.json";
        break;
    }
    std::ofstream out(victim, std::ios::trunc);
    out << "{ not json";
    out.close();
    try {
        experiment::list_runs(store, "");
        FAIL("expected CorruptStore");
    } catch (const CorruptStore& e) {
        CHECK(e.file() == victim.string());
    }
}

TEST_CASE("reports render both styles and the csv round-trips") {
    const Playground pg;
    const auto records = experiment::run_experiment(pg.config(), pg.options());

    const std::string text = experiment::render_report(records, "text");
    CHECK(text.find("tiny-test") != std::string::npos);
    CHECK(text.find("mono") != std::string::npos);
    CHECK(text.find("merged-pair") != std::string::npos);
    CHECK(text.find("metric:") != std::string::npos);
    CHECK(text.find("config fingerprints:") != std::string::npos);

    const std::string csv = experiment::render_report(records, "csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "test_dataset,regime,encoder,micro_f1,macro_f1,token_accuracy,run_id");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> fields;
        std::istringstream split(line);
        std::string field;
        while (std::getline(split, field, ',')) fields.push_back(field);
        CHECK(fields.size() == 7);
        ++rows;
    }
    CHECK(rows == records.size());

    CHECK_THROWS_AS(experiment::render_report(records, "html"), ConfigError);
    const std::string empty = experiment::render_report({}, "csv");
    CHECK(empty == "test_dataset,regime,encoder,micro_f1,macro_f1,token_accuracy,run_id\n");
}

TEST_CASE("expectations compare runs against target cells") {
    const Playground pg;
    const auto records = experiment::run_experiment(pg.config(), pg.options());
    const fs::path expect = pg.dir.path / "expect.json";
    {
        std::ofstream out(expect);
        out << R"([
  {"test_dataset": "alpha", "regime": "mono", "encoder": "tiny-test",
   "micro_f1": )" << records[0].metrics.micro_f1 * 100.0 << R"(, "tolerance": 2.0},
  {"test_dataset": "alpha", "regime": "merged-all", "encoder": "tiny-test",
   "micro_f1": 80.0, "tolerance": 2.0}
])";
    }
    const std::string report = experiment::render_expectations(records, expect.string());
    CHECK(report.find("OK") != std::string::npos);
    CHECK(report.find("MISSING") != std::string::npos);
}

TEST_CASE("the shipped paper-scale config enumerates 84 cells") {
    std::ifstream in(std::string(NER_CONFIG_DIR) + "/paper_scale.json");
    REQUIRE(static_cast<bool>(in));
    std::stringstream buf;
    buf << in.rdbuf();
    const auto config = experiment::parse_config(buf.str(), "paper_scale.json");
    std::size_t cells = 0;
    for (const auto& regime : config.regimes) cells += regime.test_sets().size();
    CHECK(cells == 12);  // 4 mono + 2x2 merged-pair + 4 merged-all
    CHECK(config.encoders.size() == 7);
    CHECK(cells * config.encoders.size() == 84);
}

TEST_CASE("single-file datasets split deterministically inside the runner") {
    TempDir dir("ner-singlefile");
    const auto lang = testutil::make_synthetic_language("solo", "क", "hi", 9, 40, 0);
    io::save_corpus_file(lang.train, (dir.path / "solo.conll").string());

    std::ostringstream config;
    config << R"({
  "seed": 5,
  "output_dir": ")" << (dir.path / "runs").string() << R"(",
  "datasets": [
    {"name": "solo", "format": "conll", "language": "hi", "tag_map": "ijcnlp_flat",
     "path": ")" << (dir.path / "solo.conll").string() << R"(",
     "split": {"fractions": ["0.70", "0.15", "0.15"], "seed": 3}}
  ],
  "regimes": [{"kind": "mono", "members": ["solo"]}],
  "encoders": ["tiny-test"],
  "train": {"epochs": 1, "batch_size": 8, "max_sequence_length": 32}
})";
    experiment::RunOptions opts;
    opts.store = (dir.path / "runs").string();
    const auto records =
        experiment::run_experiment(experiment::parse_config(config.str(), "inline"), opts);
    REQUIRE(records.size() == 1);
    // 40 sentences -> 28/6/6 under the floor rule
    const auto again =
        experiment::run_experiment(experiment::parse_config(config.str(), "inline"), opts);
    CHECK(again[0].run_id == records[0].run_id);
    CHECK(again[0].test_fingerprint == records[0].test_fingerprint);
}
