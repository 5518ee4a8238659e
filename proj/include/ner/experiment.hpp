#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ner/corpus.hpp"
#include "ner/evaluation.hpp"
#include "ner/harmonize.hpp"
#include "ner/modeling.hpp"

namespace ner::experiment {

// One named corpus source: either a single file plus a split spec, or
// pre-split train/test(/tune) files. A missing tune split is replaced by a
// seed-deterministic 10% holdout from train.
struct DatasetSpec {
    std::string name;
    std::string format;    // conll | wikiann
    std::string language;  // hi | mr
    std::string tag_map;   // builtin name or file path

    std::string path;  // single-file mode
    std::optional<harmonize::SplitSpec> split;

    std::string train_path;  // pre-split mode
    std::string test_path;
    std::string tune_path;  // optional

    bool single_file() const { return !path.empty(); }
};

struct RegimeSpec {
    std::string kind;  // mono | merged-pair | merged-all
    std::vector<std::string> members;
    std::vector<std::string> tests;  // designated test sets; defaults to members

    const std::vector<std::string>& test_sets() const { return tests.empty() ? members : tests; }
    std::string label() const;
};

struct TrainOverrides {
    std::optional<int> epochs;
    std::optional<double> learning_rate;
    std::optional<int> batch_size;
    std::optional<int> max_sequence_length;
    std::optional<std::uint64_t> seed;
};

struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::string output_dir = "runs";
    std::vector<DatasetSpec> datasets;
    std::vector<RegimeSpec> regimes;
    std::vector<std::string> encoders;
    TrainOverrides train;

    // canonical JSON of the config; hashed into run ids
    std::string snapshot_json() const;
};

ExperimentConfig load_config_file(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text, const std::string& origin);

struct RunRecord {
    std::string run_id;  // content-addressed: derived from snapshot + fingerprints + seed
    std::string encoder;
    std::string regime;         // mono | merged-pair | merged-all
    std::string train_dataset;  // joined member names
    std::string test_dataset;
    std::string train_fingerprint;
    std::string test_fingerprint;
    std::string tune_fingerprint;
    std::string tune_protocol;  // mono-tune | merged-tune
    eval::MetricReport metrics;
    double wall_time_seconds = 0.0;
    std::string backend;
    std::string created_at;            // UTC ISO-8601
    std::int64_t created_at_us = 0;    // ordering key
    std::string config_snapshot_json;  // resolved train config + dataset roster

    eval::RunCell cell() const;
};

struct RunOptions {
    std::string store;  // defaults to config.output_dir
    bool force = false;
    bool offline = false;
    std::optional<std::uint64_t> seed_override;
    std::string encoder_cache;
    bool verbose = false;
};

// Validates everything up front (paths, regime membership, encoder keys),
// then trains one tagger per (regime, encoder) and persists one RunRecord
// per (regime, encoder, test set). Existing run ids are skipped unless
// options.force. The store tolerates concurrent writers: each record is
// staged in a temp directory and atomically renamed into place.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const RunOptions& options);

// Filter syntax: comma-separated `key=value` over encoder / regime / test /
// train; empty filter matches everything. Records come back sorted by
// creation time. Unreadable records raise CorruptStore with the file name.
std::vector<RunRecord> list_runs(const std::string& store, const std::string& filter = "");

// Renders via eval::compare. style is "text" or "csv"; text output carries
// the metric-definition footer and the config fingerprints.
std::string render_report(const std::vector<RunRecord>& records, const std::string& style);

// The comparison emitted for the optional full-scale tier: expected cells
// come from a JSON file [{"test_dataset","regime","encoder","micro_f1",
// "tolerance"}], values in percent.
std::string render_expectations(const std::vector<RunRecord>& records,
                                const std::string& expect_file);

}  // namespace ner::experiment
