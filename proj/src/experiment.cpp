#include "ner/experiment.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "ner/corpus_io.hpp"
#include "ner/errors.hpp"
#include "ner/rng.hpp"
#include "ner/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ner::experiment {

namespace {

json metrics_to_json(const eval::MetricReport& m) {
    json per_tag = json::object();
    for (const auto& [tag, tm] : m.per_tag) {
        per_tag[tag] = {{"precision", tm.precision},
                        {"recall", tm.recall},
                        {"f1", tm.f1},
                        {"zero_support", tm.zero_support}};
    }
    json support = json::object();
    for (const auto& [tag, count] : m.support) support[tag] = count;
    return {{"per_tag", per_tag},
            {"support", support},
            {"micro_f1", m.micro_f1},
            {"macro_f1", m.macro_f1},
            {"token_accuracy", m.token_accuracy},
            {"zero_support", m.zero_support}};
}

eval::MetricReport metrics_from_json(const json& j) {
    eval::MetricReport m;
    for (const auto& [tag, tm] : j.at("per_tag").items()) {
        eval::TagMetrics out;
        out.precision = tm.at("precision").get<double>();
        out.recall = tm.at("recall").get<double>();
        out.f1 = tm.at("f1").get<double>();
        out.zero_support = tm.at("zero_support").get<bool>();
        m.per_tag[tag] = out;
    }
    for (const auto& [tag, count] : j.at("support").items()) {
        m.support[tag] = count.get<std::size_t>();
    }
    m.micro_f1 = j.at("micro_f1").get<double>();
    m.macro_f1 = j.at("macro_f1").get<double>();
    m.token_accuracy = j.at("token_accuracy").get<double>();
    m.zero_support = j.at("zero_support").get<bool>();
    return m;
}

json record_to_json(const RunRecord& r) {
    return {{"run_id", r.run_id},
            {"encoder", r.encoder},
            {"regime", r.regime},
            {"train_dataset", r.train_dataset},
            {"test_dataset", r.test_dataset},
            {"train_fingerprint", r.train_fingerprint},
            {"test_fingerprint", r.test_fingerprint},
            {"tune_fingerprint", r.tune_fingerprint},
            {"tune_protocol", r.tune_protocol},
            {"metrics", metrics_to_json(r.metrics)},
            {"wall_time_seconds", r.wall_time_seconds},
            {"backend", r.backend},
            {"created_at", r.created_at},
            {"created_at_us", r.created_at_us},
            {"config_snapshot", json::parse(r.config_snapshot_json)}};
}

RunRecord record_from_json(const json& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.encoder = j.at("encoder").get<std::string>();
    r.regime = j.at("regime").get<std::string>();
    r.train_dataset = j.at("train_dataset").get<std::string>();
    r.test_dataset = j.at("test_dataset").get<std::string>();
    r.train_fingerprint = j.at("train_fingerprint").get<std::string>();
    r.test_fingerprint = j.at("test_fingerprint").get<std::string>();
    r.tune_fingerprint = j.at("tune_fingerprint").get<std::string>();
    r.tune_protocol = j.at("tune_protocol").get<std::string>();
    r.metrics = metrics_from_json(j.at("metrics"));
    r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
    r.backend = j.at("backend").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
    r.created_at_us = j.at("created_at_us").get<std::int64_t>();
    r.config_snapshot_json = j.at("config_snapshot").dump();
    return r;
}

std::string now_iso8601(std::int64_t& micros_out) {
    const auto now = std::chrono::system_clock::now();
    micros_out = std::chrono::duration_cast<std::chrono::microseconds>(now.time_since_epoch())
                     .count();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Fraction fraction_from_json(const json& j) {
    if (j.is_string()) return Fraction::parse(j.get<std::string>());
    if (j.is_number_integer()) return Fraction(j.get<std::int64_t>(), 1);
    if (j.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.12g", j.get<double>());
        return Fraction::parse(buf);
    }
    throw ConfigError("split fraction must be a string or number");
}

json fraction_to_json(const Fraction& f) { return f.str(); }

}  // namespace

std::string RegimeSpec::label() const {
    std::string out = kind + ":";
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (i > 0) out += "+";
        out += members[i];
    }
    if (!tests.empty()) {
        out += ">";
        for (std::size_t i = 0; i < tests.size(); ++i) {
            if (i > 0) out += "+";
            out += tests[i];
        }
    }
    return out;
}

std::string ExperimentConfig::snapshot_json() const {
    json datasets_json = json::array();
    for (const auto& d : datasets) {
        json entry = {{"name", d.name},
                      {"format", d.format},
                      {"language", d.language},
                      {"tag_map", d.tag_map}};
        if (d.single_file()) {
            entry["path"] = d.path;
            if (d.split) {
                entry["split"] = {{"fractions",
                                   {fraction_to_json(d.split->train), fraction_to_json(d.split->test),
                                    fraction_to_json(d.split->tune)}},
                                  {"seed", d.split->seed}};
            }
        } else {
            entry["train"] = d.train_path;
            entry["test"] = d.test_path;
            if (!d.tune_path.empty()) entry["tune"] = d.tune_path;
        }
        datasets_json.push_back(entry);
    }
    json regimes_json = json::array();
    for (const auto& r : regimes) {
        json entry = {{"kind", r.kind}, {"members", r.members}};
        if (!r.tests.empty()) entry["tests"] = r.tests;
        regimes_json.push_back(entry);
    }
    json train_json = json::object();
    if (train.epochs) train_json["epochs"] = *train.epochs;
    if (train.learning_rate) train_json["learning_rate"] = *train.learning_rate;
    if (train.batch_size) train_json["batch_size"] = *train.batch_size;
    if (train.max_sequence_length) train_json["max_sequence_length"] = *train.max_sequence_length;
    if (train.seed) train_json["seed"] = *train.seed;

    const json snapshot = {{"seed", seed},
                           {"output_dir", output_dir},
                           {"datasets", datasets_json},
                           {"regimes", regimes_json},
                           {"encoders", encoders},
                           {"train", train_json}};
    return snapshot.dump();
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& origin) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse config '" + origin + "': " + e.what());
    }
    try {
        ExperimentConfig config;
        config.seed = j.value("seed", std::uint64_t{42});
        config.output_dir = j.value("output_dir", std::string("runs"));
        for (const auto& d : j.at("datasets")) {
            DatasetSpec spec;
            spec.name = d.at("name").get<std::string>();
            spec.format = d.at("format").get<std::string>();
            spec.language = d.at("language").get<std::string>();
            spec.tag_map = d.at("tag_map").get<std::string>();
            if (d.contains("path")) {
                spec.path = d.at("path").get<std::string>();
                if (d.contains("split")) {
                    const json& s = d.at("split");
                    const json& f = s.at("fractions");
                    if (!f.is_array() || f.size() != 3) {
                        throw ConfigError("dataset '" + spec.name +
                                          "': split.fractions needs exactly 3 entries");
                    }
                    spec.split = harmonize::SplitSpec(
                        fraction_from_json(f[0]), fraction_from_json(f[1]),
                        fraction_from_json(f[2]),
                        s.value("seed", rng::derive(config.seed, "split-" + spec.name)));
                }
            } else {
                spec.train_path = d.at("train").get<std::string>();
                spec.test_path = d.at("test").get<std::string>();
                spec.tune_path = d.value("tune", std::string());
            }
            config.datasets.push_back(std::move(spec));
        }
        for (const auto& r : j.at("regimes")) {
            RegimeSpec spec;
            spec.kind = r.at("kind").get<std::string>();
            spec.members = r.at("members").get<std::vector<std::string>>();
            if (r.contains("tests")) spec.tests = r.at("tests").get<std::vector<std::string>>();
            config.regimes.push_back(std::move(spec));
        }
        config.encoders = j.at("encoders").get<std::vector<std::string>>();
        if (j.contains("train")) {
            const json& t = j.at("train");
            if (t.contains("epochs")) config.train.epochs = t.at("epochs").get<int>();
            if (t.contains("learning_rate")) {
                config.train.learning_rate = t.at("learning_rate").get<double>();
            }
            if (t.contains("batch_size")) config.train.batch_size = t.at("batch_size").get<int>();
            if (t.contains("max_sequence_length")) {
                config.train.max_sequence_length = t.at("max_sequence_length").get<int>();
            }
            if (t.contains("seed")) config.train.seed = t.at("seed").get<std::uint64_t>();
        }
        return config;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + origin + "' is missing fields: " + e.what());
    }
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

eval::RunCell RunRecord::cell() const {
    eval::RunCell cell;
    cell.test_dataset = test_dataset;
    cell.regime = regime;
    cell.encoder = encoder;
    cell.micro_f1 = metrics.micro_f1;
    cell.macro_f1 = metrics.macro_f1;
    cell.token_accuracy = metrics.token_accuracy;
    cell.run_id = run_id;
    return cell;
}

namespace {

struct PreparedDataset {
    std::string name;
    Corpus train, test, tune;
    std::string train_fp, test_fp, tune_fp;
};

void check_readable(const std::string& path, const std::string& dataset) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) {
        throw ConfigError("dataset '" + dataset + "': cannot read file '" + path + "'");
    }
}

void validate_config(const ExperimentConfig& config, const modeling::EncoderRegistry& registry) {
    if (config.datasets.empty()) throw ConfigError("config declares no datasets");
    if (config.regimes.empty()) throw ConfigError("config declares no regimes");
    if (config.encoders.empty()) throw ConfigError("config declares no encoders");

    std::map<std::string, bool> names;
    for (const auto& d : config.datasets) {
        if (d.name.empty()) throw ConfigError("dataset with empty name");
        if (d.name.find(',') != std::string::npos || d.name.find('+') != std::string::npos) {
            throw ConfigError("dataset name '" + d.name + "' must not contain ',' or '+'");
        }
        if (names.count(d.name)) throw ConfigError("dataset '" + d.name + "' declared twice");
        names[d.name] = true;
        if (d.format != "conll" && d.format != "wikiann") {
            throw ConfigError("dataset '" + d.name + "': unknown format '" + d.format + "'");
        }
        harmonize::resolve_tag_map(d.tag_map);  // throws when unknown
        if (d.single_file()) {
            check_readable(d.path, d.name);
        } else {
            if (d.train_path.empty() || d.test_path.empty()) {
                throw ConfigError("dataset '" + d.name + "' needs train and test paths");
            }
            check_readable(d.train_path, d.name);
            check_readable(d.test_path, d.name);
            if (!d.tune_path.empty()) check_readable(d.tune_path, d.name);
        }
    }

    std::map<std::string, bool> regime_seen;
    for (const auto& r : config.regimes) {
        if (r.kind != "mono" && r.kind != "merged-pair" && r.kind != "merged-all") {
            throw ConfigError("unknown regime kind '" + r.kind + "'");
        }
        if (r.kind == "mono" && r.members.size() != 1) {
            throw ConfigError("mono regime needs exactly one member");
        }
        if (r.kind == "merged-pair" && r.members.size() != 2) {
            throw ConfigError("merged-pair regime needs exactly two members");
        }
        if (r.kind == "merged-all" && r.members.size() < 2) {
            throw ConfigError("merged-all regime needs at least two members");
        }
        std::map<std::string, bool> member_seen;
        for (const auto& m : r.members) {
            if (!names.count(m)) {
                throw ConfigError("regime '" + r.label() + "' references undeclared dataset '" +
                                  m + "'");
            }
            if (member_seen.count(m)) {
                throw ConfigError("regime '" + r.label() + "' lists dataset '" + m + "' twice");
            }
            member_seen[m] = true;
        }
        std::map<std::string, bool> test_seen;
        for (const auto& t : r.test_sets()) {
            if (!names.count(t)) {
                throw ConfigError("regime '" + r.label() + "' designates undeclared test set '" +
                                  t + "'");
            }
            if (test_seen.count(t)) {
                throw ConfigError("regime '" + r.label() + "' designates test set '" + t +
                                  "' twice");
            }
            test_seen[t] = true;
        }
        if (regime_seen.count(r.label())) {
            throw ConfigError("regime '" + r.label() + "' declared twice");
        }
        regime_seen[r.label()] = true;
    }

    for (const auto& key : config.encoders) {
        if (registry.find(key) == nullptr) {
            throw ConfigError("encoder '" + key + "' is not in the registry");
        }
    }
}

PreparedDataset prepare_dataset(const DatasetSpec& spec, std::uint64_t config_seed) {
    const harmonize::TagMap map = harmonize::resolve_tag_map(spec.tag_map);
    PreparedDataset out;
    out.name = spec.name;
    if (spec.single_file()) {
        const Corpus whole = harmonize::harmonize_corpus(
            io::load_corpus_file(spec.path, spec.format, spec.name, spec.language), map);
        const harmonize::SplitSpec split =
            spec.split ? *spec.split
                       : harmonize::SplitSpec::seventy_fifteen_fifteen(
                             rng::derive(config_seed, "split-" + spec.name));
        harmonize::SplitResult parts = harmonize::make_split(whole, split);
        out.train = std::move(parts.train);
        out.test = std::move(parts.test);
        out.tune = std::move(parts.tune);
    } else {
        out.train = harmonize::harmonize_corpus(
            io::load_corpus_file(spec.train_path, spec.format, spec.name + ".train",
                                 spec.language),
            map);
        out.test = harmonize::harmonize_corpus(
            io::load_corpus_file(spec.test_path, spec.format, spec.name + ".test", spec.language),
            map);
        if (!spec.tune_path.empty()) {
            out.tune = harmonize::harmonize_corpus(
                io::load_corpus_file(spec.tune_path, spec.format, spec.name + ".tune",
                                     spec.language),
                map);
        } else {
            // no published tune split: hold out 10% of train, seed-deterministic
            const harmonize::SplitSpec holdout(Fraction(9, 10), Fraction(0, 1), Fraction(1, 10),
                                               rng::derive(config_seed, "tune-holdout-" + spec.name));
            harmonize::SplitResult parts = harmonize::make_split(out.train, holdout);
            out.train = std::move(parts.train);
            out.tune = std::move(parts.tune);
        }
    }
    out.train_fp = io::corpus_fingerprint(out.train);
    out.test_fp = io::corpus_fingerprint(out.test);
    out.tune_fp = io::corpus_fingerprint(out.tune);
    return out;
}

modeling::TrainConfig resolve_train_config(const std::string& encoder,
                                           const ExperimentConfig& config,
                                           const RunOptions& options) {
    modeling::TrainConfig tc = modeling::TrainConfig::defaults_for(encoder);
    if (config.train.epochs) tc.epochs = *config.train.epochs;
    if (config.train.learning_rate) tc.learning_rate = *config.train.learning_rate;
    if (config.train.batch_size) tc.batch_size = *config.train.batch_size;
    if (config.train.max_sequence_length) {
        tc.max_sequence_length = *config.train.max_sequence_length;
    }
    tc.seed = config.train.seed.value_or(config.seed);
    if (options.seed_override) tc.seed = *options.seed_override;
    tc.check();
    return tc;
}

json train_config_json(const modeling::TrainConfig& tc) {
    return {{"encoder", tc.encoder},
            {"max_sequence_length", tc.max_sequence_length},
            {"epochs", tc.epochs},
            {"learning_rate", tc.learning_rate},
            {"batch_size", tc.batch_size},
            {"seed", tc.seed}};
}

std::string derive_run_id(const std::string& encoder, const RegimeSpec& regime,
                          const std::string& test_dataset, const std::string& train_fp,
                          const std::string& test_fp, const std::string& tune_fp,
                          const modeling::TrainConfig& tc) {
    const json key = {{"encoder", encoder},
                      {"regime", regime.kind},
                      {"members", regime.members},
                      {"test_dataset", test_dataset},
                      {"train_fingerprint", train_fp},
                      {"test_fingerprint", test_fp},
                      {"tune_fingerprint", tune_fp},
                      {"train_config", train_config_json(tc)},
                      {"shuffle", rng::kAlgorithmId}};
    return Sha256::of(key.dump()).substr(0, 16);
}

std::optional<RunRecord> try_load_record(const fs::path& record_path) {
    std::ifstream in(record_path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return record_from_json(json::parse(buf.str()));
    } catch (const json::exception& e) {
        throw CorruptStore(record_path.string(), e.what());
    }
}

void persist_record(const std::string& store, const RunRecord& record,
                    const modeling::TrainedTagger& tagger) {
    const fs::path final_dir = fs::path(store) / record.run_id;
    const fs::path tmp_dir =
        fs::path(store) / (".tmp-" + record.run_id + "-" + std::to_string(::getpid()));
    fs::create_directories(tmp_dir);
    {
        std::ofstream out(tmp_dir / "record.json", std::ios::binary);
        if (!out) throw IoError("cannot write record under '" + tmp_dir.string() + "'");
        out << record_to_json(record).dump(2) << "\n";
    }
    modeling::save_tagger(tagger, (tmp_dir / "tagger").string());
    std::error_code ec;
    fs::rename(tmp_dir, final_dir, ec);
    if (ec) {
        // another writer won the race; keep their record
        fs::remove_all(tmp_dir);
        if (!fs::exists(final_dir / "record.json")) {
            throw IoError("cannot publish run '" + record.run_id + "': " + ec.message());
        }
    }
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    const modeling::EncoderRegistry& registry = modeling::EncoderRegistry::builtin();
    validate_config(config, registry);

    const std::string store = options.store.empty() ? config.output_dir : options.store;
    fs::create_directories(store);

    std::map<std::string, PreparedDataset> datasets;
    for (const auto& spec : config.datasets) {
        datasets.emplace(spec.name, prepare_dataset(spec, config.seed));
    }

    modeling::EncoderEnv env;
    env.registry = &registry;
    env.cache_dir = options.encoder_cache;
    env.offline = options.offline;

    std::vector<RunRecord> records;
    for (const auto& regime : config.regimes) {
        // training corpus per regime; merged regimes merge tune sets with the
        // same seed protocol as train sets
        Corpus train_corpus;
        Corpus tune_corpus;
        std::string train_dataset;
        std::string tune_protocol;
        if (regime.kind == "mono") {
            const PreparedDataset& ds = datasets.at(regime.members.front());
            train_corpus = ds.train;
            tune_corpus = ds.tune;
            train_dataset = ds.name;
            tune_protocol = "mono-tune";
        } else {
            std::vector<Corpus> trains, tunes;
            for (const auto& member : regime.members) {
                trains.push_back(datasets.at(member).train);
                tunes.push_back(datasets.at(member).tune);
                if (!train_dataset.empty()) train_dataset += "+";
                train_dataset += member;
            }
            train_corpus = harmonize::merge_corpora(
                trains, rng::derive(config.seed, "merge-train-" + regime.label()));
            tune_corpus = harmonize::merge_corpora(
                tunes, rng::derive(config.seed, "merge-tune-" + regime.label()));
            tune_protocol = "merged-tune";
        }
        const std::string train_fp = io::corpus_fingerprint(train_corpus);
        const std::string tune_fp = io::corpus_fingerprint(tune_corpus);

        for (const auto& encoder : config.encoders) {
            const modeling::TrainConfig tc = resolve_train_config(encoder, config, options);

            struct PlannedCell {
                std::string run_id;
                const PreparedDataset* dataset;
            };
            std::vector<PlannedCell> missing;
            for (const auto& member : regime.test_sets()) {
                const PreparedDataset& ds = datasets.at(member);
                const std::string run_id = derive_run_id(encoder, regime, ds.name, train_fp,
                                                         ds.test_fp, tune_fp, tc);
                const fs::path record_path = fs::path(store) / run_id / "record.json";
                if (!options.force) {
                    if (auto existing = try_load_record(record_path)) {
                        if (options.verbose) {
                            std::cerr << "skip " << regime.label() << " x " << encoder << " on "
                                      << ds.name << " (run " << run_id << " exists)\n";
                        }
                        records.push_back(std::move(*existing));
                        continue;
                    }
                }
                missing.push_back({run_id, &ds});
            }
            if (missing.empty()) continue;

            try {
                const auto started = std::chrono::steady_clock::now();
                const modeling::TrainedTagger tagger = modeling::train(train_corpus, tune_corpus,
                                                                       tc, env);
                for (const auto& cell : missing) {
                    const auto predictions = modeling::predict(tagger, cell.dataset->test.sentences);
                    const auto metrics = eval::score(cell.dataset->test, predictions);
                    const auto finished = std::chrono::steady_clock::now();

                    RunRecord record;
                    record.run_id = cell.run_id;
                    record.encoder = encoder;
                    record.regime = regime.kind;
                    record.train_dataset = train_dataset;
                    record.test_dataset = cell.dataset->name;
                    record.train_fingerprint = train_fp;
                    record.test_fingerprint = cell.dataset->test_fp;
                    record.tune_fingerprint = tune_fp;
                    record.tune_protocol = tune_protocol;
                    record.metrics = metrics;
                    record.wall_time_seconds =
                        std::chrono::duration<double>(finished - started).count();
                    record.backend = tagger.backend;
                    record.created_at = now_iso8601(record.created_at_us);
                    const json snapshot = {{"config", json::parse(config.snapshot_json())},
                                           {"train_config", train_config_json(tc)},
                                           {"tune_protocol", tune_protocol}};
                    record.config_snapshot_json = snapshot.dump();

                    persist_record(store, record, tagger);
                    if (options.verbose) {
                        std::cerr << "ran " << regime.label() << " x " << encoder << " on "
                                  << record.test_dataset << " -> micro_f1 "
                                  << metrics.micro_f1 << " (run " << record.run_id << ")\n";
                    }
                    records.push_back(std::move(record));
                }
            } catch (const Error& e) {
                throw Error(e.kind(), "cell (" + regime.label() + ", " + encoder +
                                          "): " + e.what());
            }
        }
    }
    return records;
}

std::vector<RunRecord> list_runs(const std::string& store, const std::string& filter) {
    std::map<std::string, std::string> wanted;
    std::size_t pos = 0;
    while (pos < filter.size()) {
        const std::size_t comma = filter.find(',', pos);
        const std::string clause =
            filter.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        pos = comma == std::string::npos ? filter.size() : comma + 1;
        if (clause.empty()) continue;
        const std::size_t eq = clause.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("filter clause '" + clause + "' is not key=value");
        }
        const std::string key = clause.substr(0, eq);
        if (key != "encoder" && key != "regime" && key != "test" && key != "train") {
            throw ConfigError("unknown filter key '" + key +
                              "' (expected encoder, regime, test or train)");
        }
        wanted[key] = clause.substr(eq + 1);
    }

    std::vector<RunRecord> records;
    if (!fs::exists(store)) throw IoError("run store '" + store + "' does not exist");
    for (const auto& entry : fs::directory_iterator(store)) {
        if (!entry.is_directory()) continue;
        const std::string dirname = entry.path().filename().string();
        if (dirname.rfind(".tmp-", 0) == 0) continue;
        const fs::path record_path = entry.path() / "record.json";
        if (!fs::exists(record_path)) {
            throw CorruptStore(record_path.string(), "missing record.json");
        }
        auto loaded = try_load_record(record_path);
        if (!loaded) throw CorruptStore(record_path.string(), "unreadable");
        RunRecord record = std::move(*loaded);
        bool keep = true;
        for (const auto& [key, value] : wanted) {
            if (key == "encoder" && record.encoder != value) keep = false;
            if (key == "regime" && record.regime != value) keep = false;
            if (key == "test" && record.test_dataset != value) keep = false;
            if (key == "train" && record.train_dataset != value) keep = false;
        }
        if (keep) records.push_back(std::move(record));
    }
    std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
        if (a.created_at_us != b.created_at_us) return a.created_at_us < b.created_at_us;
        return a.run_id < b.run_id;
    });
    return records;
}

std::string render_report(const std::vector<RunRecord>& records, const std::string& style) {
    std::vector<eval::RunCell> cells;
    cells.reserve(records.size());
    for (const auto& record : records) cells.push_back(record.cell());
    const eval::ComparisonMatrix matrix = eval::compare(cells);

    if (style == "csv") return eval::render_csv(matrix);
    if (style != "text") throw ConfigError("unknown report style '" + style + "'");

    std::ostringstream out;
    out << eval::render_text(matrix);
    out << "\n" << eval::metric_definition() << "\n" << eval::metric_caveat() << "\n";
    std::map<std::string, bool> protocols;
    std::map<std::string, bool> snapshots;
    for (const auto& record : records) {
        protocols.emplace(record.tune_protocol, true);
        snapshots.emplace(Sha256::of(record.config_snapshot_json).substr(0, 16), true);
    }
    if (!protocols.empty()) {
        out << "tune protocol:";
        for (const auto& [p, _] : protocols) out << " " << p;
        out << "\n";
    }
    if (!snapshots.empty()) {
        out << "config fingerprints:";
        for (const auto& [s, _] : snapshots) out << " " << s;
        out << "\n";
    }
    return out.str();
}

std::string render_expectations(const std::vector<RunRecord>& records,
                                const std::string& expect_file) {
    std::ifstream in(expect_file, std::ios::binary);
    if (!in) throw IoError("cannot open expectations file '" + expect_file + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    json expectations;
    try {
        expectations = json::parse(buf.str());
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse expectations '" + expect_file + "': " + e.what());
    }

    std::ostringstream out;
    for (const auto& item : expectations) {
        const std::string test = item.at("test_dataset").get<std::string>();
        const std::string regime = item.at("regime").get<std::string>();
        const std::string encoder = item.at("encoder").get<std::string>();
        const double expected = item.at("micro_f1").get<double>();
        const double tolerance = item.value("tolerance", 2.0);

        const RunRecord* found = nullptr;
        for (const auto& record : records) {
            if (record.test_dataset == test && record.regime == regime &&
                record.encoder == encoder) {
                found = &record;
                break;
            }
        }
        char line[256];
        if (found == nullptr) {
            std::snprintf(line, sizeof(line), "MISSING  %s/%s/%s expected %.2f±%.2f (no run)\n",
                          test.c_str(), regime.c_str(), encoder.c_str(), expected, tolerance);
        } else {
            const double got = found->metrics.micro_f1 * 100.0;
            const bool ok = std::abs(got - expected) <= tolerance;
            std::snprintf(line, sizeof(line), "%-8s %s/%s/%s got %.2f expected %.2f±%.2f\n",
                          ok ? "OK" : "DIFF", test.c_str(), regime.c_str(), encoder.c_str(), got,
                          expected, tolerance);
        }
        out << line;
    }
    return out.str();
}

}  // namespace ner::experiment
