// Command-line front end for the NER harmonization/training pipeline.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ner/corpus_io.hpp"
#include "ner/errors.hpp"
#include "ner/evaluation.hpp"
#include "ner/experiment.hpp"
#include "ner/harmonize.hpp"
#include "ner/modeling.hpp"
#include "ner/rng.hpp"

namespace {

using ner::Corpus;
using ner::CorpusStats;
using ner::Fraction;

struct GlobalFlags {
    std::optional<std::uint64_t> seed;
    bool offline = false;
    bool force = false;
    std::string store;  // empty: run uses the config's output_dir, report uses "runs"
    std::string encoder_cache;
};

std::uint64_t effective_seed(const GlobalFlags& globals, std::uint64_t fallback) {
    return globals.seed.value_or(fallback);
}

Corpus load_input(const std::string& path, const std::string& format,
                  const std::string& language, const std::string& name) {
    std::vector<std::string> warnings;
    ner::io::ParseOptions options;
    options.warnings = &warnings;
    Corpus corpus = ner::io::load_corpus_file(path, format, name.empty() ? path : name, language,
                                              options);
    for (const auto& w : warnings) std::cerr << "warning: " << path << ": " << w << "\n";
    return corpus;
}

// Expected-counts file: `sentences<TAB>N`, `tokens<TAB>N` and `<tag><TAB>N`
// lines, '#' comments. Returns a mismatch description or empty on success.
std::string compare_expected_counts(const CorpusStats& stats, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ner::IoError("cannot open expected-counts file '" + path + "'");
    std::string line;
    std::string mismatches;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto tab = line.find('\t', first);
        if (tab == std::string::npos) {
            throw ner::MalformedLine(line_number, "expected `<key><TAB><count>` in '" + path + "'");
        }
        const std::string key = line.substr(first, tab - first);
        const std::size_t expected = std::stoull(line.substr(tab + 1));
        std::size_t actual = 0;
        if (key == "sentences") {
            actual = stats.sentence_count;
        } else if (key == "tokens") {
            actual = stats.tag_count;
        } else {
            actual = stats.count(key);
        }
        if (actual != expected) {
            mismatches += "  " + key + ": expected " + std::to_string(expected) + ", got " +
                          std::to_string(actual) + "\n";
        }
    }
    return mismatches;
}

void print_stats(const CorpusStats& stats) {
    std::cout << "sentences\t" << stats.sentence_count << "\n";
    std::cout << "tokens\t" << stats.tag_count << "\n";
    for (const auto& [tag, count] : stats.per_tag) std::cout << tag << "\t" << count << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hindi/Marathi NER corpus harmonization, fine-tuning and evaluation"};
    app.require_subcommand(1);

    GlobalFlags globals;
    app.add_option("--seed", globals.seed, "seed overriding per-command defaults");
    app.add_flag("--offline", globals.offline, "fail fast instead of resolving remote encoders");
    app.add_flag("--force", globals.force, "re-run cells whose run id already exists");
    app.add_option("--store", globals.store,
                   "run store directory (default: the config's output_dir, or runs)");
    app.add_option("--encoder-cache", globals.encoder_cache,
                   "directory with native encoder checkpoints (default: $NER_ENCODER_CACHE)");

    // --- harmonize ---
    auto* cmd_harmonize = app.add_subcommand("harmonize", "convert a corpus to {NEP,NEO,NEL,O}");
    std::string h_in, h_out, h_format = "conll", h_language = "mr", h_tagmap, h_scheme = "auto";
    cmd_harmonize->add_option("--in", h_in, "input corpus file")->required();
    cmd_harmonize->add_option("--out", h_out, "output corpus file")->required();
    cmd_harmonize->add_option("--format", h_format, "conll | wikiann");
    cmd_harmonize->add_option("--language", h_language, "hi | mr");
    cmd_harmonize->add_option("--tag-map", h_tagmap, "builtin map name or tag-map file")
        ->required();
    cmd_harmonize->add_option("--scheme", h_scheme, "input scheme: auto | iob | flat");

    // --- split ---
    auto* cmd_split = app.add_subcommand("split", "deterministic train/test/tune split");
    std::string s_in, s_train, s_test, s_tune, s_fractions = "0.70,0.15,0.15";
    std::string s_format = "conll", s_language = "mr";
    std::uint64_t s_seed = 42;
    cmd_split->add_option("--in", s_in, "input corpus file")->required();
    cmd_split->add_option("--format", s_format, "conll | wikiann");
    cmd_split->add_option("--language", s_language, "hi | mr");
    cmd_split->add_option("--out-train", s_train, "train output file")->required();
    cmd_split->add_option("--out-test", s_test, "test output file")->required();
    cmd_split->add_option("--out-tune", s_tune, "tune output file")->required();
    cmd_split->add_option("--fractions", s_fractions, "train,test,tune (default 0.70,0.15,0.15)");
    cmd_split->add_option("--split-seed", s_seed, "shuffle seed (default 42)");

    // --- merge ---
    auto* cmd_merge = app.add_subcommand("merge", "merge harmonized corpora and reshuffle");
    std::vector<std::string> m_in;
    std::string m_out, m_format = "conll";
    std::vector<std::string> m_language;
    std::uint64_t m_seed = 42;
    cmd_merge->add_option("--in", m_in, "input harmonized corpus files (repeatable)")->required();
    cmd_merge->add_option("--language", m_language,
                          "language per input (repeatable; default mr for all)");
    cmd_merge->add_option("--out", m_out, "output corpus file")->required();
    cmd_merge->add_option("--merge-seed", m_seed, "shuffle seed (default 42)");

    // --- stats ---
    auto* cmd_stats = app.add_subcommand("stats", "tag histogram, optionally checked");
    std::string st_in, st_format = "conll", st_language = "mr", st_expect, st_tagmap;
    cmd_stats->add_option("--in", st_in, "input corpus file")->required();
    cmd_stats->add_option("--format", st_format, "conll | wikiann");
    cmd_stats->add_option("--language", st_language, "hi | mr");
    cmd_stats->add_option("--tag-map", st_tagmap, "harmonize before counting");
    cmd_stats->add_option("--expect", st_expect, "expected-counts file to compare against");

    // --- train ---
    auto* cmd_train = app.add_subcommand("train", "fine-tune an encoder on a harmonized corpus");
    std::string t_train, t_tune, t_out, t_encoder = "tiny-test", t_language = "mr";
    std::optional<int> t_epochs, t_batch, t_maxlen;
    std::optional<double> t_lr;
    cmd_train->add_option("--train", t_train, "harmonized train corpus")->required();
    cmd_train->add_option("--tune", t_tune, "harmonized tune corpus")->required();
    cmd_train->add_option("--language", t_language, "hi | mr");
    cmd_train->add_option("--out", t_out, "output tagger directory")->required();
    cmd_train->add_option("--encoder", t_encoder, "registry key (default tiny-test)");
    cmd_train->add_option("--epochs", t_epochs, "override epochs");
    cmd_train->add_option("--batch-size", t_batch, "override batch size");
    cmd_train->add_option("--max-len", t_maxlen, "override max sequence length");
    cmd_train->add_option("--learning-rate", t_lr, "override learning rate");

    // --- eval ---
    auto* cmd_eval = app.add_subcommand("eval", "score a saved tagger on a harmonized corpus");
    std::string e_tagger, e_test, e_language = "mr";
    bool e_csv = false;
    cmd_eval->add_option("--tagger", e_tagger, "saved tagger directory")->required();
    cmd_eval->add_option("--test", e_test, "harmonized test corpus")->required();
    cmd_eval->add_option("--language", e_language, "hi | mr");
    cmd_eval->add_flag("--csv", e_csv, "emit tag,precision,recall,f1,support CSV");

    // --- run ---
    auto* cmd_run = app.add_subcommand("run", "execute a full experiment config");
    std::string r_config;
    bool r_verbose = false;
    cmd_run->add_option("--config", r_config, "experiment config (JSON)")->required();
    cmd_run->add_flag("--verbose", r_verbose, "log each cell");

    // --- report ---
    auto* cmd_report = app.add_subcommand("report", "render the mono-vs-merged comparison");
    std::string rp_style = "text", rp_filter, rp_expect;
    cmd_report->add_option("--style", rp_style, "text | csv");
    cmd_report->add_option("--filter", rp_filter, "encoder=..,regime=..,test=..,train=..");
    cmd_report->add_option("--expect-cells", rp_expect,
                           "JSON expectations to compare against (full-scale tier)");

    // --- encoders ---
    auto* cmd_encoders = app.add_subcommand("encoders", "list the encoder registry");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (cmd_harmonize->parsed()) {
            ner::io::ParseOptions options;
            std::vector<std::string> warnings;
            options.warnings = &warnings;
            if (h_scheme == "iob") options.scheme_override = ner::SchemeKind::iob;
            else if (h_scheme == "flat") options.scheme_override = ner::SchemeKind::flat;
            else if (h_scheme != "auto") throw ner::ConfigError("--scheme must be auto, iob or flat");
            Corpus corpus = ner::io::load_corpus_file(h_in, h_format, h_in, h_language, options);
            for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
            const auto map = ner::harmonize::resolve_tag_map(h_tagmap);
            ner::io::save_corpus_file(ner::harmonize::harmonize_corpus(corpus, map), h_out);
        } else if (cmd_split->parsed()) {
            Corpus corpus = load_input(s_in, s_format, s_language, s_in);
            std::vector<Fraction> fractions;
            std::size_t pos = 0;
            while (pos <= s_fractions.size()) {
                const auto comma = s_fractions.find(',', pos);
                fractions.push_back(Fraction::parse(s_fractions.substr(
                    pos, comma == std::string::npos ? std::string::npos : comma - pos)));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
            if (fractions.size() != 3) {
                throw ner::ConfigError("--fractions needs exactly three comma-separated values");
            }
            const ner::harmonize::SplitSpec spec(fractions[0], fractions[1], fractions[2],
                                                 effective_seed(globals, s_seed));
            const auto result = ner::harmonize::make_split(corpus, spec);
            ner::io::save_corpus_file(result.train, s_train);
            ner::io::save_corpus_file(result.test, s_test);
            ner::io::save_corpus_file(result.tune, s_tune);
            std::cout << "train\t" << result.train.sentence_count() << "\ntest\t"
                      << result.test.sentence_count() << "\ntune\t"
                      << result.tune.sentence_count() << "\n";
        } else if (cmd_merge->parsed()) {
            std::vector<Corpus> inputs;
            for (std::size_t i = 0; i < m_in.size(); ++i) {
                const std::string lang = i < m_language.size() ? m_language[i] : "mr";
                inputs.push_back(load_input(m_in[i], m_format, lang, m_in[i]));
            }
            const Corpus merged =
                ner::harmonize::merge_corpora(inputs, effective_seed(globals, m_seed));
            ner::io::save_corpus_file(merged, m_out);
            std::cout << "sentences\t" << merged.sentence_count() << "\n";
        } else if (cmd_stats->parsed()) {
            Corpus corpus = load_input(st_in, st_format, st_language, st_in);
            if (!st_tagmap.empty()) {
                corpus = ner::harmonize::harmonize_corpus(
                    corpus, ner::harmonize::resolve_tag_map(st_tagmap));
            }
            const CorpusStats stats = ner::io::tag_histogram(corpus);
            print_stats(stats);
            if (!st_expect.empty()) {
                const std::string mismatches = compare_expected_counts(stats, st_expect);
                if (!mismatches.empty()) {
                    std::cerr << "expected-counts mismatch:\n" << mismatches;
                    return 1;
                }
                std::cout << "expected-counts: ok\n";
            }
        } else if (cmd_train->parsed()) {
            const Corpus train_corpus = load_input(t_train, "conll", t_language, t_train);
            const Corpus tune_corpus = load_input(t_tune, "conll", t_language, t_tune);
            ner::modeling::TrainConfig config =
                ner::modeling::TrainConfig::defaults_for(t_encoder);
            if (t_epochs) config.epochs = *t_epochs;
            if (t_batch) config.batch_size = *t_batch;
            if (t_maxlen) config.max_sequence_length = *t_maxlen;
            if (t_lr) config.learning_rate = *t_lr;
            config.seed = effective_seed(globals, config.seed);
            ner::modeling::EncoderEnv env;
            env.cache_dir = globals.encoder_cache;
            env.offline = globals.offline;
            const auto tagger = ner::modeling::train(train_corpus, tune_corpus, config, env);
            ner::modeling::save_tagger(tagger, t_out);
            for (const auto& entry : tagger.log) {
                std::cout << "epoch " << entry.epoch << "\tloss " << entry.train_loss
                          << "\ttune_micro_f1 " << entry.tune_micro_f1 << "\n";
            }
        } else if (cmd_eval->parsed()) {
            const auto tagger = ner::modeling::load_tagger(e_tagger);
            const Corpus test_corpus = load_input(e_test, "conll", e_language, e_test);
            const auto predictions = ner::modeling::predict(tagger, test_corpus.sentences);
            const auto report = ner::eval::score(test_corpus, predictions);
            if (e_csv) {
                std::cout << "tag,precision,recall,f1,support\n";
                for (const auto& [tag, m] : report.per_tag) {
                    std::cout << tag << ',' << m.precision << ',' << m.recall << ',' << m.f1 << ','
                              << report.support.at(tag) << "\n";
                }
                std::cout << "micro_f1," << report.micro_f1 << ",,,\n";
            } else {
                std::cout << ner::eval::render_metric_report(report);
            }
        } else if (cmd_run->parsed()) {
            auto config = ner::experiment::load_config_file(r_config);
            ner::experiment::RunOptions options;
            options.store = globals.store;
            options.force = globals.force;
            options.offline = globals.offline;
            options.seed_override = globals.seed;
            options.encoder_cache = globals.encoder_cache;
            options.verbose = r_verbose;
            const auto records = ner::experiment::run_experiment(config, options);
            std::cout << records.size() << " run records in "
                      << (options.store.empty() ? config.output_dir : options.store) << "\n";
        } else if (cmd_report->parsed()) {
            const std::string store = globals.store.empty() ? "runs" : globals.store;
            const auto records = ner::experiment::list_runs(store, rp_filter);
            std::cout << ner::experiment::render_report(records, rp_style);
            if (!rp_expect.empty()) {
                std::cout << ner::experiment::render_expectations(records, rp_expect);
            }
        } else if (cmd_encoders->parsed()) {
            for (const auto& spec : ner::modeling::list_encoders()) {
                std::cout << spec.key << "\t" << ner::modeling::family_name(spec.family) << "\t"
                          << (spec.multilingual ? "multilingual" : "monolingual") << "\t"
                          << spec.checkpoint << "\t" << spec.description << "\n";
            }
        }
    } catch (const ner::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ner::Error::Kind::validation ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
