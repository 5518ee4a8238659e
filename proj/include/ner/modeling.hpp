#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ner/corpus.hpp"

namespace ner::modeling {

enum class Family { bert, albert, roberta, tiny_test };

const char* family_name(Family family);

struct EncoderSpec {
    std::string key;          // registry identifier
    std::string description;
    bool multilingual = false;
    Family family = Family::tiny_test;
    std::string checkpoint;   // published checkpoint identifier

    // Identity digest used to check saved taggers against the registry.
    std::string identity_hash() const;
};

// The seven published encoders from the comparison roster plus "tiny-test",
// a small randomly initialized encoder trainable on a CPU in seconds.
class EncoderRegistry {
public:
    static const EncoderRegistry& builtin();

    explicit EncoderRegistry(std::vector<EncoderSpec> specs);

    const EncoderSpec* find(const std::string& key) const;
    const EncoderSpec& require(const std::string& key) const;  // EncoderUnavailable if absent
    const std::vector<EncoderSpec>& list() const { return specs_; }

private:
    std::vector<EncoderSpec> specs_;
};

std::vector<EncoderSpec> list_encoders();

struct LabelVocabulary {
    std::vector<std::string> labels;  // id = position
    int ignore_id = -100;             // masked positions; outside the id range

    static LabelVocabulary harmonized();

    int id_of(const std::string& label) const;  // -1 when unknown
    const std::string& label_of(int id) const;
    int size() const { return static_cast<int>(labels.size()); }

    void check() const;  // throws ConfigError on a broken bijection
};

// word -> subword-id sequence (never empty)
using SubwordSplitter = std::function<std::vector<int>(const std::string&)>;

// Deterministic hash splitter ("hash-v1"): UTF-8 codepoint chunks of at most
// four codepoints, FNV-1a hashed into [first_id, vocab_size). Stands in for a
// learned subword model so the pipeline stays self-contained.
SubwordSplitter hash_subword_splitter(int vocab_size);

inline constexpr int kPadId = 0;
inline constexpr int kClsId = 1;
inline constexpr int kSepId = 2;
inline constexpr int kFirstSubwordId = 3;

struct AlignmentResult {
    std::vector<int> subword_ids;            // [CLS] word pieces... [SEP]
    std::vector<int> label_ids;              // same length; ignore_id off first-subwords
    std::vector<std::size_t> word_to_first_subword;  // per retained word
    bool truncated = false;

    std::size_t retained_words() const { return word_to_first_subword.size(); }
};

// First subword of each word carries the word's label id; every other
// position carries ignore_id. Sentences that would exceed
// max_sequence_length are cut at a word boundary. Throws UnknownTag.
AlignmentResult align_labels(const Sentence& sentence, const LabelVocabulary& vocab,
                             const SubwordSplitter& splitter, int max_sequence_length);

// Subword layout only (tags ignored); used by prediction.
AlignmentResult align_words(const std::vector<std::string>& words, const SubwordSplitter& splitter,
                            int max_sequence_length);

struct TrainConfig {
    std::string encoder = "tiny-test";
    int max_sequence_length = 128;
    int epochs = 3;                // 0 keeps the randomly initialized head
    double learning_rate = 2e-5;
    int batch_size = 16;
    std::uint64_t seed = 42;

    static TrainConfig defaults_for(const std::string& encoder_key);
    void check() const;  // throws ConfigError
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double tune_micro_f1 = 0.0;
};

struct EncoderModel;  // opaque: architecture + weights (modeling.cpp)

struct TrainedTagger {
    EncoderSpec encoder;
    LabelVocabulary vocab;
    TrainConfig config;
    std::string train_corpus_fingerprint;
    std::string backend;  // e.g. "cpu/avx2/f32"
    std::vector<EpochLog> log;
    std::shared_ptr<const EncoderModel> model;  // immutable after training
};

// Materializes encoders. tiny-test is built in (random init, seeded);
// other keys resolve to a native checkpoint directory under `cache_dir`
// and fail fast with EncoderUnavailable when none is present. Network
// retrieval is intentionally not part of this build.
struct EncoderEnv {
    const EncoderRegistry* registry = &EncoderRegistry::builtin();
    std::string cache_dir;  // empty: $NER_ENCODER_CACHE or no cache
    bool offline = false;

    std::string resolved_cache_dir() const;
};

// Fine-tunes `config.encoder` on `corpus`, selecting the epoch checkpoint
// with the best tune-set micro-F1. Both corpora must be on the flat
// harmonized scheme. Deterministic for a fixed (corpus, config, backend).
TrainedTagger train(const Corpus& corpus, const Corpus& tune, const TrainConfig& config,
                    const EncoderEnv& env = {});

// Per-sentence tag sequences, one tag per input word. Input tags are
// ignored. Words beyond the truncation window predict the outside tag.
std::vector<std::vector<std::string>> predict(const TrainedTagger& tagger,
                                              const std::vector<Sentence>& sentences);

// Saved-tagger directory: manifest.json + weights.bin. load verifies the
// format version, weight checksum, vocabulary and the encoder identity hash
// against the registry; mismatches raise CorruptArtifact.
void save_tagger(const TrainedTagger& tagger, const std::string& dir);
TrainedTagger load_tagger(const std::string& dir,
                          const EncoderRegistry& registry = EncoderRegistry::builtin());

// Mean masked training loss of one aligned batch under the tagger's model;
// exposed for the loss-masking contract (all-ignored batches cost exactly 0).
double batch_loss(const TrainedTagger& tagger, const std::vector<AlignmentResult>& batch);

// The splitter belonging to a trained/materialized model.
SubwordSplitter splitter_for(const EncoderModel& model);

}  // namespace ner::modeling
