#include "ner/modeling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ner/corpus_io.hpp"
#include "ner/errors.hpp"
#include "ner/evaluation.hpp"
#include "ner/kernels.hpp"
#include "ner/rng.hpp"
#include "ner/sha256.hpp"
#include "ner/tape.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ner::modeling {

using tape::Graph;
using tape::Mat;
using tape::Parameter;

// ---------------------------------------------------------------------------
// encoder registry

const char* family_name(Family family) {
    switch (family) {
        case Family::bert: return "bert";
        case Family::albert: return "albert";
        case Family::roberta: return "roberta";
        case Family::tiny_test: return "tiny-test";
    }
    return "unknown";
}

static Family family_from_name(const std::string& name) {
    if (name == "bert") return Family::bert;
    if (name == "albert") return Family::albert;
    if (name == "roberta") return Family::roberta;
    if (name == "tiny-test") return Family::tiny_test;
    throw CorruptArtifact("unknown encoder family '" + name + "'");
}

std::string EncoderSpec::identity_hash() const {
    Sha256 h;
    h.update(key);
    h.update("\n");
    h.update(family_name(family));
    h.update("\n");
    h.update(multilingual ? "multilingual" : "monolingual");
    h.update("\n");
    h.update(checkpoint);
    return h.hex_digest();
}

EncoderRegistry::EncoderRegistry(std::vector<EncoderSpec> specs) : specs_(std::move(specs)) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        for (std::size_t j = i + 1; j < specs_.size(); ++j) {
            if (specs_[i].key == specs_[j].key) {
                throw ConfigError("duplicate encoder key '" + specs_[i].key + "' in registry");
            }
        }
    }
}

const EncoderRegistry& EncoderRegistry::builtin() {
    static const EncoderRegistry registry({
        {"mbert", "multilingual BERT, 104 languages", true, Family::bert,
         "bert-base-multilingual-cased"},
        {"indicbert", "ALBERT pretrained on 12 Indian languages", true, Family::albert,
         "ai4bharat/indic-bert"},
        {"xlm-roberta", "RoBERTa pretrained on CommonCrawl in 100 languages", true,
         Family::roberta, "xlm-roberta-base"},
        {"mahaalbert", "ALBERT pretrained on Marathi", false, Family::albert,
         "l3cube-pune/marathi-albert"},
        {"roberta-hindi", "RoBERTa pretrained on Hindi", false, Family::roberta,
         "flax-community/roberta-hindi"},
        {"mahabert", "BERT pretrained on Marathi", false, Family::bert,
         "l3cube-pune/marathi-bert"},
        {"maharoberta", "RoBERTa pretrained on Marathi", false, Family::roberta,
         "l3cube-pune/marathi-roberta"},
        {"tiny-test", "small randomly initialized encoder for CPU-scale tests", false,
         Family::tiny_test, "builtin:tiny-test-v1"},
    });
    return registry;
}

const EncoderSpec* EncoderRegistry::find(const std::string& key) const {
    for (const auto& spec : specs_) {
        if (spec.key == key) return &spec;
    }
    return nullptr;
}

const EncoderSpec& EncoderRegistry::require(const std::string& key) const {
    const EncoderSpec* spec = find(key);
    if (spec == nullptr) throw EncoderUnavailable("no registry entry for key '" + key + "'");
    return *spec;
}

std::vector<EncoderSpec> list_encoders() { return EncoderRegistry::builtin().list(); }

// ---------------------------------------------------------------------------
// labels and alignment

LabelVocabulary LabelVocabulary::harmonized() {
    LabelVocabulary vocab;
    vocab.labels = harmonized_tags();
    vocab.ignore_id = -100;
    vocab.check();
    return vocab;
}

int LabelVocabulary::id_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == label) return static_cast<int>(i);
    }
    return -1;
}

const std::string& LabelVocabulary::label_of(int id) const {
    if (id < 0 || id >= size()) throw ConfigError("label id " + std::to_string(id) + " out of range");
    return labels[static_cast<std::size_t>(id)];
}

void LabelVocabulary::check() const {
    if (labels.empty()) throw ConfigError("label vocabulary is empty");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            if (labels[i] == labels[j]) {
                throw ConfigError("label '" + labels[i] + "' duplicated in vocabulary");
            }
        }
    }
    if (ignore_id >= 0 && ignore_id < size()) {
        throw ConfigError("ignore_id " + std::to_string(ignore_id) + " collides with a label id");
    }
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<std::string> codepoint_chunks(const std::string& word, int max_codepoints) {
    std::vector<std::string> chunks;
    std::string current;
    int count = 0;
    std::size_t i = 0;
    while (i < word.size()) {
        const unsigned char b = static_cast<unsigned char>(word[i]);
        std::size_t len = 1;
        if ((b & 0xE0) == 0xC0) len = 2;
        else if ((b & 0xF0) == 0xE0) len = 3;
        else if ((b & 0xF8) == 0xF0) len = 4;
        len = std::min(len, word.size() - i);
        current.append(word, i, len);
        i += len;
        if (++count == max_codepoints) {
            chunks.push_back(std::move(current));
            current.clear();
            count = 0;
        }
    }
    if (!current.empty()) chunks.push_back(std::move(current));
    if (chunks.empty()) chunks.push_back(word);
    return chunks;
}

}  // namespace

SubwordSplitter hash_subword_splitter(int vocab_size) {
    if (vocab_size <= kFirstSubwordId) throw ConfigError("subword vocab too small");
    const std::uint64_t span = static_cast<std::uint64_t>(vocab_size - kFirstSubwordId);
    return [span](const std::string& word) {
        std::vector<int> ids;
        for (const auto& chunk : codepoint_chunks(word, 4)) {
            ids.push_back(kFirstSubwordId + static_cast<int>(fnv1a(chunk) % span));
        }
        return ids;
    };
}

AlignmentResult align_words(const std::vector<std::string>& words, const SubwordSplitter& splitter,
                            int max_sequence_length) {
    if (max_sequence_length < 4) throw ConfigError("max_sequence_length must be at least 4");
    AlignmentResult result;
    result.subword_ids.push_back(kClsId);
    for (const auto& word : words) {
        const std::vector<int> pieces = splitter(word);
        if (result.subword_ids.size() + pieces.size() + 1 >
            static_cast<std::size_t>(max_sequence_length)) {
            result.truncated = true;
            break;
        }
        result.word_to_first_subword.push_back(result.subword_ids.size());
        result.subword_ids.insert(result.subword_ids.end(), pieces.begin(), pieces.end());
    }
    result.subword_ids.push_back(kSepId);
    result.label_ids.assign(result.subword_ids.size(), -100);
    return result;
}

AlignmentResult align_labels(const Sentence& sentence, const LabelVocabulary& vocab,
                             const SubwordSplitter& splitter, int max_sequence_length) {
    std::vector<std::string> words;
    words.reserve(sentence.tokens.size());
    for (const auto& token : sentence.tokens) words.push_back(token.text);

    AlignmentResult result = align_words(words, splitter, max_sequence_length);
    std::fill(result.label_ids.begin(), result.label_ids.end(), vocab.ignore_id);
    for (std::size_t w = 0; w < result.word_to_first_subword.size(); ++w) {
        const int label = vocab.id_of(sentence.tokens[w].tag);
        if (label < 0) throw UnknownTag(sentence.tokens[w].tag);
        result.label_ids[result.word_to_first_subword[w]] = label;
    }
    return result;
}

// ---------------------------------------------------------------------------
// config

TrainConfig TrainConfig::defaults_for(const std::string& encoder_key) {
    TrainConfig config;
    config.encoder = encoder_key;
    if (encoder_key == "tiny-test") {
        config.epochs = 30;
        config.learning_rate = 1e-3;
    } else {
        config.epochs = 3;
        config.learning_rate = 2e-5;
    }
    return config;
}

void TrainConfig::check() const {
    if (encoder.empty()) throw ConfigError("train config: encoder key is empty");
    if (max_sequence_length < 4) throw ConfigError("train config: max_sequence_length < 4");
    if (epochs < 0) throw ConfigError("train config: negative epochs");
    if (learning_rate <= 0.0) throw ConfigError("train config: learning_rate must be positive");
    if (batch_size <= 0) throw ConfigError("train config: batch_size must be positive");
}

// ---------------------------------------------------------------------------
// the encoder model

struct LayerParams {
    Parameter<float> wq, bq, wk, bk, wv, bv, wo, bo;
    Parameter<float> ln1_gain, ln1_bias;
    Parameter<float> w1, b1, w2, b2;
    Parameter<float> ln2_gain, ln2_bias;
};

struct EncoderModel {
    EncoderSpec spec;
    int vocab_size = 4096;
    int d_model = 32;
    int d_ff = 64;
    int layer_count = 2;
    int max_positions = 128;
    int num_labels = 4;

    Parameter<float> tok_emb, pos_emb;
    std::vector<LayerParams> layers;
    Parameter<float> head_w, head_b;

    std::vector<Parameter<float>*> params() {
        std::vector<Parameter<float>*> all = {&tok_emb, &pos_emb};
        for (auto& l : layers) {
            for (Parameter<float>* p :
                 {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.ln1_gain,
                  &l.ln1_bias, &l.w1, &l.b1, &l.w2, &l.b2, &l.ln2_gain, &l.ln2_bias}) {
                all.push_back(p);
            }
        }
        all.push_back(&head_w);
        all.push_back(&head_b);
        return all;
    }

    std::vector<const Parameter<float>*> params() const {
        auto* self = const_cast<EncoderModel*>(this);
        std::vector<Parameter<float>*> mut = self->params();
        return {mut.begin(), mut.end()};
    }
};

namespace {

constexpr float kLnEps = 1e-5f;
constexpr int kWeightsVersion = 1;

void allocate_model(EncoderModel& m) {
    m.tok_emb = Parameter<float>("tok_emb", m.vocab_size, m.d_model);
    m.pos_emb = Parameter<float>("pos_emb", m.max_positions, m.d_model);
    m.layers.clear();
    for (int l = 0; l < m.layer_count; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        LayerParams lp;
        lp.wq = Parameter<float>(p + "wq", m.d_model, m.d_model);
        lp.bq = Parameter<float>(p + "bq", 1, m.d_model);
        lp.wk = Parameter<float>(p + "wk", m.d_model, m.d_model);
        lp.bk = Parameter<float>(p + "bk", 1, m.d_model);
        lp.wv = Parameter<float>(p + "wv", m.d_model, m.d_model);
        lp.bv = Parameter<float>(p + "bv", 1, m.d_model);
        lp.wo = Parameter<float>(p + "wo", m.d_model, m.d_model);
        lp.bo = Parameter<float>(p + "bo", 1, m.d_model);
        lp.ln1_gain = Parameter<float>(p + "ln1_gain", 1, m.d_model);
        lp.ln1_bias = Parameter<float>(p + "ln1_bias", 1, m.d_model);
        lp.w1 = Parameter<float>(p + "w1", m.d_model, m.d_ff);
        lp.b1 = Parameter<float>(p + "b1", 1, m.d_ff);
        lp.w2 = Parameter<float>(p + "w2", m.d_ff, m.d_model);
        lp.b2 = Parameter<float>(p + "b2", 1, m.d_model);
        lp.ln2_gain = Parameter<float>(p + "ln2_gain", 1, m.d_model);
        lp.ln2_bias = Parameter<float>(p + "ln2_bias", 1, m.d_model);
        m.layers.push_back(std::move(lp));
    }
    m.head_w = Parameter<float>("head_w", m.d_model, m.num_labels);
    m.head_b = Parameter<float>("head_b", 1, m.num_labels);
}

void init_model(EncoderModel& m, std::uint64_t seed) {
    rng::SplitMix64 gen(seed);
    for (Parameter<float>* p : m.params()) {
        const bool is_gain = p->name.find("gain") != std::string::npos;
        const bool is_bias = p->name.size() >= 2 &&
                             (p->name.find(".b") != std::string::npos || p->name == "head_b" ||
                              p->name.find("bias") != std::string::npos);
        for (auto& v : p->value.data) {
            if (is_gain) {
                v = 1.0f;
            } else if (is_bias) {
                v = 0.0f;
            } else {
                v = static_cast<float>(gen.normal() * 0.02);
            }
        }
    }
}

// Binds every parameter either as a trainable node or as a constant leaf.
struct BoundModel {
    Graph<float>::Id tok_emb, pos_emb, head_w, head_b;
    struct BoundLayer {
        Graph<float>::Id wq, bq, wk, bk, wv, bv, wo, bo;
        Graph<float>::Id ln1_gain, ln1_bias, w1, b1, w2, b2, ln2_gain, ln2_bias;
    };
    std::vector<BoundLayer> layers;
};

BoundModel bind_model(Graph<float>& g, EncoderModel& m, bool trainable) {
    auto bind = [&](Parameter<float>& p) {
        return trainable ? g.param(p) : g.leaf(p.value);
    };
    BoundModel b;
    b.tok_emb = bind(m.tok_emb);
    b.pos_emb = bind(m.pos_emb);
    for (auto& l : m.layers) {
        BoundModel::BoundLayer bl;
        bl.wq = bind(l.wq);
        bl.bq = bind(l.bq);
        bl.wk = bind(l.wk);
        bl.bk = bind(l.bk);
        bl.wv = bind(l.wv);
        bl.bv = bind(l.bv);
        bl.wo = bind(l.wo);
        bl.bo = bind(l.bo);
        bl.ln1_gain = bind(l.ln1_gain);
        bl.ln1_bias = bind(l.ln1_bias);
        bl.w1 = bind(l.w1);
        bl.b1 = bind(l.b1);
        bl.w2 = bind(l.w2);
        bl.b2 = bind(l.b2);
        bl.ln2_gain = bind(l.ln2_gain);
        bl.ln2_bias = bind(l.ln2_bias);
        b.layers.push_back(bl);
    }
    b.head_w = bind(m.head_w);
    b.head_b = bind(m.head_b);
    return b;
}

// Single-head transformer stack: attention + residual + layer norm, then a
// GELU feed-forward block, post-norm, plus a linear classification head.
Graph<float>::Id forward_logits(Graph<float>& g, const BoundModel& b, EncoderModel& m,
                                const std::vector<int>& subword_ids) {
    std::vector<int> positions(subword_ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        positions[i] = static_cast<int>(std::min<std::size_t>(i, m.max_positions - 1));
    }
    auto x = g.add(g.gather_rows(b.tok_emb, subword_ids), g.gather_rows(b.pos_emb, positions));
    const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(m.d_model));
    for (std::size_t li = 0; li < b.layers.size(); ++li) {
        const auto& bl = b.layers[li];
        auto q = g.add_row_bias(g.matmul(x, bl.wq), bl.bq);
        auto k = g.add_row_bias(g.matmul(x, bl.wk), bl.bk);
        auto v = g.add_row_bias(g.matmul(x, bl.wv), bl.bv);
        auto attn = g.row_softmax(g.scale(g.matmul_nt(q, k), inv_sqrt_d));
        auto ctx = g.add_row_bias(g.matmul(g.matmul(attn, v), bl.wo), bl.bo);
        x = g.layer_norm(g.add(x, ctx), bl.ln1_gain, bl.ln1_bias, kLnEps);
        auto hidden = g.gelu(g.add_row_bias(g.matmul(x, bl.w1), bl.b1));
        auto ff = g.add_row_bias(g.matmul(hidden, bl.w2), bl.b2);
        x = g.layer_norm(g.add(x, ff), bl.ln2_gain, bl.ln2_bias, kLnEps);
    }
    return g.add_row_bias(g.matmul(x, b.head_w), b.head_b);
}

std::string backend_descriptor() {
    return std::string("cpu/") + kernels::isa_name(kernels::active_isa()) + "/f32";
}

// ---------------------------------------------------------------------------
// weights serialization

void write_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const std::string& in, std::size_t& pos) {
    if (pos + 4 > in.size()) throw CorruptArtifact("weights blob truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
}

std::string encode_weights(const EncoderModel& m) {
    std::string out = "NERW";
    write_u32(out, kWeightsVersion);
    const auto params = m.params();
    write_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const Parameter<float>* p : params) {
        write_u32(out, static_cast<std::uint32_t>(p->name.size()));
        out += p->name;
        write_u32(out, static_cast<std::uint32_t>(p->value.rows));
        write_u32(out, static_cast<std::uint32_t>(p->value.cols));
        const std::size_t bytes = p->value.size() * sizeof(float);
        const std::size_t offset = out.size();
        out.resize(offset + bytes);
        std::memcpy(out.data() + offset, p->value.data.data(), bytes);
    }
    return out;
}

void decode_weights(const std::string& blob, EncoderModel& m) {
    std::size_t pos = 0;
    if (blob.size() < 4 || blob.compare(0, 4, "NERW") != 0) {
        throw CorruptArtifact("weights blob has wrong magic");
    }
    pos = 4;
    const std::uint32_t version = read_u32(blob, pos);
    if (version != kWeightsVersion) {
        throw CorruptArtifact("weights format version " + std::to_string(version) +
                              " unsupported");
    }
    const std::uint32_t count = read_u32(blob, pos);
    auto params = m.params();
    if (count != params.size()) {
        throw CorruptArtifact("weights blob has " + std::to_string(count) + " tensors, model needs " +
                              std::to_string(params.size()));
    }
    for (Parameter<float>* p : params) {
        const std::uint32_t name_len = read_u32(blob, pos);
        if (pos + name_len > blob.size()) throw CorruptArtifact("weights blob truncated");
        const std::string name = blob.substr(pos, name_len);
        pos += name_len;
        if (name != p->name) {
            throw CorruptArtifact("weights tensor '" + name + "' where '" + p->name +
                                  "' was expected");
        }
        const std::uint32_t rows = read_u32(blob, pos);
        const std::uint32_t cols = read_u32(blob, pos);
        if (rows != static_cast<std::uint32_t>(p->value.rows) ||
            cols != static_cast<std::uint32_t>(p->value.cols)) {
            throw CorruptArtifact("tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                                  std::to_string(cols) + ", expected " +
                                  std::to_string(p->value.rows) + "x" +
                                  std::to_string(p->value.cols));
        }
        const std::size_t bytes = p->value.size() * sizeof(float);
        if (pos + bytes > blob.size()) throw CorruptArtifact("weights blob truncated");
        std::memcpy(p->value.data.data(), blob.data() + pos, bytes);
        pos += bytes;
    }
    if (pos != blob.size()) throw CorruptArtifact("weights blob carries trailing bytes");
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// materialization

std::unique_ptr<EncoderModel> materialize(const EncoderSpec& spec, const TrainConfig& config,
                                          int num_labels, const EncoderEnv& env) {
    auto model = std::make_unique<EncoderModel>();
    model->spec = spec;
    model->num_labels = num_labels;
    model->max_positions = config.max_sequence_length;

    if (spec.family == Family::tiny_test) {
        allocate_model(*model);
        init_model(*model, rng::derive(config.seed, "encoder-init"));
        return model;
    }

    const std::string cache = env.resolved_cache_dir();
    if (cache.empty()) {
        throw EncoderUnavailable(
            "'" + spec.key + "' resolves to checkpoint '" + spec.checkpoint +
            "', but no encoder cache is configured (set NER_ENCODER_CACHE or --encoder-cache); "
            "network retrieval is not part of this build" +
            std::string(env.offline ? " and offline mode is on" : ""));
    }
    const fs::path dir = fs::path(cache) / spec.key;
    const fs::path meta_path = dir / "encoder.json";
    const fs::path weights_path = dir / "weights.bin";
    if (!fs::exists(meta_path) || !fs::exists(weights_path)) {
        throw EncoderUnavailable("no native checkpoint for '" + spec.key + "' under '" +
                                 dir.string() + "' (expected encoder.json + weights.bin)");
    }
    json meta;
    try {
        meta = json::parse(read_file(meta_path));
    } catch (const json::exception& e) {
        throw CorruptArtifact("cannot parse '" + meta_path.string() + "': " + e.what());
    }
    model->vocab_size = meta.at("vocab_size").get<int>();
    model->d_model = meta.at("d_model").get<int>();
    model->d_ff = meta.at("d_ff").get<int>();
    model->layer_count = meta.at("layers").get<int>();
    model->max_positions = meta.at("max_positions").get<int>();
    model->num_labels = meta.at("num_labels").get<int>();
    allocate_model(*model);
    decode_weights(read_file(weights_path), *model);
    if (model->num_labels != num_labels) {
        // classification head re-initialized for the new label set
        model->num_labels = num_labels;
        model->head_w = Parameter<float>("head_w", model->d_model, num_labels);
        model->head_b = Parameter<float>("head_b", 1, num_labels);
        rng::SplitMix64 gen(rng::derive(config.seed, "head-init"));
        for (auto& v : model->head_w.value.data) v = static_cast<float>(gen.normal() * 0.02);
    }
    return model;
}

void require_harmonized(const Corpus& corpus, const char* role) {
    if (corpus.scheme.kind != SchemeKind::flat) {
        throw SchemeMismatch(std::string(role) + " corpus '" + corpus.name + "' is not flat");
    }
    for (const auto& tag : corpus.scheme.vocabulary) {
        if (!is_harmonized_tag(tag)) {
            throw SchemeMismatch(std::string(role) + " corpus '" + corpus.name +
                                 "' carries unharmonized tag '" + tag + "'");
        }
    }
}

std::vector<std::vector<std::string>> predict_with_model(EncoderModel& model,
                                                         const LabelVocabulary& vocab,
                                                         int max_sequence_length,
                                                         const std::vector<Sentence>& sentences) {
    const SubwordSplitter splitter = hash_subword_splitter(model.vocab_size);
    std::vector<std::vector<std::string>> out;
    out.reserve(sentences.size());
    for (const auto& sentence : sentences) {
        std::vector<std::string> words;
        words.reserve(sentence.tokens.size());
        for (const auto& token : sentence.tokens) words.push_back(token.text);

        std::vector<std::string> tags(words.size(), kOutsideTag);
        const AlignmentResult alignment = align_words(words, splitter, max_sequence_length);
        if (!alignment.word_to_first_subword.empty()) {
            Graph<float> g;
            BoundModel bound = bind_model(g, model, /*trainable=*/false);
            const auto logits = forward_logits(g, bound, model, alignment.subword_ids);
            const Mat<float>& z = g.value(logits);
            for (std::size_t w = 0; w < alignment.word_to_first_subword.size(); ++w) {
                const int row = static_cast<int>(alignment.word_to_first_subword[w]);
                int best = 0;
                for (int c = 1; c < z.cols; ++c) {
                    if (z.at(row, c) > z.at(row, best)) best = c;
                }
                tags[w] = vocab.label_of(best);
            }
        }
        out.push_back(std::move(tags));
    }
    return out;
}

double tune_micro_f1(EncoderModel& model, const LabelVocabulary& vocab, int max_sequence_length,
                     const Corpus& tune) {
    const auto predictions = predict_with_model(model, vocab, max_sequence_length, tune.sentences);
    return eval::score(tune, predictions).micro_f1;
}

}  // namespace

std::string EncoderEnv::resolved_cache_dir() const {
    if (!cache_dir.empty()) return cache_dir;
    if (const char* env = std::getenv("NER_ENCODER_CACHE")) return env;
    return {};
}

// ---------------------------------------------------------------------------
// training

TrainedTagger train(const Corpus& corpus, const Corpus& tune, const TrainConfig& config,
                    const EncoderEnv& env) {
    config.check();
    require_harmonized(corpus, "train");
    require_harmonized(tune, "tune");

    const EncoderSpec& spec = env.registry->require(config.encoder);
    const LabelVocabulary vocab = LabelVocabulary::harmonized();
    std::unique_ptr<EncoderModel> model = materialize(spec, config, vocab.size(), env);
    const SubwordSplitter splitter = hash_subword_splitter(model->vocab_size);

    std::vector<AlignmentResult> aligned;
    aligned.reserve(corpus.sentences.size());
    for (const auto& sentence : corpus.sentences) {
        aligned.push_back(align_labels(sentence, vocab, splitter, config.max_sequence_length));
    }

    TrainedTagger tagger;
    tagger.encoder = spec;
    tagger.vocab = vocab;
    tagger.config = config;
    tagger.train_corpus_fingerprint = io::corpus_fingerprint(corpus);
    tagger.backend = backend_descriptor();

    auto params = model->params();
    auto snapshot = [&] {
        std::vector<Mat<float>> s;
        s.reserve(params.size());
        for (const Parameter<float>* p : params) s.push_back(p->value);
        return s;
    };
    auto restore = [&](const std::vector<Mat<float>>& s) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s[i];
    };

    std::vector<Mat<float>> best = snapshot();
    double best_f1 = -1.0;
    int adam_t = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto order = rng::permutation(
            aligned.size(), rng::derive(config.seed, "epoch-" + std::to_string(epoch)));
        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            for (Parameter<float>* p : params) p->zero_grad();
            for (std::size_t i = start; i < end; ++i) {
                const AlignmentResult& a = aligned[order[i]];
                Graph<float> g;
                BoundModel bound = bind_model(g, *model, /*trainable=*/true);
                const auto logits = forward_logits(g, bound, *model, a.subword_ids);
                epoch_loss += g.masked_cross_entropy(logits, a.label_ids, vocab.ignore_id);
                g.backward();
                ++seen;
            }
            ++adam_t;
            const float scale = 1.0f / static_cast<float>(end - start);
            tape::adam_step<float>(params, static_cast<float>(config.learning_rate), 0.9f, 0.999f,
                                   1e-8f, adam_t, scale);
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = seen == 0 ? 0.0 : epoch_loss / static_cast<double>(seen);
        log.tune_micro_f1 = tune_micro_f1(*model, vocab, config.max_sequence_length, tune);
        tagger.log.push_back(log);
        if (log.tune_micro_f1 > best_f1) {
            best_f1 = log.tune_micro_f1;
            best = snapshot();
        }
    }
    restore(best);

    tagger.model = std::shared_ptr<const EncoderModel>(model.release());
    return tagger;
}

std::vector<std::vector<std::string>> predict(const TrainedTagger& tagger,
                                              const std::vector<Sentence>& sentences) {
    if (!tagger.model) throw CorruptArtifact("tagger has no model");
    auto& model = const_cast<EncoderModel&>(*tagger.model);  // read-only graph binding
    return predict_with_model(model, tagger.vocab, tagger.config.max_sequence_length, sentences);
}

double batch_loss(const TrainedTagger& tagger, const std::vector<AlignmentResult>& batch) {
    if (!tagger.model) throw CorruptArtifact("tagger has no model");
    if (batch.empty()) return 0.0;
    auto& model = const_cast<EncoderModel&>(*tagger.model);
    double total = 0.0;
    for (const AlignmentResult& a : batch) {
        Graph<float> g;
        BoundModel bound = bind_model(g, model, /*trainable=*/false);
        const auto logits = forward_logits(g, bound, model, a.subword_ids);
        total += g.masked_cross_entropy(logits, a.label_ids, tagger.vocab.ignore_id);
    }
    return total / static_cast<double>(batch.size());
}

SubwordSplitter splitter_for(const EncoderModel& model) {
    return hash_subword_splitter(model.vocab_size);
}

// ---------------------------------------------------------------------------
// persistence

void save_tagger(const TrainedTagger& tagger, const std::string& dir) {
    if (!tagger.model) throw CorruptArtifact("tagger has no model to save");
    fs::create_directories(dir);
    const std::string blob = encode_weights(*tagger.model);
    const std::string blob_sha = Sha256::of(blob);
    write_file(fs::path(dir) / "weights.bin", blob);

    json manifest;
    manifest["format_version"] = 1;
    manifest["encoder"] = {{"key", tagger.encoder.key},
                           {"family", family_name(tagger.encoder.family)},
                           {"multilingual", tagger.encoder.multilingual},
                           {"checkpoint", tagger.encoder.checkpoint},
                           {"identity_hash", tagger.encoder.identity_hash()}};
    manifest["arch"] = {{"vocab_size", tagger.model->vocab_size},
                        {"d_model", tagger.model->d_model},
                        {"d_ff", tagger.model->d_ff},
                        {"layers", tagger.model->layer_count},
                        {"max_positions", tagger.model->max_positions},
                        {"num_labels", tagger.model->num_labels}};
    manifest["labels"] = tagger.vocab.labels;
    manifest["ignore_id"] = tagger.vocab.ignore_id;
    manifest["config"] = {{"encoder", tagger.config.encoder},
                          {"max_sequence_length", tagger.config.max_sequence_length},
                          {"epochs", tagger.config.epochs},
                          {"learning_rate", tagger.config.learning_rate},
                          {"batch_size", tagger.config.batch_size},
                          {"seed", tagger.config.seed}};
    manifest["train_corpus_fingerprint"] = tagger.train_corpus_fingerprint;
    manifest["backend"] = tagger.backend;
    manifest["weights_sha256"] = blob_sha;
    json log = json::array();
    for (const auto& entry : tagger.log) {
        log.push_back({{"epoch", entry.epoch},
                       {"train_loss", entry.train_loss},
                       {"tune_micro_f1", entry.tune_micro_f1}});
    }
    manifest["log"] = log;
    write_file(fs::path(dir) / "manifest.json", manifest.dump(2) + "\n");
}

TrainedTagger load_tagger(const std::string& dir, const EncoderRegistry& registry) {
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw CorruptArtifact("cannot parse '" + manifest_path.string() + "': " + e.what());
    }

    TrainedTagger tagger;
    try {
        if (manifest.at("format_version").get<int>() != 1) {
            throw CorruptArtifact("unsupported tagger format version");
        }
        const json& enc = manifest.at("encoder");
        tagger.encoder.key = enc.at("key").get<std::string>();
        tagger.encoder.family = family_from_name(enc.at("family").get<std::string>());
        tagger.encoder.multilingual = enc.at("multilingual").get<bool>();
        tagger.encoder.checkpoint = enc.at("checkpoint").get<std::string>();

        const EncoderSpec* registered = registry.find(tagger.encoder.key);
        if (registered == nullptr) {
            throw CorruptArtifact("encoder key '" + tagger.encoder.key +
                                  "' is not in the registry");
        }
        const std::string stored_hash = enc.at("identity_hash").get<std::string>();
        if (registered->identity_hash() != stored_hash) {
            throw CorruptArtifact("encoder identity hash mismatch for key '" +
                                  tagger.encoder.key + "': registry resolves differently");
        }
        tagger.encoder = *registered;

        tagger.vocab.labels = manifest.at("labels").get<std::vector<std::string>>();
        tagger.vocab.ignore_id = manifest.at("ignore_id").get<int>();
        try {
            tagger.vocab.check();
        } catch (const Error& e) {
            throw CorruptArtifact(std::string("label vocabulary invalid: ") + e.what());
        }

        const json& cfg = manifest.at("config");
        tagger.config.encoder = cfg.at("encoder").get<std::string>();
        tagger.config.max_sequence_length = cfg.at("max_sequence_length").get<int>();
        tagger.config.epochs = cfg.at("epochs").get<int>();
        tagger.config.learning_rate = cfg.at("learning_rate").get<double>();
        tagger.config.batch_size = cfg.at("batch_size").get<int>();
        tagger.config.seed = cfg.at("seed").get<std::uint64_t>();

        tagger.train_corpus_fingerprint =
            manifest.at("train_corpus_fingerprint").get<std::string>();
        tagger.backend = manifest.at("backend").get<std::string>();
        for (const auto& entry : manifest.at("log")) {
            tagger.log.push_back({entry.at("epoch").get<int>(),
                                  entry.at("train_loss").get<double>(),
                                  entry.at("tune_micro_f1").get<double>()});
        }

        auto model = std::make_unique<EncoderModel>();
        model->spec = tagger.encoder;
        const json& arch = manifest.at("arch");
        model->vocab_size = arch.at("vocab_size").get<int>();
        model->d_model = arch.at("d_model").get<int>();
        model->d_ff = arch.at("d_ff").get<int>();
        model->layer_count = arch.at("layers").get<int>();
        model->max_positions = arch.at("max_positions").get<int>();
        model->num_labels = arch.at("num_labels").get<int>();
        if (model->num_labels != tagger.vocab.size()) {
            throw CorruptArtifact("label vocabulary size does not match the classification head");
        }
        allocate_model(*model);

        const std::string blob = read_file(fs::path(dir) / "weights.bin");
        const std::string expected_sha = manifest.at("weights_sha256").get<std::string>();
        if (Sha256::of(blob) != expected_sha) {
            throw CorruptArtifact("weights.bin checksum mismatch");
        }
        decode_weights(blob, *model);
        tagger.model = std::shared_ptr<const EncoderModel>(model.release());
    } catch (const json::exception& e) {
        throw CorruptArtifact(std::string("manifest field error: ") + e.what());
    }
    return tagger;
}

}  // namespace ner::modeling
