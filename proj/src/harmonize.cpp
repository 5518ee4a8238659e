#include "ner/harmonize.hpp"

#include <fstream>
#include <sstream>

#include "ner/errors.hpp"
#include "ner/rng.hpp"

namespace ner::harmonize {

namespace {

void check_target(const std::string& target) {
    if (!is_harmonized_tag(target)) {
        throw ConfigError("tag-map target '" + target + "' is not one of NEP, NEO, NEL, O");
    }
}

bool already_harmonized(const Corpus& corpus) {
    if (corpus.scheme.kind != SchemeKind::flat) return false;
    for (const auto& tag : corpus.scheme.vocabulary) {
        if (!is_harmonized_tag(tag)) return false;
    }
    return true;
}

}  // namespace

const std::string& TagMap::apply(const std::string& source) const {
    const auto it = entries.find(source);
    if (it != entries.end()) return it->second;
    if (default_target) return *default_target;
    throw UnmappedTag(source);
}

SplitSpec::SplitSpec(Fraction tr, Fraction te, Fraction tu, std::uint64_t s)
    : train(tr), test(te), tune(tu), seed(s) {
    if (!(train + test + tune).is_one()) {
        throw ConfigError("split fractions " + train.str() + " + " + test.str() + " + " +
                          tune.str() + " do not sum to 1");
    }
}

Corpus strip_iob(const Corpus& corpus, const TagMap& class_map) {
    for (const auto& [source, target] : class_map.entries) check_target(target);
    if (class_map.default_target) check_target(*class_map.default_target);

    if (already_harmonized(corpus)) return corpus;
    if (corpus.scheme.kind != SchemeKind::iob) {
        throw SchemeMismatch("strip_iob needs an IOB corpus (or an already-harmonized one), '" +
                             corpus.name + "' is flat with unmapped tags");
    }

    Corpus out = corpus;
    out.scheme = TagSchemeDescriptor::harmonized();
    for (auto& sentence : out.sentences) {
        for (auto& token : sentence.tokens) {
            if (token.tag == corpus.scheme.outside_tag) {
                token.tag = kOutsideTag;
                continue;
            }
            char prefix = 0;
            std::string cls;
            if (!split_iob_tag(token.tag, prefix, cls)) cls = token.tag;
            const auto it = class_map.entries.find(cls);
            if (it != class_map.entries.end()) {
                token.tag = it->second;
            } else if (class_map.default_target) {
                token.tag = *class_map.default_target;
            } else {
                throw UnmappedClass(cls);
            }
        }
    }
    return out;
}

Corpus apply_tag_map(const Corpus& corpus, const TagMap& map) {
    for (const auto& [source, target] : map.entries) check_target(target);
    if (map.default_target) check_target(*map.default_target);
    if (corpus.scheme.kind != SchemeKind::flat) {
        throw SchemeMismatch("apply_tag_map needs a flat corpus, '" + corpus.name + "' is IOB");
    }

    Corpus out = corpus;
    out.scheme = TagSchemeDescriptor::harmonized();
    for (auto& sentence : out.sentences) {
        for (auto& token : sentence.tokens) token.tag = map.apply(token.tag);
    }
    return out;
}

Corpus harmonize_corpus(const Corpus& corpus, const TagMap& map) {
    if (already_harmonized(corpus)) return corpus;
    if (corpus.scheme.kind == SchemeKind::iob) return strip_iob(corpus, map);
    return apply_tag_map(corpus, map);
}

SplitResult make_split(const Corpus& corpus, const SplitSpec& spec) {
    const std::size_t n = corpus.sentences.size();
    if (n < 3) throw TooFewSentences(n, 3);

    const std::vector<std::size_t> order = rng::permutation(n, spec.seed);
    const std::size_t cut1 = spec.train.floor_times(n);
    const std::size_t cut2 = (spec.train + spec.test).floor_times(n);

    SplitResult result;
    auto part = [&](Corpus& target, const char* suffix, std::size_t begin, std::size_t end) {
        target.name = corpus.name + suffix;
        target.language = corpus.language;
        target.scheme = corpus.scheme;
        target.sentences.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            target.sentences.push_back(corpus.sentences[order[i]]);
        }
    };
    part(result.train, ".train", 0, cut1);
    part(result.test, ".test", cut1, cut2);
    part(result.tune, ".tune", cut2, n);
    return result;
}

Corpus merge_corpora(const std::vector<Corpus>& corpora, std::uint64_t seed) {
    if (corpora.empty()) throw ConfigError("merge needs at least one corpus");

    Corpus out;
    out.scheme = TagSchemeDescriptor::harmonized();
    out.language = corpora.front().language;
    std::string name;
    for (const auto& corpus : corpora) {
        if (corpus.scheme.kind != SchemeKind::flat || !already_harmonized(corpus)) {
            throw SchemeMismatch("merge input '" + corpus.name +
                                 "' is not on the flat harmonized scheme");
        }
        if (corpus.language != out.language) out.language = "mixed";
        if (!name.empty()) name += "+";
        name += corpus.name;
        for (const auto& sentence : corpus.sentences) {
            out.sentences.push_back(sentence);
            if (out.sentences.back().source.empty()) out.sentences.back().source = corpus.name;
        }
    }
    out.name = name;

    const std::vector<std::size_t> order = rng::permutation(out.sentences.size(), seed);
    std::vector<Sentence> shuffled;
    shuffled.reserve(out.sentences.size());
    for (const std::size_t i : order) shuffled.push_back(std::move(out.sentences[i]));
    out.sentences = std::move(shuffled);
    return out;
}

const std::map<std::string, TagMap>& builtin_maps() {
    static const std::map<std::string, TagMap> maps = [] {
        std::map<std::string, TagMap> m;

        TagMap ijcnlp;
        ijcnlp.entries = {{"NEP", "NEP"},  {"NEO", "NEO"},  {"NEL", "NEL"},  {"O", "O"},
                          {"NETI", "O"},   {"NETE", "O"},   {"NEA", "O"},    {"NED", "O"},
                          {"NEM", "O"},    {"NEN", "O"},    {"NETO", "O"}};
        ijcnlp.default_target = "O";
        m["ijcnlp_flat"] = std::move(ijcnlp);

        TagMap iitb;
        iitb.entries = {{"PERSON", "NEP"}, {"ORGANISATION", "NEO"}, {"LOCATION", "NEL"}};
        m["iitb_iob"] = std::move(iitb);

        TagMap wikiann;
        wikiann.entries = {{"PER", "NEP"}, {"ORG", "NEO"}, {"LOC", "NEL"}};
        m["wikiann_iob"] = std::move(wikiann);

        return m;
    }();
    return maps;
}

TagMap load_tag_map(std::istream& in) {
    TagMap map;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto tab = line.find('\t', first);
        if (tab == std::string::npos) {
            throw MalformedLine(line_number, "tag-map line needs `source<TAB>target`");
        }
        const std::string source = line.substr(first, tab - first);
        std::string target = line.substr(tab + 1);
        const auto end = target.find_last_not_of(" \t");
        target = (end == std::string::npos) ? "" : target.substr(0, end + 1);
        if (source.empty() || target.empty()) {
            throw MalformedLine(line_number, "empty source or target in tag map");
        }
        check_target(target);
        if (source == "*") {
            map.default_target = target;
        } else {
            map.entries[source] = target;
        }
    }
    return map;
}

TagMap load_tag_map_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open tag map '" + path + "'");
    return load_tag_map(in);
}

TagMap resolve_tag_map(const std::string& name_or_path) {
    const auto& builtins = builtin_maps();
    const auto it = builtins.find(name_or_path);
    if (it != builtins.end()) return it->second;
    std::ifstream probe(name_or_path);
    if (probe) return load_tag_map_file(name_or_path);
    throw ConfigError("unknown tag map '" + name_or_path + "': not a builtin (" +
                      "ijcnlp_flat, iitb_iob, wikiann_iob) and not a readable file");
}

}  // namespace ner::harmonize
