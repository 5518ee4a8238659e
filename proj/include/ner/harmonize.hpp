#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ner/corpus.hpp"
#include "ner/fraction.hpp"

namespace ner::harmonize {

// Total mapping from a source tag vocabulary onto {NEP, NEO, NEL, O}. For IOB
// corpora the keys are the IOB classes (PERSON, LOC, ...), for flat corpora
// the tags themselves.
struct TagMap {
    std::map<std::string, std::string> entries;
    std::optional<std::string> default_target;

    // Throws UnmappedTag when the source is unknown and no default is set.
    const std::string& apply(const std::string& source) const;
};

struct SplitSpec {
    Fraction train;
    Fraction test;
    Fraction tune;
    std::uint64_t seed = 0;

    SplitSpec() = default;
    SplitSpec(Fraction tr, Fraction te, Fraction tu, std::uint64_t s);

    static SplitSpec seventy_fifteen_fifteen(std::uint64_t seed) {
        return SplitSpec(Fraction(70, 100), Fraction(15, 100), Fraction(15, 100), seed);
    }
};

struct SplitResult {
    Corpus train;
    Corpus test;
    Corpus tune;
};

// Converts an IOB corpus to the flat harmonized scheme: B-X and I-X both map
// to class_map(X), outside stays outside. A dangling I-X is treated exactly
// like B-X. Already-harmonized flat corpora pass through unchanged, which
// makes the conversion idempotent. Result vocabulary is {NEP, NEO, NEL, O}.
Corpus strip_iob(const Corpus& corpus, const TagMap& class_map);

// Rewrites flat tags per the map; requires a flat input scheme. Result
// vocabulary is {NEP, NEO, NEL, O}.
Corpus apply_tag_map(const Corpus& corpus, const TagMap& map);

// Applies strip_iob or apply_tag_map depending on the corpus scheme.
Corpus harmonize_corpus(const Corpus& corpus, const TagMap& map);

// Shuffles sentences with the seeded Fisher-Yates permutation (rng.hpp) and
// cuts at floor(train*n) and floor((train+test)*n); the remainder is tune.
SplitResult make_split(const Corpus& corpus, const SplitSpec& spec);

// Disjoint union of the inputs' sentences in a seed-deterministic order.
// All inputs must share the flat harmonized scheme. Result language is
// "mixed" when input languages differ; sentence provenance records the
// source corpus name.
Corpus merge_corpora(const std::vector<Corpus>& corpora, std::uint64_t seed);

// Built-in maps: "ijcnlp_flat", "iitb_iob", "wikiann_iob".
const std::map<std::string, TagMap>& builtin_maps();

// `source<TAB>target` lines, '#' comments, optional `*<TAB>target` default.
TagMap load_tag_map(std::istream& in);
TagMap load_tag_map_file(const std::string& path);

// Resolves a CLI/config tag-map name: a builtin key or a file path.
TagMap resolve_tag_map(const std::string& name_or_path);

}  // namespace ner::harmonize
