#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "ner/corpus_io.hpp"
#include "ner/errors.hpp"
#include "ner/harmonize.hpp"
#include "testutil.hpp"

using namespace ner;
using harmonize::TagMap;

namespace {

Corpus corpus_from(const std::string& text, const std::string& name = "t",
                   const std::string& language = "mr") {
    std::istringstream in(text);
    return io::parse_conll(in, name, language);
}

// multiset of sentences as serialized strings
std::map<std::string, std::size_t> sentence_multiset(const Corpus& corpus) {
    std::map<std::string, std::size_t> out;
    for (const auto& sentence : corpus.sentences) {
        std::string key;
        for (const auto& token : sentence.tokens) key += token.text + "\t" + token.tag + "\n";
        ++out[key];
    }
    return out;
}

}  // namespace

TEST_CASE("strip_iob maps B-/I- onto the flat class tags") {
    const Corpus corpus = corpus_from("अ\tB-PERSON\nब\tI-PERSON\n");
    const Corpus flat = harmonize::strip_iob(corpus, harmonize::builtin_maps().at("iitb_iob"));
    CHECK(flat.sentences[0].tokens[0].tag == "NEP");
    CHECK(flat.sentences[0].tokens[1].tag == "NEP");
    CHECK(flat.scheme.kind == SchemeKind::flat);
    CHECK(flat.scheme.vocabulary == std::set<std::string>{"NEL", "NEO", "NEP", "O"});
}

TEST_CASE("strip_iob handles wikiann classes and leaves O alone") {
    const Corpus corpus = corpus_from("अ\tB-LOC\nब\tI-LOC\nक\tO\n");
    const Corpus flat = harmonize::strip_iob(corpus, harmonize::builtin_maps().at("wikiann_iob"));
    CHECK(flat.sentences[0].tokens[0].tag == "NEL");
    CHECK(flat.sentences[0].tokens[1].tag == "NEL");
    CHECK(flat.sentences[0].tokens[2].tag == "O");
}

TEST_CASE("strip_iob keeps an all-O sentence unchanged") {
    const Corpus corpus = corpus_from("अ\tO\nब\tO\n", "allo");
    Corpus iob = corpus;
    iob.scheme.kind = SchemeKind::iob;
    const Corpus flat = harmonize::strip_iob(iob, harmonize::builtin_maps().at("iitb_iob"));
    CHECK(flat.sentences[0].tokens[0].tag == "O");
    CHECK(flat.sentences[0].tokens[1].tag == "O");
}

TEST_CASE("strip_iob treats a dangling I-X like B-X") {
    const Corpus corpus = corpus_from("अ\tI-LOCATION\n");
    const Corpus flat = harmonize::strip_iob(corpus, harmonize::builtin_maps().at("iitb_iob"));
    CHECK(flat.sentences[0].tokens[0].tag == "NEL");
}

TEST_CASE("strip_iob raises UnmappedClass without a default") {
    const Corpus corpus = corpus_from("अ\tB-GPE\n");
    CHECK_THROWS_AS(harmonize::strip_iob(corpus, harmonize::builtin_maps().at("iitb_iob")),
                    UnmappedClass);
}

TEST_CASE("harmonization is idempotent on already-harmonized corpora") {
    const Corpus corpus = corpus_from("अ\tB-PERSON\nब\tO\n");
    const TagMap& map = harmonize::builtin_maps().at("iitb_iob");
    const Corpus once = harmonize::harmonize_corpus(corpus, map);
    const Corpus twice = harmonize::harmonize_corpus(once, map);
    CHECK(io::serialize_conll(once) == io::serialize_conll(twice));
    const Corpus stripped_again = harmonize::strip_iob(once, map);
    CHECK(io::serialize_conll(once) == io::serialize_conll(stripped_again));
}

TEST_CASE("apply_tag_map rewrites flat tags with the default") {
    const Corpus corpus = corpus_from("अ\tNETI\nब\tNEP\nक\tNETP\n");
    const Corpus flat =
        harmonize::apply_tag_map(corpus, harmonize::builtin_maps().at("ijcnlp_flat"));
    CHECK(flat.sentences[0].tokens[0].tag == "O");   // listed replacement
    CHECK(flat.sentences[0].tokens[1].tag == "NEP");  // identity
    CHECK(flat.sentences[0].tokens[2].tag == "O");   // default
}

TEST_CASE("apply_tag_map raises UnmappedTag without a default") {
    const Corpus corpus = corpus_from("अ\tNEX\n");
    TagMap map;
    map.entries = {{"NEP", "NEP"}};
    CHECK_THROWS_AS(harmonize::apply_tag_map(corpus, map), UnmappedTag);
}

TEST_CASE("apply_tag_map requires a flat scheme") {
    const Corpus corpus = corpus_from("अ\tB-PERSON\n");
    CHECK_THROWS_AS(harmonize::apply_tag_map(corpus, harmonize::builtin_maps().at("ijcnlp_flat")),
                    SchemeMismatch);
}

TEST_CASE("tag maps refuse targets outside the harmonized set") {
    TagMap map;
    map.entries = {{"NEP", "PERSON"}};
    const Corpus corpus = corpus_from("अ\tNEP\n");
    CHECK_THROWS_AS(harmonize::apply_tag_map(corpus, map), ConfigError);
}

TEST_CASE("builtin maps carry the documented entries") {
    const auto& maps = harmonize::builtin_maps();
    CHECK(maps.at("ijcnlp_flat").apply("NETO") == "O");
    CHECK(maps.at("ijcnlp_flat").apply("NETI") == "O");
    CHECK(maps.at("ijcnlp_flat").apply("anything") == "O");  // default
    CHECK(maps.at("iitb_iob").entries.at("ORGANISATION") == "NEO");
    CHECK(maps.at("wikiann_iob").entries.at("PER") == "NEP");
    CHECK_FALSE(maps.at("iitb_iob").default_target.has_value());
}

TEST_CASE("tag mapping changes no texts, counts or order") {
    std::ifstream in(testutil::fixture_path("ijcnlp_fixture.conll"));
    const Corpus corpus = io::parse_conll(in, "ijcnlp", "hi");
    const Corpus flat =
        harmonize::apply_tag_map(corpus, harmonize::builtin_maps().at("ijcnlp_flat"));
    REQUIRE(flat.sentences.size() == corpus.sentences.size());
    for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
        REQUIRE(flat.sentences[s].tokens.size() == corpus.sentences[s].tokens.size());
        for (std::size_t t = 0; t < corpus.sentences[s].tokens.size(); ++t) {
            CHECK(flat.sentences[s].tokens[t].text == corpus.sentences[s].tokens[t].text);
        }
    }
}

TEST_CASE("make_split cuts 11400 sentences into 7980/1710/1710") {
    Corpus corpus;
    corpus.name = "big";
    corpus.language = "hi";
    corpus.scheme = TagSchemeDescriptor::harmonized();
    for (int i = 0; i < 11400; ++i) {
        corpus.sentences.push_back({{{"t" + std::to_string(i), "O"}}, ""});
    }
    const auto result =
        harmonize::make_split(corpus, harmonize::SplitSpec::seventy_fifteen_fifteen(99));
    CHECK(result.train.sentence_count() == 7980);
    CHECK(result.test.sentence_count() == 1710);
    CHECK(result.tune.sentence_count() == 1710);
}

TEST_CASE("make_split is deterministic in (corpus, spec)") {
    rng::SplitMix64 gen(11);
    const Corpus corpus = testutil::random_flat_corpus(gen, 10, 10);
    const auto spec = harmonize::SplitSpec::seventy_fifteen_fifteen(5);
    const auto a = harmonize::make_split(corpus, spec);
    const auto b = harmonize::make_split(corpus, spec);
    CHECK(io::serialize_conll(a.train) == io::serialize_conll(b.train));
    CHECK(io::serialize_conll(a.test) == io::serialize_conll(b.test));
    CHECK(io::serialize_conll(a.tune) == io::serialize_conll(b.tune));
}

TEST_CASE("make_split partitions the corpus exactly for random seeds") {
    rng::SplitMix64 gen(13);
    for (int round = 0; round < 40; ++round) {
        const Corpus corpus = testutil::random_flat_corpus(gen, 3, 40);
        const harmonize::SplitSpec spec(Fraction(70, 100), Fraction(15, 100), Fraction(15, 100),
                                        gen.next());
        const auto result = harmonize::make_split(corpus, spec);
        CHECK(result.train.sentence_count() + result.test.sentence_count() +
                  result.tune.sentence_count() ==
              corpus.sentence_count());

        auto whole = sentence_multiset(corpus);
        std::map<std::string, std::size_t> parts;
        for (const Corpus* c : {&result.train, &result.test, &result.tune}) {
            for (const auto& [key, count] : sentence_multiset(*c)) parts[key] += count;
        }
        CHECK(parts == whole);

        // histogram conservation across the three parts
        const CorpusStats total = io::tag_histogram(corpus);
        std::map<std::string, std::size_t> merged;
        for (const Corpus* c : {&result.train, &result.test, &result.tune}) {
            for (const auto& [tag, count] : io::tag_histogram(*c).per_tag) merged[tag] += count;
        }
        CHECK(merged == total.per_tag);
    }
}

TEST_CASE("make_split rejects tiny corpora") {
    Corpus corpus;
    corpus.name = "tiny";
    corpus.language = "mr";
    corpus.scheme = TagSchemeDescriptor::harmonized();
    corpus.sentences.push_back({{{"a", "O"}}, ""});
    corpus.sentences.push_back({{{"b", "O"}}, ""});
    CHECK_THROWS_AS(
        harmonize::make_split(corpus, harmonize::SplitSpec::seventy_fifteen_fifteen(1)),
        TooFewSentences);
}

TEST_CASE("split fractions must sum to one") {
    CHECK_THROWS_AS(
        harmonize::SplitSpec(Fraction(1, 2), Fraction(1, 4), Fraction(1, 3), 0),
        ConfigError);
}

TEST_CASE("merge_corpora keeps the disjoint union and adds histograms") {
    rng::SplitMix64 gen(17);
    const Corpus a = testutil::random_flat_corpus(gen, 5, 20);
    Corpus b = testutil::random_flat_corpus(gen, 5, 20);
    b.name = "other";
    b.language = "hi";
    const Corpus merged = harmonize::merge_corpora({a, b}, 3);

    CHECK(merged.sentence_count() == a.sentence_count() + b.sentence_count());
    CHECK(merged.language == "mixed");

    auto expected = sentence_multiset(a);
    for (const auto& [key, count] : sentence_multiset(b)) expected[key] += count;
    CHECK(sentence_multiset(merged) == expected);

    std::map<std::string, std::size_t> sum;
    for (const Corpus* c : {&a, static_cast<const Corpus*>(&b)}) {
        for (const auto& [tag, count] : io::tag_histogram(*c).per_tag) sum[tag] += count;
    }
    CHECK(io::tag_histogram(merged).per_tag == sum);
}

TEST_CASE("merging a single corpus permutes the same multiset") {
    rng::SplitMix64 gen(23);
    const Corpus a = testutil::random_flat_corpus(gen, 5, 20);
    const Corpus merged = harmonize::merge_corpora({a}, 9);
    CHECK(merged.sentence_count() == a.sentence_count());
    CHECK(sentence_multiset(merged) == sentence_multiset(a));
}

TEST_CASE("merge preserves per-sentence provenance") {
    rng::SplitMix64 gen(29);
    Corpus a = testutil::random_flat_corpus(gen, 3, 6);
    a.name = "left";
    Corpus b = testutil::random_flat_corpus(gen, 3, 6);
    b.name = "right";
    const Corpus merged = harmonize::merge_corpora({a, b}, 1);
    std::size_t left = 0, right = 0;
    for (const auto& sentence : merged.sentences) {
        if (sentence.source == "left") ++left;
        if (sentence.source == "right") ++right;
    }
    CHECK(left == a.sentence_count());
    CHECK(right == b.sentence_count());
}

TEST_CASE("merge_corpora rejects unharmonized inputs") {
    const Corpus iob = corpus_from("अ\tB-PERSON\n");
    CHECK_THROWS_AS(harmonize::merge_corpora({iob}, 0), SchemeMismatch);
}

TEST_CASE("merge sized like the paper datasets yields 11567 sentences") {
    auto synthetic = [](std::size_t n, const std::string& name, const std::string& lang) {
        Corpus corpus;
        corpus.name = name;
        corpus.language = lang;
        corpus.scheme = TagSchemeDescriptor::harmonized();
        for (std::size_t i = 0; i < n; ++i) {
            corpus.sentences.push_back({{{"w" + std::to_string(i), "O"}}, ""});
        }
        return corpus;
    };
    const Corpus merged =
        harmonize::merge_corpora({synthetic(7979, "ijcnlp", "hi"), synthetic(3588, "iitb", "mr")},
                                 42);
    CHECK(merged.sentence_count() == 11567);
}

TEST_CASE("tag map files parse entries, comments and the default line") {
    std::istringstream in(
        "# IJCNLP replacements\n"
        "NEP\tNEP\n"
        "NETI\tO\n"
        "*\tO\n");
    const TagMap map = harmonize::load_tag_map(in);
    CHECK(map.entries.at("NEP") == "NEP");
    CHECK(map.entries.at("NETI") == "O");
    REQUIRE(map.default_target.has_value());
    CHECK(*map.default_target == "O");
}

TEST_CASE("tag map files reject lines without a tab") {
    std::istringstream in("NEP NEP\n");
    CHECK_THROWS_AS(harmonize::load_tag_map(in), MalformedLine);
}

TEST_CASE("resolve_tag_map falls back from builtins to files") {
    CHECK(harmonize::resolve_tag_map("wikiann_iob").entries.count("PER") == 1);
    CHECK_THROWS_AS(harmonize::resolve_tag_map("no_such_map"), ConfigError);
}

TEST_CASE("fraction parsing handles decimals and ratios") {
    CHECK(Fraction::parse("0.70") == Fraction(7, 10));
    CHECK(Fraction::parse("70/100") == Fraction(7, 10));
    CHECK(Fraction::parse("1") == Fraction(1, 1));
    CHECK((Fraction::parse("0.70") + Fraction::parse("0.15") + Fraction::parse("0.15")).is_one());
}
