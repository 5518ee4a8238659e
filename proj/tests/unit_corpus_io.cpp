#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ner/corpus_io.hpp"
#include "ner/errors.hpp"
#include "ner/sha256.hpp"
#include "testutil.hpp"

using namespace ner;

TEST_CASE("parse_conll reads a minimal IOB corpus") {
    std::istringstream in("रमेश\tB-PERSON\n\n");
    const Corpus corpus = io::parse_conll(in, "mini", "mr");
    CHECK(corpus.sentences.size() == 1);
    CHECK(corpus.sentences[0].tokens.size() == 1);
    CHECK(corpus.sentences[0].tokens[0].text == "रमेश");
    CHECK(corpus.sentences[0].tokens[0].tag == "B-PERSON");
    CHECK(corpus.scheme.kind == SchemeKind::iob);
    CHECK(corpus.scheme.vocabulary.count("B-PERSON") == 1);
    CHECK(corpus.scheme.vocabulary.count("O") == 1);
}

TEST_CASE("parse_conll accepts space separators and infers flat scheme") {
    std::istringstream in("पुणे   NEL\nगाव O\n");
    const Corpus corpus = io::parse_conll(in, "mini", "mr");
    CHECK(corpus.scheme.kind == SchemeKind::flat);
    CHECK(corpus.sentences[0].tokens[0].tag == "NEL");
}

TEST_CASE("parse_conll reports malformed line numbers") {
    std::istringstream in("पुणे\tNEL\nरमेश\n");
    try {
        io::parse_conll(in, "broken", "mr");
        FAIL("expected MalformedLine");
    } catch (const MalformedLine& e) {
        CHECK(e.line_number() == 2);
    }
}

TEST_CASE("parse_conll rejects empty input") {
    std::istringstream in("\n\n  \n");
    CHECK_THROWS_AS(io::parse_conll(in, "empty", "mr"), EmptyCorpus);
}

TEST_CASE("parse_conll keeps first field as token and last as tag on wide lines") {
    std::vector<std::string> warnings;
    io::ParseOptions options;
    options.warnings = &warnings;
    std::istringstream in("रमेश\tNNP\tNEP\n");
    const Corpus corpus = io::parse_conll(in, "wide", "hi", options);
    CHECK(corpus.sentences[0].tokens[0].text == "रमेश");
    CHECK(corpus.sentences[0].tokens[0].tag == "NEP");
    CHECK(warnings.size() == 1);
}

TEST_CASE("consecutive and trailing blank lines collapse") {
    std::istringstream in("एक\tO\n\n\n\nदोन\tO\n\n\n");
    const Corpus corpus = io::parse_conll(in, "blanks", "mr");
    CHECK(corpus.sentences.size() == 2);
}

TEST_CASE("scheme inference is overridable") {
    io::ParseOptions options;
    options.scheme_override = SchemeKind::flat;
    std::istringstream in("रमेश\tB-PERSON\n");
    const Corpus corpus = io::parse_conll(in, "forced", "mr", options);
    CHECK(corpus.scheme.kind == SchemeKind::flat);
}

TEST_CASE("serialize_conll emits the exact two-column format") {
    Corpus corpus;
    corpus.name = "one";
    corpus.language = "mr";
    corpus.scheme = TagSchemeDescriptor::harmonized();
    corpus.sentences.push_back({{{"रमेश", "NEP"}}, ""});
    CHECK(io::serialize_conll(corpus) == "रमेश\tNEP\n\n");
}

TEST_CASE("serialize then parse reproduces sentences bit-exactly") {
    rng::SplitMix64 gen(7);
    for (int round = 0; round < 50; ++round) {
        const Corpus corpus = testutil::random_flat_corpus(gen);
        std::istringstream in(io::serialize_conll(corpus));
        const Corpus back = io::parse_conll(in, corpus.name, corpus.language);
        REQUIRE(back.sentences.size() == corpus.sentences.size());
        for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
            REQUIRE(back.sentences[s].tokens.size() == corpus.sentences[s].tokens.size());
            for (std::size_t t = 0; t < corpus.sentences[s].tokens.size(); ++t) {
                CHECK(back.sentences[s].tokens[t].text == corpus.sentences[s].tokens[t].text);
                CHECK(back.sentences[s].tokens[t].tag == corpus.sentences[s].tokens[t].tag);
            }
        }
        CHECK(io::serialize_conll(back) == io::serialize_conll(corpus));
    }
}

TEST_CASE("parsing is deterministic") {
    std::ifstream a(testutil::fixture_path("iitb_fixture.conll"));
    std::ifstream b(testutil::fixture_path("iitb_fixture.conll"));
    const Corpus ca = io::parse_conll(a, "iitb", "mr");
    const Corpus cb = io::parse_conll(b, "iitb", "mr");
    CHECK(io::corpus_fingerprint(ca) == io::corpus_fingerprint(cb));
}

TEST_CASE("fixture round-trip keeps the histogram identical") {
    std::ifstream in(testutil::fixture_path("iitb_fixture.conll"));
    const Corpus corpus = io::parse_conll(in, "iitb", "mr");
    const CorpusStats before = io::tag_histogram(corpus);
    std::istringstream again(io::serialize_conll(corpus));
    const CorpusStats after = io::tag_histogram(io::parse_conll(again, "iitb", "mr"));
    CHECK(before == after);
}

TEST_CASE("tag_histogram counts every token and absent tags read zero") {
    std::istringstream in("क\tNEP\nख\tO\nग\tNEP\n\nघ\tNEL\n");
    const Corpus corpus = io::parse_conll(in, "hist", "mr");
    const CorpusStats stats = io::tag_histogram(corpus);
    CHECK(stats.sentence_count == 2);
    CHECK(stats.tag_count == 4);
    CHECK(stats.count("NEP") == 2);
    CHECK(stats.count("NEL") == 1);
    CHECK(stats.count("O") == 1);
    CHECK(stats.count("NEO") == 0);
    std::size_t sum = 0;
    for (const auto& [tag, count] : stats.per_tag) sum += count;
    CHECK(sum == stats.tag_count);
}

TEST_CASE("fixture histogram matches the committed line-scan output") {
    std::ifstream in(testutil::fixture_path("iitb_fixture.conll"));
    const Corpus corpus = io::parse_conll(in, "iitb", "mr");
    const CorpusStats stats = io::tag_histogram(corpus);
    CHECK(stats.sentence_count == 200);
    CHECK(stats.tag_count == 2267);
}

TEST_CASE("validate_corpus returns nothing for a well-formed corpus") {
    std::ifstream in(testutil::fixture_path("iitb_fixture.conll"));
    const Corpus corpus = io::parse_conll(in, "iitb", "mr");
    for (const auto& v : io::validate_corpus(corpus)) CHECK(v.warning);
}

TEST_CASE("validate_corpus flags vocabulary violations") {
    Corpus corpus;
    corpus.name = "bad";
    corpus.language = "mr";
    corpus.scheme = TagSchemeDescriptor::harmonized();
    corpus.sentences.push_back({{{"क", "NEX"}}, ""});
    const auto violations = io::validate_corpus(corpus);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].rule == "vocabulary");
    CHECK(violations[0].sentence_index == 0);
    CHECK(violations[0].token_index == 0);
    CHECK_FALSE(violations[0].warning);
}

TEST_CASE("validate_corpus warns on dangling I tags, matching an independent scan") {
    // fixture with two dangling I- positions and one legal continuation
    const std::string text =
        "क\tI-PER\nख\tO\n\n"
        "ग\tB-PER\nघ\tI-PER\nङ\tI-LOC\n\n"
        "च\tB-LOC\nछ\tI-LOC\n\n";
    std::istringstream in(text);
    const Corpus corpus = io::parse_conll(in, "dangling", "mr");

    // independent scan: count I-X tokens whose predecessor is not B-X/I-X
    std::size_t expected = 0;
    for (const auto& sentence : corpus.sentences) {
        for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
            const std::string& tag = sentence.tokens[t].tag;
            if (tag.rfind("I-", 0) != 0) continue;
            const std::string cls = tag.substr(2);
            const bool continued =
                t > 0 && (sentence.tokens[t - 1].tag == "B-" + cls ||
                          sentence.tokens[t - 1].tag == "I-" + cls);
            if (!continued) ++expected;
        }
    }
    CHECK(expected == 2);

    std::size_t warned = 0;
    for (const auto& v : io::validate_corpus(corpus)) {
        if (v.rule == "dangling-I") {
            CHECK(v.warning);
            ++warned;
        }
    }
    CHECK(warned == expected);
}

TEST_CASE("parse_wikiann strips matching language prefixes") {
    std::istringstream in("mr:पुणे\tB-LOC\n");
    const Corpus corpus = io::parse_wikiann(in, "wiki", "mr");
    CHECK(corpus.sentences[0].tokens[0].text == "पुणे");
    CHECK(corpus.sentences[0].tokens[0].tag == "B-LOC");
    CHECK(corpus.scheme.kind == SchemeKind::iob);
}

TEST_CASE("parse_wikiann rejects prefixes from another language") {
    std::istringstream in("hi:दिल्ली\tB-LOC\n");
    CHECK_THROWS_AS(io::parse_wikiann(in, "wiki", "mr"), LanguageMismatch);
}

TEST_CASE("parse_wikiann leaves colon tokens without a language code alone") {
    std::istringstream in("12:30\tO\nmr:घर\tO\n");
    const Corpus corpus = io::parse_wikiann(in, "wiki", "mr");
    CHECK(corpus.sentences[0].tokens[0].text == "12:30");
    CHECK(corpus.sentences[0].tokens[1].text == "घर");
}

TEST_CASE("parse_wikiann enforces the PER/LOC/ORG tag set") {
    std::istringstream in("mr:पुणे\tB-GPE\n");
    CHECK_THROWS_AS(io::parse_wikiann(in, "wiki", "mr"), MalformedLine);
}

TEST_CASE("wikiann fixture parses to the committed counts") {
    std::ifstream in(testutil::fixture_path("wikiann_hi_fixture.conll"));
    const Corpus corpus = io::parse_wikiann(in, "wiki-hi", "hi");
    const CorpusStats stats = io::tag_histogram(corpus);
    CHECK(stats.sentence_count == 120);
    CHECK(stats.tag_count == 1348);
}

TEST_CASE("languages outside hi/mr/mixed are rejected") {
    std::istringstream in("a\tO\n");
    CHECK_THROWS_AS(io::parse_conll(in, "x", "en"), ConfigError);
}

TEST_CASE("fingerprint digest matches the published sha-256 vectors") {
    CHECK(Sha256::of("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(Sha256::of("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(Sha256::of("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    // block-boundary padding
    CHECK(Sha256::of(std::string(64, 'a')) ==
          Sha256::of(std::string(32, 'a') + std::string(32, 'a')));
    Sha256 incremental;
    incremental.update("ab");
    incremental.update("c");
    CHECK(incremental.hex_digest() == Sha256::of("abc"));
}
