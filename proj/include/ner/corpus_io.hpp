#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ner/corpus.hpp"
#include "ner/errors.hpp"

namespace ner::io {

struct ParseOptions {
    // Force the scheme instead of inferring IOB-vs-flat from the tags seen.
    std::optional<SchemeKind> scheme_override;
    // Collects non-fatal parse warnings (extra columns, etc.) when set.
    std::vector<std::string>* warnings = nullptr;
};

// Two-column format: `<token><TAB-or-spaces><tag>` per line, blank line
// between sentences. Lines with extra columns keep field 1 as token and the
// last field as tag (warned). Consecutive blank lines collapse; trailing
// blank lines are ignored. Throws MalformedLine / EmptyCorpus.
Corpus parse_conll(std::istream& source, const std::string& name, const std::string& language,
                   const ParseOptions& options = {});

// WikiAnn variant: tokens may carry a `<lang>:` prefix which is stripped when
// it matches the declared language and rejected (LanguageMismatch) when it
// names a different language. Tags must be O or B-/I- over {PER, LOC, ORG}.
Corpus parse_wikiann(std::istream& source, const std::string& name, const std::string& language,
                     const ParseOptions& options = {});

// Tab-separated two-column output, one blank line between sentences, exactly
// one trailing newline. parse_conll(serialize_conll(c)) reproduces c's
// sentences bit-exactly. Sentence provenance is not written.
void serialize_conll(const Corpus& corpus, std::ostream& sink);

std::string serialize_conll(const Corpus& corpus);

CorpusStats tag_histogram(const Corpus& corpus);

// Checks every type invariant; violations are returned as data. The
// IOB "dangling-I" rule is reported as a warning.
std::vector<Violation> validate_corpus(const Corpus& corpus);

// File-path conveniences used by the CLI and the experiment runner.
Corpus load_corpus_file(const std::string& path, const std::string& format,
                        const std::string& name, const std::string& language,
                        const ParseOptions& options = {});
void save_corpus_file(const Corpus& corpus, const std::string& path);

// Hex digest of the serialized corpus content; identifies train/test inputs
// in run records and saved taggers.
std::string corpus_fingerprint(const Corpus& corpus);

}  // namespace ner::io
