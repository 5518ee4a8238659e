#include "ner/corpus_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ner/sha256.hpp"

namespace ner {

bool split_iob_tag(const std::string& tag, char& prefix, std::string& cls) {
    if (tag.size() < 3 || tag[1] != '-') return false;
    if (tag[0] != 'B' && tag[0] != 'I') return false;
    prefix = tag[0];
    cls = tag.substr(2);
    return true;
}

}  // namespace ner

namespace ner::io {

namespace {

bool is_blank(const std::string& line) {
    return line.find_first_not_of(" \t") == std::string::npos;
}

// Splits on runs of tabs/spaces. Fields are never empty.
std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) fields.push_back(line.substr(start, i - start));
    }
    return fields;
}

// Recognizes a WikiAnn-style language prefix: 2-3 lowercase ASCII letters
// before the first colon. Tokens like "12:30" are left alone.
bool language_prefix(const std::string& text, std::string& code) {
    const auto colon = text.find(':');
    if (colon == std::string::npos || colon < 2 || colon > 3 || colon + 1 >= text.size()) return false;
    for (std::size_t i = 0; i < colon; ++i) {
        if (text[i] < 'a' || text[i] > 'z') return false;
    }
    code = text.substr(0, colon);
    return true;
}

bool valid_language(const std::string& language) {
    return language == "hi" || language == "mr" || language == "mixed";
}

using LineHook = void (*)(std::size_t line_number, std::vector<std::string>& fields,
                          const std::string& language);

Corpus parse_two_column(std::istream& source, const std::string& name,
                        const std::string& language, const ParseOptions& options,
                        LineHook hook) {
    if (!valid_language(language)) {
        throw ConfigError("language must be one of hi, mr, mixed; got '" + language + "'");
    }

    Corpus corpus;
    corpus.name = name;
    corpus.language = language;

    Sentence current;
    bool saw_iob = false;
    std::string line;
    std::size_t line_number = 0;

    auto flush = [&] {
        if (!current.tokens.empty()) {
            corpus.sentences.push_back(std::move(current));
            current = Sentence{};
        }
    };

    while (std::getline(source, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (is_blank(line)) {
            flush();
            continue;
        }
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() < 2) {
            throw MalformedLine(line_number, "expected `<token> <tag>`, got '" + line + "'");
        }
        if (fields.size() > 2 && options.warnings != nullptr) {
            options.warnings->push_back("line " + std::to_string(line_number) + ": " +
                                        std::to_string(fields.size()) +
                                        " fields, using first as token and last as tag");
        }
        if (hook != nullptr) hook(line_number, fields, language);

        Token token;
        token.text = fields.front();
        token.tag = fields.back();
        if (token.tag.size() >= 2 && (token.tag[0] == 'B' || token.tag[0] == 'I') &&
            token.tag[1] == '-') {
            saw_iob = true;
        }
        corpus.scheme.vocabulary.insert(token.tag);
        current.tokens.push_back(std::move(token));
    }
    flush();

    if (corpus.sentences.empty()) throw EmptyCorpus(name);

    corpus.scheme.kind = options.scheme_override.value_or(saw_iob ? SchemeKind::iob
                                                                  : SchemeKind::flat);
    corpus.scheme.outside_tag = kOutsideTag;
    corpus.scheme.vocabulary.insert(kOutsideTag);
    return corpus;
}

void wikiann_hook(std::size_t line_number, std::vector<std::string>& fields,
                  const std::string& language) {
    std::string code;
    if (language_prefix(fields.front(), code)) {
        if (code != language) throw LanguageMismatch(line_number, code, language);
        fields.front().erase(0, code.size() + 1);
    }
    const std::string& tag = fields.back();
    if (tag != kOutsideTag) {
        char prefix = 0;
        std::string cls;
        if (!split_iob_tag(tag, prefix, cls) || (cls != "PER" && cls != "LOC" && cls != "ORG")) {
            throw MalformedLine(line_number,
                                "tag '" + tag + "' is not O or B-/I- over {PER, LOC, ORG}");
        }
    }
}

}  // namespace

Corpus parse_conll(std::istream& source, const std::string& name, const std::string& language,
                   const ParseOptions& options) {
    return parse_two_column(source, name, language, options, nullptr);
}

Corpus parse_wikiann(std::istream& source, const std::string& name, const std::string& language,
                     const ParseOptions& options) {
    Corpus corpus = parse_two_column(source, name, language, options, wikiann_hook);
    corpus.scheme.kind = options.scheme_override.value_or(SchemeKind::iob);
    return corpus;
}

void serialize_conll(const Corpus& corpus, std::ostream& sink) {
    for (const auto& sentence : corpus.sentences) {
        for (const auto& token : sentence.tokens) {
            sink << token.text << '\t' << token.tag << '\n';
        }
        sink << '\n';
    }
}

std::string serialize_conll(const Corpus& corpus) {
    std::ostringstream out;
    serialize_conll(corpus, out);
    return out.str();
}

CorpusStats tag_histogram(const Corpus& corpus) {
    CorpusStats stats;
    stats.sentence_count = corpus.sentences.size();
    for (const auto& sentence : corpus.sentences) {
        stats.tag_count += sentence.tokens.size();
        for (const auto& token : sentence.tokens) ++stats.per_tag[token.tag];
    }
    return stats;
}

std::vector<Violation> validate_corpus(const Corpus& corpus) {
    std::vector<Violation> violations;
    auto add = [&](std::size_t s, std::size_t t, const char* rule, std::string detail,
                   bool warning = false) {
        violations.push_back({s, t, rule, std::move(detail), warning});
    };

    if (!valid_language(corpus.language)) {
        add(0, 0, "language", "language '" + corpus.language + "' not in {hi, mr, mixed}");
    }
    if (corpus.scheme.vocabulary.count(corpus.scheme.outside_tag) == 0) {
        add(0, 0, "scheme-outside",
            "outside tag '" + corpus.scheme.outside_tag + "' missing from vocabulary");
    }
    if (corpus.scheme.kind == SchemeKind::iob) {
        for (const auto& tag : corpus.scheme.vocabulary) {
            char prefix = 0;
            std::string cls;
            if (tag != corpus.scheme.outside_tag && !split_iob_tag(tag, prefix, cls)) {
                add(0, 0, "scheme-iob", "vocabulary tag '" + tag + "' is not B-/I-/outside");
            }
        }
    }

    for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
        const Sentence& sentence = corpus.sentences[s];
        if (sentence.tokens.empty()) {
            add(s, 0, "empty-sentence", "sentence has no tokens");
            continue;
        }
        for (std::size_t t = 0; t < sentence.tokens.size(); ++t) {
            const Token& token = sentence.tokens[t];
            if (token.text.empty()) {
                add(s, t, "token-text", "empty token text");
            } else if (token.text.find_first_of("\t\n") != std::string::npos ||
                       token.text.front() == ' ' || token.text.back() == ' ') {
                add(s, t, "token-text", "token '" + token.text + "' carries whitespace");
            }
            if (token.tag.empty()) {
                add(s, t, "tag-empty", "empty tag");
            } else if (corpus.scheme.vocabulary.count(token.tag) == 0) {
                add(s, t, "vocabulary", "tag '" + token.tag + "' not in scheme vocabulary");
            }
            if (corpus.scheme.kind == SchemeKind::iob) {
                char prefix = 0;
                std::string cls;
                if (split_iob_tag(token.tag, prefix, cls) && prefix == 'I') {
                    bool dangling = true;
                    if (t > 0) {
                        char prev_prefix = 0;
                        std::string prev_cls;
                        if (split_iob_tag(sentence.tokens[t - 1].tag, prev_prefix, prev_cls) &&
                            prev_cls == cls) {
                            dangling = false;
                        }
                    }
                    if (dangling) {
                        add(s, t, "dangling-I",
                            "'" + token.tag + "' without preceding B-" + cls + "/I-" + cls, true);
                    }
                }
            }
        }
    }
    return violations;
}

Corpus load_corpus_file(const std::string& path, const std::string& format,
                        const std::string& name, const std::string& language,
                        const ParseOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus file '" + path + "'");
    if (format == "conll") return parse_conll(in, name, language, options);
    if (format == "wikiann") return parse_wikiann(in, name, language, options);
    throw ConfigError("unknown corpus format '" + format + "' (expected conll or wikiann)");
}

void save_corpus_file(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    serialize_conll(corpus, out);
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::string corpus_fingerprint(const Corpus& corpus) {
    return Sha256::of(serialize_conll(corpus));
}

}  // namespace ner::io
