#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ner {

// The harmonized flat tag scheme shared by every corpus after conversion.
inline constexpr const char* kOutsideTag = "O";
inline const std::vector<std::string>& harmonized_tags() {
    static const std::vector<std::string> tags = {"O", "NEP", "NEO", "NEL"};
    return tags;
}
inline bool is_harmonized_tag(const std::string& tag) {
    return tag == "O" || tag == "NEP" || tag == "NEO" || tag == "NEL";
}

struct Token {
    std::string text;  // no tabs, newlines or surrounding whitespace
    std::string tag;   // non-empty, member of the corpus scheme vocabulary
};

struct Sentence {
    std::vector<Token> tokens;  // length >= 1
    std::string source;         // provenance corpus name, kept through merge; never serialized

    std::size_t size() const { return tokens.size(); }
};

enum class SchemeKind { iob, flat };

struct TagSchemeDescriptor {
    SchemeKind kind = SchemeKind::flat;
    std::set<std::string> vocabulary;  // always contains outside_tag
    std::string outside_tag = kOutsideTag;

    static TagSchemeDescriptor harmonized() {
        TagSchemeDescriptor s;
        s.kind = SchemeKind::flat;
        s.vocabulary = {"O", "NEP", "NEO", "NEL"};
        return s;
    }
};

// Splits "B-PERSON" into ("B", "PERSON"). Returns false for flat tags.
bool split_iob_tag(const std::string& tag, char& prefix, std::string& cls);

struct Corpus {
    std::string name;
    std::string language;  // "hi", "mr" or "mixed"
    TagSchemeDescriptor scheme;
    std::vector<Sentence> sentences;

    std::size_t sentence_count() const { return sentences.size(); }
    std::size_t token_count() const {
        std::size_t n = 0;
        for (const auto& s : sentences) n += s.size();
        return n;
    }
};

struct CorpusStats {
    std::size_t sentence_count = 0;
    std::size_t tag_count = 0;  // total tokens
    std::map<std::string, std::size_t> per_tag;

    std::size_t count(const std::string& tag) const {
        const auto it = per_tag.find(tag);
        return it == per_tag.end() ? 0 : it->second;
    }

    friend bool operator==(const CorpusStats& a, const CorpusStats& b) {
        return a.sentence_count == b.sentence_count && a.tag_count == b.tag_count &&
               a.per_tag == b.per_tag;
    }
};

// One invariant breach found by validate_corpus. Warning-class rules (IOB
// "dangling-I") do not make a corpus invalid for downstream use.
struct Violation {
    std::size_t sentence_index = 0;
    std::size_t token_index = 0;
    std::string rule;
    std::string detail;
    bool warning = false;
};

}  // namespace ner
