#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ner {

// Base class for every error raised by the pipeline. `validation` errors map
// to exit code 1 in the CLI, everything else to exit code 2.
class Error : public std::runtime_error {
public:
    enum class Kind { validation, runtime };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

class MalformedLine : public Error {
public:
    MalformedLine(std::size_t line_number, const std::string& detail)
        : Error(Kind::validation,
                "malformed line " + std::to_string(line_number) + ": " + detail),
          line_number_(line_number) {}
    std::size_t line_number() const { return line_number_; }

private:
    std::size_t line_number_;
};

class EmptyCorpus : public Error {
public:
    explicit EmptyCorpus(const std::string& name)
        : Error(Kind::validation, "corpus '" + name + "' contains no sentences") {}
};

class LanguageMismatch : public Error {
public:
    LanguageMismatch(std::size_t line_number, const std::string& found,
                     const std::string& declared)
        : Error(Kind::validation,
                "line " + std::to_string(line_number) + ": token carries language prefix '" +
                    found + "' but corpus language is '" + declared + "'"),
          line_number_(line_number) {}
    std::size_t line_number() const { return line_number_; }

private:
    std::size_t line_number_;
};

class UnmappedClass : public Error {
public:
    explicit UnmappedClass(const std::string& cls)
        : Error(Kind::validation, "IOB class '" + cls + "' has no tag-map entry and no default") {}
};

class UnmappedTag : public Error {
public:
    explicit UnmappedTag(const std::string& tag)
        : Error(Kind::validation, "tag '" + tag + "' has no tag-map entry and no default") {}
};

class TooFewSentences : public Error {
public:
    TooFewSentences(std::size_t got, std::size_t need)
        : Error(Kind::validation, "corpus has " + std::to_string(got) +
                                      " sentences, split needs at least " + std::to_string(need)) {}
};

class SchemeMismatch : public Error {
public:
    explicit SchemeMismatch(const std::string& detail)
        : Error(Kind::validation, "tag scheme mismatch: " + detail) {}
};

class UnknownTag : public Error {
public:
    explicit UnknownTag(const std::string& tag)
        : Error(Kind::validation, "tag '" + tag + "' is not in the label vocabulary") {}
};

class EncoderUnavailable : public Error {
public:
    explicit EncoderUnavailable(const std::string& detail)
        : Error(Kind::runtime, "encoder unavailable: " + detail) {}
};

class CorruptArtifact : public Error {
public:
    explicit CorruptArtifact(const std::string& detail)
        : Error(Kind::runtime, "corrupt tagger artifact: " + detail) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& detail)
        : Error(Kind::validation, "prediction/gold shape mismatch: " + detail) {}
};

class DuplicateCell : public Error {
public:
    explicit DuplicateCell(const std::string& detail)
        : Error(Kind::validation, "duplicate report cell: " + detail) {}
};

class CorruptStore : public Error {
public:
    explicit CorruptStore(const std::string& file, const std::string& detail)
        : Error(Kind::runtime, "corrupt run store entry '" + file + "': " + detail), file_(file) {}
    const std::string& file() const { return file_; }

private:
    std::string file_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& detail) : Error(Kind::validation, detail) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& detail) : Error(Kind::runtime, detail) {}
};

}  // namespace ner
