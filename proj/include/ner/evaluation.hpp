#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ner/corpus.hpp"

namespace ner::eval {

using TagSequences = std::vector<std::vector<std::string>>;

struct ConfusionMatrix {
    // (gold tag, predicted tag) -> count
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    std::size_t total = 0;

    std::size_t at(const std::string& gold, const std::string& predicted) const {
        const auto it = counts.find({gold, predicted});
        return it == counts.end() ? 0 : it->second;
    }
    std::map<std::string, std::size_t> row_sums() const;
    std::map<std::string, std::size_t> column_sums() const;
};

struct TagMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool zero_support = false;  // a denominator was zero; 0 reported instead of NaN
};

// Token-level scores. micro_f1 pools TP/FP/FN over the entity tags
// {NEP, NEO, NEL} with O excluded from the positive class set; macro_f1 is
// the unweighted mean of the three per-tag F1s; token_accuracy covers all
// tags including O.
struct MetricReport {
    std::map<std::string, TagMetrics> per_tag;       // NEP, NEO, NEL
    std::map<std::string, std::size_t> support;      // gold counts per entity tag
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double token_accuracy = 0.0;
    bool zero_support = false;  // micro denominators were zero
};

// The one-line definition every report carries.
const std::string& metric_definition();
const std::string& metric_caveat();

ConfusionMatrix confusion(const Corpus& gold, const TagSequences& predicted);
MetricReport score(const Corpus& gold, const TagSequences& predicted);
MetricReport score_from_confusion(const ConfusionMatrix& matrix);

// One report cell: the micro-F1 of (encoder, regime) measured on a test set.
struct RunCell {
    std::string test_dataset;
    std::string regime;   // mono | merged-pair | merged-all
    std::string encoder;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double token_accuracy = 0.0;
    std::string run_id;
};

struct ComparisonMatrix {
    struct Row {
        std::string test_dataset;
        std::string regime;
    };
    std::vector<Row> rows;             // sorted (test_dataset, regime)
    std::vector<std::string> columns;  // encoder keys, sorted
    // cells[row][col]; missing cells stay disengaged, never zero
    std::vector<std::vector<std::optional<RunCell>>> cells;

    // column index of the best micro-F1 per row, when the row has any cell
    std::vector<std::optional<std::size_t>> best_per_row() const;
};

// Throws DuplicateCell when two runs claim the same (test, regime, encoder).
ComparisonMatrix compare(const std::vector<RunCell>& runs);

// Aligned plain-text grid; best cell per row marked with '*'. Percentages
// with two decimals.
std::string render_text(const ComparisonMatrix& matrix);

// Long-format CSV: test_dataset,regime,encoder,micro_f1,macro_f1,token_accuracy,run_id
std::string render_csv(const ComparisonMatrix& matrix);

std::string render_metric_report(const MetricReport& report);

}  // namespace ner::eval
