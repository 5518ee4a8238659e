#include "ner/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ner/errors.hpp"

namespace ner::eval {

namespace {

const std::vector<std::string>& entity_tags() {
    static const std::vector<std::string> tags = {"NEP", "NEO", "NEL"};
    return tags;
}

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

}  // namespace

const std::string& metric_definition() {
    static const std::string text =
        "metric: token-level micro-F1 over entity tags {NEP, NEO, NEL}; O is excluded from the "
        "positive class set; macro-F1 is the unweighted mean of the three per-tag F1s; "
        "token accuracy counts all tags including O";
    return text;
}

const std::string& metric_caveat() {
    static const std::string text =
        "caveat: flat tags carry no entity boundaries, so these token-level scores are not "
        "directly comparable with span-level (CoNLL-style) F1 from other toolchains";
    return text;
}

std::map<std::string, std::size_t> ConfusionMatrix::row_sums() const {
    std::map<std::string, std::size_t> sums;
    for (const auto& [pair, count] : counts) sums[pair.first] += count;
    return sums;
}

std::map<std::string, std::size_t> ConfusionMatrix::column_sums() const {
    std::map<std::string, std::size_t> sums;
    for (const auto& [pair, count] : counts) sums[pair.second] += count;
    return sums;
}

ConfusionMatrix confusion(const Corpus& gold, const TagSequences& predicted) {
    if (predicted.size() != gold.sentences.size()) {
        throw ShapeMismatch("gold has " + std::to_string(gold.sentences.size()) +
                            " sentences, predictions have " + std::to_string(predicted.size()));
    }
    ConfusionMatrix matrix;
    for (std::size_t s = 0; s < gold.sentences.size(); ++s) {
        const auto& tokens = gold.sentences[s].tokens;
        if (predicted[s].size() != tokens.size()) {
            throw ShapeMismatch("sentence " + std::to_string(s) + ": gold length " +
                                std::to_string(tokens.size()) + ", predicted length " +
                                std::to_string(predicted[s].size()));
        }
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            ++matrix.counts[{tokens[t].tag, predicted[s][t]}];
            ++matrix.total;
        }
    }
    return matrix;
}

MetricReport score_from_confusion(const ConfusionMatrix& matrix) {
    MetricReport report;
    const auto rows = matrix.row_sums();
    const auto cols = matrix.column_sums();

    std::size_t micro_tp = 0, micro_fp = 0, micro_fn = 0;
    double macro_sum = 0.0;
    for (const auto& tag : entity_tags()) {
        const std::size_t tp = matrix.at(tag, tag);
        const auto row_it = rows.find(tag);
        const auto col_it = cols.find(tag);
        const std::size_t gold_total = row_it == rows.end() ? 0 : row_it->second;
        const std::size_t pred_total = col_it == cols.end() ? 0 : col_it->second;
        const std::size_t fp = pred_total - tp;
        const std::size_t fn = gold_total - tp;

        TagMetrics m;
        if (pred_total == 0) {
            m.zero_support = true;
        } else {
            m.precision = static_cast<double>(tp) / static_cast<double>(pred_total);
        }
        if (gold_total == 0) {
            m.zero_support = true;
        } else {
            m.recall = static_cast<double>(tp) / static_cast<double>(gold_total);
        }
        if (m.precision + m.recall > 0.0) {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        }
        report.per_tag[tag] = m;
        report.support[tag] = gold_total;
        macro_sum += m.f1;

        micro_tp += tp;
        micro_fp += fp;
        micro_fn += fn;
    }

    double micro_p = 0.0, micro_r = 0.0;
    if (micro_tp + micro_fp == 0) {
        report.zero_support = true;
    } else {
        micro_p = static_cast<double>(micro_tp) / static_cast<double>(micro_tp + micro_fp);
    }
    if (micro_tp + micro_fn == 0) {
        report.zero_support = true;
    } else {
        micro_r = static_cast<double>(micro_tp) / static_cast<double>(micro_tp + micro_fn);
    }
    if (micro_p + micro_r > 0.0) {
        report.micro_f1 = 2.0 * micro_p * micro_r / (micro_p + micro_r);
    }
    report.macro_f1 = macro_sum / static_cast<double>(entity_tags().size());

    std::size_t correct = 0;
    for (const auto& [pair, count] : matrix.counts) {
        if (pair.first == pair.second) correct += count;
    }
    report.token_accuracy =
        matrix.total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(matrix.total);
    return report;
}

MetricReport score(const Corpus& gold, const TagSequences& predicted) {
    return score_from_confusion(confusion(gold, predicted));
}

std::vector<std::optional<std::size_t>> ComparisonMatrix::best_per_row() const {
    std::vector<std::optional<std::size_t>> best(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        double top = -1.0;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (cells[r][c] && cells[r][c]->micro_f1 > top) {
                top = cells[r][c]->micro_f1;
                best[r] = c;
            }
        }
    }
    return best;
}

ComparisonMatrix compare(const std::vector<RunCell>& runs) {
    ComparisonMatrix matrix;
    std::map<std::pair<std::string, std::string>, std::size_t> row_index;
    std::map<std::string, std::size_t> col_index;

    for (const auto& run : runs) {
        row_index.emplace(std::make_pair(run.test_dataset, run.regime), 0);
        col_index.emplace(run.encoder, 0);
    }
    for (auto& [key, idx] : row_index) {
        idx = matrix.rows.size();
        matrix.rows.push_back({key.first, key.second});
    }
    for (auto& [key, idx] : col_index) {
        idx = matrix.columns.size();
        matrix.columns.push_back(key);
    }
    matrix.cells.assign(matrix.rows.size(),
                        std::vector<std::optional<RunCell>>(matrix.columns.size()));

    for (const auto& run : runs) {
        const std::size_t r = row_index.at({run.test_dataset, run.regime});
        const std::size_t c = col_index.at(run.encoder);
        if (matrix.cells[r][c]) {
            throw DuplicateCell("(" + run.test_dataset + ", " + run.regime + ", " + run.encoder +
                                ") claimed by runs " + matrix.cells[r][c]->run_id + " and " +
                                run.run_id);
        }
        matrix.cells[r][c] = run;
    }
    return matrix;
}

std::string render_text(const ComparisonMatrix& matrix) {
    std::vector<std::string> header = {"test_dataset", "regime"};
    for (const auto& col : matrix.columns) header.push_back(col);

    const auto best = matrix.best_per_row();
    std::vector<std::vector<std::string>> body;
    for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
        std::vector<std::string> row = {matrix.rows[r].test_dataset, matrix.rows[r].regime};
        for (std::size_t c = 0; c < matrix.columns.size(); ++c) {
            if (!matrix.cells[r][c]) {
                row.push_back("-");
            } else {
                std::string cell = percent(matrix.cells[r][c]->micro_f1);
                if (best[r] && *best[r] == c) cell += "*";
                row.push_back(cell);
            }
        }
        body.push_back(std::move(row));
    }

    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
    for (const auto& row : body) {
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    }

    std::ostringstream out;
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) out << "  ";
            out << row[c];
            for (std::size_t pad = row[c].size(); pad < widths[c]; ++pad) out << ' ';
        }
        out << '\n';
    };
    emit(header);
    std::size_t total = 0;
    for (const std::size_t w : widths) total += w + 2;
    out << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
    for (const auto& row : body) emit(row);
    return out.str();
}

std::string render_csv(const ComparisonMatrix& matrix) {
    std::ostringstream out;
    out << "test_dataset,regime,encoder,micro_f1,macro_f1,token_accuracy,run_id\n";
    for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
        for (std::size_t c = 0; c < matrix.columns.size(); ++c) {
            if (!matrix.cells[r][c]) continue;
            const RunCell& cell = *matrix.cells[r][c];
            out << cell.test_dataset << ',' << cell.regime << ',' << cell.encoder << ','
                << percent(cell.micro_f1) << ',' << percent(cell.macro_f1) << ','
                << percent(cell.token_accuracy) << ',' << cell.run_id << '\n';
        }
    }
    return out.str();
}

std::string render_metric_report(const MetricReport& report) {
    std::ostringstream out;
    out << "tag  precision  recall  f1      support\n";
    for (const auto& [tag, m] : report.per_tag) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%-4s %9s %7s %7s %8zu%s\n", tag.c_str(),
                      percent(m.precision).c_str(), percent(m.recall).c_str(),
                      percent(m.f1).c_str(), report.support.at(tag),
                      m.zero_support ? "  (zero support)" : "");
        out << buf;
    }
    out << "micro_f1 " << percent(report.micro_f1) << (report.zero_support ? " (zero support)" : "")
        << "\nmacro_f1 " << percent(report.macro_f1) << "\ntoken_accuracy "
        << percent(report.token_accuracy) << '\n';
    out << metric_definition() << '\n' << metric_caveat() << '\n';
    return out.str();
}

}  // namespace ner::eval
