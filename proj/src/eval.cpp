#include "subadj/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace subadj {

std::vector<int> point_adjust(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) {
        throw InputError("point_adjust: prediction length " + std::to_string(pred.size()) +
                         " does not match truth length " + std::to_string(truth.size()));
    }
    std::vector<int> adjusted = pred;
    const std::size_t n = truth.size();
    std::size_t i = 0;
    while (i < n) {
        if (truth[i] != 1) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && truth[j] == 1) ++j;
        bool hit = false;
        for (std::size_t t = i; t < j && !hit; ++t) hit = pred[t] == 1;
        if (hit) {
            for (std::size_t t = i; t < j; ++t) adjusted[t] = 1;
        }
        i = j;
    }
    return adjusted;
}

namespace {

struct Segment {
    std::size_t begin, end;  // [begin, end)
    double max_score;
};

void check_inputs(const std::vector<double>& scores, const std::vector<int>& truth) {
    if (scores.size() != truth.size()) {
        throw InputError("evaluate: scores length " + std::to_string(scores.size()) +
                         " does not match truth length " + std::to_string(truth.size()));
    }
    if (scores.empty()) throw EvalError("evaluate: empty inputs");
    for (double s : scores) {
        if (!std::isfinite(s)) throw EvalError("evaluate: scores must be finite");
    }
    bool has_pos = false, has_neg = false;
    for (int label : truth) {
        if (label != 0 && label != 1) throw InputError("evaluate: truth labels must be 0 or 1");
        (label == 1 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) {
        throw EvalError("evaluate: degenerate truth (needs at least one positive and one negative)");
    }
}

std::vector<Segment> truth_segments(const std::vector<double>& scores,
                                    const std::vector<int>& truth) {
    std::vector<Segment> segments;
    const std::size_t n = truth.size();
    std::size_t i = 0;
    while (i < n) {
        if (truth[i] != 1) {
            ++i;
            continue;
        }
        std::size_t j = i;
        double mx = -std::numeric_limits<double>::infinity();
        while (j < n && truth[j] == 1) {
            mx = std::max(mx, scores[j]);
            ++j;
        }
        segments.push_back({i, j, mx});
        i = j;
    }
    return segments;
}

double f1_from(long tp, long fp, long fn) {
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

void fill_metrics_at(EvalReport& report, double threshold, const std::vector<double>& scores,
                     const std::vector<int>& truth) {
    const std::size_t n = scores.size();
    std::vector<int> pred(n, 0);
    for (std::size_t i = 0; i < n; ++i) pred[i] = scores[i] >= threshold ? 1 : 0;
    std::vector<int> adj = point_adjust(pred, truth);
    auto count = [&](const std::vector<int>& p) {
        ConfusionCounts c;
        for (std::size_t i = 0; i < n; ++i) {
            if (truth[i] == 1) {
                (p[i] == 1 ? c.tp : c.fn)++;
            } else {
                (p[i] == 1 ? c.fp : c.tn)++;
            }
        }
        return c;
    };
    report.threshold = threshold;
    report.counts_raw = count(pred);
    report.counts_adjusted = count(adj);
    const auto& cr = report.counts_raw;
    const auto& ca = report.counts_adjusted;
    report.precision_raw = cr.tp + cr.fp > 0 ? static_cast<double>(cr.tp) / (cr.tp + cr.fp) : 0.0;
    report.recall_raw = cr.tp + cr.fn > 0 ? static_cast<double>(cr.tp) / (cr.tp + cr.fn) : 0.0;
    report.f1_raw = report.precision_raw + report.recall_raw > 0.0
                        ? 2.0 * report.precision_raw * report.recall_raw /
                              (report.precision_raw + report.recall_raw)
                        : 0.0;
    report.precision = ca.tp + ca.fp > 0 ? static_cast<double>(ca.tp) / (ca.tp + ca.fp) : 0.0;
    report.recall = ca.tp + ca.fn > 0 ? static_cast<double>(ca.tp) / (ca.tp + ca.fn) : 0.0;
    report.f1 = report.precision + report.recall > 0.0
                    ? 2.0 * report.precision * report.recall / (report.precision + report.recall)
                    : 0.0;
}

}  // namespace

EvalReport best_f1_threshold(const std::vector<double>& scores, const std::vector<int>& truth,
                             bool adjust) {
    check_inputs(scores, truth);

    std::vector<double> candidates = scores;
    std::sort(candidates.begin(), candidates.end(), std::greater<>());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // Anomalous mass is counted per segment (adjusted) or per point (raw);
    // normal points contribute false positives. Sweeping thresholds in
    // descending order makes every count a running tally.
    const auto segments = truth_segments(scores, truth);
    long total_anom = 0;
    std::vector<double> seg_scores;  // per segment: activation threshold
    std::vector<long> seg_lens;
    for (const auto& s : segments) {
        seg_scores.push_back(s.max_score);
        seg_lens.push_back(static_cast<long>(s.end - s.begin));
        total_anom += static_cast<long>(s.end - s.begin);
    }
    std::vector<std::size_t> seg_order(segments.size());
    for (std::size_t i = 0; i < seg_order.size(); ++i) seg_order[i] = i;
    std::sort(seg_order.begin(), seg_order.end(),
              [&](std::size_t a, std::size_t b) { return seg_scores[a] > seg_scores[b]; });

    std::vector<double> anom_points, normal_points;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        (truth[i] == 1 ? anom_points : normal_points).push_back(scores[i]);
    }
    std::sort(anom_points.begin(), anom_points.end(), std::greater<>());
    std::sort(normal_points.begin(), normal_points.end(), std::greater<>());

    double best_threshold = candidates.front();
    double best_f1 = -1.0;
    std::size_t si = 0, ai = 0, ni = 0;
    long tp_adj = 0, tp_raw = 0, fp = 0;
    for (double threshold : candidates) {
        while (si < seg_order.size() && seg_scores[seg_order[si]] >= threshold) {
            tp_adj += seg_lens[seg_order[si]];
            ++si;
        }
        while (ai < anom_points.size() && anom_points[ai] >= threshold) {
            ++tp_raw;
            ++ai;
        }
        while (ni < normal_points.size() && normal_points[ni] >= threshold) {
            ++fp;
            ++ni;
        }
        const long tp = adjust ? tp_adj : tp_raw;
        const double f1 = f1_from(tp, fp, total_anom - tp);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_threshold = threshold;
        }
    }

    EvalReport report;
    fill_metrics_at(report, best_threshold, scores, truth);
    report.auc = roc_auc(scores, truth);
    return report;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth) {
    check_inputs(scores, truth);
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    long total_pos = 0, total_neg = 0;
    for (int label : truth) (label == 1 ? total_pos : total_neg)++;

    double area = 0.0;
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        // Group tied scores into a single ROC vertex.
        std::size_t j = i;
        long dtp = 0, dfp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (truth[order[j]] == 1 ? dtp : dfp)++;
            ++j;
        }
        const double tpr0 = static_cast<double>(tp) / total_pos;
        const double fpr0 = static_cast<double>(fp) / total_neg;
        tp += dtp;
        fp += dfp;
        const double tpr1 = static_cast<double>(tp) / total_pos;
        const double fpr1 = static_cast<double>(fp) / total_neg;
        area += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
        i = j;
    }
    return area;
}

EvalReport evaluate_concat(const std::vector<Entity>& entities, bool adjust) {
    if (entities.empty()) throw EvalError("evaluate: no entities");
    std::vector<double> scores;
    std::vector<int> truth;
    for (const auto& e : entities) {
        scores.insert(scores.end(), e.scores.begin(), e.scores.end());
        truth.insert(truth.end(), e.truth.begin(), e.truth.end());
    }
    return best_f1_threshold(scores, truth, adjust);
}

EvalReport evaluate_entity_average(const std::vector<Entity>& entities, bool adjust) {
    if (entities.empty()) throw EvalError("evaluate: no entities");
    EvalReport avg;
    avg.threshold = std::numeric_limits<double>::quiet_NaN();
    for (const auto& e : entities) {
        EvalReport r = best_f1_threshold(e.scores, e.truth, adjust);
        avg.precision += r.precision;
        avg.recall += r.recall;
        avg.f1 += r.f1;
        avg.precision_raw += r.precision_raw;
        avg.recall_raw += r.recall_raw;
        avg.f1_raw += r.f1_raw;
        avg.auc += r.auc;
        avg.counts_adjusted.tp += r.counts_adjusted.tp;
        avg.counts_adjusted.fp += r.counts_adjusted.fp;
        avg.counts_adjusted.fn += r.counts_adjusted.fn;
        avg.counts_adjusted.tn += r.counts_adjusted.tn;
        avg.counts_raw.tp += r.counts_raw.tp;
        avg.counts_raw.fp += r.counts_raw.fp;
        avg.counts_raw.fn += r.counts_raw.fn;
        avg.counts_raw.tn += r.counts_raw.tn;
    }
    const double n = static_cast<double>(entities.size());
    avg.precision /= n;
    avg.recall /= n;
    avg.f1 /= n;
    avg.precision_raw /= n;
    avg.recall_raw /= n;
    avg.f1_raw /= n;
    avg.auc /= n;
    return avg;
}

std::string report_text(const EvalReport& report) {
    std::ostringstream os;
    char buf[96];
    auto line = [&](const char* key, double v) {
        std::snprintf(buf, sizeof(buf), "%s: %.6f\n", key, v);
        os << buf;
    };
    line("threshold", report.threshold);
    line("precision_adjusted", report.precision);
    line("recall_adjusted", report.recall);
    line("f1_adjusted", report.f1);
    line("precision_raw", report.precision_raw);
    line("recall_raw", report.recall_raw);
    line("f1_raw", report.f1_raw);
    line("auc", report.auc);
    os << "confusion_adjusted: tp=" << report.counts_adjusted.tp
       << " fp=" << report.counts_adjusted.fp << " fn=" << report.counts_adjusted.fn
       << " tn=" << report.counts_adjusted.tn << "\n";
    os << "confusion_raw: tp=" << report.counts_raw.tp << " fp=" << report.counts_raw.fp
       << " fn=" << report.counts_raw.fn << " tn=" << report.counts_raw.tn << "\n";
    return os.str();
}

std::string report_csv_header() {
    return "threshold,precision_adjusted,recall_adjusted,f1_adjusted,precision_raw,recall_raw,"
           "f1_raw,auc";
}

std::string report_csv_row(const EvalReport& report) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                  report.threshold, report.precision, report.recall, report.f1,
                  report.precision_raw, report.recall_raw, report.f1_raw, report.auc);
    return buf;
}

}  // namespace subadj
