#pragma once

#include <string>
#include <vector>

#include "subadj/errors.hpp"

namespace subadj {

// Marks every point of a truth-anomalous segment as predicted once any
// point inside the segment is predicted; predictions outside segments are
// untouched.
std::vector<int> point_adjust(const std::vector<int>& pred, const std::vector<int>& truth);

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;
};

struct EvalReport {
    double threshold = 0.0;
    // Metrics with point adjustment applied.
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Metrics on the unadjusted predictions at the same threshold.
    double precision_raw = 0.0;
    double recall_raw = 0.0;
    double f1_raw = 0.0;
    double auc = 0.0;
    ConfusionCounts counts_adjusted;
    ConfusionCounts counts_raw;
};

// Evaluates F1 at every distinct score value as threshold (prediction is
// score >= threshold, point-adjusted when adjust) and returns the report
// at the maximizing threshold; ties break toward the larger threshold.
// The report always carries both adjusted and raw metrics at that single
// threshold, plus AUC over the same scores.
EvalReport best_f1_threshold(const std::vector<double>& scores, const std::vector<int>& truth,
                             bool adjust);

// Trapezoidal area under the ROC curve; tied scores are grouped.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& truth);

struct Entity {
    std::vector<double> scores;
    std::vector<int> truth;
};

// Single-model protocol: concatenate all entities, then evaluate.
EvalReport evaluate_concat(const std::vector<Entity>& entities, bool adjust);

// Per-entity protocol: evaluate each entity at its own threshold and
// average the rates; the report's threshold is NaN and the confusion
// counts are summed.
EvalReport evaluate_entity_average(const std::vector<Entity>& entities, bool adjust);

std::string report_text(const EvalReport& report);
std::string report_csv_header();
std::string report_csv_row(const EvalReport& report);

}  // namespace subadj
