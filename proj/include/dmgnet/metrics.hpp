#pragma once

// Pixel-level evaluation: localization F1, one-vs-rest per-grade F1,
// harmonic-mean macro F1, binary damage F1 and the challenge score.
//
// Counts are kept as a fine-grade (truth x prediction) matrix over codes
// 0..4. Unclassified truth pixels are tallied separately and never enter a
// numerator or denominator. Coarse grade schemes are applied to the counts,
// so remapping labels and remapping counts give the same report.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmgnet/network.hpp"
#include "dmgnet/types.hpp"

namespace dmgnet {

struct GradeScheme {
    std::string name = "fine";
    std::array<std::uint8_t, kNumGrades + 1> map{0, 1, 2, 3, 4};  // fine code -> coarse code (0 stays 0)
    std::vector<std::string> labels{"C1", "C2", "C3", "C4"};     // one label per coarse grade

    int grades() const { return static_cast<int>(labels.size()); }
    std::uint8_t apply(std::uint8_t code) const { return map[code]; }
    /// Throws std::invalid_argument unless the map is total and onto 1..grades().
    void validate() const;

    static GradeScheme fine();
    /// 1 -> possibly damaged, {2,3} -> damaged, 4 -> destroyed.
    static GradeScheme ahr();
    /// "fine" or "ahr".
    static GradeScheme parse(const std::string& name);
};

/// Fine-grade counts, rows = truth code 0..4, columns = predicted code 0..4.
struct PixelCounts {
    std::array<std::array<std::uint64_t, kNumGrades + 1>, kNumGrades + 1> cells{};
    std::uint64_t unclassified = 0;

    void add(const GradeMap& pred, const GradeMap& truth);
    PixelCounts& operator+=(const PixelCounts& o);
    bool operator==(const PixelCounts&) const = default;
};

PixelCounts count_pixels(const GradeMap& pred, const GradeMap& truth);

/// Building-pixel confusion in a (possibly coarse) scheme. rows[t][p] for
/// truth grade t = 1..K and predicted grade p = 1..K; column 0 holds the
/// truth building pixels predicted as background ("missed").
struct ConfusionMatrix {
    int grades = kNumGrades;
    std::vector<std::vector<std::uint64_t>> rows;  // (K+1) x (K+1); row 0 unused

    std::uint64_t truth_total(int grade) const;
    /// Row-normalized fractions (0 for empty rows).
    std::vector<std::vector<double>> row_normalized() const;
    std::string to_csv(const std::vector<std::string>& labels) const;
    bool operator==(const ConfusionMatrix&) const = default;
};

struct F1Stats {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool defined = false;  // false when there is nothing to score (no positives on either side)

    static F1Stats from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);
    bool operator==(const F1Stats&) const = default;
};

/// 2PR/(P+R), 0 when P+R = 0.
double f1_from_pr(double precision, double recall);

/// Harmonic mean; any zero component gives 0. Throws on an empty list.
double macro_f1(std::span<const double> f1s);

/// 0.3 * f1_loc + 0.7 * f1_cls.
double challenge_score(double f1_loc, double f1_cls);

F1Stats localization_f1(const PixelCounts& counts);
F1Stats localization_f1(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth);

struct PerGradeResult {
    std::vector<F1Stats> grades;  // index 0 is grade 1
    ConfusionMatrix confusion;
};

ConfusionMatrix confusion_matrix(const PixelCounts& counts, const GradeScheme& scheme);
PerGradeResult per_grade_f1(const PixelCounts& counts, const GradeScheme& scheme);
PerGradeResult per_grade_f1(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth,
                            const GradeScheme& scheme);

/// Damaged (coarse grade >= 2) vs undamaged over truth building pixels.
F1Stats binary_f1(const PixelCounts& counts, const GradeScheme& scheme = GradeScheme::fine());
F1Stats binary_f1(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth);

struct MetricsReport {
    std::string scheme = "fine";
    std::vector<std::string> grade_labels;
    F1Stats localization;
    std::vector<F1Stats> per_grade;
    std::vector<bool> grade_available;  // grades with any truth or predicted pixel
    F1Stats binary;
    double f1_cls = 0.0;
    double score = 0.0;
    ConfusionMatrix confusion;
    PixelCounts counts;
    std::size_t scenes = 0;

    bool operator==(const MetricsReport&) const = default;
};

/// Builds a report from pooled counts. F1_cls is the harmonic mean over the
/// available grades; it is 0 when no grade is available.
MetricsReport make_report(const PixelCounts& counts, const GradeScheme& scheme, std::size_t scenes = 1);

/// Arithmetic mean of metric values (F1, P, R, F1_cls, score); counts are summed.
MetricsReport average_reports(const std::vector<MetricsReport>& reports);

enum class Aggregation { micro, per_scene };

/// Scores aligned prediction/truth maps. Micro pools all counts first;
/// per_scene averages per-scene reports.
MetricsReport evaluate_maps(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth,
                            const GradeScheme& scheme, Aggregation aggregation = Aggregation::micro);

/// Predicts every scene with the (ensembled) models, applies the decision
/// rule and scores against the scene labels. Throws on an empty scene list.
MetricsReport evaluate(const std::vector<ScenePair>& scenes, const std::vector<ModelParams>& models,
                       const DecisionRule& rule, const GradeScheme& scheme,
                       Aggregation aggregation = Aggregation::micro);

/// Named scalar metrics in a fixed order: F1_loc, F1_Cb, F1_cls, then F1_<label> per grade.
std::vector<std::pair<std::string, double>> metric_values(const MetricsReport& report);

}  // namespace dmgnet
