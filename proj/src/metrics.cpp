#include "dmgnet/metrics.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dmgnet {

void GradeScheme::validate() const {
    const int k = grades();
    if (k < 1 || k > kNumGrades) throw std::invalid_argument("grade scheme must have 1..4 coarse grades");
    if (map[0] != 0) throw std::invalid_argument("grade scheme must keep background at 0");
    std::vector<bool> hit(static_cast<std::size_t>(k) + 1, false);
    for (int g = 1; g <= kNumGrades; ++g) {
        if (map[g] < 1 || map[g] > k) throw std::invalid_argument("grade scheme maps a grade outside 1..K");
        hit[map[g]] = true;
    }
    for (int c = 1; c <= k; ++c)
        if (!hit[c]) throw std::invalid_argument("grade scheme leaves coarse grade " + std::to_string(c) + " unused");
}

GradeScheme GradeScheme::fine() { return {}; }

GradeScheme GradeScheme::ahr() { return {"ahr", {0, 1, 2, 2, 3}, {"C1", "C2/3", "C4"}}; }

GradeScheme GradeScheme::parse(const std::string& name) {
    if (name == "fine") return fine();
    if (name == "ahr") return ahr();
    throw std::invalid_argument("unknown grade scheme '" + name + "' (expected fine or ahr)");
}

void PixelCounts::add(const GradeMap& pred, const GradeMap& truth) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw std::invalid_argument("prediction and truth maps differ in shape");
    for (std::size_t i = 0; i < truth.codes.size(); ++i) {
        const std::uint8_t t = truth.codes[i];
        const std::uint8_t p = pred.codes[i];
        if (p > kNumGrades) throw std::invalid_argument("prediction holds a code outside 0..4");
        if (t == kUnclassified) {
            ++unclassified;
            continue;
        }
        if (t > kNumGrades) throw std::invalid_argument("truth holds an invalid code");
        ++cells[t][p];
    }
}

PixelCounts& PixelCounts::operator+=(const PixelCounts& o) {
    for (int t = 0; t <= kNumGrades; ++t)
        for (int p = 0; p <= kNumGrades; ++p) cells[t][p] += o.cells[t][p];
    unclassified += o.unclassified;
    return *this;
}

PixelCounts count_pixels(const GradeMap& pred, const GradeMap& truth) {
    PixelCounts c;
    c.add(pred, truth);
    return c;
}

std::uint64_t ConfusionMatrix::truth_total(int grade) const {
    return std::accumulate(rows[grade].begin(), rows[grade].end(), std::uint64_t{0});
}

std::vector<std::vector<double>> ConfusionMatrix::row_normalized() const {
    std::vector<std::vector<double>> out(rows.size(), std::vector<double>(rows.size(), 0.0));
    for (int t = 1; t <= grades; ++t) {
        const auto total = truth_total(t);
        if (total == 0) continue;
        for (int p = 0; p <= grades; ++p) out[t][p] = static_cast<double>(rows[t][p]) / static_cast<double>(total);
    }
    return out;
}

std::string ConfusionMatrix::to_csv(const std::vector<std::string>& labels) const {
    std::ostringstream os;
    os << "truth,missed";
    for (int p = 1; p <= grades; ++p) os << ',' << labels.at(p - 1);
    os << '\n';
    for (int t = 1; t <= grades; ++t) {
        os << labels.at(t - 1);
        for (int p = 0; p <= grades; ++p) os << ',' << rows[t][p];
        os << '\n';
    }
    return os.str();
}

double f1_from_pr(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

F1Stats F1Stats::from_counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
    F1Stats s;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    s.defined = tp + fp + fn > 0;
    s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = f1_from_pr(s.precision, s.recall);
    return s;
}

double macro_f1(std::span<const double> f1s) {
    if (f1s.empty()) throw std::invalid_argument("macro F1 needs at least one grade");
    double inv = 0.0;
    for (double f : f1s) {
        if (f <= 0.0) return 0.0;
        inv += 1.0 / f;
    }
    return static_cast<double>(f1s.size()) / inv;
}

double challenge_score(double f1_loc, double f1_cls) { return 0.3 * f1_loc + 0.7 * f1_cls; }

F1Stats localization_f1(const PixelCounts& c) {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (int t = 0; t <= kNumGrades; ++t)
        for (int p = 0; p <= kNumGrades; ++p) {
            const bool tb = t >= 1, pb = p >= 1;
            if (tb && pb) tp += c.cells[t][p];
            else if (pb) fp += c.cells[t][p];
            else if (tb) fn += c.cells[t][p];
        }
    return F1Stats::from_counts(tp, fp, fn);
}

namespace {

PixelCounts pooled(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("prediction and truth lists differ in length");
    PixelCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) c.add(pred[i], truth[i]);
    return c;
}

}  // namespace

F1Stats localization_f1(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth) {
    return localization_f1(pooled(pred, truth));
}

ConfusionMatrix confusion_matrix(const PixelCounts& c, const GradeScheme& scheme) {
    scheme.validate();
    const int k = scheme.grades();
    ConfusionMatrix m;
    m.grades = k;
    m.rows.assign(static_cast<std::size_t>(k) + 1, std::vector<std::uint64_t>(static_cast<std::size_t>(k) + 1, 0));
    for (int t = 1; t <= kNumGrades; ++t)
        for (int p = 0; p <= kNumGrades; ++p) m.rows[scheme.apply(t)][scheme.apply(p)] += c.cells[t][p];
    return m;
}

PerGradeResult per_grade_f1(const PixelCounts& c, const GradeScheme& scheme) {
    PerGradeResult r;
    r.confusion = confusion_matrix(c, scheme);
    const auto& m = r.confusion.rows;
    const int k = scheme.grades();
    for (int g = 1; g <= k; ++g) {
        std::uint64_t fp = 0, fn = 0;
        for (int t = 1; t <= k; ++t)
            if (t != g) fp += m[t][g];
        for (int p = 0; p <= k; ++p)
            if (p != g) fn += m[g][p];
        r.grades.push_back(F1Stats::from_counts(m[g][g], fp, fn));
    }
    return r;
}

PerGradeResult per_grade_f1(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth,
                            const GradeScheme& scheme) {
    return per_grade_f1(pooled(pred, truth), scheme);
}

F1Stats binary_f1(const PixelCounts& c, const GradeScheme& scheme) {
    const auto m = confusion_matrix(c, scheme);
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (int t = 1; t <= m.grades; ++t)
        for (int p = 0; p <= m.grades; ++p) {
            const bool td = t >= 2, pd = p >= 2;
            if (td && pd) tp += m.rows[t][p];
            else if (pd) fp += m.rows[t][p];
            else if (td) fn += m.rows[t][p];
        }
    return F1Stats::from_counts(tp, fp, fn);
}

F1Stats binary_f1(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth) {
    return binary_f1(pooled(pred, truth));
}

MetricsReport make_report(const PixelCounts& counts, const GradeScheme& scheme, std::size_t scenes) {
    MetricsReport r;
    r.scheme = scheme.name;
    r.grade_labels = scheme.labels;
    r.localization = localization_f1(counts);
    auto pg = per_grade_f1(counts, scheme);
    r.per_grade = std::move(pg.grades);
    r.confusion = std::move(pg.confusion);
    r.binary = binary_f1(counts, scheme);
    std::vector<double> available;
    for (const auto& g : r.per_grade) {
        r.grade_available.push_back(g.defined);
        if (g.defined) available.push_back(g.f1);
    }
    r.f1_cls = available.empty() ? 0.0 : macro_f1(available);
    r.score = challenge_score(r.localization.f1, r.f1_cls);
    r.counts = counts;
    r.scenes = scenes;
    return r;
}

namespace {

void accumulate_stats(F1Stats& into, const F1Stats& s) {
    into.tp += s.tp;
    into.fp += s.fp;
    into.fn += s.fn;
    into.precision += s.precision;
    into.recall += s.recall;
    into.f1 += s.f1;
    into.defined = into.defined || s.defined;
}

void scale_stats(F1Stats& s, double k) {
    s.precision *= k;
    s.recall *= k;
    s.f1 *= k;
}

}  // namespace

MetricsReport average_reports(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("cannot average an empty set of reports");
    MetricsReport avg;
    const auto& first = reports.front();
    avg.scheme = first.scheme;
    avg.grade_labels = first.grade_labels;
    avg.per_grade.assign(first.per_grade.size(), {});
    avg.grade_available.assign(first.per_grade.size(), false);
    avg.confusion = first.confusion;
    for (auto& row : avg.confusion.rows) std::fill(row.begin(), row.end(), 0);
    for (const auto& r : reports) {
        if (r.per_grade.size() != avg.per_grade.size() || r.scheme != avg.scheme)
            throw std::invalid_argument("reports use different grade schemes");
        accumulate_stats(avg.localization, r.localization);
        accumulate_stats(avg.binary, r.binary);
        for (std::size_t g = 0; g < r.per_grade.size(); ++g) {
            accumulate_stats(avg.per_grade[g], r.per_grade[g]);
            avg.grade_available[g] = avg.grade_available[g] || r.grade_available[g];
        }
        avg.f1_cls += r.f1_cls;
        avg.score += r.score;
        for (std::size_t t = 0; t < r.confusion.rows.size(); ++t)
            for (std::size_t p = 0; p < r.confusion.rows[t].size(); ++p) avg.confusion.rows[t][p] += r.confusion.rows[t][p];
        avg.counts += r.counts;
        avg.scenes += r.scenes;
    }
    const double k = 1.0 / static_cast<double>(reports.size());
    scale_stats(avg.localization, k);
    scale_stats(avg.binary, k);
    for (auto& g : avg.per_grade) scale_stats(g, k);
    avg.f1_cls *= k;
    avg.score *= k;
    return avg;
}

MetricsReport evaluate_maps(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth,
                            const GradeScheme& scheme, Aggregation aggregation) {
    if (pred.size() != truth.size()) throw std::invalid_argument("prediction and truth lists differ in length");
    if (pred.empty()) throw std::invalid_argument("nothing to evaluate");
    if (aggregation == Aggregation::micro) return make_report(pooled(pred, truth), scheme, pred.size());
    std::vector<MetricsReport> per;
    per.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) per.push_back(make_report(count_pixels(pred[i], truth[i]), scheme));
    return average_reports(per);
}

MetricsReport evaluate(const std::vector<ScenePair>& scenes, const std::vector<ModelParams>& models,
                       const DecisionRule& rule, const GradeScheme& scheme, Aggregation aggregation) {
    if (scenes.empty()) throw std::invalid_argument("nothing to evaluate");
    if (models.empty()) throw std::invalid_argument("evaluation needs at least one model");
    rule.validate();
    std::vector<GradeMap> pred(scenes.size()), truth(scenes.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        pred[i] = decide(ensemble_predict(models, scenes[i].pre, scenes[i].post), rule);
        truth[i] = scenes[i].labels;
    }
    return evaluate_maps(pred, truth, scheme, aggregation);
}

std::vector<std::pair<std::string, double>> metric_values(const MetricsReport& r) {
    std::vector<std::pair<std::string, double>> v{
        {"F1_loc", r.localization.f1}, {"F1_Cb", r.binary.f1}, {"F1_cls", r.f1_cls}};
    for (std::size_t g = 0; g < r.per_grade.size(); ++g) v.emplace_back("F1_" + r.grade_labels[g], r.per_grade[g].f1);
    return v;
}

}  // namespace dmgnet
