#include <doctest.h>

#include <random>

#include "dmgnet/metrics.hpp"

using namespace dmgnet;

namespace {

GradeMap from_rows(int w, int h, std::vector<int> codes) {
    GradeMap g(w, h);
    for (std::size_t i = 0; i < codes.size(); ++i) g.codes[i] = static_cast<std::uint8_t>(codes[i]);
    return g;
}

GradeMap random_map(std::mt19937& rng, int w, int h, bool truth) {
    GradeMap g(w, h);
    std::uniform_int_distribution<int> d(0, truth ? 5 : 4);
    for (auto& c : g.codes) {
        const int v = d(rng);
        c = static_cast<std::uint8_t>(v == 5 ? kUnclassified : v);
    }
    return g;
}

struct Tally {
    std::uint64_t tp = 0, fp = 0, fn = 0;
};

// Direct pixel walk, independent of the count matrix.
Tally brute_grade(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth, int grade,
                  const GradeScheme& s) {
    Tally t;
    for (std::size_t k = 0; k < pred.size(); ++k)
        for (std::size_t i = 0; i < pred[k].codes.size(); ++i) {
            const int tc = truth[k].codes[i];
            if (tc == 0 || tc == kUnclassified) continue;
            const int tg = s.apply(tc), pg = s.apply(pred[k].codes[i]);
            if (tg == grade && pg == grade) ++t.tp;
            else if (pg == grade) ++t.fp;
            else if (tg == grade) ++t.fn;
        }
    return t;
}

Tally brute_loc(const std::vector<GradeMap>& pred, const std::vector<GradeMap>& truth) {
    Tally t;
    for (std::size_t k = 0; k < pred.size(); ++k)
        for (std::size_t i = 0; i < pred[k].codes.size(); ++i) {
            const int tc = truth[k].codes[i], pc = pred[k].codes[i];
            if (tc == kUnclassified) continue;
            if (tc && pc) ++t.tp;
            else if (pc) ++t.fp;
            else if (tc) ++t.fn;
        }
    return t;
}

}  // namespace

TEST_CASE("macro F1 reproduces published harmonic means") {
    const double t1[] = {0.9234, 0.6444, 0.7859, 0.8640};
    const double t1b[] = {0.9212, 0.5924, 0.7651, 0.8657};
    const double t3[] = {0.9264, 0.6733, 0.5970, 0.8600};
    CHECK(std::abs(macro_f1(t1) - 0.7897) <= 5e-4);
    CHECK(std::abs(macro_f1(t1b) - 0.7640) <= 5e-4);
    CHECK(std::abs(macro_f1(t3) - 0.7404) <= 5e-4);
}

TEST_CASE("macro F1 edge cases") {
    const double same[] = {0.37, 0.37, 0.37, 0.37};
    CHECK(macro_f1(same) == doctest::Approx(0.37).epsilon(1e-15));
    const double with_zero[] = {0.9, 0.0, 0.8};
    CHECK(macro_f1(with_zero) == 0.0);
    CHECK_THROWS_AS(macro_f1(std::span<const double>{}), std::invalid_argument);
}

TEST_CASE("challenge score blend") {
    CHECK(std::abs(challenge_score(0.8624, 0.7897) - 0.8119) <= 1e-3);
    CHECK(std::abs(challenge_score(0.8587, 0.7640) - 0.7924) <= 1e-3);
    CHECK(std::abs(challenge_score(0.8595, 0.7551) - 0.7865) <= 1e-3);
    CHECK(challenge_score(1.0, 1.0) == 1.0);
}

TEST_CASE("F1 from precision and recall") {
    CHECK(std::abs(f1_from_pr(0.7983, 0.9377) - 0.8624) <= 5e-4);
    CHECK(f1_from_pr(0.0, 0.0) == 0.0);
}

TEST_CASE("localization F1") {
    const auto truth = from_rows(4, 1, {0, 1, 3, 4});
    SUBCASE("perfect") { CHECK(localization_f1({truth}, {truth}).f1 == 1.0); }
    SUBCASE("all background") {
        const auto s = localization_f1({GradeMap(4, 1)}, {truth});
        CHECK(s.f1 == 0.0);
        CHECK(s.fn == 3);
    }
    SUBCASE("no truth buildings") {
        const auto s = localization_f1({GradeMap(4, 1)}, {GradeMap(4, 1)});
        CHECK(s.f1 == 0.0);
        CHECK_FALSE(s.defined);
    }
    SUBCASE("unclassified excluded") {
        const auto t = from_rows(3, 1, {255, 1, 0});
        const auto p = from_rows(3, 1, {0, 1, 0});
        const auto counts = count_pixels(p, t);
        CHECK(counts.unclassified == 1);
        CHECK(localization_f1(counts).f1 == 1.0);
    }
}

TEST_CASE("per-grade counts on a hand-built two-scene case") {
    // Scene A truth/pred and scene B truth/pred, tallied by hand below.
    const auto ta = from_rows(4, 2, {1, 1, 2, 2, 3, 4, 0, 0});
    const auto pa = from_rows(4, 2, {1, 2, 2, 0, 3, 3, 1, 0});
    const auto tb = from_rows(3, 1, {4, 4, 255});
    const auto pb = from_rows(3, 1, {4, 1, 4});
    const auto r = per_grade_f1({pa, pb}, {ta, tb}, GradeScheme::fine());
    // grade 1: tp 1 (A0), fp 1 (B1 truth 4 pred 1), fn 1 (A1)
    CHECK(r.grades[0].tp == 1);
    CHECK(r.grades[0].fp == 1);
    CHECK(r.grades[0].fn == 1);
    // grade 2: tp 1 (A2), fp 1 (A1), fn 1 (A3 missed)
    CHECK(r.grades[1].tp == 1);
    CHECK(r.grades[1].fp == 1);
    CHECK(r.grades[1].fn == 1);
    // grade 3: tp 1 (A4), fp 1 (A5), fn 0
    CHECK(r.grades[2].tp == 1);
    CHECK(r.grades[2].fp == 1);
    CHECK(r.grades[2].fn == 0);
    // grade 4: tp 1 (B0), fp 0, fn 2 (A5, B1)
    CHECK(r.grades[3].tp == 1);
    CHECK(r.grades[3].fp == 0);
    CHECK(r.grades[3].fn == 2);
    CHECK(r.confusion.rows[2][0] == 1);  // missed column
    CHECK(r.grades[3].f1 == doctest::Approx(2.0 * 1.0 * (1.0 / 3.0) / (1.0 + 1.0 / 3.0)));
}

TEST_CASE("perfect prediction gives a diagonal confusion and unit scores") {
    const auto t = from_rows(5, 1, {0, 1, 2, 3, 4});
    const auto report = evaluate_maps({t}, {t}, GradeScheme::fine());
    for (const auto& g : report.per_grade) CHECK(g.f1 == 1.0);
    for (int a = 1; a <= 4; ++a)
        for (int b = 0; b <= 4; ++b) CHECK(report.confusion.rows[a][b] == (a == b ? 1u : 0u));
    CHECK(report.f1_cls == 1.0);
    CHECK(report.score == 1.0);
    CHECK(report.binary.f1 == 1.0);
}

TEST_CASE("binary F1 hand case: all truth damaged, half predicted damaged") {
    GradeMap truth(8, 8, 3), pred(8, 8, 3);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 4; ++x) pred.at(y, x) = 1;
    const auto s = binary_f1({pred}, {truth});
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 0.5);
    CHECK(s.f1 == doctest::Approx(2.0 * 0.5 / 1.5).epsilon(1e-12));
}

TEST_CASE("binary F1 with nothing damaged is flagged undefined") {
    GradeMap t(4, 4, 1);
    const auto s = binary_f1({t}, {t});
    CHECK_FALSE(s.defined);
    CHECK(s.f1 == 0.0);
}

TEST_CASE("Ahr scheme merges minor and major") {
    const auto t = from_rows(2, 1, {2, 3});
    const auto p = from_rows(2, 1, {3, 2});
    const auto fine = per_grade_f1({p}, {t}, GradeScheme::fine());
    CHECK(fine.grades[1].f1 == 0.0);
    const auto ahr = per_grade_f1({p}, {t}, GradeScheme::ahr());
    REQUIRE(ahr.grades.size() == 3);
    CHECK(ahr.grades[1].tp == 2);
    CHECK(ahr.grades[1].f1 == 1.0);
}

TEST_CASE("grade scheme validation") {
    GradeScheme s = GradeScheme::ahr();
    CHECK_NOTHROW(s.validate());
    s.map[4] = 2;  // coarse grade 3 no longer hit
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    CHECK_THROWS_AS(GradeScheme::parse("coarse"), std::invalid_argument);
}

TEST_CASE("property: counts match a brute-force pixel tally") {
    std::mt19937 rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<GradeMap> pred, truth;
        for (int k = 0; k < 3; ++k) {
            pred.push_back(random_map(rng, 9, 7, false));
            truth.push_back(random_map(rng, 9, 7, true));
        }
        for (const auto& scheme : {GradeScheme::fine(), GradeScheme::ahr()}) {
            const auto r = per_grade_f1(pred, truth, scheme);
            for (int g = 1; g <= scheme.grades(); ++g) {
                const auto b = brute_grade(pred, truth, g, scheme);
                CHECK(r.grades[g - 1].tp == b.tp);
                CHECK(r.grades[g - 1].fp == b.fp);
                CHECK(r.grades[g - 1].fn == b.fn);
                // Row sums are the truth pixel counts of the grade.
                CHECK(r.confusion.truth_total(g) == b.tp + b.fn);
            }
        }
        const auto l = localization_f1(pred, truth);
        const auto bl = brute_loc(pred, truth);
        CHECK(l.tp == bl.tp);
        CHECK(l.fp == bl.fp);
        CHECK(l.fn == bl.fn);
    }
}

TEST_CASE("property: report identities") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        const auto p = random_map(rng, 12, 12, false);
        const auto t = random_map(rng, 12, 12, true);
        const auto r = evaluate_maps({p}, {t}, trial % 2 ? GradeScheme::ahr() : GradeScheme::fine());
        std::vector<double> f1s;
        for (std::size_t g = 0; g < r.per_grade.size(); ++g) {
            const auto& s = r.per_grade[g];
            CHECK(std::abs(s.f1 - f1_from_pr(s.precision, s.recall)) <= 1e-12);
            if (r.grade_available[g]) f1s.push_back(s.f1);
        }
        CHECK(std::abs(r.f1_cls - macro_f1(f1s)) <= 1e-12);
        CHECK(r.score == 0.3 * r.localization.f1 + 0.7 * r.f1_cls);
    }
}

TEST_CASE("property: remapping labels commutes with remapping counts") {
    std::mt19937 rng(9);
    const auto ahr = GradeScheme::ahr();
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_map(rng, 10, 10, false);
        auto t = random_map(rng, 10, 10, true);
        const auto from_counts = make_report(count_pixels(p, t), ahr);
        for (auto& c : p.codes) c = ahr.apply(c);
        for (auto& c : t.codes)
            if (c != kUnclassified) c = ahr.apply(c);
        GradeScheme identity3 = ahr;
        identity3.map = {0, 1, 2, 3, 3};  // labels already coarse; code 4 never occurs
        const auto from_labels = make_report(count_pixels(p, t), identity3);
        CHECK(from_counts.f1_cls == from_labels.f1_cls);
        CHECK(from_counts.confusion == from_labels.confusion);
        CHECK(from_counts.binary == from_labels.binary);
    }
}

TEST_CASE("micro versus per-scene aggregation") {
    const auto t1 = from_rows(2, 1, {1, 1});
    const auto t2 = from_rows(4, 1, {1, 1, 1, 1});
    const auto p1 = from_rows(2, 1, {1, 0});
    const auto p2 = from_rows(4, 1, {1, 1, 1, 1});
    const auto micro = evaluate_maps({p1, p2}, {t1, t2}, GradeScheme::fine());
    const auto macro = evaluate_maps({p1, p2}, {t1, t2}, GradeScheme::fine(), Aggregation::per_scene);
    CHECK(micro.localization.recall == doctest::Approx(5.0 / 6.0));
    CHECK(macro.localization.recall == doctest::Approx((0.5 + 1.0) / 2.0));
    CHECK(micro.counts == macro.counts);
    CHECK_THROWS_AS(evaluate_maps({}, {}, GradeScheme::fine()), std::invalid_argument);
}

TEST_CASE("average of identical reports equals the report") {
    std::mt19937 rng(3);
    const auto r = evaluate_maps({random_map(rng, 8, 8, false)}, {random_map(rng, 8, 8, true)}, GradeScheme::fine());
    const auto avg = average_reports({r, r, r});
    CHECK(avg.f1_cls == doctest::Approx(r.f1_cls).epsilon(1e-15));
    CHECK(avg.localization.f1 == doctest::Approx(r.localization.f1).epsilon(1e-15));
    CHECK(avg.per_grade[2].f1 == doctest::Approx(r.per_grade[2].f1).epsilon(1e-15));
}

TEST_CASE("fold average is the mean of metric values") {
    MetricsReport a, b, c;
    a.localization.f1 = 0.8778;
    b.localization.f1 = 0.8984;
    c.localization.f1 = 0.8711;
    CHECK(std::abs(average_reports({a, b, c}).localization.f1 - 0.8824) <= 5e-5);
}

TEST_CASE("confusion CSV and row normalization") {
    const auto t = from_rows(4, 1, {2, 2, 2, 2});
    const auto p = from_rows(4, 1, {1, 2, 2, 0});
    const auto r = per_grade_f1({p}, {t}, GradeScheme::fine());
    const auto norm = r.confusion.row_normalized();
    CHECK(norm[2][1] == 0.25);
    CHECK(norm[2][2] == 0.5);
    CHECK(norm[2][0] == 0.25);
    const auto csv = r.confusion.to_csv(GradeScheme::fine().labels);
    CHECK(csv.rfind("truth,missed,C1,C2,C3,C4\n", 0) == 0);
    CHECK(csv.find("C2,1,1,2,0,0\n") != std::string::npos);
}
