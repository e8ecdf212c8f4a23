#include <doctest.h>

#include <random>

#include "jitid/eval.hpp"

using namespace jitid;
using namespace jitid::eval;
using corpus::Label;

namespace {

const Label P = Label::Inconsistent;
const Label N = Label::Consistent;

std::vector<Label> labels(std::initializer_list<int> bits) {
    std::vector<Label> out;
    for (int b : bits) out.push_back(b ? P : N);
    return out;
}

}   // namespace

TEST_CASE("compute_metrics: balanced 2x2 case") {
    MetricsReport r = compute_metrics(labels({1, 0, 1, 0}), labels({1, 1, 0, 0}));
    CHECK(r.precision == doctest::Approx(0.5));
    CHECK(r.recall == doctest::Approx(0.5));
    CHECK(r.f1 == doctest::Approx(0.5));
    CHECK(r.accuracy == doctest::Approx(0.5));
    CHECK(r.tp == 1);
    CHECK(r.fp == 1);
    CHECK(r.fn == 1);
    CHECK(r.tn == 1);
}

TEST_CASE("compute_metrics: perfect predictions") {
    auto golds = labels({1, 0, 1, 1, 0});
    MetricsReport r = compute_metrics(golds, golds);
    CHECK(r.precision == doctest::Approx(1.0));
    CHECK(r.recall == doctest::Approx(1.0));
    CHECK(r.f1 == doctest::Approx(1.0));
    CHECK(r.accuracy == doctest::Approx(1.0));
}

TEST_CASE("compute_metrics: harmonic identity reproduces the published overlap row") {
    // P=0.741, R=0.628 -> F1=0.680: build a confusion matrix hitting those
    // rates exactly: tp=741*628, fp=259*628, fn=741*372
    size_t tp = 741 * 628, fp = 259 * 628, fn = 741 * 372;
    std::vector<Label> preds, golds;
    for (size_t i = 0; i < tp; ++i) { preds.push_back(P); golds.push_back(P); }
    for (size_t i = 0; i < fp; ++i) { preds.push_back(P); golds.push_back(N); }
    for (size_t i = 0; i < fn; ++i) { preds.push_back(N); golds.push_back(P); }
    preds.push_back(N); golds.push_back(N);
    MetricsReport r = compute_metrics(preds, golds);
    CHECK(r.precision == doctest::Approx(0.741).epsilon(1e-9));
    CHECK(r.recall == doctest::Approx(0.628).epsilon(1e-9));
    CHECK(r.f1 == doctest::Approx(0.680).epsilon(0.0008));
}

TEST_CASE("compute_metrics: zero-division yields 0 with a flag") {
    MetricsReport r = compute_metrics(labels({0, 0}), labels({0, 0}));
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
    CHECK(r.accuracy == 1.0);
    CHECK(r.zero_division);
}

TEST_CASE("compute_metrics: errors") {
    CHECK_THROWS_AS(compute_metrics(labels({1}), labels({1, 0})), LengthMismatch);
    CHECK_THROWS_AS(compute_metrics({}, {}), LengthMismatch);
}

TEST_CASE("compute_metrics matches exhaustive confusion enumeration up to n=6") {
    for (int n = 1; n <= 6; ++n) {
        for (int mask = 0; mask < (1 << (2 * n)); ++mask) {
            std::vector<Label> preds(static_cast<size_t>(n)), golds(static_cast<size_t>(n));
            size_t tp = 0, fp = 0, fn = 0, tn = 0;
            for (int i = 0; i < n; ++i) {
                bool p = mask & (1 << i);
                bool g = mask & (1 << (n + i));
                preds[static_cast<size_t>(i)] = p ? P : N;
                golds[static_cast<size_t>(i)] = g ? P : N;
                if (p && g) ++tp;
                else if (p) ++fp;
                else if (g) ++fn;
                else ++tn;
            }
            MetricsReport r = compute_metrics(preds, golds);
            REQUIRE(r.tp == tp);
            REQUIRE(r.fp == fp);
            REQUIRE(r.fn == fn);
            REQUIRE(r.tn == tn);
            double precision = tp + fp ? double(tp) / double(tp + fp) : 0.0;
            double recall = tp + fn ? double(tp) / double(tp + fn) : 0.0;
            double f1 = precision + recall ? 2 * precision * recall / (precision + recall) : 0.0;
            REQUIRE(r.precision == doctest::Approx(precision).epsilon(1e-12));
            REQUIRE(r.recall == doctest::Approx(recall).epsilon(1e-12));
            REQUIRE(r.f1 == doctest::Approx(f1).epsilon(1e-12));
            REQUIRE(r.accuracy == doctest::Approx(double(tp + tn) / n).epsilon(1e-12));
        }
    }
}

TEST_CASE("per-type breakdown aggregates to overall counts") {
    auto preds = labels({1, 0, 1, 1, 0, 0});
    auto golds = labels({1, 1, 0, 1, 0, 1});
    std::vector<lex::CommentType> types = {
        lex::CommentType::Return, lex::CommentType::Return, lex::CommentType::Param,
        lex::CommentType::Param,  lex::CommentType::Summary, lex::CommentType::Summary,
    };
    MetricsReport r = compute_metrics(preds, golds, types);
    REQUIRE(r.per_type.size() == 3);
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& [name, sub] : r.per_type) {
        tp += sub.tp;
        fp += sub.fp;
        fn += sub.fn;
        tn += sub.tn;
    }
    CHECK(tp == r.tp);
    CHECK(fp == r.fp);
    CHECK(fn == r.fn);
    CHECK(tn == r.tn);
}

TEST_CASE("average_restarts") {
    MetricsReport a = compute_metrics(labels({1, 0, 0, 0, 1}), labels({1, 1, 0, 0, 1}));
    MetricsReport b = compute_metrics(labels({1, 1, 0, 0, 1}), labels({1, 1, 0, 0, 1}));
    MetricsReport c = compute_metrics(labels({1, 1, 1, 0, 1}), labels({1, 1, 0, 0, 1}));
    CHECK(a.accuracy == doctest::Approx(0.8));
    CHECK(b.accuracy == doctest::Approx(1.0));
    CHECK(c.accuracy == doctest::Approx(0.8));

    MetricsReport mean = average_restarts({a, b, c});
    CHECK(mean.accuracy == doctest::Approx((0.8 + 1.0 + 0.8) / 3));
    CHECK(mean.restarts.size() == 3);

    MetricsReport same = average_restarts({b, b, b});
    CHECK(same.accuracy == doctest::Approx(b.accuracy));
    CHECK(same.f1 == doctest::Approx(b.f1));

    MetricsReport single = average_restarts({a});
    CHECK(single.f1 == doctest::Approx(a.f1));
}

TEST_CASE("bootstrap: identical systems are never significant") {
    std::mt19937_64 rng(5);
    std::vector<Label> golds, preds;
    for (int i = 0; i < 600; ++i) {
        golds.push_back(rng() % 2 ? P : N);
        preds.push_back(rng() % 2 ? P : N);
    }
    BootstrapOptions opt;
    opt.iterations = 500;
    opt.sample_size = 600;
    opt.seed = 1;
    double p = bootstrap_significance(preds, preds, golds, Metric::Accuracy, opt);
    CHECK(p == doctest::Approx(1.0));
}

TEST_CASE("bootstrap: clearly separated systems are significant") {
    std::mt19937_64 rng(6);
    std::vector<Label> golds(2000, P);
    for (size_t i = 0; i < golds.size(); i += 2) golds[i] = N;
    std::vector<Label> good = golds, bad = golds;
    for (size_t i = 0; i < golds.size(); ++i) {
        if (rng() % 10 == 0) good[i] = good[i] == P ? N : P;    // ~0.9 accuracy
        if (rng() % 10 < 4) bad[i] = bad[i] == P ? N : P;       // ~0.6 accuracy
    }
    BootstrapOptions opt;
    opt.iterations = 2000;
    opt.sample_size = 2000;
    opt.seed = 2;
    double p = bootstrap_significance(good, bad, golds, Metric::Accuracy, opt);
    CHECK(p < 0.05);
    double pf1 = bootstrap_significance(good, bad, golds, Metric::F1, opt);
    CHECK(pf1 < 0.05);
}

TEST_CASE("bootstrap: reproducible, bounded, validated") {
    auto golds = labels({1, 0, 1, 0, 1, 0, 1, 1});
    auto a = labels({1, 0, 1, 0, 1, 0, 0, 1});
    auto b = labels({1, 1, 0, 0, 1, 0, 1, 1});
    BootstrapOptions opt;
    opt.iterations = 300;
    opt.sample_size = 8;
    opt.seed = 9;
    double p1 = bootstrap_significance(a, b, golds, Metric::F1, opt);
    double p2 = bootstrap_significance(a, b, golds, Metric::F1, opt);
    CHECK(p1 == p2);
    CHECK(p1 >= 0.0);
    CHECK(p1 <= 1.0);

    opt.iterations = 0;
    CHECK_THROWS_AS(bootstrap_significance(a, b, golds, Metric::F1, opt),
                    std::invalid_argument);
    opt.iterations = 10;
    CHECK_THROWS_AS(bootstrap_significance(a, b, labels({1}), Metric::F1, opt),
                    LengthMismatch);
}

TEST_CASE("report json carries fixed fields") {
    MetricsReport r = compute_metrics(labels({1, 0}), labels({1, 1}));
    std::string json = report_to_json(r);
    CHECK(json.find("\"precision\"") != std::string::npos);
    CHECK(json.find("\"recall\"") != std::string::npos);
    CHECK(json.find("\"f1\"") != std::string::npos);
    CHECK(json.find("\"accuracy\"") != std::string::npos);
}
