#include "jitid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

#include <json.hpp>

namespace jitid::eval {

namespace {

MetricsReport from_confusion(size_t tp, size_t fp, size_t fn, size_t tn) {
    MetricsReport r;
    r.tp = tp;
    r.fp = fp;
    r.fn = fn;
    r.tn = tn;
    r.n = tp + fp + fn + tn;
    if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    else r.zero_division = true;
    if (tp + fn > 0) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    else r.zero_division = true;
    if (r.precision + r.recall > 0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    if (r.n > 0) r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(r.n);
    return r;
}

}   // namespace

MetricsReport compute_metrics(const std::vector<corpus::Label>& preds,
                              const std::vector<corpus::Label>& golds) {
    if (preds.size() != golds.size())
        throw LengthMismatch("prediction/gold length mismatch: " +
                             std::to_string(preds.size()) + " vs " +
                             std::to_string(golds.size()));
    if (preds.empty()) throw LengthMismatch("empty prediction list");

    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        bool p = preds[i] == corpus::Label::Inconsistent;
        bool g = golds[i] == corpus::Label::Inconsistent;
        if (p && g) ++tp;
        else if (p && !g) ++fp;
        else if (!p && g) ++fn;
        else ++tn;
    }
    return from_confusion(tp, fp, fn, tn);
}

MetricsReport compute_metrics(const std::vector<corpus::Label>& preds,
                              const std::vector<corpus::Label>& golds,
                              const std::vector<lex::CommentType>& types) {
    if (types.size() != preds.size())
        throw LengthMismatch("type list length mismatch");
    MetricsReport report = compute_metrics(preds, golds);
    std::map<std::string, std::vector<size_t>> indices;
    for (size_t i = 0; i < types.size(); ++i)
        indices[lex::to_string(types[i])].push_back(i);
    for (const auto& [name, idx] : indices) {
        std::vector<corpus::Label> p, g;
        p.reserve(idx.size());
        g.reserve(idx.size());
        for (size_t i : idx) {
            p.push_back(preds[i]);
            g.push_back(golds[i]);
        }
        report.per_type.emplace(name, compute_metrics(p, g));
    }
    return report;
}

MetricsReport average_restarts(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw LengthMismatch("no reports to average");
    MetricsReport mean;
    double k = static_cast<double>(reports.size());
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (const MetricsReport& r : reports) {
        mean.precision += r.precision / k;
        mean.recall += r.recall / k;
        mean.f1 += r.f1 / k;
        mean.accuracy += r.accuracy / k;
        mean.zero_division = mean.zero_division || r.zero_division;
        tp += static_cast<double>(r.tp) / k;
        fp += static_cast<double>(r.fp) / k;
        fn += static_cast<double>(r.fn) / k;
        tn += static_cast<double>(r.tn) / k;
    }
    mean.tp = static_cast<size_t>(std::llround(tp));
    mean.fp = static_cast<size_t>(std::llround(fp));
    mean.fn = static_cast<size_t>(std::llround(fn));
    mean.tn = static_cast<size_t>(std::llround(tn));
    mean.n = reports.front().n;

    // per-type means over the keys every report carries
    for (const auto& [name, first] : reports.front().per_type) {
        std::vector<MetricsReport> slot;
        bool everywhere = true;
        for (const MetricsReport& r : reports) {
            auto it = r.per_type.find(name);
            if (it == r.per_type.end()) {
                everywhere = false;
                break;
            }
            slot.push_back(it->second);
        }
        if (everywhere) mean.per_type.emplace(name, average_restarts(slot));
    }
    mean.restarts = reports;
    return mean;
}

double bootstrap_significance(const std::vector<corpus::Label>& preds_a,
                              const std::vector<corpus::Label>& preds_b,
                              const std::vector<corpus::Label>& golds, Metric metric,
                              const BootstrapOptions& options) {
    if (options.iterations == 0) throw std::invalid_argument("iterations must be positive");
    if (options.sample_size == 0) throw std::invalid_argument("sample_size must be positive");
    if (preds_a.size() != golds.size() || preds_b.size() != golds.size())
        throw LengthMismatch("bootstrap inputs must be aligned");
    if (golds.empty()) throw LengthMismatch("empty bootstrap inputs");

    const size_t n = golds.size();
    size_t sample = options.sample_size;
    if (sample > n) {
        std::cerr << "bootstrap: sample size " << sample << " exceeds test set size " << n
                  << ", using " << n << "\n";
        sample = n;
    }

    // per-index confusion contributions, so each resample is O(sample)
    struct Cell { uint8_t tp_a, fp_a, fn_a, correct_a, tp_b, fp_b, fn_b, correct_b; };
    std::vector<Cell> cells(n);
    for (size_t i = 0; i < n; ++i) {
        bool g = golds[i] == corpus::Label::Inconsistent;
        bool a = preds_a[i] == corpus::Label::Inconsistent;
        bool b = preds_b[i] == corpus::Label::Inconsistent;
        cells[i] = {static_cast<uint8_t>(a && g),  static_cast<uint8_t>(a && !g),
                    static_cast<uint8_t>(!a && g), static_cast<uint8_t>(a == g),
                    static_cast<uint8_t>(b && g),  static_cast<uint8_t>(b && !g),
                    static_cast<uint8_t>(!b && g), static_cast<uint8_t>(b == g)};
    }

    auto metric_of = [&](size_t tp, size_t fp, size_t fn, size_t correct,
                         size_t total) -> double {
        if (metric == Metric::Accuracy)
            return static_cast<double>(correct) / static_cast<double>(total);
        double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    };

    size_t tp_a = 0, fp_a = 0, fn_a = 0, ca = 0, tp_b = 0, fp_b = 0, fn_b = 0, cb = 0;
    for (const Cell& c : cells) {
        tp_a += c.tp_a; fp_a += c.fp_a; fn_a += c.fn_a; ca += c.correct_a;
        tp_b += c.tp_b; fp_b += c.fp_b; fn_b += c.fn_b; cb += c.correct_b;
    }
    const double observed = metric_of(tp_a, fp_a, fn_a, ca, n) -
                            metric_of(tp_b, fp_b, fn_b, cb, n);

    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<size_t> pick(0, n - 1);
    size_t extreme = 0;
    for (size_t it = 0; it < options.iterations; ++it) {
        size_t rtp_a = 0, rfp_a = 0, rfn_a = 0, rca = 0;
        size_t rtp_b = 0, rfp_b = 0, rfn_b = 0, rcb = 0;
        for (size_t s = 0; s < sample; ++s) {
            const Cell& c = cells[pick(rng)];
            rtp_a += c.tp_a; rfp_a += c.fp_a; rfn_a += c.fn_a; rca += c.correct_a;
            rtp_b += c.tp_b; rfp_b += c.fp_b; rfn_b += c.fn_b; rcb += c.correct_b;
        }
        double delta = metric_of(rtp_a, rfp_a, rfn_a, rca, sample) -
                       metric_of(rtp_b, rfp_b, rfn_b, rcb, sample);
        if (options.two_sided) {
            if (std::abs(delta - observed) >= std::abs(observed)) ++extreme;
        } else {
            // one-sided: how often the observed advantage is lost entirely
            if (observed >= 0 ? delta - observed <= -observed
                              : delta - observed >= -observed)
                ++extreme;
        }
    }
    return static_cast<double>(extreme) / static_cast<double>(options.iterations);
}

namespace {

double round4(double x) { return std::round(x * 10000.0) / 10000.0; }

nlohmann::json report_json(const MetricsReport& r) {
    nlohmann::json j;
    j["precision"] = round4(r.precision);
    j["recall"] = round4(r.recall);
    j["f1"] = round4(r.f1);
    j["accuracy"] = round4(r.accuracy);
    j["n"] = r.n;
    j["tp"] = r.tp;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    j["tn"] = r.tn;
    j["zero_division"] = r.zero_division;
    if (!r.per_type.empty()) {
        nlohmann::json types;
        for (const auto& [name, sub] : r.per_type) types[name] = report_json(sub);
        j["per_type"] = types;
    }
    if (!r.restarts.empty()) {
        nlohmann::json restarts = nlohmann::json::array();
        for (const auto& sub : r.restarts) restarts.push_back(report_json(sub));
        j["restarts"] = restarts;
    }
    return j;
}

}   // namespace

std::string report_to_json(const MetricsReport& report) {
    return report_json(report).dump(2);
}

}   // namespace jitid::eval
