#ifndef JITID_EVAL_HPP
#define JITID_EVAL_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jitid/corpus.hpp"

namespace jitid::eval {

class LengthMismatch : public std::runtime_error {
public:
    explicit LengthMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct MetricsReport {
    double precision = 0.0;   // w.r.t. the positive (inconsistent) label
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
    size_t n = 0;
    size_t tp = 0, fp = 0, fn = 0, tn = 0;
    bool zero_division = false;   // a P or R denominator was zero
    std::map<std::string, MetricsReport> per_type;
    std::vector<MetricsReport> restarts;   // populated by average_restarts
};

MetricsReport compute_metrics(const std::vector<corpus::Label>& preds,
                              const std::vector<corpus::Label>& golds);

/** Adds a per-comment-type breakdown keyed by type name. */
MetricsReport compute_metrics(const std::vector<corpus::Label>& preds,
                              const std::vector<corpus::Label>& golds,
                              const std::vector<lex::CommentType>& types);

/** Arithmetic mean per metric; the inputs are kept in `restarts`. */
MetricsReport average_restarts(const std::vector<MetricsReport>& reports);

enum class Metric { F1, Accuracy };

struct BootstrapOptions {
    size_t iterations = 10000;
    size_t sample_size = 5000;
    uint64_t seed = 0;
    bool two_sided = true;
};

/** Paired bootstrap p-value for the difference in `metric` between two
 *  systems on the same gold labels. Resamples indices with replacement and
 *  counts how often the resampled advantage drifts from the observed one by
 *  at least the observed advantage itself (both tails when two_sided). */
double bootstrap_significance(const std::vector<corpus::Label>& preds_a,
                              const std::vector<corpus::Label>& preds_b,
                              const std::vector<corpus::Label>& golds, Metric metric,
                              const BootstrapOptions& options = {});

/** Fixed-field JSON with numbers at 4 decimal places. */
std::string report_to_json(const MetricsReport& report);

}   // namespace jitid::eval

#endif
