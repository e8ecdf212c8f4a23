#ifndef JITID_BASELINES_HPP
#define JITID_BASELINES_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jitid/astdiff.hpp"
#include "jitid/corpus.hpp"
#include "jitid/lex.hpp"
#include "jitid/seqedit.hpp"

namespace jitid::baselines {

/** Code side fed to the bag-of-words baselines: the current method (post
 *  hoc) or the linearized edit sequence (just-in-time). */
enum class Mode { PostHoc, JustInTime };
Mode mode_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// rule-based baselines
// ---------------------------------------------------------------------------

/** Inconsistent iff any comment subtoken occurs in a Delete or ReplaceOld
 *  span of the edit script. */
corpus::Label overlap_baseline(const lex::CommentTokenSeq& comment,
                               const seqedit::EditScript& script);

/** @return comments must begin with the method's return type, leading
 *  articles ignored, generics stripped. */
corpus::Label return_prefix_heuristic(const lex::CommentTokenSeq& comment,
                                      const astdiff::MethodShape& method);

/** @param comments must begin with the name of one of the parameters. */
corpus::Label param_prefix_heuristic(const lex::CommentTokenSeq& comment,
                                     const astdiff::MethodShape& method);

// ---------------------------------------------------------------------------
// TF-IDF linear classifier
// ---------------------------------------------------------------------------

class EmptyVocabulary : public std::runtime_error {
public:
    explicit EmptyVocabulary(const std::string& what) : std::runtime_error(what) {}
};

struct TfidfOptions {
    size_t min_count = 2;     // minimum total occurrences for a vocabulary entry
    int epochs = 60;
    double learning_rate = 0.05;
    double l2 = 1e-4;
    uint64_t seed = 0;
};

struct TfidfModel {
    Mode mode = Mode::JustInTime;
    std::map<std::string, size_t> comment_vocab;   // token -> feature index
    std::map<std::string, size_t> code_vocab;      // token -> offset past comments
    std::vector<double> idf;                       // per feature
    std::vector<double> weights;
    double bias = 0.0;
};

TfidfModel fit_tfidf(const std::vector<corpus::Example>& train, Mode mode,
                     const TfidfOptions& options = {});
corpus::Label predict_tfidf(const TfidfModel& model, const corpus::Example& ex);
/** Signed margin, thresholded at zero by predict_tfidf. */
double tfidf_margin(const TfidfModel& model, const corpus::Example& ex);

// ---------------------------------------------------------------------------
// pretrained-embedding bag-of-words classifier
// ---------------------------------------------------------------------------

class EmbeddingDimMismatch : public std::runtime_error {
public:
    explicit EmbeddingDimMismatch(const std::string& what) : std::runtime_error(what) {}
};

class EmptySequence : public std::runtime_error {
public:
    explicit EmptySequence(const std::string& what) : std::runtime_error(what) {}
};

/** Plain-text table: first line the dimension D, then one entry per line,
 *  "subtoken v1 .. vD". Unknown subtokens map to the "<unk>" entry when the
 *  table has one and to the zero vector otherwise. */
struct EmbeddingTable {
    size_t dim = 0;
    std::map<std::string, std::vector<double>> vectors;
    std::vector<double> unk;

    const std::vector<double>& lookup(const std::string& token) const {
        auto it = vectors.find(token);
        return it == vectors.end() ? unk : it->second;
    }
};

EmbeddingTable load_embedding_table(const std::string& path);
EmbeddingTable parse_embedding_table(std::istream& in, const std::string& origin);

struct BowOptions {
    size_t hidden_dim = 32;
    int epochs = 80;
    double learning_rate = 0.05;
    uint64_t seed = 0;
};

struct BowEmbeddingModel {
    Mode mode = Mode::JustInTime;
    EmbeddingTable table;
    size_t hidden_dim = 0;
    std::vector<double> w1, b1;   // hidden x (2*dim), hidden
    std::vector<double> w2, b2;   // 2 x hidden, 2
};

BowEmbeddingModel fit_bow_embedding(const std::vector<corpus::Example>& train,
                                    const EmbeddingTable& embeddings, Mode mode,
                                    const BowOptions& options = {});
/** (label, probability of inconsistent). */
std::pair<corpus::Label, double> predict_bow(const BowEmbeddingModel& model,
                                             const corpus::Example& ex);

// ---------------------------------------------------------------------------
// shared preprocessing
// ---------------------------------------------------------------------------

/** Comment subtokens of an example (tag markers handled by the lexer). */
std::vector<std::string> comment_tokens_of(const corpus::Example& ex);

/** Code-side tokens per the mode: subtokens of M, or the linearized
 *  token-level edit script between M_old and M. */
std::vector<std::string> code_tokens_of(const corpus::Example& ex, Mode mode);

/** Edit script between the two method versions of an example. */
seqedit::EditScript edit_script_of(const corpus::Example& ex);

}   // namespace jitid::baselines

#endif
