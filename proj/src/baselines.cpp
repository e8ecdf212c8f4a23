#include "jitid/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace jitid::baselines {

using corpus::Example;
using corpus::Label;

Mode mode_from_string(std::string_view s) {
    if (s == "posthoc") return Mode::PostHoc;
    if (s == "jit" || s == "just-in-time") return Mode::JustInTime;
    throw std::invalid_argument("unknown mode: " + std::string(s));
}

// ---------------------------------------------------------------------------
// preprocessing shared by the learned baselines
// ---------------------------------------------------------------------------

std::vector<std::string> comment_tokens_of(const Example& ex) {
    auto seq = lex::tokenize_comment(
        ex.comment_raw, ex.comment_type,
        ex.comment_type == lex::CommentType::Param
            ? std::optional<std::string>(corpus::param_name_of(ex))
            : std::nullopt);
    return seq.texts();
}

seqedit::EditScript edit_script_of(const Example& ex) {
    return seqedit::method_edit_script(lex::tokenize_code(ex.m_old_raw),
                                       lex::tokenize_code(ex.m_new_raw));
}

std::vector<std::string> code_tokens_of(const Example& ex, Mode mode) {
    if (mode == Mode::PostHoc)
        return lex::code_subtokens(lex::tokenize_code(ex.m_new_raw));
    return seqedit::linearize(edit_script_of(ex));
}

// ---------------------------------------------------------------------------
// rule-based baselines
// ---------------------------------------------------------------------------

corpus::Label overlap_baseline(const lex::CommentTokenSeq& comment,
                               const seqedit::EditScript& script) {
    std::set<std::string> deleted;
    for (const auto& span : script.actions) {
        if (span.action != seqedit::Action::Delete &&
            span.action != seqedit::Action::ReplaceOld)
            continue;
        deleted.insert(span.tokens.begin(), span.tokens.end());
    }
    for (const auto& sub : comment.subtokens)
        if (deleted.count(sub.text)) return Label::Inconsistent;
    return Label::Consistent;
}

namespace {

bool is_article(const std::string& word) {
    return word == "a" || word == "an" || word == "the";
}

/** Comment subtokens with the tag word and leading articles removed. */
std::vector<std::string> prefix_tokens(const lex::CommentTokenSeq& comment) {
    std::vector<std::string> toks;
    for (const auto& s : comment.subtokens) toks.push_back(s.text);
    size_t i = 0;
    if (i < toks.size() && (toks[i] == "return" || toks[i] == "param")) ++i;
    while (i < toks.size() && is_article(toks[i])) ++i;
    return {toks.begin() + static_cast<long>(i), toks.end()};
}

bool starts_with_subtokens(const std::vector<std::string>& comment,
                           const std::string& name) {
    std::vector<std::string> subs = lex::subtokenize(name);
    if (comment.size() < subs.size()) return false;
    for (size_t i = 0; i < subs.size(); ++i)
        if (comment[i] != subs[i]) return false;
    return true;
}

}   // namespace

corpus::Label return_prefix_heuristic(const lex::CommentTokenSeq& comment,
                                      const astdiff::MethodShape& method) {
    if (method.return_type_tokens.empty()) return Label::Inconsistent;
    // head type name: the last segment of the qualified name, generics and
    // array dims already stripped by the parser shape
    const std::string& head = method.return_type_tokens.back();
    return starts_with_subtokens(prefix_tokens(comment), head) ? Label::Consistent
                                                               : Label::Inconsistent;
}

corpus::Label param_prefix_heuristic(const lex::CommentTokenSeq& comment,
                                     const astdiff::MethodShape& method) {
    std::vector<std::string> toks = prefix_tokens(comment);
    for (const auto& param : method.parameters)
        if (!param.name.empty() && starts_with_subtokens(toks, param.name))
            return Label::Consistent;
    return Label::Inconsistent;
}

// ---------------------------------------------------------------------------
// TF-IDF linear classifier
// ---------------------------------------------------------------------------

namespace {

using SparseVec = std::vector<std::pair<size_t, double>>;

SparseVec tfidf_features(const TfidfModel& model, const std::vector<std::string>& comment,
                         const std::vector<std::string>& code) {
    std::map<size_t, double> counts;
    for (const auto& tok : comment) {
        auto it = model.comment_vocab.find(tok);
        if (it != model.comment_vocab.end()) counts[it->second] += 1.0;
    }
    for (const auto& tok : code) {
        auto it = model.code_vocab.find(tok);
        if (it != model.code_vocab.end()) counts[it->second] += 1.0;
    }
    SparseVec out;
    out.reserve(counts.size());
    for (const auto& [index, tf] : counts) out.emplace_back(index, tf * model.idf[index]);
    return out;
}

}   // namespace

TfidfModel fit_tfidf(const std::vector<Example>& train, Mode mode,
                     const TfidfOptions& options) {
    if (train.empty()) throw std::invalid_argument("empty training set");

    TfidfModel model;
    model.mode = mode;

    std::vector<std::vector<std::string>> comments, codes;
    comments.reserve(train.size());
    codes.reserve(train.size());
    for (const Example& ex : train) {
        comments.push_back(comment_tokens_of(ex));
        codes.push_back(code_tokens_of(ex, mode));
    }

    // vocabulary over tokens seen at least min_count times in total
    std::map<std::string, size_t> comment_counts, code_counts;
    for (const auto& doc : comments)
        for (const auto& tok : doc) ++comment_counts[tok];
    for (const auto& doc : codes)
        for (const auto& tok : doc) ++code_counts[tok];

    size_t index = 0;
    for (const auto& [tok, n] : comment_counts)
        if (n >= options.min_count) model.comment_vocab.emplace(tok, index++);
    for (const auto& [tok, n] : code_counts)
        if (n >= options.min_count) model.code_vocab.emplace(tok, index++);
    if (index == 0)
        throw EmptyVocabulary("no token occurs at least " +
                              std::to_string(options.min_count) + " times");

    // smoothed idf over documents (comment docs and code docs separately)
    std::vector<size_t> df(index, 0);
    const double n_docs = static_cast<double>(train.size());
    for (const auto& doc : comments) {
        std::set<std::string> uniq(doc.begin(), doc.end());
        for (const auto& tok : uniq) {
            auto it = model.comment_vocab.find(tok);
            if (it != model.comment_vocab.end()) ++df[it->second];
        }
    }
    for (const auto& doc : codes) {
        std::set<std::string> uniq(doc.begin(), doc.end());
        for (const auto& tok : uniq) {
            auto it = model.code_vocab.find(tok);
            if (it != model.code_vocab.end()) ++df[it->second];
        }
    }
    model.idf.resize(index);
    for (size_t i = 0; i < index; ++i)
        model.idf[i] = std::log((n_docs + 1.0) / (static_cast<double>(df[i]) + 1.0)) + 1.0;

    // hinge-loss linear classifier by seeded subgradient descent
    model.weights.assign(index, 0.0);
    std::vector<SparseVec> features;
    features.reserve(train.size());
    std::vector<double> ys;
    for (size_t i = 0; i < train.size(); ++i) {
        features.push_back(tfidf_features(model, comments[i], codes[i]));
        ys.push_back(train[i].label == Label::Inconsistent ? 1.0 : -1.0);
    }

    std::mt19937_64 rng(options.seed);
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t i : order) {
            double margin = model.bias;
            for (const auto& [f, v] : features[i]) margin += model.weights[f] * v;
            if (ys[i] * margin < 1.0) {
                for (const auto& [f, v] : features[i])
                    model.weights[f] += options.learning_rate * ys[i] * v;
                model.bias += options.learning_rate * ys[i];
            }
            for (auto& w : model.weights) w -= options.learning_rate * options.l2 * w;
        }
    }
    return model;
}

double tfidf_margin(const TfidfModel& model, const Example& ex) {
    SparseVec features =
        tfidf_features(model, comment_tokens_of(ex), code_tokens_of(ex, model.mode));
    double margin = model.bias;
    for (const auto& [f, v] : features) margin += model.weights[f] * v;
    return margin;
}

corpus::Label predict_tfidf(const TfidfModel& model, const Example& ex) {
    return tfidf_margin(model, ex) >= 0.0 ? Label::Inconsistent : Label::Consistent;
}

// ---------------------------------------------------------------------------
// pretrained-embedding bag-of-words classifier
// ---------------------------------------------------------------------------

EmbeddingTable parse_embedding_table(std::istream& in, const std::string& origin) {
    EmbeddingTable table;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(origin + ": empty embedding table");
    try {
        table.dim = static_cast<size_t>(std::stoul(line));
    } catch (const std::exception&) {
        throw std::runtime_error(origin + ": first line must declare the dimension");
    }
    if (table.dim == 0) throw EmbeddingDimMismatch(origin + ": dimension must be positive");

    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        std::string token;
        fields >> token;
        std::vector<double> vec;
        vec.reserve(table.dim);
        double v;
        while (fields >> v) vec.push_back(v);
        if (vec.size() != table.dim)
            throw EmbeddingDimMismatch(origin + ":" + std::to_string(line_no) + ": entry '" +
                                       token + "' has " + std::to_string(vec.size()) +
                                       " values, expected " + std::to_string(table.dim));
        table.vectors[token] = std::move(vec);
    }
    auto unk = table.vectors.find("<unk>");
    table.unk = unk != table.vectors.end() ? unk->second
                                           : std::vector<double>(table.dim, 0.0);
    return table;
}

EmbeddingTable load_embedding_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding table: " + path);
    return parse_embedding_table(in, path);
}

namespace {

std::vector<double> mean_embedding(const EmbeddingTable& table,
                                   const std::vector<std::string>& tokens,
                                   const std::string& what) {
    if (tokens.empty()) throw EmptySequence("cannot average an empty " + what + " sequence");
    std::vector<double> mean(table.dim, 0.0);
    for (const auto& tok : tokens) {
        const auto& v = table.lookup(tok);
        for (size_t i = 0; i < table.dim; ++i) mean[i] += v[i];
    }
    for (double& x : mean) x /= static_cast<double>(tokens.size());
    return mean;
}

std::vector<double> bow_input(const BowEmbeddingModel& model, const Example& ex) {
    std::vector<double> x = mean_embedding(model.table, comment_tokens_of(ex), "comment");
    std::vector<double> code =
        mean_embedding(model.table, code_tokens_of(ex, model.mode), "code");
    x.insert(x.end(), code.begin(), code.end());
    return x;
}

struct BowForward {
    std::vector<double> hidden;      // tanh activations
    std::array<double, 2> logits;
    std::array<double, 2> probs;
};

BowForward bow_forward(const BowEmbeddingModel& model, const std::vector<double>& x) {
    BowForward f;
    const size_t h = model.hidden_dim, d = x.size();
    f.hidden.resize(h);
    for (size_t i = 0; i < h; ++i) {
        double z = model.b1[i];
        for (size_t j = 0; j < d; ++j) z += model.w1[i * d + j] * x[j];
        f.hidden[i] = std::tanh(z);
    }
    for (size_t k = 0; k < 2; ++k) {
        double z = model.b2[k];
        for (size_t i = 0; i < h; ++i) z += model.w2[k * h + i] * f.hidden[i];
        f.logits[k] = z;
    }
    double m = std::max(f.logits[0], f.logits[1]);
    double e0 = std::exp(f.logits[0] - m), e1 = std::exp(f.logits[1] - m);
    f.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
    return f;
}

}   // namespace

BowEmbeddingModel fit_bow_embedding(const std::vector<Example>& train,
                                    const EmbeddingTable& embeddings, Mode mode,
                                    const BowOptions& options) {
    if (train.empty()) throw std::invalid_argument("empty training set");

    BowEmbeddingModel model;
    model.mode = mode;
    model.table = embeddings;
    model.hidden_dim = options.hidden_dim;
    const size_t d = 2 * embeddings.dim;
    const size_t h = options.hidden_dim;

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> init(-0.1, 0.1);
    model.w1.resize(h * d);
    model.b1.assign(h, 0.0);
    model.w2.resize(2 * h);
    model.b2.assign(2, 0.0);
    for (double& w : model.w1) w = init(rng);
    for (double& w : model.w2) w = init(rng);

    std::vector<std::vector<double>> inputs;
    std::vector<size_t> targets;   // 1 = inconsistent
    inputs.reserve(train.size());
    for (const Example& ex : train) {
        inputs.push_back(bow_input(model, ex));
        targets.push_back(ex.label == Label::Inconsistent ? 1 : 0);
    }

    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    const double lr = options.learning_rate;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t idx : order) {
            const auto& x = inputs[idx];
            BowForward f = bow_forward(model, x);
            // dL/dlogits for NLL with softmax
            std::array<double, 2> dlogit = {f.probs[0], f.probs[1]};
            dlogit[targets[idx]] -= 1.0;

            std::vector<double> dhidden(h, 0.0);
            for (size_t k = 0; k < 2; ++k) {
                for (size_t i = 0; i < h; ++i) {
                    dhidden[i] += dlogit[k] * model.w2[k * h + i];
                    model.w2[k * h + i] -= lr * dlogit[k] * f.hidden[i];
                }
                model.b2[k] -= lr * dlogit[k];
            }
            for (size_t i = 0; i < h; ++i) {
                double dz = dhidden[i] * (1.0 - f.hidden[i] * f.hidden[i]);
                for (size_t j = 0; j < d; ++j) model.w1[i * d + j] -= lr * dz * x[j];
                model.b1[i] -= lr * dz;
            }
        }
    }
    return model;
}

std::pair<corpus::Label, double> predict_bow(const BowEmbeddingModel& model,
                                             const Example& ex) {
    BowForward f = bow_forward(model, bow_input(model, ex));
    double p = f.probs[1];
    return {p >= 0.5 ? Label::Inconsistent : Label::Consistent, p};
}

}   // namespace jitid::baselines
