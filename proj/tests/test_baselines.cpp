#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "jitid/baselines.hpp"

using namespace jitid;
using namespace jitid::baselines;
using corpus::Example;
using corpus::Label;

namespace {

lex::CommentTokenSeq comment_seq(const std::string& text, lex::CommentType type,
                                 std::optional<std::string> param = std::nullopt) {
    return lex::tokenize_comment(text, type, std::move(param));
}

Example make_example(lex::CommentType type, const std::string& comment,
                     const std::string& m_old, const std::string& m_new, Label label) {
    Example ex;
    static int counter = 0;
    ex.id = "b" + std::to_string(counter++);
    ex.project = "p";
    ex.comment_type = type;
    ex.comment_raw = comment;
    ex.m_old_raw = m_old;
    ex.m_new_raw = m_new;
    ex.label = label;
    return ex;
}

astdiff::MethodShape shape_of(const std::string& source) {
    return astdiff::method_shape(astdiff::parse_method(source));
}

/** Brute-force oracle: comment subtoken set against deleted-span set. */
Label overlap_oracle(const lex::CommentTokenSeq& comment,
                     const seqedit::EditScript& script) {
    std::set<std::string> cs;
    for (const auto& s : comment.subtokens) cs.insert(s.text);
    for (const auto& span : script.actions) {
        if (span.action != seqedit::Action::Delete &&
            span.action != seqedit::Action::ReplaceOld)
            continue;
        for (const auto& tok : span.tokens)
            if (cs.count(tok)) return Label::Inconsistent;
    }
    return Label::Consistent;
}

std::string embedding_fixture_table() {
    // deterministic little table over the fixture vocabulary
    std::ostringstream out;
    out << "8\n";
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> val(-0.5, 0.5);
    const char* toks[] = {"<keep>",  "<insert>", "<delete>", "<replace_old>",
                          "<replace_new>", "marker", "int", "f", "(", ")", "{", "}",
                          "return", ";", "x", "y", "z", "+", "0", "1", "2", "3",
                          "comment", "words", "here", "<KEEP>", "<INSERT>", "<DELETE>",
                          "<REPLACE_OLD>", "<REPLACE_NEW>"};
    for (const char* tok : toks) {
        out << tok;
        for (int i = 0; i < 8; ++i) out << " " << val(rng);
        out << "\n";
    }
    return out.str();
}

}   // namespace

TEST_CASE("overlap_baseline: signature type change script") {
    auto old_toks = lex::tokenize_code("boolean hasProperty(String key)");
    auto new_toks = lex::tokenize_code("boolean hasProperty(PropertyKey key)");
    auto script = seqedit::method_edit_script(old_toks, new_toks);

    auto no_overlap = comment_seq("@param key the key to check", lex::CommentType::Param, "key");
    CHECK(overlap_baseline(no_overlap, script) == Label::Consistent);

    auto with_overlap =
        comment_seq("@param key the string to check", lex::CommentType::Param, "key");
    CHECK(overlap_baseline(with_overlap, script) == Label::Inconsistent);
}

TEST_CASE("overlap_baseline: no deleted spans means always consistent") {
    std::vector<std::string> old_s = {"a", "b"};
    std::vector<std::string> new_s = {"a", "b", "c"};
    auto script = seqedit::compute_edit_script(old_s, new_s);   // keep + insert only
    auto comment = comment_seq("a b c words", lex::CommentType::Summary);
    CHECK(overlap_baseline(comment, script) == Label::Consistent);
}

TEST_CASE("overlap_baseline agrees with the brute-force oracle") {
    std::mt19937_64 rng(17);
    const char* words[] = {"alpha", "beta", "gamma", "delta", "eps"};
    for (int i = 0; i < 1000; ++i) {
        std::vector<std::string> a, b;
        size_t la = rng() % 12, lb = rng() % 12;
        for (size_t k = 0; k < la; ++k) a.push_back(words[rng() % 5]);
        for (size_t k = 0; k < lb; ++k) b.push_back(words[rng() % 5]);
        auto script = seqedit::compute_edit_script(a, b);

        std::string text;
        size_t lc = 1 + rng() % 6;
        for (size_t k = 0; k < lc; ++k) text += std::string(words[rng() % 5]) + " ";
        auto comment = comment_seq(text, lex::CommentType::Summary);
        CHECK(overlap_baseline(comment, script) == overlap_oracle(comment, script));
    }
}

TEST_CASE("return_prefix_heuristic: article stripping and type match") {
    auto shape = shape_of("public Set<UUID> nodeIds() { return new HashSet<>(ids); }");
    CHECK(return_prefix_heuristic(
              comment_seq("@return a set of node ids", lex::CommentType::Return), shape) ==
          Label::Consistent);
    CHECK(return_prefix_heuristic(
              comment_seq("@return array of node ids", lex::CommentType::Return), shape) ==
          Label::Inconsistent);
    // comment that is exactly the type subtokens
    CHECK(return_prefix_heuristic(comment_seq("@return set", lex::CommentType::Return),
                                  shape) == Label::Consistent);
}

TEST_CASE("return_prefix_heuristic: multi-subtoken and qualified types") {
    auto shape = shape_of("PropertyKey keyOf() { return k; }");
    CHECK(return_prefix_heuristic(
              comment_seq("@return the property key for this node",
                          lex::CommentType::Return),
              shape) == Label::Consistent);
    auto qualified = shape_of("java.util.Set<UUID> ids() { return s; }");
    CHECK(return_prefix_heuristic(
              comment_seq("@return The Set of ids", lex::CommentType::Return), qualified) ==
          Label::Consistent);
}

TEST_CASE("param_prefix_heuristic") {
    auto shape = shape_of("boolean hasProperty(PropertyKey key) { return true; }");
    CHECK(param_prefix_heuristic(
              comment_seq("@param key the key to check", lex::CommentType::Param, "key"),
              shape) == Label::Consistent);

    auto renamed = shape_of("boolean hasProperty(PropertyKey propKey) { return true; }");
    CHECK(param_prefix_heuristic(
              comment_seq("@param key the key to check", lex::CommentType::Param, "key"),
              renamed) == Label::Inconsistent);

    auto no_params = shape_of("boolean empty() { return true; }");
    CHECK(param_prefix_heuristic(
              comment_seq("@param key the key", lex::CommentType::Param, "key"),
              no_params) == Label::Inconsistent);

    // multi-subtoken parameter names match on the full name
    CHECK(param_prefix_heuristic(
              comment_seq("@param propKey the key", lex::CommentType::Param, "propKey"),
              renamed) == Label::Consistent);

    // leading articles and case do not matter
    CHECK(param_prefix_heuristic(
              comment_seq("@param key The Key to check", lex::CommentType::Param, "key"),
              shape) == Label::Consistent);
}

TEST_CASE("fit_tfidf: separable fixture classifies held-out example") {
    std::vector<Example> train;
    for (int i = 0; i < 20; ++i) {
        // positives: "array" in the comment while the code moved to a set
        train.push_back(make_example(
            lex::CommentType::Return, "@return array of items " + std::to_string(i),
            "int[] get() { return arr; }",
            "Set<Integer> get() { return set" + std::to_string(i) + "; }",
            Label::Inconsistent));
        train.push_back(make_example(
            lex::CommentType::Return, "@return count of items " + std::to_string(i),
            "int count() { return n; }",
            "int count() { return n + " + std::to_string(i) + "; }",
            Label::Consistent));
    }
    TfidfOptions options;
    options.seed = 3;
    TfidfModel model = fit_tfidf(train, Mode::JustInTime, options);

    Example held_out = make_example(lex::CommentType::Return, "@return array of items",
                                    "int[] get() { return arr; }",
                                    "Set<Integer> get() { return fresh; }",
                                    Label::Inconsistent);
    CHECK(predict_tfidf(model, held_out) == Label::Inconsistent);

    Example held_neg = make_example(lex::CommentType::Return, "@return count of items",
                                    "int count() { return n; }",
                                    "int count() { return n + 9; }", Label::Consistent);
    CHECK(predict_tfidf(model, held_neg) == Label::Consistent);
}

TEST_CASE("fit_tfidf: single-example train set fits its own label") {
    // repeated tokens clear the occurrence threshold inside one example
    Example only = make_example(lex::CommentType::Summary, "marker marker marker words",
                                "int f() { return marker; }",
                                "int f() { return marker + marker; }",
                                Label::Inconsistent);
    TfidfModel model = fit_tfidf({only}, Mode::PostHoc);
    CHECK(tfidf_margin(model, only) > 0.0);
    CHECK(predict_tfidf(model, only) == Label::Inconsistent);
}

TEST_CASE("fit_tfidf: out-of-vocabulary prediction falls back to the bias sign") {
    // hand-built model whose vocabulary misses everything in the example
    TfidfModel model;
    model.mode = Mode::PostHoc;
    model.comment_vocab = {{"absent", 0}};
    model.code_vocab = {{"missing", 1}};
    model.idf = {1.0, 1.0};
    model.weights = {5.0, -5.0};
    model.bias = -0.25;
    Example oov = make_example(lex::CommentType::Summary, "zzz qqq xxx",
                               "long g() { return 9L; }", "long g() { return 8L; }",
                               Label::Consistent);
    CHECK(tfidf_margin(model, oov) == doctest::Approx(model.bias));
    CHECK(predict_tfidf(model, oov) == Label::Consistent);

    model.bias = 0.25;
    CHECK(predict_tfidf(model, oov) == Label::Inconsistent);
}

TEST_CASE("fit_tfidf: idf monotonicity") {
    std::vector<Example> train;
    for (int i = 0; i < 10; ++i) {
        std::string rare = i == 0 ? " rare rare" : "";
        train.push_back(make_example(lex::CommentType::Summary,
                                     "common words" + rare,
                                     "int f() { return 0; }", "int f() { return 1; }",
                                     i % 2 ? Label::Inconsistent : Label::Consistent));
    }
    TfidfModel model = fit_tfidf(train, Mode::PostHoc);
    REQUIRE(model.comment_vocab.count("common"));
    REQUIRE(model.comment_vocab.count("rare"));
    // "common" appears in every document, "rare" in one: idf(common) < idf(rare)
    CHECK(model.idf[model.comment_vocab["common"]] <
          model.idf[model.comment_vocab["rare"]]);
}

TEST_CASE("fit_tfidf: empty vocabulary is an error") {
    Example a = make_example(lex::CommentType::Summary, "unique words",
                             "int f() { return 0; }", "int g() { return 1; }",
                             Label::Consistent);
    TfidfOptions options;
    options.min_count = 50;
    CHECK_THROWS_AS(fit_tfidf({a}, Mode::PostHoc, options), EmptyVocabulary);
}

TEST_CASE("embedding table parsing and errors") {
    std::istringstream good("3\nfoo 1 2 3\nbar 0.5 -0.5 0\n");
    EmbeddingTable table = parse_embedding_table(good, "test");
    CHECK(table.dim == 3);
    CHECK(table.vectors.at("foo") == std::vector<double>{1, 2, 3});
    CHECK(table.lookup("missing") == std::vector<double>(3, 0.0));

    std::istringstream bad("3\nfoo 1 2\n");
    CHECK_THROWS_AS(parse_embedding_table(bad, "test"), EmbeddingDimMismatch);

    std::istringstream with_unk("2\n<unk> 9 9\nfoo 1 2\n");
    EmbeddingTable t2 = parse_embedding_table(with_unk, "test");
    CHECK(t2.lookup("nope") == std::vector<double>{9, 9});
}

TEST_CASE("bow embedding: separable marker fixture reaches 0.95 accuracy") {
    std::istringstream table_stream(embedding_fixture_table());
    EmbeddingTable table = parse_embedding_table(table_stream, "fixture");

    auto make = [&](bool positive, int i) {
        // positives delete the marker token; negatives never contain it
        std::string m_old = positive
            ? "int f() { return marker + " + std::to_string(i % 4) + "; }"
            : "int f() { return y + " + std::to_string(i % 4) + "; }";
        std::string m_new = "int f() { return z + " + std::to_string((i + 1) % 4) + "; }";
        return make_example(lex::CommentType::Summary, "comment words here",
                            m_old, m_new,
                            positive ? Label::Inconsistent : Label::Consistent);
    };
    std::vector<Example> train, test;
    for (int i = 0; i < 100; ++i) train.push_back(make(i % 2 == 0, i));
    for (int i = 0; i < 40; ++i) test.push_back(make(i % 2 == 0, i + 1000));

    BowOptions options;
    options.seed = 5;
    options.epochs = 300;
    options.learning_rate = 0.1;
    BowEmbeddingModel model = fit_bow_embedding(train, table, Mode::JustInTime, options);

    int correct = 0;
    for (const Example& ex : test) {
        auto [label, prob] = predict_bow(model, ex);
        CHECK(prob > 0.0);
        CHECK(prob < 1.0);
        if (label == ex.label) ++correct;
    }
    CHECK(correct >= 38);   // >= 0.95

    // inference determinism
    auto [l1, p1] = predict_bow(model, test[0]);
    auto [l2, p2] = predict_bow(model, test[0]);
    CHECK(l1 == l2);
    CHECK(p1 == p2);
}

TEST_CASE("bow embedding: class probabilities sum to one") {
    std::istringstream table_stream(embedding_fixture_table());
    EmbeddingTable table = parse_embedding_table(table_stream, "fixture");
    std::vector<Example> train = {
        make_example(lex::CommentType::Summary, "comment words", "int f() { return x; }",
                     "int f() { return y; }", Label::Inconsistent),
        make_example(lex::CommentType::Summary, "words here", "int f() { return y; }",
                     "int f() { return z; }", Label::Consistent),
    };
    BowEmbeddingModel model = fit_bow_embedding(train, table, Mode::PostHoc);
    auto [label, p] = predict_bow(model, train[0]);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);   // the complementary class is 1 - p by construction
}

TEST_CASE("bow embedding: empty sequence is an error, never a silent zero") {
    std::istringstream table_stream(embedding_fixture_table());
    EmbeddingTable table = parse_embedding_table(table_stream, "fixture");
    std::vector<Example> train = {
        make_example(lex::CommentType::Summary, "words", "int f() { return x; }",
                     "int f() { return y; }", Label::Inconsistent),
        make_example(lex::CommentType::Summary, "here", "int f() { return z; }",
                     "int f() { return x; }", Label::Consistent),
    };
    BowEmbeddingModel model = fit_bow_embedding(train, table, Mode::PostHoc);
    Example empty_comment = train[0];
    empty_comment.comment_raw = "@@@";   // sigils only: no tokens survive
    CHECK_THROWS(predict_bow(model, empty_comment));
}
