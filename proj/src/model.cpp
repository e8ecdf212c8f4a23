#include "jitid/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "jitid/features.hpp"
#include "jitid/javadoc.hpp"

namespace jitid::model {

using nn::Tape;
using nn::Val;

Variant variant_from_string(std::string_view s) {
    if (s == "seq") return Variant::Seq;
    if (s == "graph") return Variant::Graph;
    if (s == "hybrid") return Variant::Hybrid;
    throw std::invalid_argument("unknown variant: " + std::string(s));
}

Setting setting_from_string(std::string_view s) {
    if (s == "posthoc") return Setting::PostHoc;
    if (s == "jit") return Setting::Jit;
    if (s == "jit-implicit") return Setting::JitImplicit;
    throw std::invalid_argument("unknown setting: " + std::string(s));
}

const char* to_string(Variant v) {
    switch (v) {
        case Variant::Seq: return "seq";
        case Variant::Graph: return "graph";
        case Variant::Hybrid: return "hybrid";
    }
    return "?";
}

const char* to_string(Setting s) {
    switch (s) {
        case Setting::PostHoc: return "posthoc";
        case Setting::Jit: return "jit";
        case Setting::JitImplicit: return "jit-implicit";
    }
    return "?";
}

void ModelConfig::validate() const {
    if (hidden_dim == 0 || embedding_dim == 0 || gru_layers == 0 || attention_heads == 0)
        throw std::invalid_argument("model dimensions must be positive");
    if (hidden_dim % attention_heads != 0)
        throw std::invalid_argument("hidden_dim must be divisible by attention_heads");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("dropout must be in [0, 1)");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["variant"] = model::to_string(variant);
    j["setting"] = model::to_string(setting);
    j["use_features"] = use_features;
    j["hidden_dim"] = hidden_dim;
    j["gru_layers"] = gru_layers;
    j["attention_heads"] = attention_heads;
    j["ggnn_steps"] = ggnn_steps;
    j["embedding_dim"] = embedding_dim;
    j["edit_embedding_dim"] = edit_embedding_dim;
    j["dropout"] = dropout;
    j["patience_epochs"] = patience_epochs;
    j["seed"] = seed;
    j["learning_rate"] = learning_rate;
    j["batch_size"] = batch_size;
    j["grad_clip"] = grad_clip;
    j["max_epochs"] = max_epochs;
    j["vocab_min_count"] = vocab_min_count;
    j["max_code_positions"] = max_code_positions;
    j["max_graph_nodes"] = max_graph_nodes;
    return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ModelConfig c;
    if (j.contains("variant")) c.variant = variant_from_string(j["variant"].get<std::string>());
    if (j.contains("setting")) c.setting = setting_from_string(j["setting"].get<std::string>());
    c.use_features = j.value("use_features", c.use_features);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.gru_layers = j.value("gru_layers", c.gru_layers);
    c.attention_heads = j.value("attention_heads", c.attention_heads);
    c.ggnn_steps = j.value("ggnn_steps", c.ggnn_steps);
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.edit_embedding_dim = j.value("edit_embedding_dim", c.edit_embedding_dim);
    c.dropout = j.value("dropout", c.dropout);
    c.patience_epochs = j.value("patience_epochs", c.patience_epochs);
    c.seed = j.value("seed", c.seed);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.vocab_min_count = j.value("vocab_min_count", c.vocab_min_count);
    c.max_code_positions = j.value("max_code_positions", c.max_code_positions);
    c.max_graph_nodes = j.value("max_graph_nodes", c.max_graph_nodes);
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// vocabulary
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> reserved = {
        "<unk>", "<KEEP>", "<INSERT>", "<DELETE>", "<REPLACE_OLD>", "<REPLACE_NEW>",
        // grammar categories used as node initial values, lower-cased
        "methoddeclaration", "formalparameters", "formalparameter", "type",
        "typearguments", "typeparameters", "annotation", "throws", "block",
        "returnstatement", "ifstatement", "whilestatement", "dostatement",
        "forstatement", "forcontrol", "switchstatement", "switchblock", "caselabel",
        "trystatement", "resourcespecification", "catchclause", "catchparameter",
        "finallyclause", "throwstatement", "breakstatement", "continuestatement",
        "synchronizedstatement", "assertstatement", "emptystatement",
        "variabledeclaration", "expressionstatement", "expression",
    };
    return reserved;
}

std::string lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return out;
}

}   // namespace

Vocabulary::Vocabulary() : Vocabulary(reserved_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

Vocabulary build_vocabulary(const std::vector<corpus::Example>& train,
                            const ModelConfig& config) {
    std::map<std::string, size_t> counts;
    for (const corpus::Example& ex : train) {
        try {
            auto seq = lex::tokenize_comment(
                ex.comment_raw, ex.comment_type,
                ex.comment_type == lex::CommentType::Param
                    ? std::optional<std::string>(corpus::param_name_of(ex))
                    : std::nullopt);
            for (const auto& sub : seq.subtokens) ++counts[sub.text];
        } catch (const lex::EmptyComment&) {
        }
        for (const std::string* src : {&ex.m_old_raw, &ex.m_new_raw}) {
            try {
                auto tokens = lex::tokenize_code(*src);
                for (const auto& sub : lex::code_subtokens(tokens)) ++counts[sub];
                for (const auto& tok : tokens) ++counts[lower(tok.text)];
            } catch (const lex::LexError&) {
            }
        }
    }
    std::vector<std::string> tokens = reserved_tokens();
    std::set<std::string> seen(tokens.begin(), tokens.end());
    for (const auto& [tok, n] : counts) {
        if (n < config.vocab_min_count || seen.count(tok)) continue;
        tokens.push_back(tok);
        seen.insert(tok);
    }
    return Vocabulary(std::move(tokens));
}

// ---------------------------------------------------------------------------
// preprocessing
// ---------------------------------------------------------------------------

namespace {

constexpr size_t kEditEmbeddings = 6;   // keep/insert/delete/replace_old/replace_new/move

size_t edit_row(astdiff::NodeEdit e) {
    switch (e) {
        case astdiff::NodeEdit::Keep: return 0;
        case astdiff::NodeEdit::Insert: return 1;
        case astdiff::NodeEdit::Delete: return 2;
        case astdiff::NodeEdit::ReplaceOld: return 3;
        case astdiff::NodeEdit::ReplaceNew: return 4;
        case astdiff::NodeEdit::Move: return 5;
    }
    return 0;
}

GraphInput graph_input(const astdiff::DiffAstGraph& graph, const Vocabulary& vocab,
                       const lex::CommentTokenSeq& comment, const ModelConfig& config,
                       bool* truncated) {
    GraphInput out;
    size_t n = graph.nodes.size();
    if (n > config.max_graph_nodes) {
        n = config.max_graph_nodes;
        *truncated = true;
    }
    out.node_tokens.reserve(n);
    out.node_edits.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        out.node_tokens.push_back(vocab.id(lower(graph.nodes[i].label)));
        out.node_edits.push_back(edit_row(graph.nodes[i].edit));
    }
    for (const auto& e : graph.edges) {
        if (static_cast<size_t>(e.src) >= n || static_cast<size_t>(e.dst) >= n) continue;
        out.edges[static_cast<size_t>(e.type)].emplace_back(e.src, e.dst);
    }
    if (config.use_features) {
        out.features = features::node_features(graph, comment);
        out.features.resize(n);
    }
    return out;
}

}   // namespace

ModelInput preprocess(const corpus::Example& ex, const ModelConfig& config,
                      const Vocabulary& vocab) {
    ModelInput input;
    input.label = ex.label;

    lex::CommentTokenSeq comment;
    try {
        comment = lex::tokenize_comment(
            ex.comment_raw, ex.comment_type,
            ex.comment_type == lex::CommentType::Param
                ? std::optional<std::string>(corpus::param_name_of(ex))
                : std::nullopt);
    } catch (const lex::EmptyComment& e) {
        throw PreprocessError("comment", e.what());
    } catch (const std::invalid_argument& e) {
        throw PreprocessError("comment", e.what());
    }
    for (const auto& sub : comment.subtokens) input.comment_ids.push_back(vocab.id(sub.text));

    std::vector<lex::CodeToken> old_tokens, new_tokens;
    try {
        old_tokens = lex::tokenize_code(ex.m_old_raw);
        new_tokens = lex::tokenize_code(ex.m_new_raw);
    } catch (const lex::LexError& e) {
        throw PreprocessError("lex", e.what());
    }

    const bool need_script =
        config.setting == Setting::Jit || config.use_features;
    seqedit::EditScript script;
    if (need_script) script = seqedit::method_edit_script(old_tokens, new_tokens);

    auto truncate_stream = [&](std::vector<size_t>& ids,
                               std::vector<std::vector<double>>& feats) {
        if (ids.size() > config.max_code_positions) {
            ids.resize(config.max_code_positions);
            input.truncated = true;
        }
        if (!feats.empty() && feats.size() > ids.size()) feats.resize(ids.size());
    };

    if (config.variant != Variant::Graph) {
        auto push_stream = [&](const std::vector<std::string>& tokens,
                               std::vector<std::vector<double>> feats) {
            std::vector<size_t> ids;
            ids.reserve(tokens.size());
            for (const auto& t : tokens) ids.push_back(vocab.id(t));
            truncate_stream(ids, feats);
            input.seq_streams.push_back(std::move(ids));
            input.seq_features.push_back(std::move(feats));
        };
        switch (config.setting) {
            case Setting::PostHoc:
                push_stream(lex::code_subtokens(new_tokens),
                            config.use_features
                                ? features::plain_sequence_features(new_tokens, comment)
                                : std::vector<std::vector<double>>{});
                break;
            case Setting::Jit:
                push_stream(seqedit::linearize(script),
                            config.use_features
                                ? features::sequence_features(script, old_tokens,
                                                              new_tokens, comment)
                                : std::vector<std::vector<double>>{});
                break;
            case Setting::JitImplicit:
                push_stream(lex::code_subtokens(old_tokens),
                            config.use_features
                                ? features::plain_sequence_features(old_tokens, comment)
                                : std::vector<std::vector<double>>{});
                push_stream(lex::code_subtokens(new_tokens),
                            config.use_features
                                ? features::plain_sequence_features(new_tokens, comment)
                                : std::vector<std::vector<double>>{});
                break;
        }
        for (const auto& stream : input.seq_streams)
            if (stream.empty()) throw PreprocessError("lex", "empty code token stream");
    }

    if (config.variant != Variant::Seq) {
        astdiff::AstTree t_old, t_new;
        try {
            t_old = astdiff::parse_method_tokens(old_tokens);
            t_new = astdiff::parse_method_tokens(new_tokens);
        } catch (const astdiff::ParseError& e) {
            throw PreprocessError("astdiff", e.what());
        }
        switch (config.setting) {
            case Setting::PostHoc:
                input.graphs.push_back(graph_input(
                    astdiff::add_subtoken_nodes(astdiff::plain_graph(t_new)), vocab,
                    comment, config, &input.truncated));
                break;
            case Setting::Jit:
                input.graphs.push_back(graph_input(
                    astdiff::add_subtoken_nodes(astdiff::diff_asts(t_old, t_new)), vocab,
                    comment, config, &input.truncated));
                break;
            case Setting::JitImplicit:
                input.graphs.push_back(graph_input(
                    astdiff::add_subtoken_nodes(astdiff::plain_graph(t_old)), vocab,
                    comment, config, &input.truncated));
                input.graphs.push_back(graph_input(
                    astdiff::add_subtoken_nodes(astdiff::plain_graph(t_new)), vocab,
                    comment, config, &input.truncated));
                break;
        }
        for (const auto& g : input.graphs)
            if (g.node_tokens.empty()) throw PreprocessError("astdiff", "empty graph");
    }

    if (config.use_features) {
        astdiff::MethodShape shape;
        try {
            shape = astdiff::method_shape(astdiff::parse_method_tokens(new_tokens));
        } catch (const astdiff::ParseError& e) {
            throw PreprocessError("astdiff", e.what());
        }
        input.comment_features = features::comment_features(
            comment, lex::code_subtokens(old_tokens), lex::code_subtokens(new_tokens),
            script, shape);
    }
    return input;
}

// ---------------------------------------------------------------------------
// detector
// ---------------------------------------------------------------------------

namespace {

struct GruNames {
    std::string Wz, Wr, Wn, Uz, Ur, Un, bz, br, bn;
    GruNames(const std::string& prefix) {
        Wz = prefix + ".Wz"; Wr = prefix + ".Wr"; Wn = prefix + ".Wn";
        Uz = prefix + ".Uz"; Ur = prefix + ".Ur"; Un = prefix + ".Un";
        bz = prefix + ".bz"; br = prefix + ".br"; bn = prefix + ".bn";
    }
};

}   // namespace

Detector::Detector(ModelConfig config, Vocabulary vocab)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
    config_.validate();
    create_parameters();
}

void Detector::create_parameters() {
    std::mt19937_64 rng(config_.seed);
    const size_t h = config_.hidden_dim;
    const size_t emb = config_.embedding_dim;
    const double escale = 0.08;
    const double hscale = 1.0 / std::sqrt(static_cast<double>(h));

    params_.create("embedding", vocab_.size(), emb, rng, escale);

    auto create_gru_stack = [&](const std::string& enc, size_t input_dim) {
        for (size_t layer = 0; layer < config_.gru_layers; ++layer) {
            size_t in = layer == 0 ? input_dim : 2 * h;
            for (const char* dir : {"fwd", "bwd"}) {
                GruNames names(enc + ".l" + std::to_string(layer) + "." + dir);
                params_.create(names.Wz, h, in, rng, hscale);
                params_.create(names.Wr, h, in, rng, hscale);
                params_.create(names.Wn, h, in, rng, hscale);
                params_.create(names.Uz, h, h, rng, hscale);
                params_.create(names.Ur, h, h, rng, hscale);
                params_.create(names.Un, h, h, rng, hscale);
                params_.create_zero(names.bz, 1, h);
                params_.create_zero(names.br, 1, h);
                params_.create_zero(names.bn, 1, h);
            }
        }
        params_.create(enc + ".proj.W", h, 2 * h, rng, hscale);
        params_.create_zero(enc + ".proj.b", 1, h);
    };

    auto create_attention = [&](const std::string& name) {
        for (const char* w : {"Wq", "Wk", "Wv", "Wo"})
            params_.create(name + "." + w, h, h, rng, hscale);
        for (const char* b : {"bq", "bk", "bv", "bo"})
            params_.create_zero(name + "." + b, 1, h);
    };

    create_gru_stack("comment", emb);
    create_attention("self_attn");

    const size_t seq_feat = config_.use_features ? features::kSeqFeatureWidth : 0;
    const size_t node_feat = config_.use_features ? features::kNodeFeatureWidth : 0;

    size_t cross_inputs = 0;
    if (config_.variant != Variant::Graph) {
        create_gru_stack("code", emb + seq_feat);
        create_attention("cross_seq");
        cross_inputs += config_.setting == Setting::JitImplicit ? 2 : 1;
    }
    if (config_.variant != Variant::Seq) {
        params_.create("edit_embedding", kEditEmbeddings, config_.edit_embedding_dim, rng,
                       escale);
        size_t init_in = emb + node_feat +
                         (config_.setting == Setting::Jit ? config_.edit_embedding_dim : 0);
        params_.create("graph.init.W", h, init_in, rng, hscale);
        params_.create_zero("graph.init.b", 1, h);
        for (size_t e = 0; e < 7; ++e) {
            params_.create("graph.edge" + std::to_string(e) + ".W", h, h, rng, hscale);
            params_.create_zero("graph.edge" + std::to_string(e) + ".b", 1, h);
        }
        GruNames cell("graph.cell");
        params_.create(cell.Wz, h, h, rng, hscale);
        params_.create(cell.Wr, h, h, rng, hscale);
        params_.create(cell.Wn, h, h, rng, hscale);
        params_.create(cell.Uz, h, h, rng, hscale);
        params_.create(cell.Ur, h, h, rng, hscale);
        params_.create(cell.Un, h, h, rng, hscale);
        params_.create_zero(cell.bz, 1, h);
        params_.create_zero(cell.br, 1, h);
        params_.create_zero(cell.bn, 1, h);
        create_attention("cross_graph");
        cross_inputs += config_.setting == Setting::JitImplicit ? 2 : 1;
    }
    if (cross_inputs > 1) {
        params_.create("cross_combine.W", h, cross_inputs * h, rng, hscale);
        params_.create_zero("cross_combine.b", 1, h);
    }

    const size_t comment_feat = config_.use_features ? features::kCommentFeatureWidth : 0;
    params_.create("fusion_in.W", h, 3 * h + comment_feat, rng, hscale);
    params_.create_zero("fusion_in.b", 1, h);
    create_gru_stack("fusion", h);
    params_.create("fc.W", h, 2 * h, rng, hscale);
    params_.create_zero("fc.b", 1, h);
    params_.create("out.W", 2, h, rng, hscale);
    params_.create_zero("out.b", 1, 2);
}

Val Detector::bigru(Tape& tape, const std::string& prefix, Val inputs, Val* final_fwd,
                    Val* final_bwd) const {
    const size_t h = config_.hidden_dim;
    const size_t n = tape.value(inputs).rows;
    ParameterSet& P = const_cast<ParameterSet&>(params_);

    Val layer_in = inputs;
    Val last_fwd{}, first_bwd{};
    for (size_t layer = 0; layer < config_.gru_layers; ++layer) {
        std::vector<Val> fwd(n), bwd(n);
        for (const char* dir : {"fwd", "bwd"}) {
            GruNames names(prefix + ".l" + std::to_string(layer) + "." + dir);
            Val Wz = tape.param(P.at(names.Wz)), Wr = tape.param(P.at(names.Wr)),
                Wn = tape.param(P.at(names.Wn)), Uz = tape.param(P.at(names.Uz)),
                Ur = tape.param(P.at(names.Ur)), Un = tape.param(P.at(names.Un)),
                bz = tape.param(P.at(names.bz)), br = tape.param(P.at(names.br)),
                bn = tape.param(P.at(names.bn));
            bool forward = std::string_view(dir) == "fwd";
            Val hcur = tape.zeros(1, h);
            Val one = tape.ones(1, h);
            for (size_t step = 0; step < n; ++step) {
                size_t t = forward ? step : n - 1 - step;
                Val x = tape.row(layer_in, t);
                Val z = tape.sigmoid(tape.add(
                    tape.add(tape.matmul_nt(x, Wz), tape.matmul_nt(hcur, Uz)), bz));
                Val r = tape.sigmoid(tape.add(
                    tape.add(tape.matmul_nt(x, Wr), tape.matmul_nt(hcur, Ur)), br));
                Val cand = tape.tanh(tape.add(
                    tape.add(tape.matmul_nt(x, Wn), tape.mul(r, tape.matmul_nt(hcur, Un))),
                    bn));
                hcur = tape.add(tape.mul(tape.sub(one, z), cand), tape.mul(z, hcur));
                (forward ? fwd : bwd)[t] = hcur;
            }
            if (layer + 1 == config_.gru_layers) {
                if (forward) last_fwd = hcur;
                else first_bwd = hcur;
            }
        }
        std::vector<Val> combined(n);
        for (size_t t = 0; t < n; ++t) combined[t] = tape.concat_cols({fwd[t], bwd[t]});
        Val stacked = tape.stack_rows(combined);
        if (layer + 1 < config_.gru_layers)
            stacked = tape.dropout(stacked, config_.dropout);
        layer_in = stacked;
    }
    if (final_fwd) *final_fwd = last_fwd;
    if (final_bwd) *final_bwd = first_bwd;

    Val projected = tape.add(tape.matmul_nt(layer_in, tape.param(P.at(prefix + ".proj.W"))),
                             tape.param(P.at(prefix + ".proj.b")));
    return tape.dropout(projected, config_.dropout);
}

AttentionOut Detector::attention(Tape& tape, const std::string& prefix, Val queries,
                                 Val keys_values) const {
    ParameterSet& P = const_cast<ParameterSet&>(params_);
    const size_t h = config_.hidden_dim;
    const size_t heads = config_.attention_heads;
    const size_t dk = h / heads;

    Val Q = tape.add(tape.matmul_nt(queries, tape.param(P.at(prefix + ".Wq"))),
                     tape.param(P.at(prefix + ".bq")));
    Val K = tape.add(tape.matmul_nt(keys_values, tape.param(P.at(prefix + ".Wk"))),
                     tape.param(P.at(prefix + ".bk")));
    Val V = tape.add(tape.matmul_nt(keys_values, tape.param(P.at(prefix + ".Wv"))),
                     tape.param(P.at(prefix + ".bv")));

    AttentionOut out;
    std::vector<Val> contexts;
    for (size_t head = 0; head < heads; ++head) {
        Val Qh = tape.slice_cols(Q, head * dk, dk);
        Val Kh = tape.slice_cols(K, head * dk, dk);
        Val Vh = tape.slice_cols(V, head * dk, dk);
        Val scores = tape.scale(tape.matmul_nt(Qh, Kh),
                                1.0 / std::sqrt(static_cast<double>(dk)));
        Val weights = tape.softmax_rows(scores);
        out.head_weights.push_back(weights);
        contexts.push_back(tape.matmul(weights, Vh));
    }
    Val merged = heads == 1 ? contexts[0] : tape.concat_cols(contexts);
    out.context = tape.add(tape.matmul_nt(merged, tape.param(P.at(prefix + ".Wo"))),
                           tape.param(P.at(prefix + ".bo")));
    return out;
}

Val Detector::encode_comment(Tape& tape, const ModelInput& input) const {
    if (input.comment_ids.empty())
        throw PreprocessError("comment", "empty comment sequence");
    ParameterSet& P = const_cast<ParameterSet&>(params_);
    nn::Parameter& E = P.at("embedding");
    std::vector<Val> rows;
    rows.reserve(input.comment_ids.size());
    for (size_t id : input.comment_ids) rows.push_back(tape.embedding_row(E, id));
    Val X = tape.stack_rows(rows);
    return bigru(tape, "comment", X, nullptr, nullptr);
}

AttentionOut Detector::self_attend(Tape& tape, Val comment_states) const {
    return attention(tape, "self_attn", comment_states, comment_states);
}

std::vector<Val> Detector::encode_code_sequence(Tape& tape, const ModelInput& input) const {
    std::vector<Val> out;
    ParameterSet& P = const_cast<ParameterSet&>(params_);
    nn::Parameter& E = P.at("embedding");
    for (size_t s = 0; s < input.seq_streams.size(); ++s) {
        const auto& stream = input.seq_streams[s];
        if (stream.empty()) throw PreprocessError("lex", "empty code sequence");
        std::vector<Val> rows;
        rows.reserve(stream.size());
        for (size_t t = 0; t < stream.size(); ++t) {
            Val e = tape.embedding_row(E, stream[t]);
            if (config_.use_features && s < input.seq_features.size() &&
                t < input.seq_features[s].size())
                e = tape.concat_cols({e, tape.input_row(input.seq_features[s][t])});
            rows.push_back(e);
        }
        out.push_back(bigru(tape, "code", tape.stack_rows(rows), nullptr, nullptr));
    }
    return out;
}

std::vector<Val> Detector::encode_code_graph(Tape& tape, const ModelInput& input) const {
    std::vector<Val> out;
    ParameterSet& P = const_cast<ParameterSet&>(params_);
    nn::Parameter& E = P.at("embedding");
    const size_t h = config_.hidden_dim;

    for (const GraphInput& graph : input.graphs) {
        const size_t n = graph.node_tokens.size();
        if (n == 0) throw PreprocessError("astdiff", "empty graph");
        std::vector<Val> rows;
        rows.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            Val e = tape.embedding_row(E, graph.node_tokens[i]);
            if (config_.setting == Setting::Jit)
                e = tape.concat_cols(
                    {e, tape.embedding_row(P.at("edit_embedding"), graph.node_edits[i])});
            if (config_.use_features && i < graph.features.size())
                e = tape.concat_cols({e, tape.input_row(graph.features[i])});
            rows.push_back(e);
        }
        Val H = tape.add(tape.matmul_nt(tape.stack_rows(rows), tape.param(P.at("graph.init.W"))),
                         tape.param(P.at("graph.init.b")));

        GruNames cell("graph.cell");
        Val Wz = tape.param(P.at(cell.Wz)), Wr = tape.param(P.at(cell.Wr)),
            Wn = tape.param(P.at(cell.Wn)), Uz = tape.param(P.at(cell.Uz)),
            Ur = tape.param(P.at(cell.Ur)), Un = tape.param(P.at(cell.Un)),
            bz = tape.param(P.at(cell.bz)), br = tape.param(P.at(cell.br)),
            bn = tape.param(P.at(cell.bn));
        Val one = tape.ones(n, h);

        for (size_t step = 0; step < config_.ggnn_steps; ++step) {
            Val message = tape.zeros(n, h);
            for (size_t e = 0; e < 7; ++e) {
                if (graph.edges[e].empty()) continue;
                Val transformed = tape.add(
                    tape.matmul_nt(H, tape.param(P.at("graph.edge" + std::to_string(e) + ".W"))),
                    tape.param(P.at("graph.edge" + std::to_string(e) + ".b")));
                message = tape.add(message, tape.edge_scatter(transformed, graph.edges[e], n));
            }
            Val z = tape.sigmoid(tape.add(
                tape.add(tape.matmul_nt(message, Wz), tape.matmul_nt(H, Uz)), bz));
            Val r = tape.sigmoid(tape.add(
                tape.add(tape.matmul_nt(message, Wr), tape.matmul_nt(H, Ur)), br));
            Val cand = tape.tanh(tape.add(
                tape.add(tape.matmul_nt(message, Wn), tape.mul(r, tape.matmul_nt(H, Un))),
                bn));
            H = tape.add(tape.mul(tape.sub(one, z), cand), tape.mul(z, H));
        }
        out.push_back(tape.dropout(H, config_.dropout));
    }
    return out;
}

AttentionOut Detector::cross_attend(Tape& tape, Val comment_states,
                                    const std::vector<Val>& code_states,
                                    const std::vector<bool>& is_graph_state) const {
    if (code_states.empty())
        throw std::invalid_argument("cross attention needs code states");
    ParameterSet& P = const_cast<ParameterSet&>(params_);
    AttentionOut out;
    std::vector<Val> contexts;
    for (size_t i = 0; i < code_states.size(); ++i) {
        const std::string prefix = is_graph_state[i] ? "cross_graph" : "cross_seq";
        AttentionOut one = attention(tape, prefix, comment_states, code_states[i]);
        for (Val w : one.head_weights) out.head_weights.push_back(w);
        contexts.push_back(one.context);
    }
    if (contexts.size() == 1) {
        out.context = contexts[0];
    } else {
        Val merged = tape.concat_cols(contexts);
        out.context = tape.add(tape.matmul_nt(merged, tape.param(P.at("cross_combine.W"))),
                               tape.param(P.at("cross_combine.b")));
    }
    return out;
}

Val Detector::fuse_and_classify(Tape& tape, const ModelInput& input, Val comment_states,
                                Val self_ctx, Val cross_ctx) const {
    ParameterSet& P = const_cast<ParameterSet&>(params_);
    std::vector<Val> parts = {comment_states, self_ctx, cross_ctx};
    if (config_.use_features) {
        const size_t n = tape.value(comment_states).rows;
        nn::Tensor feats(n, features::kCommentFeatureWidth);
        for (size_t i = 0; i < n && i < input.comment_features.size(); ++i)
            std::copy(input.comment_features[i].begin(), input.comment_features[i].end(),
                      feats.data.begin() + static_cast<long>(i * feats.cols));
        parts.push_back(tape.input(feats));
    }
    Val fused = tape.concat_cols(parts);
    Val projected = tape.add(tape.matmul_nt(fused, tape.param(P.at("fusion_in.W"))),
                             tape.param(P.at("fusion_in.b")));
    projected = tape.dropout(projected, config_.dropout);

    Val final_fwd{}, final_bwd{};
    bigru(tape, "fusion", projected, &final_fwd, &final_bwd);
    Val rep = tape.concat_cols({final_fwd, final_bwd});
    Val hidden = tape.tanh(tape.add(tape.matmul_nt(rep, tape.param(P.at("fc.W"))),
                                    tape.param(P.at("fc.b"))));
    hidden = tape.dropout(hidden, config_.dropout);
    return tape.add(tape.matmul_nt(hidden, tape.param(P.at("out.W"))),
                    tape.param(P.at("out.b")));
}

Val Detector::forward(Tape& tape, const ModelInput& input) const {
    Val comment_states = encode_comment(tape, input);
    AttentionOut self_out = self_attend(tape, comment_states);

    std::vector<Val> code_states;
    std::vector<bool> is_graph;
    if (config_.variant != Variant::Graph) {
        for (Val v : encode_code_sequence(tape, input)) {
            code_states.push_back(v);
            is_graph.push_back(false);
        }
    }
    if (config_.variant != Variant::Seq) {
        for (Val v : encode_code_graph(tape, input)) {
            code_states.push_back(v);
            is_graph.push_back(true);
        }
    }
    AttentionOut cross_out = cross_attend(tape, comment_states, code_states, is_graph);
    return fuse_and_classify(tape, input, comment_states, self_out.context,
                             cross_out.context);
}

double Detector::probability(const ModelInput& input) const {
    Tape tape(false, 0);
    Val logits = forward(tape, input);
    const nn::Tensor& L = tape.value(logits);
    double mx = std::max(L.data[0], L.data[1]);
    double e0 = std::exp(L.data[0] - mx), e1 = std::exp(L.data[1] - mx);
    return e1 / (e0 + e1);
}

double Detector::loss_and_backward(Tape& tape, const ModelInput& input) const {
    Val logits = forward(tape, input);
    size_t target = input.label == corpus::Label::Inconsistent ? 1 : 0;
    Val loss = tape.nll_from_logits(logits, target);
    tape.backward(loss);
    return tape.value(loss).data[0];
}

void Detector::init_embeddings(const baselines::EmbeddingTable& table) {
    if (table.dim != config_.embedding_dim)
        throw baselines::EmbeddingDimMismatch(
            "pretrained table dimension " + std::to_string(table.dim) +
            " does not match embedding_dim " + std::to_string(config_.embedding_dim));
    nn::Parameter& E = params_.at("embedding");
    const auto& tokens = vocab_.tokens();
    for (size_t i = 0; i < tokens.size(); ++i) {
        auto it = table.vectors.find(tokens[i]);
        if (it == table.vectors.end()) continue;
        std::copy(it->second.begin(), it->second.end(),
                  E.value.data.begin() + static_cast<long>(i * E.value.cols));
    }
}

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

void Detector::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "jitid-checkpoint";
    j["version"] = 1;
    j["config"] = nlohmann::json::parse(config_.to_json());
    j["vocab"] = vocab_.tokens();
    nlohmann::json params = nlohmann::json::object();
    for (const auto& p : params_.all()) {
        params[p->name] = {{"rows", p->value.rows},
                           {"cols", p->value.cols},
                           {"data", p->value.data}};
    }
    j["params"] = std::move(params);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump();
}

Detector Detector::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.value("format", "") != "jitid-checkpoint")
        throw std::runtime_error(path + " is not a checkpoint file");
    ModelConfig config = ModelConfig::from_json(j.at("config").dump());
    Vocabulary vocab(j.at("vocab").get<std::vector<std::string>>());
    Detector detector(config, std::move(vocab));
    for (const auto& p : detector.params_.all()) {
        const auto& pj = j.at("params").at(p->name);
        if (pj.at("rows").get<size_t>() != p->value.rows ||
            pj.at("cols").get<size_t>() != p->value.cols)
            throw std::runtime_error("checkpoint shape mismatch for " + p->name);
        p->value.data = pj.at("data").get<std::vector<double>>();
    }
    return detector;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

namespace {

struct Prepared {
    std::vector<ModelInput> inputs;
    std::vector<corpus::Label> golds;
    size_t skipped = 0;
};

Prepared prepare(const std::vector<corpus::Example>& examples, const ModelConfig& config,
                 const Vocabulary& vocab) {
    Prepared out;
    for (const corpus::Example& ex : examples) {
        try {
            out.inputs.push_back(preprocess(ex, config, vocab));
            out.golds.push_back(ex.label);
        } catch (const PreprocessError&) {
            ++out.skipped;
        }
    }
    return out;
}

}   // namespace

TrainResult train(const ModelConfig& config, const corpus::DatasetSplit& splits,
                  const baselines::EmbeddingTable* pretrained) {
    config.validate();
    if (splits.train.empty()) throw std::invalid_argument("empty training split");

    Vocabulary vocab = build_vocabulary(splits.train, config);
    Detector detector(config, std::move(vocab));
    if (pretrained) detector.init_embeddings(*pretrained);

    Prepared train_set = prepare(splits.train, config, detector.vocab());
    Prepared valid_set = prepare(splits.valid, config, detector.vocab());
    if (train_set.inputs.empty())
        throw std::invalid_argument("no training example survived preprocessing");
    if (valid_set.inputs.empty())
        throw std::invalid_argument("no validation example survived preprocessing");

    TrainResult result{std::move(detector), {}, 0, -1.0, train_set.skipped,
                       valid_set.skipped, 0};
    for (const ModelInput& input : train_set.inputs)
        if (input.truncated) ++result.truncated_train;
    Detector& active = result.detector;

    std::mt19937_64 rng(config.seed ^ 0x5851f42d4c957f2dull);
    std::vector<size_t> order(train_set.inputs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    nn::ParameterStore best = active.params().clone();
    size_t patience = 0;
    int64_t adam_t = 0;
    Tape tape(true, 0);

    for (size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        size_t batch_count = 0;
        active.params().zero_grads();
        for (size_t i = 0; i < order.size(); ++i) {
            tape.reset(true, rng());
            double loss = active.loss_and_backward(tape, train_set.inputs[order[i]]);
            if (!std::isfinite(loss))
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch));
            epoch_loss += loss;
            ++batch_count;
            if (batch_count == config.batch_size || i + 1 == order.size()) {
                for (auto& p : active.params().all())
                    for (double& g : p->grad.data) g /= static_cast<double>(batch_count);
                active.params().clip_gradients(config.grad_clip);
                active.params().adam_step(config.learning_rate, 0.9, 0.999, 1e-8, ++adam_t);
                active.params().zero_grads();
                batch_count = 0;
            }
        }

        std::vector<corpus::Label> preds;
        preds.reserve(valid_set.inputs.size());
        for (const ModelInput& input : valid_set.inputs) {
            double p = active.probability(input);
            preds.push_back(p >= 0.5 ? corpus::Label::Inconsistent
                                     : corpus::Label::Consistent);
        }
        TrainLogEntry entry;
        entry.epoch = epoch;
        entry.train_loss = epoch_loss / static_cast<double>(train_set.inputs.size());
        entry.valid = eval::compute_metrics(preds, valid_set.golds);
        result.log.push_back(entry);

        if (entry.valid.f1 > result.best_valid_f1) {
            result.best_valid_f1 = entry.valid.f1;
            result.best_epoch = epoch;
            best = active.params().clone();
            patience = 0;
        } else if (++patience >= config.patience_epochs) {
            break;
        }
    }
    active.params().restore_from(best);
    return result;
}

std::pair<corpus::Label, double> predict(const Detector& detector,
                                         const corpus::Example& ex) {
    ModelInput input = preprocess(ex, detector.config(), detector.vocab());
    double p = detector.probability(input);
    return {p >= 0.5 ? corpus::Label::Inconsistent : corpus::Label::Consistent, p};
}

}   // namespace jitid::model
