#ifndef JITID_MODEL_HPP
#define JITID_MODEL_HPP

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "jitid/baselines.hpp"
#include "jitid/corpus.hpp"
#include "jitid/eval.hpp"
#include "jitid/tensor.hpp"

namespace jitid::model {

enum class Variant { Seq, Graph, Hybrid };
enum class Setting { PostHoc, Jit, JitImplicit };

Variant variant_from_string(std::string_view s);
Setting setting_from_string(std::string_view s);
const char* to_string(Variant v);
const char* to_string(Setting s);

struct ModelConfig {
    Variant variant = Variant::Seq;
    Setting setting = Setting::Jit;
    bool use_features = false;
    size_t hidden_dim = 64;
    size_t gru_layers = 2;
    size_t attention_heads = 4;
    size_t ggnn_steps = 8;
    size_t embedding_dim = 64;
    size_t edit_embedding_dim = 8;
    double dropout = 0.6;
    size_t patience_epochs = 10;
    uint64_t seed = 0;
    // optimizer
    double learning_rate = 1e-3;
    size_t batch_size = 32;
    double grad_clip = 5.0;
    size_t max_epochs = 100;
    // preprocessing
    size_t vocab_min_count = 2;
    size_t max_code_positions = 200;
    size_t max_graph_nodes = 400;

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

/** Shared comment/code subtoken vocabulary; id 0 is <unk>. */
class Vocabulary {
public:
    Vocabulary();
    explicit Vocabulary(std::vector<std::string> tokens);

    size_t id(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? 0 : it->second;
    }
    size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, size_t> index_;
};

Vocabulary build_vocabulary(const std::vector<corpus::Example>& train,
                            const ModelConfig& config);

class PreprocessError : public std::runtime_error {
public:
    PreprocessError(std::string stage, const std::string& what)
        : std::runtime_error(what), stage(std::move(stage)) {}
    std::string stage;
};

class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct GraphInput {
    std::vector<size_t> node_tokens;   // vocabulary ids
    std::vector<size_t> node_edits;    // edit-embedding rows
    std::array<std::vector<std::pair<int, int>>, 7> edges;   // by EdgeType
    std::vector<std::vector<double>> features;
};

struct ModelInput {
    std::vector<size_t> comment_ids;
    std::vector<std::vector<double>> comment_features;
    std::vector<std::vector<size_t>> seq_streams;
    std::vector<std::vector<std::vector<double>>> seq_features;
    std::vector<GraphInput> graphs;
    bool truncated = false;
    corpus::Label label = corpus::Label::Consistent;
};

ModelInput preprocess(const corpus::Example& ex, const ModelConfig& config,
                      const Vocabulary& vocab);

/** Per-module attention output with the head distributions kept around for
 *  inspection. */
struct AttentionOut {
    nn::Val context;                      // {n, hidden}
    std::vector<nn::Val> head_weights;    // each {n, m}, rows sum to 1
};

using ParameterSet = nn::ParameterStore;

/** The neural detector: comment BiGRU + self-attention, sequence/AST code
 *  encoders, cross-attention, fusion BiGRU and classifier head. */
class Detector {
public:
    Detector(ModelConfig config, Vocabulary vocab);

    const ModelConfig& config() const { return config_; }
    const Vocabulary& vocab() const { return vocab_; }
    ParameterSet& params() { return params_; }
    const ParameterSet& params() const { return params_; }

    // forward stages (exposed for the stage-level contracts)
    nn::Val encode_comment(nn::Tape& tape, const ModelInput& input) const;
    AttentionOut self_attend(nn::Tape& tape, nn::Val comment_states) const;
    std::vector<nn::Val> encode_code_sequence(nn::Tape& tape, const ModelInput& input) const;
    std::vector<nn::Val> encode_code_graph(nn::Tape& tape, const ModelInput& input) const;
    AttentionOut cross_attend(nn::Tape& tape, nn::Val comment_states,
                              const std::vector<nn::Val>& code_states,
                              const std::vector<bool>& is_graph_state) const;
    nn::Val fuse_and_classify(nn::Tape& tape, const ModelInput& input,
                              nn::Val comment_states, nn::Val self_ctx,
                              nn::Val cross_ctx) const;

    /** Full forward pass; returns the logits row {1,2}. */
    nn::Val forward(nn::Tape& tape, const ModelInput& input) const;

    /** P(inconsistent) at inference (dropout off). */
    double probability(const ModelInput& input) const;

    /** Builds the NLL loss against input.label and runs backward. */
    double loss_and_backward(nn::Tape& tape, const ModelInput& input) const;

    void init_embeddings(const baselines::EmbeddingTable& table);

    void save(const std::string& path) const;
    static Detector load(const std::string& path);

private:
    ModelConfig config_;
    Vocabulary vocab_;
    ParameterSet params_;

    void create_parameters();
    nn::Val bigru(nn::Tape& tape, const std::string& prefix, nn::Val inputs,
                  nn::Val* final_fwd, nn::Val* final_bwd) const;
    AttentionOut attention(nn::Tape& tape, const std::string& prefix, nn::Val queries,
                           nn::Val keys_values) const;
};

struct TrainLogEntry {
    size_t epoch = 0;
    double train_loss = 0.0;
    eval::MetricsReport valid;
};

struct TrainResult {
    Detector detector;
    std::vector<TrainLogEntry> log;
    size_t best_epoch = 0;
    double best_valid_f1 = 0.0;
    size_t skipped_train = 0;
    size_t skipped_valid = 0;
    size_t truncated_train = 0;   // inputs clipped at the position/node caps
};

/** Trains on the split's train partition with early stopping on validation
 *  F1; returns the best-validation parameters. Fully seeded. */
TrainResult train(const ModelConfig& config, const corpus::DatasetSplit& splits,
                  const baselines::EmbeddingTable* pretrained = nullptr);

/** Label with probability; >= 0.5 flags inconsistent. */
std::pair<corpus::Label, double> predict(const Detector& detector,
                                         const corpus::Example& ex);

}   // namespace jitid::model

#endif
