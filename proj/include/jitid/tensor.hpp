#ifndef JITID_TENSOR_HPP
#define JITID_TENSOR_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace jitid::nn {

/** Dense row-major matrix of doubles; vectors are single-row matrices. */
struct Tensor {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }
    size_t size() const { return rows * cols; }
};

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    // adam state
    Tensor m;
    Tensor v;
};

/** Named, ordered collection of trainable tensors. */
class ParameterStore {
public:
    Parameter& create(const std::string& name, size_t rows, size_t cols,
                      std::mt19937_64& rng, double scale);
    Parameter& create_zero(const std::string& name, size_t rows, size_t cols);
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;

    std::vector<std::unique_ptr<Parameter>>& all() { return params_; }
    const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }

    void zero_grads();
    /** Global-norm gradient clipping; returns the pre-clip norm. */
    double clip_gradients(double max_norm);
    void adam_step(double lr, double beta1, double beta2, double eps, int64_t t);

    /** Deep copy used for best-validation snapshots. */
    ParameterStore clone() const;
    void restore_from(const ParameterStore& snapshot);

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::map<std::string, Parameter*> by_name_;
};

struct Val {
    int32_t node = -1;
    bool valid() const { return node >= 0; }
};

/** Reverse-mode tape over small dense tensors. One tape per example; reuse
 *  the instance to keep its buffers warm. */
class Tape {
public:
    explicit Tape(bool training = false, uint64_t dropout_seed = 0);

    void reset(bool training, uint64_t dropout_seed);

    // leaves
    Val input(const Tensor& value);                 // copied constant
    Val input_row(const std::vector<double>& row);  // 1 x n constant
    Val param(Parameter& p);
    Val embedding_row(Parameter& table, size_t row);
    Val zeros(size_t rows, size_t cols);
    Val ones(size_t rows, size_t cols);

    // ops
    Val matmul(Val a, Val b);      // {r,k} x {k,c}
    Val matmul_nt(Val a, Val b);   // {r,k} x {c,k}^T
    Val add(Val a, Val b);         // same shape, or b is a broadcast row
    Val sub(Val a, Val b);
    Val mul(Val a, Val b);
    Val scale(Val a, double s);
    Val sigmoid(Val a);
    Val tanh(Val a);
    Val relu(Val a);
    Val softmax_rows(Val a);
    Val dropout(Val a, double rate);
    Val concat_cols(const std::vector<Val>& parts);
    Val slice_cols(Val a, size_t from, size_t len);
    Val stack_rows(const std::vector<Val>& rows);
    Val row(Val a, size_t r);
    Val mean_rows(Val a);   // {r,c} -> {1,c}

    /** Sum of per-edge messages: out[dst] += in[src] for each (src, dst).
     *  The edge list must outlive the tape pass. */
    Val edge_scatter(Val a, const std::vector<std::pair<int, int>>& edges,
                     size_t out_rows);

    /** Negative log likelihood of `target` under softmax(logits {1,k}). */
    Val nll_from_logits(Val logits, size_t target);

    const Tensor& value(Val v) const;
    void backward(Val loss);

    bool training() const { return training_; }

private:
    struct Node {
        uint8_t op = 0;
        bool grad_ready = false;
        int32_t in0 = -1, in1 = -1;
        size_t aux0 = 0, aux1 = 0;   // slice offsets, rows, targets, list ids
        double scalar = 0.0;
        Parameter* parameter = nullptr;
        const std::vector<std::pair<int, int>>* edges = nullptr;
        Tensor val;
        Tensor grad;
    };

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> masks_;       // dropout masks
    std::vector<std::vector<int32_t>> lists_;      // concat/stack input lists
    bool training_ = false;
    std::mt19937_64 dropout_rng_;

    Val push(Node node);
    Tensor& grad_of(int32_t i);
};

}   // namespace jitid::nn

#endif
