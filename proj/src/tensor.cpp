#include "jitid/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace jitid::nn {

// ---------------------------------------------------------------------------
// ParameterStore
// ---------------------------------------------------------------------------

Parameter& ParameterStore::create(const std::string& name, size_t rows, size_t cols,
                                  std::mt19937_64& rng, double scale) {
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Tensor(rows, cols);
    p->grad = Tensor(rows, cols);
    p->m = Tensor(rows, cols);
    p->v = Tensor(rows, cols);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (double& x : p->value.data) x = dist(rng);
    Parameter& ref = *p;
    by_name_[name] = p.get();
    params_.push_back(std::move(p));
    return ref;
}

Parameter& ParameterStore::create_zero(const std::string& name, size_t rows, size_t cols) {
    auto p = std::make_unique<Parameter>();
    p->name = name;
    p->value = Tensor(rows, cols);
    p->grad = Tensor(rows, cols);
    p->m = Tensor(rows, cols);
    p->v = Tensor(rows, cols);
    Parameter& ref = *p;
    by_name_[name] = p.get();
    params_.push_back(std::move(p));
    return ref;
}

Parameter* ParameterStore::find(const std::string& name) {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParameterStore::at(const std::string& name) {
    Parameter* p = find(name);
    if (!p) throw std::out_of_range("no parameter named " + name);
    return *p;
}

const Parameter& ParameterStore::at(const std::string& name) const {
    const Parameter* p = find(name);
    if (!p) throw std::out_of_range("no parameter named " + name);
    return *p;
}

void ParameterStore::zero_grads() {
    for (auto& p : params_) std::fill(p->grad.data.begin(), p->grad.data.end(), 0.0);
}

double ParameterStore::clip_gradients(double max_norm) {
    double sq = 0.0;
    for (const auto& p : params_)
        for (double g : p->grad.data) sq += g * g;
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        double factor = max_norm / norm;
        for (auto& p : params_)
            for (double& g : p->grad.data) g *= factor;
    }
    return norm;
}

void ParameterStore::adam_step(double lr, double beta1, double beta2, double eps,
                               int64_t t) {
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (auto& p : params_) {
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            double g = p->grad.data[i];
            p->m.data[i] = beta1 * p->m.data[i] + (1.0 - beta1) * g;
            p->v.data[i] = beta2 * p->v.data[i] + (1.0 - beta2) * g * g;
            double mhat = p->m.data[i] / bc1;
            double vhat = p->v.data[i] / bc2;
            p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

ParameterStore ParameterStore::clone() const {
    ParameterStore out;
    for (const auto& p : params_) {
        auto q = std::make_unique<Parameter>(*p);
        out.by_name_[q->name] = q.get();
        out.params_.push_back(std::move(q));
    }
    return out;
}

void ParameterStore::restore_from(const ParameterStore& snapshot) {
    for (const auto& p : snapshot.params_) at(p->name).value = p->value;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

namespace {

enum class Op : uint8_t {
    Input, ParamLeaf, EmbedRow, MatmulNN, MatmulNT, Add, Sub, Mul, Scale,
    Sigmoid, Tanh, Relu, SoftmaxRows, Dropout, ConcatCols, SliceCols,
    StackRows, RowView, MeanRows, EdgeScatter, NllLogits,
};

}   // namespace

Tape::Tape(bool training, uint64_t dropout_seed)
    : training_(training), dropout_rng_(dropout_seed) {}

void Tape::reset(bool training, uint64_t dropout_seed) {
    nodes_.clear();
    masks_.clear();
    lists_.clear();
    training_ = training;
    dropout_rng_.seed(dropout_seed);
}

Val Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Val{static_cast<int32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_of(int32_t i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.grad_ready) {
        const Tensor& v = n.op == (uint8_t)Op::ParamLeaf ? n.parameter->value : n.val;
        n.grad = Tensor(v.rows, v.cols);
        n.grad_ready = true;
    }
    return n.grad;
}

const Tensor& Tape::value(Val v) const {
    const Node& n = nodes_[static_cast<size_t>(v.node)];
    return n.op == (uint8_t)Op::ParamLeaf ? n.parameter->value : n.val;
}

Val Tape::input(const Tensor& value) {
    Node n;
    n.op = (uint8_t)Op::Input;
    n.val = value;
    return push(std::move(n));
}

Val Tape::input_row(const std::vector<double>& row) {
    Tensor t(1, row.size());
    t.data = row;
    return input(t);
}

Val Tape::param(Parameter& p) {
    Node n;
    n.op = (uint8_t)Op::ParamLeaf;
    n.parameter = &p;
    return push(std::move(n));
}

Val Tape::embedding_row(Parameter& table, size_t row) {
    Node n;
    n.op = (uint8_t)Op::EmbedRow;
    n.parameter = &table;
    n.aux0 = row;
    n.val = Tensor(1, table.value.cols);
    const double* src = table.value.data.data() + row * table.value.cols;
    std::copy(src, src + table.value.cols, n.val.data.begin());
    return push(std::move(n));
}

Val Tape::zeros(size_t rows, size_t cols) { return input(Tensor(rows, cols)); }

Val Tape::ones(size_t rows, size_t cols) {
    Tensor t(rows, cols);
    std::fill(t.data.begin(), t.data.end(), 1.0);
    return input(t);
}

Val Tape::matmul(Val a, Val b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols != B.rows) throw std::invalid_argument("matmul shape mismatch");
    Node n;
    n.op = (uint8_t)Op::MatmulNN;
    n.in0 = a.node;
    n.in1 = b.node;
    n.val = Tensor(A.rows, B.cols);
    for (size_t i = 0; i < A.rows; ++i) {
        const double* arow = A.data.data() + i * A.cols;
        double* crow = n.val.data.data() + i * B.cols;
        for (size_t k = 0; k < A.cols; ++k) {
            double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = B.data.data() + k * B.cols;
            for (size_t j = 0; j < B.cols; ++j) crow[j] += av * brow[j];
        }
    }
    return push(std::move(n));
}

Val Tape::matmul_nt(Val a, Val b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.cols != B.cols) throw std::invalid_argument("matmul_nt shape mismatch");
    Node n;
    n.op = (uint8_t)Op::MatmulNT;
    n.in0 = a.node;
    n.in1 = b.node;
    n.val = Tensor(A.rows, B.rows);
    for (size_t i = 0; i < A.rows; ++i) {
        const double* arow = A.data.data() + i * A.cols;
        double* crow = n.val.data.data() + i * B.rows;
        for (size_t j = 0; j < B.rows; ++j) {
            const double* brow = B.data.data() + j * B.cols;
            double sum = 0.0;
            for (size_t k = 0; k < A.cols; ++k) sum += arow[k] * brow[k];
            crow[j] = sum;
        }
    }
    return push(std::move(n));
}

Val Tape::add(Val a, Val b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    bool broadcast = B.rows == 1 && A.rows > 1;
    if (!broadcast && (A.rows != B.rows || A.cols != B.cols))
        throw std::invalid_argument("add shape mismatch");
    if (A.cols != B.cols) throw std::invalid_argument("add column mismatch");
    Node n;
    n.op = (uint8_t)Op::Add;
    n.in0 = a.node;
    n.in1 = b.node;
    n.val = A;
    for (size_t i = 0; i < A.rows; ++i) {
        const double* brow = B.data.data() + (broadcast ? 0 : i * B.cols);
        double* crow = n.val.data.data() + i * A.cols;
        for (size_t j = 0; j < A.cols; ++j) crow[j] += brow[j];
    }
    return push(std::move(n));
}

Val Tape::sub(Val a, Val b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rows != B.rows || A.cols != B.cols)
        throw std::invalid_argument("sub shape mismatch");
    Node n;
    n.op = (uint8_t)Op::Sub;
    n.in0 = a.node;
    n.in1 = b.node;
    n.val = A;
    for (size_t i = 0; i < A.size(); ++i) n.val.data[i] -= B.data[i];
    return push(std::move(n));
}

Val Tape::mul(Val a, Val b) {
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.rows != B.rows || A.cols != B.cols)
        throw std::invalid_argument("mul shape mismatch");
    Node n;
    n.op = (uint8_t)Op::Mul;
    n.in0 = a.node;
    n.in1 = b.node;
    n.val = A;
    for (size_t i = 0; i < A.size(); ++i) n.val.data[i] *= B.data[i];
    return push(std::move(n));
}

Val Tape::scale(Val a, double s) {
    Node n;
    n.op = (uint8_t)Op::Scale;
    n.in0 = a.node;
    n.scalar = s;
    n.val = value(a);
    for (double& x : n.val.data) x *= s;
    return push(std::move(n));
}

Val Tape::sigmoid(Val a) {
    Node n;
    n.op = (uint8_t)Op::Sigmoid;
    n.in0 = a.node;
    n.val = value(a);
    for (double& x : n.val.data) x = 1.0 / (1.0 + std::exp(-x));
    return push(std::move(n));
}

Val Tape::tanh(Val a) {
    Node n;
    n.op = (uint8_t)Op::Tanh;
    n.in0 = a.node;
    n.val = value(a);
    for (double& x : n.val.data) x = std::tanh(x);
    return push(std::move(n));
}

Val Tape::relu(Val a) {
    Node n;
    n.op = (uint8_t)Op::Relu;
    n.in0 = a.node;
    n.val = value(a);
    for (double& x : n.val.data) x = x > 0.0 ? x : 0.0;
    return push(std::move(n));
}

Val Tape::softmax_rows(Val a) {
    Node n;
    n.op = (uint8_t)Op::SoftmaxRows;
    n.in0 = a.node;
    n.val = value(a);
    for (size_t i = 0; i < n.val.rows; ++i) {
        double* row = n.val.data.data() + i * n.val.cols;
        double mx = row[0];
        for (size_t j = 1; j < n.val.cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (size_t j = 0; j < n.val.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (size_t j = 0; j < n.val.cols; ++j) row[j] /= sum;
    }
    return push(std::move(n));
}

Val Tape::dropout(Val a, double rate) {
    if (!training_ || rate <= 0.0) return a;
    Node n;
    n.op = (uint8_t)Op::Dropout;
    n.in0 = a.node;
    n.val = value(a);
    std::vector<double> mask(n.val.size());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double keep = 1.0 - rate;
    for (size_t i = 0; i < mask.size(); ++i)
        mask[i] = u(dropout_rng_) < keep ? 1.0 / keep : 0.0;
    for (size_t i = 0; i < mask.size(); ++i) n.val.data[i] *= mask[i];
    n.aux0 = masks_.size();
    masks_.push_back(std::move(mask));
    return push(std::move(n));
}

Val Tape::concat_cols(const std::vector<Val>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat of nothing");
    size_t rows = value(parts[0]).rows;
    size_t cols = 0;
    for (Val p : parts) {
        if (value(p).rows != rows) throw std::invalid_argument("concat row mismatch");
        cols += value(p).cols;
    }
    Node n;
    n.op = (uint8_t)Op::ConcatCols;
    n.val = Tensor(rows, cols);
    std::vector<int32_t> list;
    for (Val p : parts) list.push_back(p.node);
    size_t offset = 0;
    for (Val p : parts) {
        const Tensor& t = value(p);
        for (size_t i = 0; i < rows; ++i)
            std::copy(t.data.begin() + static_cast<long>(i * t.cols),
                      t.data.begin() + static_cast<long>((i + 1) * t.cols),
                      n.val.data.begin() + static_cast<long>(i * cols + offset));
        offset += t.cols;
    }
    n.aux0 = lists_.size();
    lists_.push_back(std::move(list));
    return push(std::move(n));
}

Val Tape::slice_cols(Val a, size_t from, size_t len) {
    const Tensor& A = value(a);
    if (from + len > A.cols) throw std::invalid_argument("slice out of range");
    Node n;
    n.op = (uint8_t)Op::SliceCols;
    n.in0 = a.node;
    n.aux0 = from;
    n.aux1 = len;
    n.val = Tensor(A.rows, len);
    for (size_t i = 0; i < A.rows; ++i)
        std::copy(A.data.begin() + static_cast<long>(i * A.cols + from),
                  A.data.begin() + static_cast<long>(i * A.cols + from + len),
                  n.val.data.begin() + static_cast<long>(i * len));
    return push(std::move(n));
}

Val Tape::stack_rows(const std::vector<Val>& rows) {
    if (rows.empty()) throw std::invalid_argument("stack of nothing");
    size_t cols = value(rows[0]).cols;
    Node n;
    n.op = (uint8_t)Op::StackRows;
    n.val = Tensor(rows.size(), cols);
    std::vector<int32_t> list;
    for (size_t i = 0; i < rows.size(); ++i) {
        const Tensor& t = value(rows[i]);
        if (t.rows != 1 || t.cols != cols)
            throw std::invalid_argument("stack_rows expects 1 x c rows");
        std::copy(t.data.begin(), t.data.end(),
                  n.val.data.begin() + static_cast<long>(i * cols));
        list.push_back(rows[i].node);
    }
    n.aux0 = lists_.size();
    lists_.push_back(std::move(list));
    return push(std::move(n));
}

Val Tape::row(Val a, size_t r) {
    const Tensor& A = value(a);
    if (r >= A.rows) throw std::invalid_argument("row out of range");
    Node n;
    n.op = (uint8_t)Op::RowView;
    n.in0 = a.node;
    n.aux0 = r;
    n.val = Tensor(1, A.cols);
    std::copy(A.data.begin() + static_cast<long>(r * A.cols),
              A.data.begin() + static_cast<long>((r + 1) * A.cols), n.val.data.begin());
    return push(std::move(n));
}

Val Tape::mean_rows(Val a) {
    const Tensor& A = value(a);
    Node n;
    n.op = (uint8_t)Op::MeanRows;
    n.in0 = a.node;
    n.val = Tensor(1, A.cols);
    for (size_t i = 0; i < A.rows; ++i)
        for (size_t j = 0; j < A.cols; ++j) n.val.data[j] += A.at(i, j);
    for (double& x : n.val.data) x /= static_cast<double>(A.rows);
    return push(std::move(n));
}

Val Tape::edge_scatter(Val a, const std::vector<std::pair<int, int>>& edges,
                       size_t out_rows) {
    const Tensor& A = value(a);
    Node n;
    n.op = (uint8_t)Op::EdgeScatter;
    n.in0 = a.node;
    n.edges = &edges;
    n.val = Tensor(out_rows, A.cols);
    for (const auto& [src, dst] : edges) {
        const double* from = A.data.data() + static_cast<size_t>(src) * A.cols;
        double* to = n.val.data.data() + static_cast<size_t>(dst) * A.cols;
        for (size_t j = 0; j < A.cols; ++j) to[j] += from[j];
    }
    return push(std::move(n));
}

Val Tape::nll_from_logits(Val logits, size_t target) {
    const Tensor& L = value(logits);
    if (L.rows != 1 || target >= L.cols)
        throw std::invalid_argument("nll expects a 1 x k logit row");
    Node n;
    n.op = (uint8_t)Op::NllLogits;
    n.in0 = logits.node;
    n.aux0 = target;
    double mx = L.data[0];
    for (double x : L.data) mx = std::max(mx, x);
    double sum = 0.0;
    for (double x : L.data) sum += std::exp(x - mx);
    n.val = Tensor(1, 1);
    n.val.data[0] = -(L.data[target] - mx - std::log(sum));
    return push(std::move(n));
}

void Tape::backward(Val loss) {
    if (value(loss).size() != 1) throw std::invalid_argument("loss must be scalar");
    grad_of(loss.node).data[0] = 1.0;

    for (int32_t idx = static_cast<int32_t>(nodes_.size()) - 1; idx >= 0; --idx) {
        Node& n = nodes_[static_cast<size_t>(idx)];
        if (!n.grad_ready) continue;
        const Tensor& g = n.grad;
        switch (static_cast<Op>(n.op)) {
            case Op::Input:
                break;
            case Op::ParamLeaf: {
                for (size_t i = 0; i < g.size(); ++i) n.parameter->grad.data[i] += g.data[i];
                break;
            }
            case Op::EmbedRow: {
                double* dst = n.parameter->grad.data.data() + n.aux0 * n.parameter->grad.cols;
                for (size_t j = 0; j < g.cols; ++j) dst[j] += g.data[j];
                break;
            }
            case Op::MatmulNN: {
                const Tensor& A = value(Val{n.in0});
                const Tensor& B = value(Val{n.in1});
                Tensor& da = grad_of(n.in0);
                Tensor& db = grad_of(n.in1);
                // dA += G B^T ; dB += A^T G
                for (size_t i = 0; i < A.rows; ++i) {
                    const double* grow = g.data.data() + i * g.cols;
                    double* darow = da.data.data() + i * da.cols;
                    for (size_t k = 0; k < A.cols; ++k) {
                        const double* brow = B.data.data() + k * B.cols;
                        double sum = 0.0;
                        for (size_t j = 0; j < g.cols; ++j) sum += grow[j] * brow[j];
                        darow[k] += sum;
                    }
                    const double* arow = A.data.data() + i * A.cols;
                    for (size_t k = 0; k < A.cols; ++k) {
                        double av = arow[k];
                        if (av == 0.0) continue;
                        double* dbrow = db.data.data() + k * db.cols;
                        for (size_t j = 0; j < g.cols; ++j) dbrow[j] += av * grow[j];
                    }
                }
                break;
            }
            case Op::MatmulNT: {
                const Tensor& A = value(Val{n.in0});
                const Tensor& B = value(Val{n.in1});
                Tensor& da = grad_of(n.in0);
                Tensor& db = grad_of(n.in1);
                // C = A B^T : dA += G B ; dB += G^T A
                for (size_t i = 0; i < A.rows; ++i) {
                    const double* grow = g.data.data() + i * g.cols;
                    double* darow = da.data.data() + i * da.cols;
                    const double* arow = A.data.data() + i * A.cols;
                    for (size_t j = 0; j < B.rows; ++j) {
                        double gv = grow[j];
                        if (gv == 0.0) continue;
                        const double* brow = B.data.data() + j * B.cols;
                        double* dbrow = db.data.data() + j * db.cols;
                        for (size_t k = 0; k < A.cols; ++k) {
                            darow[k] += gv * brow[k];
                            dbrow[k] += gv * arow[k];
                        }
                    }
                }
                break;
            }
            case Op::Add: {
                Tensor& da = grad_of(n.in0);
                Tensor& db = grad_of(n.in1);
                for (size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i];
                if (db.rows == g.rows) {
                    for (size_t i = 0; i < g.size(); ++i) db.data[i] += g.data[i];
                } else {   // broadcast row
                    for (size_t i = 0; i < g.rows; ++i)
                        for (size_t j = 0; j < g.cols; ++j) db.data[j] += g.at(i, j);
                }
                break;
            }
            case Op::Sub: {
                Tensor& da = grad_of(n.in0);
                Tensor& db = grad_of(n.in1);
                for (size_t i = 0; i < g.size(); ++i) {
                    da.data[i] += g.data[i];
                    db.data[i] -= g.data[i];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& A = value(Val{n.in0});
                const Tensor& B = value(Val{n.in1});
                Tensor& da = grad_of(n.in0);
                Tensor& db = grad_of(n.in1);
                for (size_t i = 0; i < g.size(); ++i) {
                    da.data[i] += g.data[i] * B.data[i];
                    db.data[i] += g.data[i] * A.data[i];
                }
                break;
            }
            case Op::Scale: {
                Tensor& da = grad_of(n.in0);
                for (size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * n.scalar;
                break;
            }
            case Op::Sigmoid: {
                Tensor& da = grad_of(n.in0);
                for (size_t i = 0; i < g.size(); ++i) {
                    double y = n.val.data[i];
                    da.data[i] += g.data[i] * y * (1.0 - y);
                }
                break;
            }
            case Op::Tanh: {
                Tensor& da = grad_of(n.in0);
                for (size_t i = 0; i < g.size(); ++i) {
                    double y = n.val.data[i];
                    da.data[i] += g.data[i] * (1.0 - y * y);
                }
                break;
            }
            case Op::Relu: {
                Tensor& da = grad_of(n.in0);
                for (size_t i = 0; i < g.size(); ++i)
                    if (n.val.data[i] > 0.0) da.data[i] += g.data[i];
                break;
            }
            case Op::SoftmaxRows: {
                Tensor& da = grad_of(n.in0);
                for (size_t i = 0; i < g.rows; ++i) {
                    const double* s = n.val.data.data() + i * g.cols;
                    const double* grow = g.data.data() + i * g.cols;
                    double dot = 0.0;
                    for (size_t j = 0; j < g.cols; ++j) dot += grow[j] * s[j];
                    double* darow = da.data.data() + i * g.cols;
                    for (size_t j = 0; j < g.cols; ++j)
                        darow[j] += s[j] * (grow[j] - dot);
                }
                break;
            }
            case Op::Dropout: {
                Tensor& da = grad_of(n.in0);
                const std::vector<double>& mask = masks_[n.aux0];
                for (size_t i = 0; i < g.size(); ++i) da.data[i] += g.data[i] * mask[i];
                break;
            }
            case Op::ConcatCols: {
                const std::vector<int32_t>& list = lists_[n.aux0];
                size_t offset = 0;
                for (int32_t part : list) {
                    Tensor& dp = grad_of(part);
                    for (size_t i = 0; i < dp.rows; ++i)
                        for (size_t j = 0; j < dp.cols; ++j)
                            dp.at(i, j) += g.at(i, offset + j);
                    offset += dp.cols;
                }
                break;
            }
            case Op::SliceCols: {
                Tensor& da = grad_of(n.in0);
                for (size_t i = 0; i < g.rows; ++i)
                    for (size_t j = 0; j < g.cols; ++j) da.at(i, n.aux0 + j) += g.at(i, j);
                break;
            }
            case Op::StackRows: {
                const std::vector<int32_t>& list = lists_[n.aux0];
                for (size_t i = 0; i < list.size(); ++i) {
                    Tensor& dr = grad_of(list[i]);
                    for (size_t j = 0; j < g.cols; ++j) dr.data[j] += g.at(i, j);
                }
                break;
            }
            case Op::RowView: {
                Tensor& da = grad_of(n.in0);
                for (size_t j = 0; j < g.cols; ++j) da.at(n.aux0, j) += g.data[j];
                break;
            }
            case Op::MeanRows: {
                Tensor& da = grad_of(n.in0);
                double inv = 1.0 / static_cast<double>(da.rows);
                for (size_t i = 0; i < da.rows; ++i)
                    for (size_t j = 0; j < da.cols; ++j) da.at(i, j) += g.data[j] * inv;
                break;
            }
            case Op::EdgeScatter: {
                Tensor& da = grad_of(n.in0);
                for (const auto& [src, dst] : *n.edges) {
                    const double* grow = g.data.data() + static_cast<size_t>(dst) * g.cols;
                    double* darow = da.data.data() + static_cast<size_t>(src) * da.cols;
                    for (size_t j = 0; j < g.cols; ++j) darow[j] += grow[j];
                }
                break;
            }
            case Op::NllLogits: {
                const Tensor& L = value(Val{n.in0});
                Tensor& da = grad_of(n.in0);
                double mx = L.data[0];
                for (double x : L.data) mx = std::max(mx, x);
                double sum = 0.0;
                for (double x : L.data) sum += std::exp(x - mx);
                double gl = g.data[0];
                for (size_t j = 0; j < L.cols; ++j) {
                    double p = std::exp(L.data[j] - mx) / sum;
                    da.data[j] += gl * (p - (j == n.aux0 ? 1.0 : 0.0));
                }
                break;
            }
        }
    }
}

}   // namespace jitid::nn
