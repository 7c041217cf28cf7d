#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hierrec {
class Rng;
}

/// Minimal reverse-mode differentiation over dense double matrices. Every
/// forward op records a node on a Tape; Tape::backward walks the nodes in
/// reverse and accumulates parameter gradients into a Gradients buffer.
namespace hierrec::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ParamId {
    std::size_t index = 0;
};

class ParamStore {
public:
    ParamId add(std::string name, Matrix init);
    /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    ParamId add_uniform(std::string name, Eigen::Index rows, Eigen::Index cols,
                        Eigen::Index fan_in, Rng& rng);
    ParamId add_zeros(std::string name, Eigen::Index rows, Eigen::Index cols);

    std::size_t size() const noexcept { return values_.size(); }
    std::size_t scalar_count() const noexcept;

    Matrix& value(ParamId id) { return values_.at(id.index); }
    const Matrix& value(ParamId id) const { return values_.at(id.index); }
    const std::string& name(ParamId id) const { return names_.at(id.index); }
    std::optional<ParamId> find(const std::string& name) const;

    bool trainable(ParamId id) const { return trainable_.at(id.index); }
    void set_trainable(ParamId id, bool on) { trainable_.at(id.index) = on; }

    /// Digest of names, shapes and raw value bytes.
    std::uint64_t hash() const;
    /// Digest restricted to parameters whose name starts with `prefix`.
    std::uint64_t hash(const std::string& prefix) const;

private:
    std::vector<std::string> names_;
    std::vector<Matrix> values_;
    std::vector<bool> trainable_;
};

class Gradients {
public:
    Gradients() = default;
    explicit Gradients(const ParamStore& params);

    void zero();
    Matrix& operator[](ParamId id) { return grads_.at(id.index); }
    const Matrix& operator[](ParamId id) const { return grads_.at(id.index); }
    std::size_t size() const noexcept { return grads_.size(); }

    void add(const Gradients& other, double scale = 1.0);
    void scale(double s);
    double norm() const;
    bool finite() const;

private:
    std::vector<Matrix> grads_;
};

struct Var {
    std::int32_t id = -1;
    bool valid() const noexcept { return id >= 0; }
};

class Tape {
public:
    /// `sink` receives parameter gradients on backward(); may be null for
    /// forward-only use.
    Tape(const ParamStore& params, Gradients* sink);

    Var constant(Matrix value);
    Var scalar_constant(double v);
    Var param(ParamId id);

    const Matrix& value(Var v) const;
    double scalar(Var v) const { return value(v)(0, 0); }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Elementwise / shape ops. Shapes must match exactly (DimensionMismatch).
    Var add(Var a, Var b);
    Var add(const std::vector<Var>& terms);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var tanh(Var a);
    Var sigmoid(Var a);
    Var concat_rows(const std::vector<Var>& parts);
    Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);

    // Linear algebra.
    Var matmul(Var a, Var b);
    /// aᵀ b.
    Var matmul_tn(Var a, Var b);
    /// w x + b, with b (rows x 1) broadcast over the columns of x.
    Var affine(Var w, Var x, Var b);
    Var gather_cols(Var a, const std::vector<Eigen::Index>& cols);
    Var mean_cols(Var a);
    Var softmax_cols(Var a);

    // Scalar heads.
    /// Column vector -> log-softmax column vector.
    Var log_softmax(Var a);
    Var pick(Var a, Eigen::Index row, Eigen::Index col = 0);
    /// Σ weights[i] · terms[i] over 1x1 terms.
    Var weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights);
    /// Binary cross-entropy of a 1x1 probability against y in {0,1}; the
    /// probability is clamped to [clamp, 1 - clamp] before the logs.
    Var bce(Var prob, double y, double clamp = 1e-7);

    /// Seeds d(root)/d(root) = 1 for a 1x1 root and back-propagates.
    void backward(Var root);

private:
    struct Node {
        Matrix value;
        const Matrix* external = nullptr;
        Matrix grad;
        Matrix* external_grad = nullptr;
        bool has_grad = false;
        bool requires_grad = false;
        std::function<void(Tape&, std::int32_t)> back;
    };

    Var push(Matrix value, bool requires_grad, std::function<void(Tape&, std::int32_t)> back);
    bool needs_grad(Var v) const { return nodes_[v.id].requires_grad; }
    Matrix& grad(Var v);
    const Matrix& grad_value(Var v) const { return nodes_[v.id].grad; }
    void check_same_shape(Var a, Var b, const char* op) const;

    const ParamStore* params_;
    Gradients* sink_;
    std::vector<Node> nodes_;
};

}  // namespace hierrec::ad

namespace hierrec::ad {

/// One LSTM step with gate order (input, forget, cell, output) stacked in
/// `w` (4H x (X + H)) and `b` (4H x 1). Returns (h', c').
std::pair<Var, Var> lstm_cell(Tape& tape, Var w, Var b, Var x, Var h, Var c);

/// Same computation on plain values.
std::pair<Vector, Vector> lstm_cell(const Matrix& w, const Matrix& b, const Vector& x,
                                    const Vector& h, const Vector& c);

}  // namespace hierrec::ad
