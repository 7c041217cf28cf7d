#include "hierrec/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hierrec/errors.hpp"
#include "hierrec/rng.hpp"

namespace hierrec::ad {

ParamId ParamStore::add(std::string name, Matrix init) {
    if (find(name)) throw InvalidArgument("duplicate parameter name: " + name);
    names_.push_back(std::move(name));
    values_.push_back(std::move(init));
    trainable_.push_back(true);
    return ParamId{values_.size() - 1};
}

ParamId ParamStore::add_uniform(std::string name, Eigen::Index rows, Eigen::Index cols,
                                Eigen::Index fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
    Matrix m(rows, cols);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
    return add(std::move(name), std::move(m));
}

ParamId ParamStore::add_zeros(std::string name, Eigen::Index rows, Eigen::Index cols) {
    return add(std::move(name), Matrix::Zero(rows, cols));
}

std::size_t ParamStore::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
}

std::optional<ParamId> ParamStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return ParamId{i};
    return std::nullopt;
}

std::uint64_t ParamStore::hash() const { return hash(""); }

std::uint64_t ParamStore::hash(const std::string& prefix) const {
    std::uint64_t h = fnv1a("params");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (names_[i].rfind(prefix, 0) != 0) continue;
        h = fnv1a(names_[i], h);
        const std::string shape =
            std::to_string(values_[i].rows()) + "x" + std::to_string(values_[i].cols());
        h = fnv1a(shape, h);
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(values_[i].data()),
                                   sizeof(double) * static_cast<std::size_t>(values_[i].size())),
                  h);
    }
    return h;
}

Gradients::Gradients(const ParamStore& params) {
    grads_.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& v = params.value(ParamId{i});
        grads_.push_back(Matrix::Zero(v.rows(), v.cols()));
    }
}

void Gradients::zero() {
    for (auto& g : grads_) g.setZero();
}

void Gradients::add(const Gradients& other, double scale) {
    if (other.grads_.size() != grads_.size()) throw DimensionMismatch("gradient buffer sizes differ");
    for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += scale * other.grads_[i];
}

void Gradients::scale(double s) {
    for (auto& g : grads_) g *= s;
}

double Gradients::norm() const {
    double sq = 0.0;
    for (const auto& g : grads_) sq += g.squaredNorm();
    return std::sqrt(sq);
}

bool Gradients::finite() const {
    for (const auto& g : grads_)
        if (!g.allFinite()) return false;
    return true;
}

// ---------------------------------------------------------------------------

Tape::Tape(const ParamStore& params, Gradients* sink) : params_(&params), sink_(sink) {
    nodes_.reserve(256);
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, std::int32_t)> back) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && sink_ != nullptr;
    if (n.requires_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

Var Tape::param(ParamId id) {
    Node n;
    n.external = &params_->value(id);
    n.requires_grad = sink_ != nullptr && params_->trainable(id);
    if (n.requires_grad) {
        n.external_grad = &(*sink_)[id];
        n.has_grad = true;
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Matrix& Tape::value(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    return n.external ? *n.external : n.value;
}

Matrix& Tape::grad(Var v) {
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (n.external_grad) return *n.external_grad;
    if (!n.has_grad) {
        const Matrix& val = value(v);
        n.grad = Matrix::Zero(val.rows(), val.cols());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::check_same_shape(Var a, Var b, const char* op) const {
    const Matrix& x = value(a);
    const Matrix& y = value(b);
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
        std::ostringstream os;
        os << op << ": shape " << x.rows() << "x" << x.cols() << " vs " << y.rows() << "x"
           << y.cols();
        throw DimensionMismatch(os.str());
    }
}

Var Tape::add(Var a, Var b) {
    check_same_shape(a, b, "add");
    return push(value(a) + value(b), needs_grad(a) || needs_grad(b), [a, b](Tape& t, std::int32_t self) {
        const Matrix& g = t.grad_value(Var{self});
        if (t.needs_grad(a)) t.grad(a) += g;
        if (t.needs_grad(b)) t.grad(b) += g;
    });
}

Var Tape::add(const std::vector<Var>& terms) {
    if (terms.empty()) throw InvalidArgument("add of zero terms");
    Matrix sum = value(terms[0]);
    bool req = needs_grad(terms[0]);
    for (std::size_t i = 1; i < terms.size(); ++i) {
        check_same_shape(terms[0], terms[i], "add");
        sum += value(terms[i]);
        req = req || needs_grad(terms[i]);
    }
    return push(std::move(sum), req, [terms](Tape& t, std::int32_t self) {
        const Matrix& g = t.grad_value(Var{self});
        for (Var v : terms)
            if (t.needs_grad(v)) t.grad(v) += g;
    });
}

Var Tape::mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    return push(value(a).cwiseProduct(value(b)), needs_grad(a) || needs_grad(b),
                [a, b](Tape& t, std::int32_t self) {
                    const Matrix& g = t.grad_value(Var{self});
                    if (t.needs_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b));
                    if (t.needs_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a));
                });
}

Var Tape::scale(Var a, double s) {
    return push(value(a) * s, needs_grad(a), [a, s](Tape& t, std::int32_t self) {
        t.grad(a) += s * t.grad_value(Var{self});
    });
}

Var Tape::tanh(Var a) {
    return push(value(a).array().tanh().matrix(), needs_grad(a), [a](Tape& t, std::int32_t self) {
        const Matrix& y = t.value(Var{self});
        t.grad(a).array() += t.grad_value(Var{self}).array() * (1.0 - y.array().square());
    });
}

Var Tape::sigmoid(Var a) {
    Matrix y = (1.0 + (-value(a).array()).exp()).inverse().matrix();
    return push(std::move(y), needs_grad(a), [a](Tape& t, std::int32_t self) {
        const Matrix& y = t.value(Var{self});
        t.grad(a).array() += t.grad_value(Var{self}).array() * y.array() * (1.0 - y.array());
    });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw InvalidArgument("concat_rows of zero parts");
    const Eigen::Index cols = value(parts[0]).cols();
    Eigen::Index rows = 0;
    bool req = false;
    for (Var p : parts) {
        if (value(p).cols() != cols) throw DimensionMismatch("concat_rows: column counts differ");
        rows += value(p).rows();
        req = req || needs_grad(p);
    }
    Matrix out(rows, cols);
    Eigen::Index r = 0;
    for (Var p : parts) {
        out.middleRows(r, value(p).rows()) = value(p);
        r += value(p).rows();
    }
    return push(std::move(out), req, [parts](Tape& t, std::int32_t self) {
        const Matrix& g = t.grad_value(Var{self});
        Eigen::Index r = 0;
        for (Var p : parts) {
            const Eigen::Index h = t.value(p).rows();
            if (t.needs_grad(p)) t.grad(p) += g.middleRows(r, h);
            r += h;
        }
    });
}

Var Tape::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > value(a).rows())
        throw DimensionMismatch("slice_rows out of range");
    return push(value(a).middleRows(start, count), needs_grad(a),
                [a, start, count](Tape& t, std::int32_t self) {
                    t.grad(a).middleRows(start, count) += t.grad_value(Var{self});
                });
}

namespace {

// dst += lhs * rhs, routing vector shapes to outer-product and GEMV kernels
// instead of the general blocked product.
template <class L, class R>
void add_product(Matrix& dst, const L& lhs, const R& rhs) {
    if (lhs.cols() == 1) {
        dst.noalias() += lhs.col(0) * rhs.row(0);
    } else if (rhs.cols() == 1) {
        dst.col(0).noalias() += lhs * rhs.col(0);
    } else if (lhs.rows() == 1) {
        dst.row(0).noalias() += lhs.row(0) * rhs;
    } else {
        dst.noalias() += lhs * rhs;
    }
}

}  // namespace

Var Tape::matmul(Var a, Var b) {
    if (value(a).cols() != value(b).rows()) throw DimensionMismatch("matmul: inner dimensions differ");
    return push(value(a) * value(b), needs_grad(a) || needs_grad(b), [a, b](Tape& t, std::int32_t self) {
        const Matrix& g = t.grad_value(Var{self});
        if (t.needs_grad(a)) add_product(t.grad(a), g, t.value(b).transpose());
        if (t.needs_grad(b)) add_product(t.grad(b), t.value(a).transpose(), g);
    });
}

Var Tape::matmul_tn(Var a, Var b) {
    if (value(a).rows() != value(b).rows())
        throw DimensionMismatch("matmul_tn: row counts differ");
    return push(value(a).transpose() * value(b), needs_grad(a) || needs_grad(b),
                [a, b](Tape& t, std::int32_t self) {
                    const Matrix& g = t.grad_value(Var{self});
                    if (t.needs_grad(a)) add_product(t.grad(a), t.value(b), g.transpose());
                    if (t.needs_grad(b)) add_product(t.grad(b), t.value(a), g);
                });
}

Var Tape::affine(Var w, Var x, Var b) {
    const Matrix& W = value(w);
    const Matrix& X = value(x);
    const Matrix& B = value(b);
    if (W.cols() != X.rows() || B.rows() != W.rows() || B.cols() != 1)
        throw DimensionMismatch("affine: incompatible shapes");
    Matrix out = W * X;
    out.colwise() += B.col(0);
    return push(std::move(out), needs_grad(w) || needs_grad(x) || needs_grad(b),
                [w, x, b](Tape& t, std::int32_t self) {
                    const Matrix& g = t.grad_value(Var{self});
                    if (t.needs_grad(w)) add_product(t.grad(w), g, t.value(x).transpose());
                    if (t.needs_grad(x)) add_product(t.grad(x), t.value(w).transpose(), g);
                    if (t.needs_grad(b)) t.grad(b) += g.rowwise().sum();
                });
}

Var Tape::gather_cols(Var a, const std::vector<Eigen::Index>& cols) {
    const Matrix& A = value(a);
    Matrix out(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j] < 0 || cols[j] >= A.cols()) throw DimensionMismatch("gather_cols: index out of range");
        out.col(static_cast<Eigen::Index>(j)) = A.col(cols[j]);
    }
    return push(std::move(out), needs_grad(a), [a, cols](Tape& t, std::int32_t self) {
        const Matrix& g = t.grad_value(Var{self});
        Matrix& ga = t.grad(a);
        for (std::size_t j = 0; j < cols.size(); ++j)
            ga.col(cols[j]) += g.col(static_cast<Eigen::Index>(j));
    });
}

Var Tape::mean_cols(Var a) {
    const Matrix& A = value(a);
    if (A.cols() == 0) throw EmptySet("mean over zero columns");
    const double inv = 1.0 / static_cast<double>(A.cols());
    return push(A.rowwise().sum() * inv, needs_grad(a), [a, inv](Tape& t, std::int32_t self) {
        const Matrix& g = t.grad_value(Var{self});
        t.grad(a).colwise() += g.col(0) * inv;
    });
}

Var Tape::softmax_cols(Var a) {
    Matrix y = value(a);
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
        const double mx = y.col(j).maxCoeff();
        y.col(j) = (y.col(j).array() - mx).exp().matrix();
        y.col(j) /= y.col(j).sum();
    }
    return push(std::move(y), needs_grad(a), [a](Tape& t, std::int32_t self) {
        const Matrix& y = t.value(Var{self});
        const Matrix& g = t.grad_value(Var{self});
        Matrix& ga = t.grad(a);
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const double dot = g.col(j).dot(y.col(j));
            ga.col(j).array() += y.col(j).array() * (g.col(j).array() - dot);
        }
    });
}

Var Tape::log_softmax(Var a) {
    const Matrix& x = value(a);
    if (x.cols() != 1 || x.rows() == 0) throw DimensionMismatch("log_softmax expects a non-empty column");
    const double mx = x.maxCoeff();
    const double lse = mx + std::log((x.array() - mx).exp().sum());
    Matrix y = x.array() - lse;
    return push(std::move(y), needs_grad(a), [a](Tape& t, std::int32_t self) {
        const Matrix& y = t.value(Var{self});
        const Matrix& g = t.grad_value(Var{self});
        const double total = g.sum();
        t.grad(a).array() += g.array() - y.array().exp() * total;
    });
}

Var Tape::pick(Var a, Eigen::Index row, Eigen::Index col) {
    const Matrix& A = value(a);
    if (row < 0 || row >= A.rows() || col < 0 || col >= A.cols())
        throw DimensionMismatch("pick: index out of range");
    return push(Matrix::Constant(1, 1, A(row, col)), needs_grad(a),
                [a, row, col](Tape& t, std::int32_t self) {
                    t.grad(a)(row, col) += t.grad_value(Var{self})(0, 0);
                });
}

Var Tape::weighted_sum(const std::vector<Var>& terms, const std::vector<double>& weights) {
    if (terms.size() != weights.size()) throw DimensionMismatch("weighted_sum: size mismatch");
    double total = 0.0;
    bool req = false;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (value(terms[i]).size() != 1) throw DimensionMismatch("weighted_sum expects 1x1 terms");
        total += weights[i] * scalar(terms[i]);
        req = req || needs_grad(terms[i]);
    }
    return push(Matrix::Constant(1, 1, total), req, [terms, weights](Tape& t, std::int32_t self) {
        const double g = t.grad_value(Var{self})(0, 0);
        for (std::size_t i = 0; i < terms.size(); ++i)
            if (t.needs_grad(terms[i])) t.grad(terms[i])(0, 0) += g * weights[i];
    });
}

Var Tape::bce(Var prob, double y, double clamp) {
    if (value(prob).size() != 1) throw DimensionMismatch("bce expects a 1x1 probability");
    const double raw = scalar(prob);
    const double p = std::clamp(raw, clamp, 1.0 - clamp);
    const bool clamped = p != raw;
    const double loss = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    return push(Matrix::Constant(1, 1, loss), needs_grad(prob) && !clamped,
                [prob, y, p](Tape& t, std::int32_t self) {
                    const double g = t.grad_value(Var{self})(0, 0);
                    t.grad(prob)(0, 0) += g * (-y / p + (1.0 - y) / (1.0 - p));
                });
}

void Tape::backward(Var root) {
    if (!sink_) throw InvalidArgument("backward on a forward-only tape");
    if (value(root).size() != 1) throw DimensionMismatch("backward root must be 1x1");
    if (!needs_grad(root)) return;
    grad(root)(0, 0) += 1.0;
    for (std::int32_t i = root.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.requires_grad || !n.back || !n.has_grad) continue;
        n.back(*this, i);
    }
}

}  // namespace hierrec::ad

namespace hierrec::ad {

std::pair<Var, Var> lstm_cell(Tape& tape, Var w, Var b, Var x, Var h, Var c) {
    const Eigen::Index hd = tape.value(h).rows();
    Var pre = tape.affine(w, tape.concat_rows({x, h}), b);
    Var i = tape.sigmoid(tape.slice_rows(pre, 0, hd));
    Var f = tape.sigmoid(tape.slice_rows(pre, hd, hd));
    Var g = tape.tanh(tape.slice_rows(pre, 2 * hd, hd));
    Var o = tape.sigmoid(tape.slice_rows(pre, 3 * hd, hd));
    Var c_next = tape.add(tape.mul(f, c), tape.mul(i, g));
    Var h_next = tape.mul(o, tape.tanh(c_next));
    return {h_next, c_next};
}

std::pair<Vector, Vector> lstm_cell(const Matrix& w, const Matrix& b, const Vector& x,
                                    const Vector& h, const Vector& c) {
    const Eigen::Index hd = h.size();
    Vector in(x.size() + hd);
    in << x, h;
    const Vector pre = w * in + b.col(0);
    auto sig = [](const auto& v) { return (1.0 + (-v.array()).exp()).inverse().matrix(); };
    const Vector i = sig(pre.segment(0, hd));
    const Vector f = sig(pre.segment(hd, hd));
    const Vector g = pre.segment(2 * hd, hd).array().tanh().matrix();
    const Vector o = sig(pre.segment(3 * hd, hd));
    Vector c_next = f.cwiseProduct(c) + i.cwiseProduct(g);
    Vector h_next = o.cwiseProduct(c_next.array().tanh().matrix());
    return {std::move(h_next), std::move(c_next)};
}

}  // namespace hierrec::ad
