#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ner/kernels.hpp"

namespace ner::tape {

template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, T(0)) {}

    T& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    T* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const T* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    std::size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

// A trainable tensor with its gradient accumulator and Adam state.
template <typename T>
struct Parameter {
    std::string name;
    Mat<T> value;
    Mat<T> grad;
    Mat<T> adam_m;
    Mat<T> adam_v;

    Parameter() = default;
    Parameter(std::string n, int rows, int cols)
        : name(std::move(n)), value(rows, cols), grad(rows, cols), adam_m(rows, cols),
          adam_v(rows, cols) {}

    void zero_grad() { grad.zero(); }
};

// Reverse-mode tape over dense matrices. Nodes are recorded in creation
// order, which is a valid topological order, so backward() walks the list in
// reverse. Gradients flow through node.grad buffers; parameter leaves
// accumulate into Parameter::grad.
template <typename T>
class Graph {
public:
    using Id = int;

    Id leaf(Mat<T> value) {
        nodes_.push_back(Node{std::move(value), {}, nullptr});
        return last();
    }

    Id param(Parameter<T>& p) {
        const Id id = leaf(p.value);
        Parameter<T>* target = &p;
        nodes_[id].back = [this, id, target] {
            Mat<T>& g = grad(id);
            for (std::size_t i = 0; i < g.size(); ++i) target->grad.data[i] += g.data[i];
        };
        return id;
    }

    const Mat<T>& value(Id id) const { return nodes_[id].value; }

    Mat<T>& grad(Id id) {
        Node& n = nodes_[id];
        if (n.grad.rows == 0) n.grad = Mat<T>(n.value.rows, n.value.cols);
        return n.grad;
    }

    // C = A * B
    Id matmul(Id a, Id b) {
        const Mat<T>& av = value(a);
        const Mat<T>& bv = value(b);
        assert(av.cols == bv.rows);
        Mat<T> out(av.rows, bv.cols);
        kernels::matmul(av.data.data(), bv.data.data(), out.data.data(), av.rows, av.cols,
                        bv.cols);
        const Id id = record(std::move(out));
        nodes_[id].back = [this, id, a, b] {
            const Mat<T>& g = grad(id);
            const Mat<T>& av2 = value(a);
            const Mat<T>& bv2 = value(b);
            // dA = dC * B^T
            Mat<T> da(av2.rows, av2.cols);
            kernels::matmul_nt(g.data.data(), bv2.data.data(), da.data.data(), g.rows, g.cols,
                               bv2.rows);
            accumulate(a, da);
            // dB = A^T * dC
            Mat<T> db(bv2.rows, bv2.cols);
            kernels::matmul_tn(av2.data.data(), g.data.data(), db.data.data(), av2.cols, av2.rows,
                               g.cols);
            accumulate(b, db);
        };
        return id;
    }

    // C = A * B^T
    Id matmul_nt(Id a, Id b) {
        const Mat<T>& av = value(a);
        const Mat<T>& bv = value(b);
        assert(av.cols == bv.cols);
        Mat<T> out(av.rows, bv.rows);
        kernels::matmul_nt(av.data.data(), bv.data.data(), out.data.data(), av.rows, av.cols,
                           bv.rows);
        const Id id = record(std::move(out));
        nodes_[id].back = [this, id, a, b] {
            const Mat<T>& g = grad(id);
            const Mat<T>& av2 = value(a);
            const Mat<T>& bv2 = value(b);
            // dA = dC * B
            Mat<T> da(av2.rows, av2.cols);
            kernels::matmul(g.data.data(), bv2.data.data(), da.data.data(), g.rows, g.cols,
                            bv2.cols);
            accumulate(a, da);
            // dB = dC^T * A
            Mat<T> db(bv2.rows, bv2.cols);
            kernels::matmul_tn(g.data.data(), av2.data.data(), db.data.data(), g.cols, g.rows,
                               av2.cols);
            accumulate(b, db);
        };
        return id;
    }

    Id add(Id a, Id b) {
        const Mat<T>& av = value(a);
        const Mat<T>& bv = value(b);
        assert(av.rows == bv.rows && av.cols == bv.cols);
        Mat<T> out = av;
        kernels::axpy(T(1), bv.data.data(), out.data.data(), static_cast<int>(out.size()));
        const Id id = record(std::move(out));
        nodes_[id].back = [this, id, a, b] {
            const Mat<T>& g = grad(id);
            accumulate(a, g);
            accumulate(b, g);
        };
        return id;
    }

    // Adds a 1 x n bias row to every row of a.
    Id add_row_bias(Id a, Id bias) {
        const Mat<T>& av = value(a);
        const Mat<T>& bv = value(bias);
        assert(bv.rows == 1 && bv.cols == av.cols);
        Mat<T> out = av;
        for (int r = 0; r < out.rows; ++r) {
            kernels::axpy(T(1), bv.row(0), out.row(r), out.cols);
        }
        const Id id = record(std::move(out));
        nodes_[id].back = [this, id, a, bias] {
            const Mat<T>& g = grad(id);
            accumulate(a, g);
            Mat<T> db(1, g.cols);
            for (int r = 0; r < g.rows; ++r) {
                kernels::axpy(T(1), g.row(r), db.row(0), g.cols);
            }
            accumulate(bias, db);
        };
        return id;
    }

    Id scale(Id a, T s) {
        Mat<T> out = value(a);
        for (auto& v : out.data) v *= s;
        const Id id = record(std::move(out));
        nodes_[id].back = [this, id, a, s] {
            const Mat<T>& g = grad(id);
            Mat<T>& target = grad(a);
            kernels::axpy(s, g.data.data(), target.data.data(), static_cast<int>(g.size()));
        };
        return id;
    }

    // Softmax along each row.
    Id row_softmax(Id a) {
        Mat<T> out = value(a);
        for (int r = 0; r < out.rows; ++r) {
            T* row = out.row(r);
            T mx = row[0];
            for (int c = 1; c < out.cols; ++c) mx = std::max(mx, row[c]);
            T sum = 0;
            for (int c = 0; c < out.cols; ++c) {
                row[c] = std::exp(row[c] - mx);
                sum += row[c];
            }
            for (int c = 0; c < out.cols; ++c) row[c] /= sum;
        }
        const Id id = record(std::move(out));
        nodes_[id].back = [this, id, a] {
            const Mat<T>& y = value(id);
            const Mat<T>& g = grad(id);
            Mat<T>& target = grad(a);
            for (int r = 0; r < y.rows; ++r) {
                const T gy = kernels::dot(g.row(r), y.row(r), y.cols);
                for (int c = 0; c < y.cols; ++c) {
                    target.at(r, c) += y.at(r, c) * (g.at(r, c) - gy);
                }
            }
        };
        return id;
    }

    // tanh-approximation GELU.
    Id gelu(Id a) {
        static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
        static constexpr double kA = 0.044715;
        Mat<T> out = value(a);
        for (auto& v : out.data) {
            const double x = static_cast<double>(v);
            const double u = kC * (x + kA * x * x * x);
            v = static_cast<T>(0.5 * x * (1.0 + std::tanh(u)));
        }
        const Id id = record(std::move(out));
        nodes_[id].back = [this, id, a] {
            const Mat<T>& x = value(a);
            const Mat<T>& g = grad(id);
            Mat<T>& target = grad(a);
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double xv = static_cast<double>(x.data[i]);
                const double u = kC * (xv + kA * xv * xv * xv);
                const double t = std::tanh(u);
                const double du = kC * (1.0 + 3.0 * kA * xv * xv);
                const double d = 0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t * t) * du;
                target.data[i] += g.data[i] * static_cast<T>(d);
            }
        };
        return id;
    }

    // Per-row layer norm with learned gain/bias (1 x n each).
    Id layer_norm(Id a, Id gamma, Id beta, T eps) {
        const Mat<T>& x = value(a);
        const Mat<T>& gm = value(gamma);
        const Mat<T>& bt = value(beta);
        assert(gm.rows == 1 && gm.cols == x.cols && bt.rows == 1 && bt.cols == x.cols);
        Mat<T> out(x.rows, x.cols);
        Mat<T> xhat(x.rows, x.cols);
        std::vector<T> rstd(x.rows);
        const T n = static_cast<T>(x.cols);
        for (int r = 0; r < x.rows; ++r) {
            T mean = 0;
            for (int c = 0; c < x.cols; ++c) mean += x.at(r, c);
            mean /= n;
            T var = 0;
            for (int c = 0; c < x.cols; ++c) {
                const T d = x.at(r, c) - mean;
                var += d * d;
            }
            var /= n;
            const T rs = T(1) / std::sqrt(var + eps);
            rstd[r] = rs;
            for (int c = 0; c < x.cols; ++c) {
                const T xh = (x.at(r, c) - mean) * rs;
                xhat.at(r, c) = xh;
                out.at(r, c) = xh * gm.at(0, c) + bt.at(0, c);
            }
        }
        const Id id = record(std::move(out));
        auto xhat_shared = std::make_shared<Mat<T>>(std::move(xhat));
        auto rstd_shared = std::make_shared<std::vector<T>>(std::move(rstd));
        nodes_[id].back = [this, id, a, gamma, beta, xhat_shared, rstd_shared] {
            const Mat<T>& g = grad(id);
            const Mat<T>& gm = value(gamma);
            const Mat<T>& xh = *xhat_shared;
            Mat<T>& dx = grad(a);
            Mat<T> dgamma(1, g.cols);
            Mat<T> dbeta(1, g.cols);
            const T n = static_cast<T>(g.cols);
            for (int r = 0; r < g.rows; ++r) {
                T sum_g = 0;
                T sum_gx = 0;
                for (int c = 0; c < g.cols; ++c) {
                    const T gv = g.at(r, c) * gm.at(0, c);
                    sum_g += gv;
                    sum_gx += gv * xh.at(r, c);
                    dgamma.at(0, c) += g.at(r, c) * xh.at(r, c);
                    dbeta.at(0, c) += g.at(r, c);
                }
                const T rs = (*rstd_shared)[r];
                for (int c = 0; c < g.cols; ++c) {
                    const T gv = g.at(r, c) * gm.at(0, c);
                    dx.at(r, c) += rs * (gv - sum_g / n - xh.at(r, c) * sum_gx / n);
                }
            }
            accumulate(gamma, dgamma);
            accumulate(beta, dbeta);
        };
        return id;
    }

    // Gathers rows of a table node by index; gradients scatter-add back.
    Id gather_rows(Id table, const std::vector<int>& ids) {
        const Mat<T>& tv = value(table);
        Mat<T> out(static_cast<int>(ids.size()), tv.cols);
        for (std::size_t r = 0; r < ids.size(); ++r) {
            assert(ids[r] >= 0 && ids[r] < tv.rows);
            std::copy_n(tv.row(ids[r]), tv.cols, out.row(static_cast<int>(r)));
        }
        const Id id = record(std::move(out));
        auto ids_copy = std::make_shared<std::vector<int>>(ids);
        nodes_[id].back = [this, id, table, ids_copy] {
            const Mat<T>& g = grad(id);
            Mat<T>& tg = grad(table);
            for (std::size_t r = 0; r < ids_copy->size(); ++r) {
                kernels::axpy(T(1), g.row(static_cast<int>(r)), tg.row((*ids_copy)[r]), g.cols);
            }
        };
        return id;
    }

    // Mean softmax cross-entropy over rows whose label is not ignore_id.
    // Returns exactly 0 when every row is ignored; no gradient flows then.
    T masked_cross_entropy(Id logits, const std::vector<int>& labels, int ignore_id) {
        const Mat<T>& z = value(logits);
        assert(static_cast<int>(labels.size()) == z.rows);
        int active = 0;
        for (const int l : labels) {
            if (l != ignore_id) ++active;
        }
        loss_input_ = logits;
        loss_probs_ = Mat<T>(z.rows, z.cols);
        loss_labels_ = labels;
        loss_ignore_ = ignore_id;
        loss_active_ = active;
        if (active == 0) return T(0);

        T loss = 0;
        for (int r = 0; r < z.rows; ++r) {
            const T* row = z.row(r);
            T mx = row[0];
            for (int c = 1; c < z.cols; ++c) mx = std::max(mx, row[c]);
            T sum = 0;
            for (int c = 0; c < z.cols; ++c) {
                const T e = std::exp(row[c] - mx);
                loss_probs_.at(r, c) = e;
                sum += e;
            }
            for (int c = 0; c < z.cols; ++c) loss_probs_.at(r, c) /= sum;
            if (labels[r] != ignore_id) {
                loss -= std::log(std::max(loss_probs_.at(r, labels[r]),
                                          std::numeric_limits<T>::min()));
            }
        }
        return loss / static_cast<T>(active);
    }

    // Seeds d(loss)/d(logits) for the last masked_cross_entropy call and runs
    // the reverse pass. loss_scale multiplies the upstream gradient.
    void backward(T loss_scale = T(1)) {
        if (loss_input_ >= 0 && loss_active_ > 0) {
            Mat<T>& g = grad(loss_input_);
            const T inv = loss_scale / static_cast<T>(loss_active_);
            for (int r = 0; r < loss_probs_.rows; ++r) {
                if (loss_labels_[r] == loss_ignore_) continue;
                for (int c = 0; c < loss_probs_.cols; ++c) {
                    g.at(r, c) += inv * loss_probs_.at(r, c);
                }
                g.at(r, loss_labels_[r]) -= inv;
            }
        }
        for (Id id = last(); id >= 0; --id) {
            if (nodes_[id].back && nodes_[id].grad.rows != 0) nodes_[id].back();
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Mat<T> value;
        Mat<T> grad;  // lazily allocated
        std::function<void()> back;
    };

    Id record(Mat<T> value) {
        nodes_.push_back(Node{std::move(value), {}, nullptr});
        return last();
    }

    Id last() const { return static_cast<Id>(nodes_.size()) - 1; }

    void accumulate(Id id, const Mat<T>& delta) {
        Mat<T>& g = grad(id);
        kernels::axpy(T(1), delta.data.data(), g.data.data(), static_cast<int>(g.size()));
    }

    std::vector<Node> nodes_;
    Id loss_input_ = -1;
    Mat<T> loss_probs_;
    std::vector<int> loss_labels_;
    int loss_ignore_ = 0;
    int loss_active_ = 0;
};

// One Adam update; grads are consumed (caller zeroes afterwards).
template <typename T>
void adam_step(std::vector<Parameter<T>*>& params, T lr, T beta1, T beta2, T eps, int t,
               T grad_scale) {
    const T bc1 = T(1) - std::pow(beta1, static_cast<T>(t));
    const T bc2 = T(1) - std::pow(beta2, static_cast<T>(t));
    for (Parameter<T>* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const T g = p->grad.data[i] * grad_scale;
            p->adam_m.data[i] = beta1 * p->adam_m.data[i] + (T(1) - beta1) * g;
            p->adam_v.data[i] = beta2 * p->adam_v.data[i] + (T(1) - beta2) * g * g;
            const T mhat = p->adam_m.data[i] / bc1;
            const T vhat = p->adam_v.data[i] / bc2;
            p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace ner::tape
