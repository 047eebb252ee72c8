#include "sifted/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace sifted {

namespace {

using detail::Node;

std::size_t shape_product(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    n->leaf = true;
    return n;
}

// Result node of an op. If no parent requires grad the graph is not retained:
// the node degenerates to a constant leaf.
std::shared_ptr<Node> make_result(Shape shape, std::vector<double> value,
                                  std::vector<std::shared_ptr<Node>> parents,
                                  std::function<void(Node&)> backward) {
    bool needs = false;
    for (const auto& p : parents)
        if (p->requires_grad) needs = true;
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    if (needs) {
        n->requires_grad = true;
        n->leaf = false;
        n->parents = std::move(parents);
        n->backward = std::move(backward);
    }
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

// Decompose a shape around an axis into [outer, n, inner] for lane iteration.
struct AxisView {
    std::size_t outer, n, inner;
};

AxisView axis_view(const Shape& s, int axis) {
    int r = static_cast<int>(s.size());
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r)
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    AxisView v{1, s[axis], 1};
    for (int i = 0; i < axis; ++i) v.outer *= s[i];
    for (int i = axis + 1; i < r; ++i) v.inner *= s[i];
    return v;
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::size_t n = shape_product(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    std::size_t n = shape_product(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, v), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_product(shape) != data.size())
        throw ShapeError("from_data: " + shape_str(shape) + " incompatible with " +
                         std::to_string(data.size()) + " values");
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

Tensor Tensor::identity(std::size_t n, bool requires_grad) {
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
    return from_data({n, n}, std::move(d), requires_grad);
}

Tensor Tensor::xavier_uniform(Shape shape, std::mt19937_64& rng) {
    std::size_t fan_in = shape.empty() ? 1 : shape[0];
    std::size_t fan_out = shape.size() > 1 ? shape[1] : fan_in;
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::size_t n = shape_product(shape);
    std::vector<double> d(n);
    for (auto& x : d) x = dist(rng);
    return from_data(std::move(shape), std::move(d), true);
}

Tensor Tensor::gaussian(Shape shape, double stddev, std::mt19937_64& rng, bool requires_grad) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::size_t n = shape_product(shape);
    std::vector<double> d(n);
    for (auto& x : d) x = dist(rng);
    return from_data(std::move(shape), std::move(d), requires_grad);
}

std::size_t Tensor::rows() const { return rank() >= 2 ? shape()[0] : 1; }

std::size_t Tensor::cols() const { return rank() >= 2 ? shape()[1] : size(); }

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
    if (size() != 1)
        throw ShapeError("backward requires a scalar loss, got " + shape_str(shape()));

    // Iterative topological sort over the reachable graph.
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    struct Frame {
        Node* n;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.n->parents.size()) {
            Node* p = f.n->parents[f.next_parent++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(f.n);
            stack.pop_back();
        }
    }

    // Interior grads are scratch per sweep; leaf grads persist and accumulate.
    for (Node* n : topo) {
        if (n->leaf) {
            n->ensure_grad();
        } else {
            n->grad.assign(n->value.size(), 0.0);
        }
    }
    node_->grad[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        if (n->backward) {
            for (const auto& p : n->parents)
                if (p->requires_grad) p->ensure_grad();
            n->backward(*n);
        }
    }
}

Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind) {
    const char* names[] = {"add", "sub", "mul", "abs_diff"};
    check_same_shape(a, b, names[static_cast<int>(kind)]);
    std::size_t n = a.size();
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(n);
    switch (kind) {
        case EwKind::Add:
            for (std::size_t i = 0; i < n; ++i) out[i] = av[i] + bv[i];
            break;
        case EwKind::Sub:
            for (std::size_t i = 0; i < n; ++i) out[i] = av[i] - bv[i];
            break;
        case EwKind::Mul:
            for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * bv[i];
            break;
        case EwKind::AbsDiff:
            for (std::size_t i = 0; i < n; ++i) out[i] = std::abs(av[i] - bv[i]);
            break;
    }
    auto an = a.node();
    auto bn = b.node();
    auto bw = [an, bn, kind](detail::Node& self) {
        std::size_t n = self.size();
        const auto& g = self.grad;
        switch (kind) {
            case EwKind::Add:
                if (an->requires_grad)
                    for (std::size_t i = 0; i < n; ++i) an->grad[i] += g[i];
                if (bn->requires_grad)
                    for (std::size_t i = 0; i < n; ++i) bn->grad[i] += g[i];
                break;
            case EwKind::Sub:
                if (an->requires_grad)
                    for (std::size_t i = 0; i < n; ++i) an->grad[i] += g[i];
                if (bn->requires_grad)
                    for (std::size_t i = 0; i < n; ++i) bn->grad[i] -= g[i];
                break;
            case EwKind::Mul:
                if (an->requires_grad)
                    for (std::size_t i = 0; i < n; ++i) an->grad[i] += g[i] * bn->value[i];
                if (bn->requires_grad)
                    for (std::size_t i = 0; i < n; ++i) bn->grad[i] += g[i] * an->value[i];
                break;
            case EwKind::AbsDiff:
                // subgradient at a tie is 0
                for (std::size_t i = 0; i < n; ++i) {
                    double d = an->value[i] - bn->value[i];
                    double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                    if (an->requires_grad) an->grad[i] += g[i] * s;
                    if (bn->requires_grad) bn->grad[i] -= g[i] * s;
                }
                break;
        }
    };
    return Tensor(make_result(a.shape(), std::move(out), {an, bn}, std::move(bw)));
}

Tensor operator+(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::Add); }
Tensor operator-(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::Mul); }
Tensor abs_diff(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::AbsDiff); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = &bv[p * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    auto an = a.node();
    auto bn = b.node();
    auto bw = [an, bn, m, k, n](detail::Node& self) {
        const auto& g = self.grad;
        if (an->requires_grad) {
            // dA = dC . B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    const double* grow = &g[i * n];
                    const double* brow = &bn->value[p * n];
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    an->grad[i * k + p] += acc;
                }
        }
        if (bn->requires_grad) {
            // dB = A^T . dC
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double aip = an->value[i * k + p];
                    if (aip == 0.0) continue;
                    const double* grow = &g[i * n];
                    double* brow = &bn->grad[p * n];
                    for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
                }
        }
    };
    return Tensor(make_result({m, n}, std::move(out), {an, bn}, std::move(bw)));
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(a.shape()));
    std::size_t r = a.shape()[0], c = a.shape()[1];
    const auto& av = a.values();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
    auto an = a.node();
    auto bw = [an, r, c](detail::Node& self) {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) an->grad[i * c + j] += self.grad[j * r + i];
    };
    return Tensor(make_result({c, r}, std::move(out), {an}, std::move(bw)));
}

Tensor scale(const Tensor& a, double c) {
    std::size_t n = a.size();
    std::vector<double> out(n);
    const auto& av = a.values();
    for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * c;
    auto an = a.node();
    auto bw = [an, c](detail::Node& self) {
        for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i] * c;
    };
    return Tensor(make_result(a.shape(), std::move(out), {an}, std::move(bw)));
}

Tensor add_row_bias(const Tensor& m, const Tensor& bias) {
    std::size_t r = m.rows(), c = m.cols();
    if (bias.size() != c)
        throw ShapeError("add_row_bias: matrix " + shape_str(m.shape()) + " vs bias " +
                         shape_str(bias.shape()));
    const auto& mv = m.values();
    const auto& bv = bias.values();
    std::vector<double> out(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = mv[i * c + j] + bv[j];
    auto mn = m.node();
    auto bn = bias.node();
    auto bw = [mn, bn, r, c](detail::Node& self) {
        if (mn->requires_grad)
            for (std::size_t i = 0; i < r * c; ++i) mn->grad[i] += self.grad[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) bn->grad[j] += self.grad[i * c + j];
    };
    return Tensor(make_result(m.shape(), std::move(out), {mn, bn}, std::move(bw)));
}

Tensor sigmoid(const Tensor& x) {
    std::size_t n = x.size();
    const auto& xv = x.values();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = xv[i];
        // split form avoids overflow of exp for large |v|
        out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    auto xn = x.node();
    auto bw = [xn](detail::Node& self) {
        for (std::size_t i = 0; i < self.size(); ++i) {
            double y = self.value[i];
            xn->grad[i] += self.grad[i] * y * (1.0 - y);
        }
    };
    return Tensor(make_result(x.shape(), std::move(out), {xn}, std::move(bw)));
}

Tensor relu(const Tensor& x) {
    std::size_t n = x.size();
    const auto& xv = x.values();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    auto xn = x.node();
    auto bw = [xn](detail::Node& self) {
        for (std::size_t i = 0; i < self.size(); ++i)
            if (xn->value[i] > 0.0) xn->grad[i] += self.grad[i];
    };
    return Tensor(make_result(x.shape(), std::move(out), {xn}, std::move(bw)));
}

Tensor softmax(const Tensor& x, int axis) {
    AxisView v = axis_view(x.shape(), axis);
    const auto& xv = x.values();
    std::vector<double> out(x.size());
    for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t in = 0; in < v.inner; ++in) {
            std::size_t base = o * v.n * v.inner + in;
            double mx = xv[base];
            for (std::size_t i = 1; i < v.n; ++i)
                mx = std::max(mx, xv[base + i * v.inner]);
            double z = 0.0;
            for (std::size_t i = 0; i < v.n; ++i) {
                double e = std::exp(xv[base + i * v.inner] - mx);
                out[base + i * v.inner] = e;
                z += e;
            }
            for (std::size_t i = 0; i < v.n; ++i) out[base + i * v.inner] /= z;
        }
    auto xn = x.node();
    auto bw = [xn, v](detail::Node& self) {
        for (std::size_t o = 0; o < v.outer; ++o)
            for (std::size_t in = 0; in < v.inner; ++in) {
                std::size_t base = o * v.n * v.inner + in;
                double dot = 0.0;
                for (std::size_t i = 0; i < v.n; ++i) {
                    std::size_t k = base + i * v.inner;
                    dot += self.grad[k] * self.value[k];
                }
                for (std::size_t i = 0; i < v.n; ++i) {
                    std::size_t k = base + i * v.inner;
                    xn->grad[k] += self.value[k] * (self.grad[k] - dot);
                }
            }
    };
    return Tensor(make_result(x.shape(), std::move(out), {xn}, std::move(bw)));
}

Tensor masked_softmax_rows(const Tensor& scores, const std::vector<std::uint8_t>& key_valid) {
    if (scores.rank() != 2)
        throw ShapeError("masked_softmax_rows: expected rank 2, got " + shape_str(scores.shape()));
    std::size_t r = scores.shape()[0], c = scores.shape()[1];
    if (key_valid.size() != c)
        throw ShapeError("masked_softmax_rows: mask length " + std::to_string(key_valid.size()) +
                         " vs " + std::to_string(c) + " keys");
    const auto& sv = scores.values();
    std::vector<double> out(r * c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j)
            if (key_valid[j]) mx = std::max(mx, sv[i * c + j]);
        if (!std::isfinite(mx)) continue;  // fully masked row stays zero
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j)
            if (key_valid[j]) {
                double e = std::exp(sv[i * c + j] - mx);
                out[i * c + j] = e;
                z += e;
            }
        for (std::size_t j = 0; j < c; ++j)
            if (key_valid[j]) out[i * c + j] /= z;
    }
    auto sn = scores.node();
    auto mask = key_valid;
    auto bw = [sn, mask, r, c](detail::Node& self) {
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j)
                if (mask[j]) dot += self.grad[i * c + j] * self.value[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
                if (mask[j])
                    sn->grad[i * c + j] +=
                        self.value[i * c + j] * (self.grad[i * c + j] - dot);
        }
    };
    return Tensor(make_result(scores.shape(), std::move(out), {sn}, std::move(bw)));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size())
        throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s0));
    Shape out_shape = s0;
    std::size_t total = s0[axis];
    for (std::size_t p = 1; p < parts.size(); ++p) {
        const Shape& sp = parts[p].shape();
        if (sp.size() != s0.size())
            throw ShapeError("concat: rank mismatch " + shape_str(s0) + " vs " + shape_str(sp));
        for (std::size_t d = 0; d < s0.size(); ++d)
            if (d != axis && sp[d] != s0[d])
                throw ShapeError("concat: shape mismatch " + shape_str(s0) + " vs " +
                                 shape_str(sp));
        total += sp[axis];
    }
    out_shape[axis] = total;

    AxisView ov = axis_view(out_shape, static_cast<int>(axis));
    std::vector<double> out(ov.outer * ov.n * ov.inner);
    std::vector<std::size_t> offsets(parts.size());
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        offsets[p] = off;
        std::size_t pn = parts[p].shape()[axis];
        const auto& pv = parts[p].values();
        for (std::size_t o = 0; o < ov.outer; ++o)
            for (std::size_t i = 0; i < pn; ++i)
                for (std::size_t in = 0; in < ov.inner; ++in)
                    out[(o * ov.n + off + i) * ov.inner + in] =
                        pv[(o * pn + i) * ov.inner + in];
        off += pn;
    }

    std::vector<std::shared_ptr<detail::Node>> pnodes;
    for (const auto& t : parts) pnodes.push_back(t.node());
    std::vector<std::size_t> widths;
    for (const auto& t : parts) widths.push_back(t.shape()[axis]);
    auto bw = [pnodes, offsets, widths, ov](detail::Node& self) {
        for (std::size_t p = 0; p < pnodes.size(); ++p) {
            if (!pnodes[p]->requires_grad) continue;
            std::size_t pn = widths[p];
            for (std::size_t o = 0; o < ov.outer; ++o)
                for (std::size_t i = 0; i < pn; ++i)
                    for (std::size_t in = 0; in < ov.inner; ++in)
                        pnodes[p]->grad[(o * pn + i) * ov.inner + in] +=
                            self.grad[(o * ov.n + offsets[p] + i) * ov.inner + in];
        }
    };
    return Tensor(make_result(std::move(out_shape), std::move(out), std::move(pnodes),
                              std::move(bw)));
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_product(shape) != x.size())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                         " changes element count");
    auto xn = x.node();
    auto bw = [xn](detail::Node& self) {
        for (std::size_t i = 0; i < self.size(); ++i) xn->grad[i] += self.grad[i];
    };
    return Tensor(make_result(std::move(shape), x.values(), {xn}, std::move(bw)));
}

Tensor flatten_row(const Tensor& x) { return reshape(x, {1, x.size()}); }

Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate " + std::to_string(rate) +
                                    " outside [0, 1)");
    if (!training || rate == 0.0) return x;
    double keep = 1.0 - rate;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t n = x.size();
    const auto& xv = x.values();
    auto mask = std::make_shared<std::vector<double>>(n);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double m = u(rng) < rate ? 0.0 : 1.0 / keep;
        (*mask)[i] = m;
        out[i] = xv[i] * m;
    }
    auto xn = x.node();
    auto bw = [xn, mask](detail::Node& self) {
        for (std::size_t i = 0; i < self.size(); ++i)
            xn->grad[i] += self.grad[i] * (*mask)[i];
    };
    return Tensor(make_result(x.shape(), std::move(out), {xn}, std::move(bw)));
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double epsilon) {
    std::size_t r = x.rows(), c = x.cols();
    if (gain.size() != c || bias.size() != c)
        throw ShapeError("layer_norm_rows: width " + std::to_string(c) + " vs gain " +
                         shape_str(gain.shape()) + ", bias " + shape_str(bias.shape()));
    const auto& xv = x.values();
    const auto& gv = gain.values();
    const auto& bv = bias.values();
    std::vector<double> out(r * c);
    auto xhat = std::make_shared<std::vector<double>>(r * c);
    auto inv_std = std::make_shared<std::vector<double>>(r);
    for (std::size_t i = 0; i < r; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < c; ++j) mean += xv[i * c + j];
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            double d = xv[i * c + j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(c);
        double is = 1.0 / std::sqrt(var + epsilon);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < c; ++j) {
            double xh = (xv[i * c + j] - mean) * is;
            (*xhat)[i * c + j] = xh;
            out[i * c + j] = gv[j] * xh + bv[j];
        }
    }
    auto xn = x.node();
    auto gn = gain.node();
    auto bn = bias.node();
    auto bw = [xn, gn, bn, xhat, inv_std, r, c](detail::Node& self) {
        for (std::size_t i = 0; i < r; ++i) {
            double sum_dxh = 0.0, sum_dxh_xh = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                std::size_t k = i * c + j;
                double dxh = self.grad[k] * gn->value[j];
                sum_dxh += dxh;
                sum_dxh_xh += dxh * (*xhat)[k];
                if (gn->requires_grad) gn->grad[j] += self.grad[k] * (*xhat)[k];
                if (bn->requires_grad) bn->grad[j] += self.grad[k];
            }
            if (!xn->requires_grad) continue;
            double inv_c = 1.0 / static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j) {
                std::size_t k = i * c + j;
                double dxh = self.grad[k] * gn->value[j];
                xn->grad[k] += (*inv_std)[i] *
                               (dxh - inv_c * sum_dxh - (*xhat)[k] * inv_c * sum_dxh_xh);
            }
        }
    };
    return Tensor(make_result(x.shape(), std::move(out), {xn, gn, bn}, std::move(bw)));
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.values()) s += v;
    auto xn = x.node();
    auto bw = [xn](detail::Node& self) {
        for (std::size_t i = 0; i < xn->value.size(); ++i) xn->grad[i] += self.grad[0];
    };
    return Tensor(make_result({1}, {s}, {xn}, std::move(bw)));
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.size())); }

Tensor log_clamped(const Tensor& x, double floor) {
    std::size_t n = x.size();
    const auto& xv = x.values();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = std::log(std::max(xv[i], floor));
    auto xn = x.node();
    // backward keeps the 1/x slope at the floor, so a saturated softmax can
    // still recover instead of freezing at exactly-zero gradient
    auto bw = [xn, floor](detail::Node& self) {
        for (std::size_t i = 0; i < self.size(); ++i)
            xn->grad[i] += self.grad[i] / std::max(xn->value[i], floor);
    };
    return Tensor(make_result(x.shape(), std::move(out), {xn}, std::move(bw)));
}

Tensor pick(const Tensor& x, std::size_t flat_index) {
    if (flat_index >= x.size())
        throw ShapeError("pick: index " + std::to_string(flat_index) + " out of range for " +
                         shape_str(x.shape()));
    auto xn = x.node();
    auto bw = [xn, flat_index](detail::Node& self) { xn->grad[flat_index] += self.grad[0]; };
    return Tensor(make_result({1}, {x.value_at(flat_index)}, {xn}, std::move(bw)));
}

Tensor add_n(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ShapeError("add_n: no inputs");
    std::size_t n = xs[0].size();
    for (const auto& t : xs) check_same_shape(xs[0], t, "add_n");
    std::vector<double> out(n, 0.0);
    for (const auto& t : xs)
        for (std::size_t i = 0; i < n; ++i) out[i] += t.values()[i];
    std::vector<std::shared_ptr<detail::Node>> pnodes;
    for (const auto& t : xs) pnodes.push_back(t.node());
    auto bw = [pnodes](detail::Node& self) {
        for (const auto& p : pnodes)
            if (p->requires_grad)
                for (std::size_t i = 0; i < self.size(); ++i) p->grad[i] += self.grad[i];
    };
    return Tensor(make_result(xs[0].shape(), std::move(out), std::move(pnodes), std::move(bw)));
}

Tensor gather_rows(const Tensor& table, const std::vector<long>& ids) {
    if (table.rank() != 2)
        throw ShapeError("gather_rows: table must be rank 2, got " + shape_str(table.shape()));
    std::size_t rows = table.shape()[0], c = table.shape()[1];
    std::vector<double> out(ids.size() * c, 0.0);
    const auto& tv = table.values();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        long id = ids[i];
        if (id < 0) continue;
        if (static_cast<std::size_t>(id) >= rows)
            throw ShapeError("gather_rows: id " + std::to_string(id) + " out of range for " +
                             shape_str(table.shape()));
        std::copy(tv.begin() + id * c, tv.begin() + (id + 1) * c, out.begin() + i * c);
    }
    auto tn = table.node();
    auto ids_copy = ids;
    auto bw = [tn, ids_copy, c](detail::Node& self) {
        for (std::size_t i = 0; i < ids_copy.size(); ++i) {
            long id = ids_copy[i];
            if (id < 0) continue;
            for (std::size_t j = 0; j < c; ++j)
                tn->grad[id * c + j] += self.grad[i * c + j];
        }
    };
    return Tensor(make_result({ids.size(), c}, std::move(out), {tn}, std::move(bw)));
}

}  // namespace sifted
