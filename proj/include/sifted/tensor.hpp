#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sifted {

class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

namespace detail {

// One record of the autodiff graph. Interior nodes hold a backward function
// that reads this node's grad and accumulates into the parents' grads.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily
    bool requires_grad = false;
    bool leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    std::size_t size() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Dense f64 tensor participating in a reverse-mode autodiff graph. Values are
// immutable once created except through values_mut(), which is for leaves
// (optimizer updates, finite-difference probes). Copies share the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double v);
    static Tensor identity(std::size_t n, bool requires_grad = false);
    // Xavier-uniform init over (fan_in, fan_out) = (rows, cols); trainable.
    static Tensor xavier_uniform(Shape shape, std::mt19937_64& rng);
    static Tensor gaussian(Shape shape, double stddev, std::mt19937_64& rng,
                           bool requires_grad = true);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& values_mut() { return node_->value; }
    // Gradient buffer; empty until a backward pass reaches this tensor.
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }

    double value_at(std::size_t flat) const { return node_->value[flat]; }
    double at(std::size_t r, std::size_t c) const;

    void zero_grad();

    // Reverse-mode sweep from a scalar. Leaf grads accumulate across calls;
    // interior grads are recomputed each call.
    void backward() const;

    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

enum class EwKind { Add, Sub, Mul, AbsDiff };

Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind);
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor abs_diff(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor scale(const Tensor& a, double c);
// m: r x c plus a bias row of width c (the one sanctioned broadcast).
Tensor add_row_bias(const Tensor& m, const Tensor& bias);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
// Max-subtracted softmax along `axis` (negative counts from the back).
Tensor softmax(const Tensor& x, int axis = -1);
// Row-wise softmax over the columns where key_valid is nonzero; weights for
// invalid keys are exactly zero, and a row with no valid key is all zeros.
Tensor masked_softmax_rows(const Tensor& scores, const std::vector<std::uint8_t>& key_valid);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
Tensor flatten_row(const Tensor& x);  // to 1 x size
// Inverted dropout: zero with probability `rate`, scale survivors by
// 1/(1-rate); identity when not training or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool training, std::mt19937_64& rng);
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double epsilon = 1e-5);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor log_clamped(const Tensor& x, double floor);
Tensor pick(const Tensor& x, std::size_t flat_index);
Tensor add_n(const std::vector<Tensor>& xs);
// out[i] = table[ids[i]]; ids[i] < 0 selects an all-zero row with no gradient.
Tensor gather_rows(const Tensor& table, const std::vector<long>& ids);

}  // namespace sifted
