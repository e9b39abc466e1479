#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "routecast/nn/tensor.hpp"

namespace routecast::nn {

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad; // empty until something flows back
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node &)> backward;

    // Allocates a zero gradient on first use.
    Tensor<T> &grad_ref()
    {
        if (grad.empty())
            grad = Tensor<T>(value.shape());
        return grad;
    }
};

// Handle to a value in a dynamically built graph. Ops whose inputs need no
// gradient record nothing, so inference holds no graph.
template <typename T>
class Var {
  public:
    Var() = default;
    explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>())
    {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    const Tensor<T> &value() const { return node_->value; }
    Tensor<T> &value() { return node_->value; }
    Tensor<T> &grad() { return node_->grad_ref(); }
    bool has_grad() const { return !node_->grad.empty(); }
    void zero_grad() { node_->grad = Tensor<T>(); }
    bool requires_grad() const { return node_->requires_grad; }
    const Shape &shape() const { return node_->value.shape(); }
    const std::shared_ptr<Node<T>> &node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

  private:
    std::shared_ptr<Node<T>> node_;
};

// Seeds d(loss)/d(loss) = 1 and runs the graph in reverse topological order.
// loss must hold a single element.
template <typename T>
void backward(const Var<T> &loss);

// Same value, cut from the graph.
template <typename T>
Var<T> detach(const Var<T> &x);

template <typename T>
Var<T> conv2d(const Var<T> &x, const Var<T> &w, int stride, int pad);
template <typename T>
Var<T> conv_transpose2d(const Var<T> &x, const Var<T> &w, int stride, int pad);
// b has one entry per channel.
template <typename T>
Var<T> add_channel_bias(const Var<T> &x, const Var<T> &b);

template <typename T>
struct BatchNormStats {
    Tensor<T> running_mean;
    Tensor<T> running_var;
    explicit BatchNormStats(int channels = 0) : running_mean({channels}, T(0)), running_var({channels}, T(1)) {}
};

// Training mode normalizes with batch statistics and updates the running
// estimates (running = momentum * running + (1 - momentum) * batch, unbiased
// variance); inference mode uses the running estimates.
template <typename T>
Var<T> batchnorm(const Var<T> &x, const Var<T> &gamma, const Var<T> &beta, BatchNormStats<T> &stats, bool train,
                 T momentum = T(0.9), T eps = T(1e-5));

template <typename T>
Var<T> relu(const Var<T> &x);
template <typename T>
Var<T> leaky_relu(const Var<T> &x, T slope = T(0.2));
template <typename T>
Var<T> tanh(const Var<T> &x);
template <typename T>
Var<T> sigmoid(const Var<T> &x);
// Inverted dropout; identity when !train or rate == 0.
template <typename T>
Var<T> dropout(const Var<T> &x, T rate, std::mt19937_64 &rng, bool train);
// y = scale * x + shift.
template <typename T>
Var<T> affine(const Var<T> &x, T scale, T shift);
// Concatenates NCHW tensors along C.
template <typename T>
Var<T> concat_channels(const Var<T> &a, const Var<T> &b);
// Mean over everything except the batch axis: N x ... -> N x 1.
template <typename T>
Var<T> mean_per_sample(const Var<T> &x);

// Mean binary cross-entropy against a constant target; predictions are
// clamped to [1e-7, 1 - 1e-7].
template <typename T>
Var<T> bce(const Var<T> &pred, T target);
// Mean |a - b|.
template <typename T>
Var<T> l1(const Var<T> &a, const Var<T> &b);
template <typename T>
Var<T> add(const Var<T> &a, const Var<T> &b);
template <typename T>
Var<T> scale(const Var<T> &a, T s);

} // namespace routecast::nn
