#include "routecast/nn/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "routecast/nn/kernels.hpp"

namespace routecast::nn {

namespace {

template <typename T>
Var<T> make_op(Tensor<T> value, std::initializer_list<Var<T>> inputs, std::function<void(Node<T> &)> bw)
{
    Var<T> out(std::move(value));
    bool needs = false;
    for (const auto &v : inputs)
        needs = needs || v.requires_grad();
    if (needs) {
        auto &n = *out.node();
        n.requires_grad = true;
        for (const auto &v : inputs)
            n.inputs.push_back(v.node());
        n.backward = std::move(bw);
    }
    return out;
}

template <typename T>
bool wants(const Node<T> &self, size_t i)
{
    return self.inputs[i]->requires_grad;
}

void require_same(const Shape &a, const Shape &b, const char *op)
{
    if (a != b)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_rank4(const Shape &a, const char *op)
{
    if (a.size() != 4)
        throw std::invalid_argument(std::string(op) + ": expected NCHW, got " + shape_str(a));
}

// Elementwise op whose derivative is a function of (input, output).
template <typename T, typename F, typename D>
Var<T> unary(const Var<T> &x, F f, D df)
{
    Tensor<T> y(x.shape());
    const T *xs = x.value().data();
    T *ys = y.data();
    const long long n = static_cast<long long>(y.size());
#pragma omp parallel for schedule(static) if (n > 65536)
    for (long long i = 0; i < n; ++i)
        ys[i] = f(xs[i]);
    return make_op<T>(std::move(y), {x}, [df](Node<T> &self) {
        Node<T> &in = *self.inputs[0];
        T *g = in.grad_ref().data();
        const T *xs = in.value.data(), *ys = self.value.data(), *gy = self.grad.data();
        const long long n = static_cast<long long>(self.value.size());
#pragma omp parallel for schedule(static) if (n > 65536)
        for (long long i = 0; i < n; ++i)
            g[i] += gy[i] * df(xs[i], ys[i]);
    });
}

} // namespace

template <typename T>
void backward(const Var<T> &loss)
{
    if (loss.value().size() != 1)
        throw std::invalid_argument("backward: loss must be a scalar, got " + shape_str(loss.shape()));
    if (!loss.requires_grad())
        return;
    // Iterative post-order DFS gives a topological order.
    std::vector<Node<T> *> order;
    std::unordered_set<Node<T> *> seen;
    std::vector<std::pair<Node<T> *, size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto &[n, i] = stack.back();
        if (i < n->inputs.size()) {
            Node<T> *c = n->inputs[i++].get();
            if (c->requires_grad && seen.insert(c).second)
                stack.push_back({c, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    loss.node()->grad_ref()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward && !(*it)->grad.empty())
            (*it)->backward(**it);
}

template <typename T>
Var<T> detach(const Var<T> &x)
{
    return Var<T>(x.value());
}

template <typename T>
Var<T> conv2d(const Var<T> &x, const Var<T> &w, int stride, int pad)
{
    return make_op<T>(kernels::conv2d(x.value(), w.value(), stride, pad), {x, w}, [stride, pad](Node<T> &self) {
        Node<T> &xn = *self.inputs[0], &wn = *self.inputs[1];
        kernels::conv2d_backward(xn.value, wn.value, self.grad, stride, pad, wants(self, 0) ? &xn.grad_ref() : nullptr,
                                 wants(self, 1) ? &wn.grad_ref() : nullptr);
    });
}

template <typename T>
Var<T> conv_transpose2d(const Var<T> &x, const Var<T> &w, int stride, int pad)
{
    return make_op<T>(kernels::conv_transpose2d(x.value(), w.value(), stride, pad), {x, w},
                      [stride, pad](Node<T> &self) {
                          Node<T> &xn = *self.inputs[0], &wn = *self.inputs[1];
                          kernels::conv_transpose2d_backward(xn.value, wn.value, self.grad, stride, pad,
                                                             wants(self, 0) ? &xn.grad_ref() : nullptr,
                                                             wants(self, 1) ? &wn.grad_ref() : nullptr);
                      });
}

template <typename T>
Var<T> add_channel_bias(const Var<T> &x, const Var<T> &b)
{
    require_rank4(x.shape(), "add_channel_bias");
    const int N = x.value().dim(0), C = x.value().dim(1);
    const size_t HW = static_cast<size_t>(x.value().dim(2)) * x.value().dim(3);
    if (b.value().size() != static_cast<size_t>(C))
        throw std::invalid_argument("add_channel_bias: bias size does not match channels");
    Tensor<T> y = x.value();
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            T *p = y.data() + (static_cast<size_t>(n) * C + c) * HW;
            for (size_t i = 0; i < HW; ++i)
                p[i] += b.value()[c];
        }
    return make_op<T>(std::move(y), {x, b}, [N, C, HW](Node<T> &self) {
        if (wants(self, 0)) {
            Tensor<T> &g = self.inputs[0]->grad_ref();
            for (size_t i = 0; i < g.size(); ++i)
                g[i] += self.grad[i];
        }
        if (wants(self, 1)) {
            Tensor<T> &gb = self.inputs[1]->grad_ref();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const T *p = self.grad.data() + (static_cast<size_t>(n) * C + c) * HW;
                    T s = 0;
                    for (size_t i = 0; i < HW; ++i)
                        s += p[i];
                    gb[c] += s;
                }
        }
    });
}

template <typename T>
Var<T> batchnorm(const Var<T> &x, const Var<T> &gamma, const Var<T> &beta, BatchNormStats<T> &stats, bool train,
                 T momentum, T eps)
{
    require_rank4(x.shape(), "batchnorm");
    const int N = x.value().dim(0), C = x.value().dim(1);
    const size_t HW = static_cast<size_t>(x.value().dim(2)) * x.value().dim(3);
    const size_t M = N * HW;
    if (gamma.value().size() != static_cast<size_t>(C) || beta.value().size() != static_cast<size_t>(C) ||
        stats.running_mean.size() != static_cast<size_t>(C))
        throw std::invalid_argument("batchnorm: parameter size does not match channels");
    auto off = [C, HW](int n, int c) { return (static_cast<size_t>(n) * C + c) * HW; };

    std::vector<T> mean(C), inv_std(C);
    if (train) {
        for (int c = 0; c < C; ++c) {
            double s = 0, ss = 0;
            for (int n = 0; n < N; ++n) {
                const T *p = x.value().data() + off(n, c);
                for (size_t i = 0; i < HW; ++i)
                    s += p[i];
            }
            const double m = s / static_cast<double>(M);
            for (int n = 0; n < N; ++n) {
                const T *p = x.value().data() + off(n, c);
                for (size_t i = 0; i < HW; ++i)
                    ss += (p[i] - m) * (p[i] - m);
            }
            const double var = ss / static_cast<double>(M);
            mean[c] = static_cast<T>(m);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
            const double unbiased = M > 1 ? ss / static_cast<double>(M - 1) : var;
            stats.running_mean[c] = static_cast<T>(momentum * stats.running_mean[c] + (1 - momentum) * m);
            stats.running_var[c] = static_cast<T>(momentum * stats.running_var[c] + (1 - momentum) * unbiased);
        }
    } else {
        for (int c = 0; c < C; ++c) {
            mean[c] = stats.running_mean[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(stats.running_var[c]) + eps));
        }
    }

    auto xhat = std::make_shared<Tensor<T>>(x.shape());
    Tensor<T> y(x.shape());
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T *p = x.value().data() + off(n, c);
            T *h = xhat->data() + off(n, c);
            T *q = y.data() + off(n, c);
            const T g = gamma.value()[c], b = beta.value()[c];
            for (size_t i = 0; i < HW; ++i) {
                h[i] = (p[i] - mean[c]) * inv_std[c];
                q[i] = g * h[i] + b;
            }
        }

    return make_op<T>(std::move(y), {x, gamma, beta}, [=](Node<T> &self) {
        const T *gy = self.grad.data();
        const Tensor<T> &gam = self.inputs[1]->value;
        for (int c = 0; c < C; ++c) {
            T sum_dy = 0, sum_dy_h = 0;
            for (int n = 0; n < N; ++n) {
                const T *d = gy + off(n, c), *h = xhat->data() + off(n, c);
                for (size_t i = 0; i < HW; ++i) {
                    sum_dy += d[i];
                    sum_dy_h += d[i] * h[i];
                }
            }
            if (wants(self, 1))
                self.inputs[1]->grad_ref()[c] += sum_dy_h;
            if (wants(self, 2))
                self.inputs[2]->grad_ref()[c] += sum_dy;
            if (!wants(self, 0))
                continue;
            T *gx = self.inputs[0]->grad_ref().data();
            const T k = gam[c] * inv_std[c];
            const T mdy = sum_dy / static_cast<T>(M), mdyh = sum_dy_h / static_cast<T>(M);
            for (int n = 0; n < N; ++n) {
                const T *d = gy + off(n, c), *h = xhat->data() + off(n, c);
                T *g = gx + off(n, c);
                if (train)
                    for (size_t i = 0; i < HW; ++i)
                        g[i] += k * (d[i] - mdy - h[i] * mdyh);
                else
                    for (size_t i = 0; i < HW; ++i)
                        g[i] += k * d[i];
            }
        }
    });
}

template <typename T>
Var<T> relu(const Var<T> &x)
{
    return unary<T>(x, [](T v) { return v > 0 ? v : T(0); }, [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
Var<T> leaky_relu(const Var<T> &x, T slope)
{
    return unary<T>(
        x, [slope](T v) { return v > 0 ? v : slope * v; }, [slope](T v, T) { return v > 0 ? T(1) : slope; });
}

template <typename T>
Var<T> tanh(const Var<T> &x)
{
    return unary<T>(x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Var<T> sigmoid(const Var<T> &x)
{
    return unary<T>(
        x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> dropout(const Var<T> &x, T rate, std::mt19937_64 &rng, bool train)
{
    if (!train || rate <= 0)
        return x;
    if (rate >= 1)
        throw std::invalid_argument("dropout: rate must be < 1");
    auto mask = std::make_shared<Tensor<T>>(x.shape());
    std::bernoulli_distribution keep(1.0 - static_cast<double>(rate));
    const T s = T(1) / (T(1) - rate);
    for (size_t i = 0; i < mask->size(); ++i)
        (*mask)[i] = keep(rng) ? s : T(0);
    Tensor<T> y(x.shape());
    for (size_t i = 0; i < y.size(); ++i)
        y[i] = x.value()[i] * (*mask)[i];
    return make_op<T>(std::move(y), {x}, [mask](Node<T> &self) {
        Tensor<T> &g = self.inputs[0]->grad_ref();
        for (size_t i = 0; i < g.size(); ++i)
            g[i] += self.grad[i] * (*mask)[i];
    });
}

template <typename T>
Var<T> affine(const Var<T> &x, T scale_, T shift)
{
    return unary<T>(x, [=](T v) { return scale_ * v + shift; }, [=](T, T) { return scale_; });
}

template <typename T>
Var<T> concat_channels(const Var<T> &a, const Var<T> &b)
{
    require_rank4(a.shape(), "concat_channels");
    require_rank4(b.shape(), "concat_channels");
    const int N = a.value().dim(0), Ca = a.value().dim(1), Cb = b.value().dim(1);
    if (b.value().dim(0) != N || b.value().dim(2) != a.value().dim(2) || b.value().dim(3) != a.value().dim(3))
        throw std::invalid_argument("concat_channels: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    const size_t HW = static_cast<size_t>(a.value().dim(2)) * a.value().dim(3);
    const size_t na = Ca * HW, nb = Cb * HW;
    Tensor<T> y({N, Ca + Cb, a.value().dim(2), a.value().dim(3)});
    for (int n = 0; n < N; ++n) {
        std::copy_n(a.value().data() + n * na, na, y.data() + n * (na + nb));
        std::copy_n(b.value().data() + n * nb, nb, y.data() + n * (na + nb) + na);
    }
    return make_op<T>(std::move(y), {a, b}, [N, na, nb](Node<T> &self) {
        for (int n = 0; n < N; ++n) {
            const T *g = self.grad.data() + n * (na + nb);
            if (wants(self, 0)) {
                T *ga = self.inputs[0]->grad_ref().data() + n * na;
                for (size_t i = 0; i < na; ++i)
                    ga[i] += g[i];
            }
            if (wants(self, 1)) {
                T *gb = self.inputs[1]->grad_ref().data() + n * nb;
                for (size_t i = 0; i < nb; ++i)
                    gb[i] += g[na + i];
            }
        }
    });
}

template <typename T>
Var<T> mean_per_sample(const Var<T> &x)
{
    const int N = x.value().dim(0);
    const size_t per = x.value().size() / N;
    Tensor<T> y({N, 1});
    for (int n = 0; n < N; ++n) {
        T s = 0;
        for (size_t i = 0; i < per; ++i)
            s += x.value()[n * per + i];
        y[n] = s / static_cast<T>(per);
    }
    return make_op<T>(std::move(y), {x}, [N, per](Node<T> &self) {
        Tensor<T> &g = self.inputs[0]->grad_ref();
        for (int n = 0; n < N; ++n) {
            const T d = self.grad[n] / static_cast<T>(per);
            for (size_t i = 0; i < per; ++i)
                g[n * per + i] += d;
        }
    });
}

template <typename T>
Var<T> bce(const Var<T> &pred, T target)
{
    static constexpr T kEps = T(1e-7);
    const size_t n = pred.value().size();
    if (n == 0)
        throw std::invalid_argument("bce: empty prediction");
    double s = 0;
    for (size_t i = 0; i < n; ++i) {
        const double p = std::clamp(pred.value()[i], kEps, T(1) - kEps);
        s -= target * std::log(p) + (1 - target) * std::log(1 - p);
    }
    Tensor<T> y({1}, static_cast<T>(s / static_cast<double>(n)));
    return make_op<T>(std::move(y), {pred}, [target, n](Node<T> &self) {
        Node<T> &in = *self.inputs[0];
        Tensor<T> &g = in.grad_ref();
        const T up = self.grad[0] / static_cast<T>(n);
        for (size_t i = 0; i < n; ++i) {
            const T p = std::clamp(in.value[i], kEps, T(1) - kEps);
            g[i] += up * (-target / p + (T(1) - target) / (T(1) - p));
        }
    });
}

template <typename T>
Var<T> l1(const Var<T> &a, const Var<T> &b)
{
    require_same(a.shape(), b.shape(), "l1");
    const size_t n = a.value().size();
    double s = 0;
    for (size_t i = 0; i < n; ++i)
        s += std::abs(static_cast<double>(a.value()[i]) - b.value()[i]);
    Tensor<T> y({1}, static_cast<T>(s / static_cast<double>(n)));
    return make_op<T>(std::move(y), {a, b}, [n](Node<T> &self) {
        const Tensor<T> &av = self.inputs[0]->value, &bv = self.inputs[1]->value;
        const T up = self.grad[0] / static_cast<T>(n);
        for (int side = 0; side < 2; ++side) {
            if (!wants(self, side))
                continue;
            Tensor<T> &g = self.inputs[side]->grad_ref();
            const T sign = side == 0 ? T(1) : T(-1);
            for (size_t i = 0; i < n; ++i) {
                const T d = av[i] - bv[i];
                if (d != 0)
                    g[i] += sign * up * (d > 0 ? T(1) : T(-1));
            }
        }
    });
}

template <typename T>
Var<T> add(const Var<T> &a, const Var<T> &b)
{
    require_same(a.shape(), b.shape(), "add");
    Tensor<T> y = a.value();
    for (size_t i = 0; i < y.size(); ++i)
        y[i] += b.value()[i];
    return make_op<T>(std::move(y), {a, b}, [](Node<T> &self) {
        for (size_t side = 0; side < 2; ++side) {
            if (!wants(self, side))
                continue;
            Tensor<T> &g = self.inputs[side]->grad_ref();
            for (size_t i = 0; i < g.size(); ++i)
                g[i] += self.grad[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T> &a, T s)
{
    return affine(a, s, T(0));
}

#define ROUTECAST_INSTANTIATE(T)                                                                                      \
    template void backward<T>(const Var<T> &);                                                                        \
    template Var<T> detach<T>(const Var<T> &);                                                                        \
    template Var<T> conv2d<T>(const Var<T> &, const Var<T> &, int, int);                                              \
    template Var<T> conv_transpose2d<T>(const Var<T> &, const Var<T> &, int, int);                                    \
    template Var<T> add_channel_bias<T>(const Var<T> &, const Var<T> &);                                              \
    template Var<T> batchnorm<T>(const Var<T> &, const Var<T> &, const Var<T> &, BatchNormStats<T> &, bool, T, T);    \
    template Var<T> relu<T>(const Var<T> &);                                                                          \
    template Var<T> leaky_relu<T>(const Var<T> &, T);                                                                 \
    template Var<T> tanh<T>(const Var<T> &);                                                                          \
    template Var<T> sigmoid<T>(const Var<T> &);                                                                       \
    template Var<T> dropout<T>(const Var<T> &, T, std::mt19937_64 &, bool);                                           \
    template Var<T> affine<T>(const Var<T> &, T, T);                                                                  \
    template Var<T> concat_channels<T>(const Var<T> &, const Var<T> &);                                               \
    template Var<T> mean_per_sample<T>(const Var<T> &);                                                               \
    template Var<T> bce<T>(const Var<T> &, T);                                                                        \
    template Var<T> l1<T>(const Var<T> &, const Var<T> &);                                                            \
    template Var<T> add<T>(const Var<T> &, const Var<T> &);                                                           \
    template Var<T> scale<T>(const Var<T> &, T);

ROUTECAST_INSTANTIATE(float)
ROUTECAST_INSTANTIATE(double)

#undef ROUTECAST_INSTANTIATE

} // namespace routecast::nn
