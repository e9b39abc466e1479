#include "routecast/nn/reference.hpp"

#include "routecast/nn/kernels.hpp"

namespace routecast::nn::reference {

template <typename T>
void gemm(int M, int N, int K, const T *A, const T *B, T *C)
{
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            T s = 0;
            for (int k = 0; k < K; ++k)
                s += A[static_cast<size_t>(i) * K + k] * B[static_cast<size_t>(k) * N + j];
            C[static_cast<size_t>(i) * N + j] = s;
        }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T> &x, const Tensor<T> &w, int stride, int pad)
{
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), k = w.dim(2);
    const int OH = kernels::conv_out_dim(H, k, stride, pad), OW = kernels::conv_out_dim(W, k, stride, pad);
    Tensor<T> y({N, Co, OH, OW});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    T s = 0;
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int kh = 0; kh < k; ++kh)
                            for (int kw = 0; kw < k; ++kw) {
                                const int ih = oh * stride - pad + kh, iw = ow * stride - pad + kw;
                                if (ih >= 0 && ih < H && iw >= 0 && iw < W)
                                    s += w.at(co, ci, kh, kw) * x.at(n, ci, ih, iw);
                                else
                                    s += w.at(co, ci, kh, kw) * T(0);
                            }
                    y.at(n, co, oh, ow) = s;
                }
    return y;
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T> &x, const Tensor<T> &w, int stride, int pad)
{
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(1), k = w.dim(2);
    const int OH = kernels::conv_transpose_out_dim(H, k, stride, pad);
    const int OW = kernels::conv_transpose_out_dim(W, k, stride, pad);
    Tensor<T> y({N, Co, OH, OW});
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    T acc = 0;
                    for (int kh = 0; kh < k; ++kh) {
                        const int hs = oh + pad - kh;
                        if (hs < 0 || hs % stride != 0 || hs / stride >= H)
                            continue;
                        for (int kw = 0; kw < k; ++kw) {
                            const int ws = ow + pad - kw;
                            if (ws < 0 || ws % stride != 0 || ws / stride >= W)
                                continue;
                            T part = 0;
                            for (int ci = 0; ci < Ci; ++ci)
                                part += w.at(ci, co, kh, kw) * x.at(n, ci, hs / stride, ws / stride);
                            acc += part;
                        }
                    }
                    y.at(n, co, oh, ow) = acc;
                }
    return y;
}

template <typename T>
void conv2d_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy, int stride, int pad, Tensor<T> &dx,
                     Tensor<T> &dw)
{
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), k = w.dim(2), OH = dy.dim(2), OW = dy.dim(3);
    dx = Tensor<T>(x.shape());
    dw = Tensor<T>(w.shape());
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    const T g = dy.at(n, co, oh, ow);
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int kh = 0; kh < k; ++kh)
                            for (int kw = 0; kw < k; ++kw) {
                                const int ih = oh * stride - pad + kh, iw = ow * stride - pad + kw;
                                if (ih < 0 || ih >= H || iw < 0 || iw >= W)
                                    continue;
                                dx.at(n, ci, ih, iw) += g * w.at(co, ci, kh, kw);
                                dw.at(co, ci, kh, kw) += g * x.at(n, ci, ih, iw);
                            }
                }
}

template <typename T>
void conv_transpose2d_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy, int stride, int pad,
                               Tensor<T> &dx, Tensor<T> &dw)
{
    // y[co, ih*s - p + kh, iw*s - p + kw] += w[ci, co, kh, kw] * x[ci, ih, iw]
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(1), k = w.dim(2), OH = dy.dim(2), OW = dy.dim(3);
    dx = Tensor<T>(x.shape());
    dw = Tensor<T>(w.shape());
    for (int n = 0; n < N; ++n)
        for (int ci = 0; ci < Ci; ++ci)
            for (int ih = 0; ih < H; ++ih)
                for (int iw = 0; iw < W; ++iw)
                    for (int co = 0; co < Co; ++co)
                        for (int kh = 0; kh < k; ++kh)
                            for (int kw = 0; kw < k; ++kw) {
                                const int oh = ih * stride - pad + kh, ow = iw * stride - pad + kw;
                                if (oh < 0 || oh >= OH || ow < 0 || ow >= OW)
                                    continue;
                                const T g = dy.at(n, co, oh, ow);
                                dx.at(n, ci, ih, iw) += g * w.at(ci, co, kh, kw);
                                dw.at(ci, co, kh, kw) += g * x.at(n, ci, ih, iw);
                            }
}

#define ROUTECAST_INSTANTIATE(T)                                                                                      \
    template void gemm<T>(int, int, int, const T *, const T *, T *);                                                  \
    template Tensor<T> conv2d<T>(const Tensor<T> &, const Tensor<T> &, int, int);                                     \
    template Tensor<T> conv_transpose2d<T>(const Tensor<T> &, const Tensor<T> &, int, int);                           \
    template void conv2d_backward<T>(const Tensor<T> &, const Tensor<T> &, const Tensor<T> &, int, int, Tensor<T> &,  \
                                     Tensor<T> &);                                                                    \
    template void conv_transpose2d_backward<T>(const Tensor<T> &, const Tensor<T> &, const Tensor<T> &, int, int,     \
                                               Tensor<T> &, Tensor<T> &);

ROUTECAST_INSTANTIATE(float)
ROUTECAST_INSTANTIATE(double)

#undef ROUTECAST_INSTANTIATE

} // namespace routecast::nn::reference
