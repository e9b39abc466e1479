#pragma once

#include "routecast/nn/tensor.hpp"

// OpenMP-parallel dense kernels. Every output element is produced by exactly
// one thread with a fixed summation order, so results do not depend on the
// thread count, and the forward convolutions agree bitwise with the serial
// loops in reference.hpp (given -ffp-contract=off).
namespace routecast::nn::kernels {

// C[M x N] = A[M x K] * B[K x N]; each C element sums k = 0..K-1 in order,
// starting from zero.
template <typename T>
void gemm(int M, int N, int K, const T *A, const T *B, T *C);

template <typename T>
void transpose(int rows, int cols, const T *src, T *dst);

// Convolution geometry for one image: input C x H x W, kernel k, stride s,
// padding p, output OH x OW.
struct ConvGeom {
    int channels, height, width, k, stride, pad, out_h, out_w;
};

// col[(c, kh, kw), (oh, ow)] = x[c, oh*s - p + kh, ow*s - p + kw] (0 outside).
template <typename T>
void im2col(const T *x, const ConvGeom &g, T *col);

// Adds col back into x; for each pixel the taps arrive in (kh, kw) order.
template <typename T>
void col2im_add(const T *col, const ConvGeom &g, T *x);

inline int conv_out_dim(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }
inline int conv_transpose_out_dim(int in, int k, int stride, int pad) { return (in - 1) * stride - 2 * pad + k; }

// x: N x Ci x H x W, w: Co x Ci x k x k.
template <typename T>
Tensor<T> conv2d(const Tensor<T> &x, const Tensor<T> &w, int stride, int pad);

// Accumulates into *dx and *dw when non-null.
template <typename T>
void conv2d_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy, int stride, int pad, Tensor<T> *dx,
                     Tensor<T> *dw);

// x: N x Ci x H x W, w: Ci x Co x k x k (the gradient of conv2d with the
// same weights, stride and padding).
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T> &x, const Tensor<T> &w, int stride, int pad);

template <typename T>
void conv_transpose2d_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy, int stride, int pad,
                               Tensor<T> *dx, Tensor<T> *dw);

} // namespace routecast::nn::kernels
