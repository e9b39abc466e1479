#pragma once

#include "routecast/nn/tensor.hpp"

// Serial textbook loops. The forward functions sum each output element in
// the same order as the optimized kernels, so the two agree bitwise.
namespace routecast::nn::reference {

template <typename T>
void gemm(int M, int N, int K, const T *A, const T *B, T *C);

template <typename T>
Tensor<T> conv2d(const Tensor<T> &x, const Tensor<T> &w, int stride, int pad);

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T> &x, const Tensor<T> &w, int stride, int pad);

// Gradients by direct scatter; outputs are overwritten.
template <typename T>
void conv2d_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy, int stride, int pad, Tensor<T> &dx,
                     Tensor<T> &dw);

template <typename T>
void conv_transpose2d_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy, int stride, int pad,
                               Tensor<T> &dx, Tensor<T> &dw);

} // namespace routecast::nn::reference
