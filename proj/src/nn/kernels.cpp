#include "routecast/nn/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace routecast::nn::kernels {

namespace {

constexpr int kMR = 6;

template <typename T>
constexpr int panel_width()
{
    return 128 / static_cast<int>(sizeof(T));
}

// Full MR x NR tile held in 2 * MR 64-byte vector registers; k runs in order.
template <typename T, int NR>
inline void micro_tile(int K, const T *A, int lda, const T *Bp, T *C, int ldc)
{
    using V [[gnu::vector_size(64)]] = T;
    constexpr int L = 64 / sizeof(T);
    static_assert(NR == 2 * L);
    V acc[kMR][2] = {};
    for (int k = 0; k < K; ++k) {
        V b0, b1;
        std::memcpy(&b0, Bp + static_cast<size_t>(k) * NR, sizeof(V));
        std::memcpy(&b1, Bp + static_cast<size_t>(k) * NR + L, sizeof(V));
#pragma GCC unroll 6
        for (int r = 0; r < kMR; ++r) {
            const T a = A[static_cast<size_t>(r) * lda + k];
            acc[r][0] += a * b0;
            acc[r][1] += a * b1;
        }
    }
    for (int r = 0; r < kMR; ++r) {
        std::memcpy(C + static_cast<size_t>(r) * ldc, &acc[r][0], sizeof(V));
        std::memcpy(C + static_cast<size_t>(r) * ldc + L, &acc[r][1], sizeof(V));
    }
}

// Ragged tile. The panel is zero-padded, so full vectors are still safe to
// compute; only the valid mr x nr corner is stored.
template <typename T, int NR>
inline void edge_tile(int mr, int nr, int K, const T *A, int lda, const T *Bp, T *C, int ldc)
{
    using V [[gnu::vector_size(64)]] = T;
    constexpr int L = 64 / sizeof(T);
    V acc[kMR][2] = {};
    for (int k = 0; k < K; ++k) {
        V b0, b1;
        std::memcpy(&b0, Bp + static_cast<size_t>(k) * NR, sizeof(V));
        std::memcpy(&b1, Bp + static_cast<size_t>(k) * NR + L, sizeof(V));
        for (int r = 0; r < mr; ++r) {
            const T a = A[static_cast<size_t>(r) * lda + k];
            acc[r][0] += a * b0;
            acc[r][1] += a * b1;
        }
    }
    for (int r = 0; r < mr; ++r) {
        T row[NR];
        std::memcpy(row, &acc[r][0], sizeof(V));
        std::memcpy(row + L, &acc[r][1], sizeof(V));
        std::memcpy(C + static_cast<size_t>(r) * ldc, row, sizeof(T) * nr);
    }
}

void check_conv(const Shape &x, const Shape &w, int ci_axis)
{
    if (x.size() != 4 || w.size() != 4)
        throw std::invalid_argument("conv: expected 4-d input and weight, got " + shape_str(x) + " and " +
                                    shape_str(w));
    if (x[1] != w[ci_axis])
        throw std::invalid_argument("conv: channel mismatch between input " + shape_str(x) + " and weight " +
                                    shape_str(w));
    if (w[2] != w[3])
        throw std::invalid_argument("conv: only square kernels are supported");
}

template <typename T>
void add_into(Tensor<T> &dst, const std::vector<T> &src, size_t offset = 0)
{
    T *d = dst.data() + offset;
    const long long n = static_cast<long long>(src.size());
#pragma omp parallel for schedule(static) if (n > 65536)
    for (long long i = 0; i < n; ++i)
        d[i] += src[i];
}

} // namespace

template <typename T>
void gemm(int M, int N, int K, const T *A, const T *B, T *C)
{
    constexpr int NR = panel_width<T>();
    if (M <= 0 || N <= 0)
        return;
    if (K <= 0) {
        std::fill(C, C + static_cast<size_t>(M) * N, T(0));
        return;
    }
    const int panels = (N + NR - 1) / NR;
    const int mblocks = (M + kMR - 1) / kMR;

    // B repacked panel-major: panel p holds columns [p*NR, p*NR + NR) as K rows
    // of NR contiguous values, zero-padded on the right edge.
    std::vector<T> packed(static_cast<size_t>(panels) * K * NR);
#pragma omp parallel for schedule(static)
    for (int p = 0; p < panels; ++p) {
        const int j0 = p * NR, nr = std::min(NR, N - j0);
        T *dst = packed.data() + static_cast<size_t>(p) * K * NR;
        for (int k = 0; k < K; ++k) {
            const T *src = B + static_cast<size_t>(k) * N + j0;
            T *row = dst + static_cast<size_t>(k) * NR;
            int j = 0;
            for (; j < nr; ++j)
                row[j] = src[j];
            for (; j < NR; ++j)
                row[j] = T(0);
        }
    }

    const long long tasks = static_cast<long long>(panels) * mblocks;
#pragma omp parallel for schedule(static)
    for (long long t = 0; t < tasks; ++t) {
        const int p = static_cast<int>(t / mblocks);
        const int mb = static_cast<int>(t % mblocks);
        const int i0 = mb * kMR, j0 = p * NR;
        const int mr = std::min(kMR, M - i0), nr = std::min(NR, N - j0);
        const T *Ap = A + static_cast<size_t>(i0) * K;
        const T *Bp = packed.data() + static_cast<size_t>(p) * K * NR;
        T *Cp = C + static_cast<size_t>(i0) * N + j0;
        if (mr == kMR && nr == NR)
            micro_tile<T, NR>(K, Ap, K, Bp, Cp, N);
        else
            edge_tile<T, NR>(mr, nr, K, Ap, K, Bp, Cp, N);
    }
}

template <typename T>
void transpose(int rows, int cols, const T *src, T *dst)
{
    constexpr int B = 32;
#pragma omp parallel for schedule(static) if (static_cast<long long>(rows) * cols > 65536)
    for (int r0 = 0; r0 < rows; r0 += B)
        for (int c0 = 0; c0 < cols; c0 += B)
            for (int r = r0; r < std::min(rows, r0 + B); ++r)
                for (int c = c0; c < std::min(cols, c0 + B); ++c)
                    dst[static_cast<size_t>(c) * rows + r] = src[static_cast<size_t>(r) * cols + c];
}

template <typename T>
void im2col(const T *x, const ConvGeom &g, T *col)
{
    const int kk = g.k * g.k;
    const int rows = g.channels * kk;
    const size_t plane = static_cast<size_t>(g.out_h) * g.out_w;
#pragma omp parallel for schedule(static) if (rows * plane > 32768)
    for (int row = 0; row < rows; ++row) {
        const int c = row / kk, kh = (row % kk) / g.k, kw = row % g.k;
        const T *xc = x + static_cast<size_t>(c) * g.height * g.width;
        T *dst = col + row * plane;
        for (int oh = 0; oh < g.out_h; ++oh) {
            const int ih = oh * g.stride - g.pad + kh;
            T *d = dst + static_cast<size_t>(oh) * g.out_w;
            if (ih < 0 || ih >= g.height) {
                std::fill(d, d + g.out_w, T(0));
                continue;
            }
            const T *src = xc + static_cast<size_t>(ih) * g.width;
            for (int ow = 0; ow < g.out_w; ++ow) {
                const int iw = ow * g.stride - g.pad + kw;
                d[ow] = (iw >= 0 && iw < g.width) ? src[iw] : T(0);
            }
        }
    }
}

template <typename T>
void col2im_add(const T *col, const ConvGeom &g, T *x)
{
    const int kk = g.k * g.k;
    const size_t plane = static_cast<size_t>(g.out_h) * g.out_w;
#pragma omp parallel for schedule(static) if (g.channels * kk * plane > 32768)
    for (int c = 0; c < g.channels; ++c) {
        T *xc = x + static_cast<size_t>(c) * g.height * g.width;
        for (int kh = 0; kh < g.k; ++kh) {
            for (int kw = 0; kw < g.k; ++kw) {
                const T *src = col + (static_cast<size_t>(c) * kk + kh * g.k + kw) * plane;
                for (int oh = 0; oh < g.out_h; ++oh) {
                    const int ih = oh * g.stride - g.pad + kh;
                    if (ih < 0 || ih >= g.height)
                        continue;
                    T *row = xc + static_cast<size_t>(ih) * g.width;
                    const T *s = src + static_cast<size_t>(oh) * g.out_w;
                    for (int ow = 0; ow < g.out_w; ++ow) {
                        const int iw = ow * g.stride - g.pad + kw;
                        if (iw >= 0 && iw < g.width)
                            row[iw] += s[ow];
                    }
                }
            }
        }
    }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T> &x, const Tensor<T> &w, int stride, int pad)
{
    check_conv(x.shape(), w.shape(), 1);
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), k = w.dim(2);
    const int OH = conv_out_dim(H, k, stride, pad), OW = conv_out_dim(W, k, stride, pad);
    if (OH <= 0 || OW <= 0)
        throw std::invalid_argument("conv2d: kernel larger than padded input");
    const ConvGeom g{Ci, H, W, k, stride, pad, OH, OW};
    const int K = Ci * k * k, P = OH * OW;

    Tensor<T> y({N, Co, OH, OW});
    std::vector<T> col(static_cast<size_t>(K) * P);
    for (int n = 0; n < N; ++n) {
        im2col(x.data() + static_cast<size_t>(n) * Ci * H * W, g, col.data());
        gemm(Co, P, K, w.data(), col.data(), y.data() + static_cast<size_t>(n) * Co * P);
    }
    return y;
}

template <typename T>
void conv2d_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy, int stride, int pad, Tensor<T> *dx,
                     Tensor<T> *dw)
{
    check_conv(x.shape(), w.shape(), 1);
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), k = w.dim(2);
    const int OH = dy.dim(2), OW = dy.dim(3);
    const ConvGeom g{Ci, H, W, k, stride, pad, OH, OW};
    const int K = Ci * k * k, P = OH * OW;

    std::vector<T> col(static_cast<size_t>(K) * P), tmp;
    std::vector<T> wt;
    if (dx) {
        wt.resize(static_cast<size_t>(K) * Co);
        transpose(Co, K, w.data(), wt.data());
    }
    std::vector<T> colt, dw_acc;
    for (int n = 0; n < N; ++n) {
        const T *dyn = dy.data() + static_cast<size_t>(n) * Co * P;
        if (dx) {
            tmp.resize(static_cast<size_t>(K) * P);
            gemm(K, P, Co, wt.data(), dyn, tmp.data());
            col2im_add(tmp.data(), g, dx->data() + static_cast<size_t>(n) * Ci * H * W);
        }
        if (dw) {
            im2col(x.data() + static_cast<size_t>(n) * Ci * H * W, g, col.data());
            colt.resize(col.size());
            transpose(K, P, col.data(), colt.data());
            dw_acc.resize(static_cast<size_t>(Co) * K);
            gemm(Co, K, P, dyn, colt.data(), dw_acc.data());
            add_into(*dw, dw_acc);
        }
    }
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T> &x, const Tensor<T> &w, int stride, int pad)
{
    check_conv(x.shape(), w.shape(), 0);
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(1), k = w.dim(2);
    const int OH = conv_transpose_out_dim(H, k, stride, pad), OW = conv_transpose_out_dim(W, k, stride, pad);
    if (OH <= 0 || OW <= 0)
        throw std::invalid_argument("conv_transpose2d: empty output");
    // The matching conv maps Co x OH x OW back to H x W.
    const ConvGeom g{Co, OH, OW, k, stride, pad, H, W};
    const int K = Co * k * k, P = H * W;

    std::vector<T> wt(static_cast<size_t>(K) * Ci);
    transpose(Ci, K, w.data(), wt.data());
    Tensor<T> y({N, Co, OH, OW});
    std::vector<T> col(static_cast<size_t>(K) * P);
    for (int n = 0; n < N; ++n) {
        gemm(K, P, Ci, wt.data(), x.data() + static_cast<size_t>(n) * Ci * P, col.data());
        col2im_add(col.data(), g, y.data() + static_cast<size_t>(n) * Co * OH * OW);
    }
    return y;
}

template <typename T>
void conv_transpose2d_backward(const Tensor<T> &x, const Tensor<T> &w, const Tensor<T> &dy, int stride, int pad,
                               Tensor<T> *dx, Tensor<T> *dw)
{
    check_conv(x.shape(), w.shape(), 0);
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(1), k = w.dim(2);
    const int OH = dy.dim(2), OW = dy.dim(3);
    const ConvGeom g{Co, OH, OW, k, stride, pad, H, W};
    const int K = Co * k * k, P = H * W;

    std::vector<T> dcol(static_cast<size_t>(K) * P), tmp, dcolt;
    for (int n = 0; n < N; ++n) {
        im2col(dy.data() + static_cast<size_t>(n) * Co * OH * OW, g, dcol.data());
        if (dx) {
            tmp.resize(static_cast<size_t>(Ci) * P);
            gemm(Ci, P, K, w.data(), dcol.data(), tmp.data());
            add_into(*dx, tmp, static_cast<size_t>(n) * Ci * P);
        }
        if (dw) {
            dcolt.resize(dcol.size());
            transpose(K, P, dcol.data(), dcolt.data());
            tmp.resize(static_cast<size_t>(Ci) * K);
            gemm(Ci, K, P, x.data() + static_cast<size_t>(n) * Ci * P, dcolt.data(), tmp.data());
            add_into(*dw, tmp);
        }
    }
}

#define ROUTECAST_INSTANTIATE(T)                                                                                      \
    template void gemm<T>(int, int, int, const T *, const T *, T *);                                                  \
    template void transpose<T>(int, int, const T *, T *);                                                             \
    template void im2col<T>(const T *, const ConvGeom &, T *);                                                        \
    template void col2im_add<T>(const T *, const ConvGeom &, T *);                                                    \
    template Tensor<T> conv2d<T>(const Tensor<T> &, const Tensor<T> &, int, int);                                     \
    template void conv2d_backward<T>(const Tensor<T> &, const Tensor<T> &, const Tensor<T> &, int, int, Tensor<T> *,  \
                                     Tensor<T> *);                                                                    \
    template Tensor<T> conv_transpose2d<T>(const Tensor<T> &, const Tensor<T> &, int, int);                           \
    template void conv_transpose2d_backward<T>(const Tensor<T> &, const Tensor<T> &, const Tensor<T> &, int, int,     \
                                               Tensor<T> *, Tensor<T> *);

ROUTECAST_INSTANTIATE(float)
ROUTECAST_INSTANTIATE(double)

#undef ROUTECAST_INSTANTIATE

} // namespace routecast::nn::kernels
