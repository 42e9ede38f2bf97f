#pragma once

// Dense inner loops shared by the autodiff ops.
//
// Every kernel exists twice: `serial::` is the plain reference loop nest kept for
// testing, `parallel::` is the OpenMP version used at run time. Both accumulate
// each output element in the same index order, so their results are bit-identical
// for any thread count. The free functions at namespace scope dispatch on the
// process-wide thread setting.

#include <cstddef>
#include <span>

namespace scd::kernels {

// 1 selects the serial reference path.
void set_threads(int threads);
int threads() noexcept;

// Geometry of a stride-1, zero-padded square convolution over an h x w x c_in grid.
struct ConvGeometry {
    std::size_t height;
    std::size_t width;
    std::size_t in_channels;
    std::size_t out_channels;
    std::size_t kernel;  // 1 or 3

    std::size_t pad() const noexcept { return (kernel - 1) / 2; }
};

#define SCD_KERNEL_DECLS                                                                     \
    /* c (+)= a[m x k] * b[k x n] */                                                         \
    void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,     \
              std::size_t m, std::size_t k, std::size_t n, bool accumulate);                 \
    /* c (+)= a[m x k] * b[n x k]^T */                                                       \
    void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,  \
                 std::size_t m, std::size_t k, std::size_t n, bool accumulate);              \
    /* c (+)= a[k x m]^T * b[k x n] */                                                       \
    void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,  \
                 std::size_t m, std::size_t k, std::size_t n, bool accumulate);              \
    void conv2d_forward(const ConvGeometry& g, std::span<const double> input,                \
                        std::span<const double> kernel, std::span<const double> bias,        \
                        std::span<double> output);                                           \
    /* grad_input += d(out)/d(input)^T * grad_output */                                      \
    void conv2d_backward_input(const ConvGeometry& g, std::span<const double> kernel,        \
                               std::span<const double> grad_output,                          \
                               std::span<double> grad_input);                                \
    /* grad_kernel += correlation of input with grad_output */                               \
    void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> input,        \
                                std::span<const double> grad_output,                         \
                                std::span<double> grad_kernel);

namespace serial {
SCD_KERNEL_DECLS
}  // namespace serial

namespace parallel {
SCD_KERNEL_DECLS
}  // namespace parallel

SCD_KERNEL_DECLS

#undef SCD_KERNEL_DECLS

}  // namespace scd::kernels
