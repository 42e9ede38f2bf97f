#include "scd/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <vector>

#include <omp.h>

namespace scd::kernels {

namespace {
std::atomic<int> g_threads{1};
}  // namespace

void set_threads(int threads) { g_threads.store(threads < 1 ? 1 : threads); }
int threads() noexcept { return g_threads.load(); }

namespace {
inline void store(double& dst, double value, bool accumulate) {
    dst = accumulate ? dst + value : value;
}
}  // namespace

// ---------------------------------------------------------------------------
// Reference loop nests. One output element at a time, reduction index innermost.
// ---------------------------------------------------------------------------
namespace serial {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            store(c[i * n + j], s, accumulate);
        }
    }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
            store(c[i * n + j], s, accumulate);
        }
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
            store(c[i * n + j], s, accumulate);
        }
    }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<const double> bias,
                    std::span<double> output) {
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    const auto K = static_cast<std::ptrdiff_t>(g.kernel);
    const auto pad = static_cast<std::ptrdiff_t>(g.pad());
    const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
    for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            for (std::size_t co = 0; co < co_n; ++co) {
                double s = 0.0;
                for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
                    const std::ptrdiff_t iy = y + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
                        const std::ptrdiff_t ix = x + kx - pad;
                        if (ix < 0 || ix >= W) continue;
                        for (std::size_t ci = 0; ci < ci_n; ++ci) {
                            s += input[(iy * W + ix) * ci_n + ci] *
                                 kernel[((ky * K + kx) * ci_n + ci) * co_n + co];
                        }
                    }
                }
                output[(y * W + x) * co_n + co] = s + bias[co];
            }
        }
    }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> kernel,
                           std::span<const double> grad_output, std::span<double> grad_input) {
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    const auto K = static_cast<std::ptrdiff_t>(g.kernel);
    const auto pad = static_cast<std::ptrdiff_t>(g.pad());
    const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
    for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            for (std::size_t ci = 0; ci < ci_n; ++ci) {
                double s = 0.0;
                for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
                    const std::ptrdiff_t oy = y - ky + pad;
                    if (oy < 0 || oy >= H) continue;
                    for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
                        const std::ptrdiff_t ox = x - kx + pad;
                        if (ox < 0 || ox >= W) continue;
                        for (std::size_t co = 0; co < co_n; ++co) {
                            s += grad_output[(oy * W + ox) * co_n + co] *
                                 kernel[((ky * K + kx) * ci_n + ci) * co_n + co];
                        }
                    }
                }
                grad_input[(y * W + x) * ci_n + ci] += s;
            }
        }
    }
}

void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_kernel) {
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    const auto K = static_cast<std::ptrdiff_t>(g.kernel);
    const auto pad = static_cast<std::ptrdiff_t>(g.pad());
    const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
    for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
        for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
            for (std::size_t ci = 0; ci < ci_n; ++ci) {
                for (std::size_t co = 0; co < co_n; ++co) {
                    double s = 0.0;
                    for (std::ptrdiff_t oy = 0; oy < H; ++oy) {
                        const std::ptrdiff_t iy = oy + ky - pad;
                        if (iy < 0 || iy >= H) continue;
                        for (std::ptrdiff_t ox = 0; ox < W; ++ox) {
                            const std::ptrdiff_t ix = ox + kx - pad;
                            if (ix < 0 || ix >= W) continue;
                            s += input[(iy * W + ix) * ci_n + ci] *
                                 grad_output[(oy * W + ox) * co_n + co];
                        }
                    }
                    grad_kernel[((ky * K + kx) * ci_n + ci) * co_n + co] += s;
                }
            }
        }
    }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels. Work is split over independent output rows; within a row the
// reduction runs in the reference order with a contiguous innermost axis.
// ---------------------------------------------------------------------------
namespace parallel {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel num_threads(threads()) if (threads() > 1 && m > 1)
    {
        std::vector<double> acc(n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const double* arow = a.data() + i * k;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = arow[p];
                const double* brow = b.data() + p * n;
                for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
            }
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) store(crow[j], acc[j], accumulate);
        }
    }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(threads()) if (threads() > 1 && m > 1)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
        const double* arow = a.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b.data() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            store(c[i * n + j], s, accumulate);
        }
    }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel num_threads(threads()) if (threads() > 1 && m > 1)
    {
        std::vector<double> acc(n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t p = 0; p < k; ++p) {
                const double av = a[p * m + i];
                const double* brow = b.data() + p * n;
                for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
            }
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) store(crow[j], acc[j], accumulate);
        }
    }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<const double> bias,
                    std::span<double> output) {
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    const auto K = static_cast<std::ptrdiff_t>(g.kernel);
    const auto pad = static_cast<std::ptrdiff_t>(g.pad());
    const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
#pragma omp parallel num_threads(threads()) if (threads() > 1 && H > 1)
    {
        std::vector<double> acc(co_n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t y = 0; y < H; ++y) {
            for (std::ptrdiff_t x = 0; x < W; ++x) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
                    const std::ptrdiff_t iy = y + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
                        const std::ptrdiff_t ix = x + kx - pad;
                        if (ix < 0 || ix >= W) continue;
                        const double* in = input.data() + (iy * W + ix) * ci_n;
                        const double* ker = kernel.data() + (ky * K + kx) * ci_n * co_n;
                        for (std::size_t ci = 0; ci < ci_n; ++ci) {
                            const double v = in[ci];
                            const double* krow = ker + ci * co_n;
                            for (std::size_t co = 0; co < co_n; ++co) acc[co] += v * krow[co];
                        }
                    }
                }
                double* out = output.data() + (y * W + x) * co_n;
                for (std::size_t co = 0; co < co_n; ++co) out[co] = acc[co] + bias[co];
            }
        }
    }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> kernel,
                           std::span<const double> grad_output, std::span<double> grad_input) {
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    const auto K = static_cast<std::ptrdiff_t>(g.kernel);
    const auto pad = static_cast<std::ptrdiff_t>(g.pad());
    const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
#pragma omp parallel for schedule(static) num_threads(threads()) if (threads() > 1 && H > 1)
    for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            double* gin = grad_input.data() + (y * W + x) * ci_n;
            for (std::size_t ci = 0; ci < ci_n; ++ci) {
                double s = 0.0;
                for (std::ptrdiff_t ky = 0; ky < K; ++ky) {
                    const std::ptrdiff_t oy = y - ky + pad;
                    if (oy < 0 || oy >= H) continue;
                    for (std::ptrdiff_t kx = 0; kx < K; ++kx) {
                        const std::ptrdiff_t ox = x - kx + pad;
                        if (ox < 0 || ox >= W) continue;
                        const double* gout = grad_output.data() + (oy * W + ox) * co_n;
                        const double* krow = kernel.data() + ((ky * K + kx) * ci_n + ci) * co_n;
                        for (std::size_t co = 0; co < co_n; ++co) s += gout[co] * krow[co];
                    }
                }
                gin[ci] += s;
            }
        }
    }
}

void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_kernel) {
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    const auto K = static_cast<std::ptrdiff_t>(g.kernel);
    const auto pad = static_cast<std::ptrdiff_t>(g.pad());
    const std::size_t ci_n = g.in_channels, co_n = g.out_channels;
    const auto taps = static_cast<std::ptrdiff_t>(g.kernel * g.kernel * ci_n);
#pragma omp parallel num_threads(threads()) if (threads() > 1 && taps > 1)
    {
        std::vector<double> acc(co_n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t t = 0; t < taps; ++t) {
            const std::ptrdiff_t ci = t % static_cast<std::ptrdiff_t>(ci_n);
            const std::ptrdiff_t kx = (t / static_cast<std::ptrdiff_t>(ci_n)) % K;
            const std::ptrdiff_t ky = t / static_cast<std::ptrdiff_t>(ci_n) / K;
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::ptrdiff_t oy = 0; oy < H; ++oy) {
                const std::ptrdiff_t iy = oy + ky - pad;
                if (iy < 0 || iy >= H) continue;
                for (std::ptrdiff_t ox = 0; ox < W; ++ox) {
                    const std::ptrdiff_t ix = ox + kx - pad;
                    if (ix < 0 || ix >= W) continue;
                    const double v = input[(iy * W + ix) * ci_n + ci];
                    const double* gout = grad_output.data() + (oy * W + ox) * co_n;
                    for (std::size_t co = 0; co < co_n; ++co) acc[co] += v * gout[co];
                }
            }
            double* gk = grad_kernel.data() + t * co_n;
            for (std::size_t co = 0; co < co_n; ++co) gk[co] += acc[co];
        }
    }
}

}  // namespace parallel

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    parallel::gemm(a, b, c, m, k, n, accumulate);
}
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    parallel::gemm_nt(a, b, c, m, k, n, accumulate);
}
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    parallel::gemm_tn(a, b, c, m, k, n, accumulate);
}
void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> kernel, std::span<const double> bias,
                    std::span<double> output) {
    parallel::conv2d_forward(g, input, kernel, bias, output);
}
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> kernel,
                           std::span<const double> grad_output, std::span<double> grad_input) {
    parallel::conv2d_backward_input(g, kernel, grad_output, grad_input);
}
void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_kernel) {
    parallel::conv2d_backward_kernel(g, input, grad_output, grad_kernel);
}

}  // namespace scd::kernels
