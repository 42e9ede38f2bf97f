#include "scd/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "scd/error.hpp"
#include "scd/kernels.hpp"

namespace scd {

// ---- Var -------------------------------------------------------------------

const Shape& Var::shape() const { return graph_->shape(id_); }
std::span<const double> Var::value() const { return graph_->value(id_); }
std::span<const double> Var::grad() const {
    return static_cast<const Graph*>(graph_)->grad(id_);
}
bool Var::requires_grad() const { return graph_->requires_grad(id_); }

double Var::item() const {
    if (shape().numel() != 1) throw ShapeError("item() on " + shape().str());
    return value()[0];
}

Tensor Var::tensor() const {
    auto v = value();
    return Tensor(shape(), std::vector<double>(v.begin(), v.end()));
}

Tensor Var::grad_tensor() const {
    auto g = grad();
    return Tensor(shape(), std::vector<double>(g.begin(), g.end()));
}

// ---- Graph -----------------------------------------------------------------

Var Graph::push(Node node) {
    node.grad.assign(node.value.size(), 0.0);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Graph::constant(Tensor value) {
    if (!all_finite(value.data)) throw NumericError("non-finite value in constant");
    Node n;
    n.op = "constant";
    n.shape = value.shape;
    n.value = std::move(value.data);
    n.is_leaf = true;
    return push(std::move(n));
}

Var Graph::parameter(Tensor value) {
    if (!all_finite(value.data)) throw NumericError("non-finite value in parameter");
    Node n;
    n.op = "parameter";
    n.shape = value.shape;
    n.value = std::move(value.data);
    n.is_leaf = true;
    n.requires_grad = true;
    return push(std::move(n));
}

Var Graph::record(std::string_view op, Shape shape, std::vector<double> value,
                  const std::vector<Var>& inputs, BackwardFn backward) {
    if (value.size() != shape.numel()) {
        throw ShapeError(std::string(op) + ": value buffer does not match " + shape.str());
    }
    if (!all_finite(value)) throw NumericError(std::string(op) + " produced a non-finite value");
    Node n;
    n.op = std::string(op);
    n.shape = std::move(shape);
    n.value = std::move(value);
    n.backward = std::move(backward);
    for (const Var& in : inputs) {
        if (in.graph_ != this) throw ValidationError(std::string(op) + ": input from another graph");
        n.inputs.push_back(in.id_);
        n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
    }
    return push(std::move(n));
}

void Graph::backward(const Var& loss) {
    if (loss.graph_ != this) throw ValidationError("backward: loss from another graph");
    if (nodes_[loss.id_].value.size() != 1) {
        throw ShapeError("backward needs a scalar loss, got " + nodes_[loss.id_].shape.str());
    }
    const std::size_t root = loss.id_;
    std::vector<char> reachable(root + 1, 0);
    reachable[root] = 1;
    for (std::size_t id = root + 1; id-- > 0;) {
        if (!reachable[id] || !nodes_[id].requires_grad) continue;
        for (std::size_t in : nodes_[id].inputs) reachable[in] = 1;
    }
    for (std::size_t id = 0; id <= root; ++id) {
        if (!nodes_[id].is_leaf) std::fill(nodes_[id].grad.begin(), nodes_[id].grad.end(), 0.0);
    }
    nodes_[root].grad[0] += 1.0;
    for (std::size_t id = root + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!reachable[id] || !n.requires_grad || n.is_leaf || !n.backward) continue;
        n.backward(*this, id);
    }
}

void Graph::zero_grad() {
    for (Node& n : nodes_) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

// ---- operations ------------------------------------------------------------

namespace {

void require_rank(const Var& v, std::size_t rank, const char* op) {
    if (v.shape().rank() != rank) {
        throw ShapeError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                         v.shape().str());
    }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) throw ShapeError("matmul " + a.shape().str() + " * " + b.shape().str());
    std::vector<double> out(m * n);
    kernels::gemm(a.value(), b.value(), out, m, k, n, false);
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record("matmul", Shape{m, n}, std::move(out), {a, b},
                            [ia, ib, m, k, n](Graph& g, std::size_t self) {
                                auto gc = g.grad(self);
                                if (g.requires_grad(ia)) {
                                    kernels::gemm_nt(gc, g.value(ib), g.grad(ia), m, n, k, true);
                                }
                                if (g.requires_grad(ib)) {
                                    kernels::gemm_tn(g.value(ia), gc, g.grad(ib), k, m, n, true);
                                }
                            });
}

Var matmul_nt(const Var& a, const Var& b) {
    require_rank(a, 2, "matmul_nt");
    require_rank(b, 2, "matmul_nt");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
    if (b.shape()[1] != k) {
        throw ShapeError("matmul_nt " + a.shape().str() + " * " + b.shape().str() + "^T");
    }
    std::vector<double> out(m * n);
    kernels::gemm_nt(a.value(), b.value(), out, m, k, n, false);
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record("matmul_nt", Shape{m, n}, std::move(out), {a, b},
                            [ia, ib, m, k, n](Graph& g, std::size_t self) {
                                auto gc = g.grad(self);
                                // dA = dC * B, dB = dC^T * A
                                if (g.requires_grad(ia)) {
                                    kernels::gemm(gc, g.value(ib), g.grad(ia), m, n, k, true);
                                }
                                if (g.requires_grad(ib)) {
                                    kernels::gemm_tn(gc, g.value(ia), g.grad(ib), n, m, k, true);
                                }
                            });
}

Var transpose(const Var& a) {
    require_rank(a, 2, "transpose");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    auto v = a.value();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = v[i * n + j];
    const std::size_t ia = a.id();
    return a.graph().record("transpose", Shape{n, m}, std::move(out), {a},
                            [ia, m, n](Graph& g, std::size_t self) {
                                auto gc = g.grad(self);
                                auto ga = g.grad(ia);
                                for (std::size_t i = 0; i < m; ++i)
                                    for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += gc[j * m + i];
                            });
}

Var softmax_rows(const Var& a, double scale) {
    if (!std::isfinite(scale)) throw NumericError("softmax_rows: non-finite scale");
    const std::size_t n = a.shape().back();
    const std::size_t rows = a.shape().numel() / n;
    auto v = a.value();
    std::vector<double> out(v.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = v.data() + r * n;
        double* o = out.data() + r * n;
        double mx = scale * in[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, scale * in[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            o[j] = std::exp(scale * in[j] - mx);
            total += o[j];
        }
        for (std::size_t j = 0; j < n; ++j) o[j] /= total;
    }
    const std::size_t ia = a.id();
    return a.graph().record(
        "softmax_rows", a.shape(), std::move(out), {a}, [ia, rows, n, scale](Graph& g, std::size_t self) {
            auto y = g.value(self);
            auto gy = g.grad(self);
            auto ga = g.grad(ia);
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t base = r * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += gy[base + j] * y[base + j];
                for (std::size_t j = 0; j < n; ++j) {
                    ga[base + j] += scale * y[base + j] * (gy[base + j] - dot);
                }
            }
        });
}

Var conv2d(const Var& x, const Var& kernel, const Var& bias) {
    require_rank(x, 3, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    require_rank(bias, 1, "conv2d bias");
    const Shape& ks = kernel.shape();
    if (ks[0] != ks[1] || (ks[0] != 1 && ks[0] != 3)) {
        throw ShapeError("conv2d kernel must be 1x1 or 3x3, got " + ks.str());
    }
    if (ks[2] != x.shape()[2]) {
        throw ShapeError("conv2d channel mismatch: input " + x.shape().str() + ", kernel " + ks.str());
    }
    if (bias.shape()[0] != ks[3]) {
        throw ShapeError("conv2d bias " + bias.shape().str() + " for kernel " + ks.str());
    }
    const kernels::ConvGeometry geo{x.shape()[0], x.shape()[1], ks[2], ks[3], ks[0]};
    std::vector<double> out(geo.height * geo.width * geo.out_channels);
    kernels::conv2d_forward(geo, x.value(), kernel.value(), bias.value(), out);
    const std::size_t ix = x.id(), ik = kernel.id(), ib = bias.id();
    return x.graph().record(
        "conv2d", Shape{geo.height, geo.width, geo.out_channels}, std::move(out), {x, kernel, bias},
        [geo, ix, ik, ib](Graph& g, std::size_t self) {
            auto gy = g.grad(self);
            if (g.requires_grad(ix)) kernels::conv2d_backward_input(geo, g.value(ik), gy, g.grad(ix));
            if (g.requires_grad(ik)) kernels::conv2d_backward_kernel(geo, g.value(ix), gy, g.grad(ik));
            if (g.requires_grad(ib)) {
                auto gb = g.grad(ib);
                const std::size_t pixels = geo.height * geo.width;
                for (std::size_t co = 0; co < geo.out_channels; ++co) {
                    double s = 0.0;
                    for (std::size_t p = 0; p < pixels; ++p) s += gy[p * geo.out_channels + co];
                    gb[co] += s;
                }
            }
        });
}

Var relu(const Var& a) {
    auto v = a.value();
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
    const std::size_t id = a.id();
    return a.graph().record("relu", a.shape(), std::move(out), {a}, [id](Graph& g, std::size_t self) {
        auto gy = g.grad(self);
        auto x = g.value(id);
        auto gx = g.grad(id);
        for (std::size_t i = 0; i < gy.size(); ++i)
            if (x[i] > 0.0) gx[i] += gy[i];
    });
}

Var upsample_nearest(const Var& x, std::size_t factor) {
    require_rank(x, 3, "upsample_nearest");
    if (factor < 1) throw ValidationError("upsample_nearest: factor must be >= 1");
    const std::size_t h = x.shape()[0], w = x.shape()[1], c = x.shape()[2];
    const std::size_t H = h * factor, W = w * factor;
    auto v = x.value();
    std::vector<double> out(H * W * c);
    for (std::size_t Y = 0; Y < H; ++Y) {
        for (std::size_t X = 0; X < W; ++X) {
            const double* src = v.data() + ((Y / factor) * w + X / factor) * c;
            std::copy(src, src + c, out.data() + (Y * W + X) * c);
        }
    }
    const std::size_t id = x.id();
    return x.graph().record("upsample_nearest", Shape{H, W, c}, std::move(out), {x},
                            [id, h, w, c, factor](Graph& g, std::size_t self) {
                                auto gy = g.grad(self);
                                auto gx = g.grad(id);
                                const std::size_t W = w * factor;
                                for (std::size_t y = 0; y < h; ++y) {
                                    for (std::size_t xx = 0; xx < w; ++xx) {
                                        for (std::size_t ch = 0; ch < c; ++ch) {
                                            double s = 0.0;
                                            for (std::size_t dy = 0; dy < factor; ++dy) {
                                                const std::size_t Y = y * factor + dy;
                                                for (std::size_t dx = 0; dx < factor; ++dx) {
                                                    s += gy[(Y * W + xx * factor + dx) * c + ch];
                                                }
                                            }
                                            gx[(y * w + xx) * c + ch] += s;
                                        }
                                    }
                                }
                            });
}

Var concat_channels(const Var& a, const Var& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.rank() != sb.rank() || sa.with_last(1) != sb.with_last(1)) {
        throw ShapeError("concat_channels " + sa.str() + " with " + sb.str());
    }
    const std::size_t c1 = sa.back(), c2 = sb.back(), c = c1 + c2;
    const std::size_t rows = sa.numel() / c1;
    auto va = a.value();
    auto vb = b.value();
    std::vector<double> out(rows * c);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(va.data() + r * c1, c1, out.data() + r * c);
        std::copy_n(vb.data() + r * c2, c2, out.data() + r * c + c1);
    }
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record("concat_channels", sa.with_last(c), std::move(out), {a, b},
                            [ia, ib, rows, c1, c2](Graph& g, std::size_t self) {
                                auto gy = g.grad(self);
                                const std::size_t c = c1 + c2;
                                if (g.requires_grad(ia)) {
                                    auto ga = g.grad(ia);
                                    for (std::size_t r = 0; r < rows; ++r)
                                        for (std::size_t j = 0; j < c1; ++j) ga[r * c1 + j] += gy[r * c + j];
                                }
                                if (g.requires_grad(ib)) {
                                    auto gb = g.grad(ib);
                                    for (std::size_t r = 0; r < rows; ++r)
                                        for (std::size_t j = 0; j < c2; ++j)
                                            gb[r * c2 + j] += gy[r * c + c1 + j];
                                }
                            });
}

Var slice_channels(const Var& a, std::size_t begin, std::size_t count) {
    const std::size_t c = a.shape().back();
    if (count == 0 || begin + count > c) {
        throw ShapeError("slice_channels [" + std::to_string(begin) + ", +" + std::to_string(count) +
                         ") of " + a.shape().str());
    }
    const std::size_t rows = a.shape().numel() / c;
    auto va = a.value();
    std::vector<double> out(rows * count);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(va.data() + r * c + begin, count, out.data() + r * count);
    const std::size_t ia = a.id();
    return a.graph().record("slice_channels", a.shape().with_last(count), std::move(out), {a},
                            [ia, rows, c, begin, count](Graph& g, std::size_t self) {
                                auto gy = g.grad(self);
                                auto ga = g.grad(ia);
                                for (std::size_t r = 0; r < rows; ++r)
                                    for (std::size_t j = 0; j < count; ++j)
                                        ga[r * c + begin + j] += gy[r * count + j];
                            });
}

Var reshape(const Var& a, Shape shape) {
    if (shape.numel() != a.shape().numel()) {
        throw ShapeError("reshape " + a.shape().str() + " to " + shape.str());
    }
    auto va = a.value();
    const std::size_t ia = a.id();
    return a.graph().record("reshape", std::move(shape), std::vector<double>(va.begin(), va.end()), {a},
                            [ia](Graph& g, std::size_t self) {
                                auto gy = g.grad(self);
                                auto ga = g.grad(ia);
                                for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
                            });
}

Var elementwise(Elementwise kind, const Var& a, const Var& b) {
    if (kind == Elementwise::Scale) {
        if (b.shape().numel() != 1) throw ShapeError("scale needs a scalar operand, got " + b.shape().str());
    } else if (!(a.shape() == b.shape())) {
        throw ShapeError("elementwise " + a.shape().str() + " with " + b.shape().str());
    }
    auto va = a.value();
    auto vb = b.value();
    std::vector<double> out(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) {
        switch (kind) {
            case Elementwise::Add: out[i] = va[i] + vb[i]; break;
            case Elementwise::Sub: out[i] = va[i] - vb[i]; break;
            case Elementwise::Mul: out[i] = va[i] * vb[i]; break;
            case Elementwise::Scale: out[i] = va[i] * vb[0]; break;
        }
    }
    static constexpr const char* kNames[] = {"add", "sub", "mul", "scale"};
    const std::size_t ia = a.id(), ib = b.id();
    return a.graph().record(
        kNames[static_cast<int>(kind)], a.shape(), std::move(out), {a, b},
        [kind, ia, ib](Graph& g, std::size_t self) {
            auto gy = g.grad(self);
            const bool need_a = g.requires_grad(ia), need_b = g.requires_grad(ib);
            auto xa = g.value(ia);
            auto xb = g.value(ib);
            if (need_a) {
                auto ga = g.grad(ia);
                for (std::size_t i = 0; i < gy.size(); ++i) {
                    switch (kind) {
                        case Elementwise::Add:
                        case Elementwise::Sub: ga[i] += gy[i]; break;
                        case Elementwise::Mul: ga[i] += gy[i] * xb[i]; break;
                        case Elementwise::Scale: ga[i] += gy[i] * xb[0]; break;
                    }
                }
            }
            if (need_b) {
                auto gb = g.grad(ib);
                if (kind == Elementwise::Scale) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < gy.size(); ++i) s += gy[i] * xa[i];
                    gb[0] += s;
                } else {
                    for (std::size_t i = 0; i < gy.size(); ++i) {
                        switch (kind) {
                            case Elementwise::Add: gb[i] += gy[i]; break;
                            case Elementwise::Sub: gb[i] -= gy[i]; break;
                            case Elementwise::Mul: gb[i] += gy[i] * xa[i]; break;
                            case Elementwise::Scale: break;
                        }
                    }
                }
            }
        });
}

Var elementwise(Elementwise kind, const Var& a, double b) {
    if (!std::isfinite(b)) throw NumericError("elementwise: non-finite scalar operand");
    auto va = a.value();
    std::vector<double> out(va.size());
    const bool multiplicative = kind == Elementwise::Mul || kind == Elementwise::Scale;
    for (std::size_t i = 0; i < va.size(); ++i) {
        switch (kind) {
            case Elementwise::Add: out[i] = va[i] + b; break;
            case Elementwise::Sub: out[i] = va[i] - b; break;
            case Elementwise::Mul:
            case Elementwise::Scale: out[i] = va[i] * b; break;
        }
    }
    const std::size_t ia = a.id();
    return a.graph().record(multiplicative ? "scale" : "shift", a.shape(), std::move(out), {a},
                            [ia, b, multiplicative](Graph& g, std::size_t self) {
                                auto gy = g.grad(self);
                                auto ga = g.grad(ia);
                                const double d = multiplicative ? b : 1.0;
                                for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * d;
                            });
}

Var sum(const Var& a) {
    auto va = a.value();
    double s = 0.0;
    for (double v : va) s += v;
    const std::size_t ia = a.id();
    return a.graph().record("sum", Shape{1}, {s}, {a}, [ia](Graph& g, std::size_t self) {
        const double gy = g.grad(self)[0];
        auto ga = g.grad(ia);
        for (double& v : ga) v += gy;
    });
}

}  // namespace scd
