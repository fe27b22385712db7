#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <utility>
#include <vector>

#include "iik/kernels.hpp"
#include "iik/tensor.hpp"

// Reverse-mode tape over dense tensors.  A tape owns node values and
// gradients; ops append nodes and capture a backward closure.  Backward
// closures only ever *add* into input gradients, so fan-out falls out for
// free.  Everything is templated so the same graph runs in float for
// throughput and in double for finite-difference checks.

namespace iik::ad {

template <typename T>
class Tape {
public:
    // ------------------------------------------------------------ core --

    int push(TensorT<T> value, bool needs_grad) {
        nodes_.push_back(Node{std::move(value), TensorT<T>{}, nullptr, needs_grad});
        return static_cast<int>(nodes_.size()) - 1;
    }

    int constant(const TensorT<T>& v) { return push(v, false); }
    int leaf(const TensorT<T>& v) { return push(v, true); }

    const TensorT<T>& value(int id) const { return nodes_[check(id)].value; }

    TensorT<T>& grad(int id) {
        Node& n = nodes_[check(id)];
        if (n.grad.size() == 0) n.grad = TensorT<T>(n.value.shape);
        return n.grad;
    }

    bool needs_grad(int id) const { return nodes_[check(id)].needs_grad; }

    // Seeds d(root)/d(root) = 1 and sweeps the tape once.  `root` must be
    // a scalar (single-element tensor).
    void backward(int root) {
        if (value(root).size() != 1) throw ConfigError("backward root must be scalar");
        grad(root).data[0] = T(1);
        for (int id = root; id >= 0; --id) {
            Node& n = nodes_[id];
            if (n.backward && n.grad.size() != 0) n.backward();
        }
    }

    size_t node_count() const { return nodes_.size(); }

    // ------------------------------------------------- elementwise ops --

    int add(int a, int b) {
        const auto& va = value(a);
        const auto& vb = value(b);
        if (!va.same_shape(vb)) throw ConfigError("add: shape mismatch");
        TensorT<T> out(va.shape);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = va.data[i] + vb.data[i];
        return unary_pair(std::move(out), a, b, [this](int id, int a2, int b2) {
            const auto& g = grad(id);
            accumulate(a2, [&](size_t i) { return g.data[i]; });
            accumulate(b2, [&](size_t i) { return g.data[i]; });
        });
    }

    int sub(int a, int b) {
        const auto& va = value(a);
        const auto& vb = value(b);
        if (!va.same_shape(vb)) throw ConfigError("sub: shape mismatch");
        TensorT<T> out(va.shape);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = va.data[i] - vb.data[i];
        return unary_pair(std::move(out), a, b, [this](int id, int a2, int b2) {
            const auto& g = grad(id);
            accumulate(a2, [&](size_t i) { return g.data[i]; });
            accumulate(b2, [&](size_t i) { return -g.data[i]; });
        });
    }

    int mul(int a, int b) {
        const auto& va = value(a);
        const auto& vb = value(b);
        if (!va.same_shape(vb)) throw ConfigError("mul: shape mismatch");
        TensorT<T> out(va.shape);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = va.data[i] * vb.data[i];
        return unary_pair(std::move(out), a, b, [this](int id, int a2, int b2) {
            const auto& g = grad(id);
            const auto& xa = value(a2);
            const auto& xb = value(b2);
            accumulate(a2, [&](size_t i) { return g.data[i] * xb.data[i]; });
            accumulate(b2, [&](size_t i) { return g.data[i] * xa.data[i]; });
        });
    }

    // y = alpha * x + beta
    int affine_map(int x, T alpha, T beta) {
        const auto& vx = value(x);
        TensorT<T> out(vx.shape);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = alpha * vx.data[i] + beta;
        return unary(std::move(out), x, [this, alpha](int id, int x2) {
            const auto& g = grad(id);
            accumulate(x2, [&](size_t i) { return alpha * g.data[i]; });
        });
    }

    int leaky_relu(int x, T slope) {
        const auto& vx = value(x);
        TensorT<T> out(vx.shape);
        for (size_t i = 0; i < out.size(); ++i) {
            const T v = vx.data[i];
            out.data[i] = v > T(0) ? v : slope * v;
        }
        return unary(std::move(out), x, [this, slope](int id, int x2) {
            const auto& g = grad(id);
            const auto& vx2 = value(x2);
            accumulate(x2, [&](size_t i) { return g.data[i] * (vx2.data[i] > T(0) ? T(1) : slope); });
        });
    }

    int tanh_op(int x) {
        const auto& vx = value(x);
        TensorT<T> out(vx.shape);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::tanh(vx.data[i]);
        return unary(std::move(out), x, [this](int id, int x2) {
            const auto& g = grad(id);
            const auto& y = value(id);
            accumulate(x2, [&](size_t i) { return g.data[i] * (T(1) - y.data[i] * y.data[i]); });
        });
    }

    int exp_op(int x) {
        const auto& vx = value(x);
        TensorT<T> out(vx.shape);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::exp(vx.data[i]);
        return unary(std::move(out), x, [this](int id, int x2) {
            const auto& g = grad(id);
            const auto& y = value(id);
            accumulate(x2, [&](size_t i) { return g.data[i] * y.data[i]; });
        });
    }

    // -------------------------------------------------- structural ops --

    int concat_channels(int a, int b) {
        const auto& va = value(a);
        const auto& vb = value(b);
        if (va.rank() != 4 || vb.rank() != 4) throw ConfigError("concat_channels expects NCHW");
        if (va.shape[0] != vb.shape[0] || va.shape[2] != vb.shape[2] || va.shape[3] != vb.shape[3])
            throw ConfigError("concat_channels: incompatible shapes");
        const int n = va.shape[0], ca = va.shape[1], cb = vb.shape[1];
        const size_t plane = static_cast<size_t>(va.shape[2]) * va.shape[3];
        TensorT<T> out({n, ca + cb, va.shape[2], va.shape[3]});
        for (int i = 0; i < n; ++i) {
            std::memcpy(out.ptr() + (static_cast<size_t>(i) * (ca + cb)) * plane,
                        va.ptr() + static_cast<size_t>(i) * ca * plane, sizeof(T) * ca * plane);
            std::memcpy(out.ptr() + (static_cast<size_t>(i) * (ca + cb) + ca) * plane,
                        vb.ptr() + static_cast<size_t>(i) * cb * plane, sizeof(T) * cb * plane);
        }
        return unary_pair(std::move(out), a, b, [this, n, ca, cb, plane](int id, int a2, int b2) {
            const auto& g = grad(id);
            if (needs_grad(a2)) {
                auto& ga = grad(a2);
                for (int i = 0; i < n; ++i)
                    for (size_t p = 0; p < static_cast<size_t>(ca) * plane; ++p)
                        ga.data[static_cast<size_t>(i) * ca * plane + p] +=
                            g.data[(static_cast<size_t>(i) * (ca + cb)) * plane + p];
            }
            if (needs_grad(b2)) {
                auto& gb = grad(b2);
                for (int i = 0; i < n; ++i)
                    for (size_t p = 0; p < static_cast<size_t>(cb) * plane; ++p)
                        gb.data[static_cast<size_t>(i) * cb * plane + p] +=
                            g.data[(static_cast<size_t>(i) * (ca + cb) + ca) * plane + p];
            }
        });
    }

    int conv2d(int x, int w, int b, const kernels::ConvShape& s) {
        const auto& vx = value(x);
        if (vx.rank() != 4) throw ConfigError("conv2d expects NCHW input");
        if (vx.shape[1] != s.in_c || vx.shape[2] != s.in_h || vx.shape[3] != s.in_w)
            throw ConfigError("conv2d: input shape does not match ConvShape");
        const int n = vx.shape[0];
        s.validate();
        TensorT<T> out({n, s.out_c, s.out_h(), s.out_w()});
        kernels::conv2d_forward<T>(s, n, vx.ptr(), value(w).ptr(),
                                   b >= 0 ? value(b).ptr() : nullptr, out.ptr());
        const int id = push(std::move(out), needs_grad(x) || needs_grad(w) || (b >= 0 && needs_grad(b)));
        if (!nodes_[id].needs_grad) return id;
        nodes_[id].backward = [this, id, x, w, b, s, n]() {
            const auto& g = grad(id);
            if (needs_grad(w) || (b >= 0 && needs_grad(b)))
                kernels::conv2d_backward_params<T>(s, n, value(x).ptr(), g.ptr(), grad(w).ptr(),
                                                   b >= 0 && needs_grad(b) ? grad(b).ptr() : nullptr);
            if (needs_grad(x))
                kernels::conv2d_backward_input<T>(s, n, value(w).ptr(), g.ptr(), grad(x).ptr(), true);
        };
        return id;
    }

    // Bilinear x2 upsample with half-pixel centers: out(y) samples
    // in(y/2 - 0.25) with clamped taps, separably in y and x.
    int upsample2x(int x) {
        const auto& vx = value(x);
        if (vx.rank() != 4) throw ConfigError("upsample2x expects NCHW");
        const int n = vx.shape[0], c = vx.shape[1], h = vx.shape[2], w = vx.shape[3];
        TensorT<T> out({n, c, 2 * h, 2 * w});
        const size_t planes = static_cast<size_t>(n) * c;
#pragma omp parallel for schedule(static)
        for (size_t p = 0; p < planes; ++p) {
            const T* src = vx.ptr() + p * h * w;
            T* dst = out.ptr() + p * (4 * static_cast<size_t>(h) * w);
            for (int oy = 0; oy < 2 * h; ++oy) {
                int y0, y1;
                T fy;
                up_taps(oy, h, y0, y1, fy);
                for (int ox = 0; ox < 2 * w; ++ox) {
                    int x0, x1;
                    T fx;
                    up_taps(ox, w, x0, x1, fx);
                    const T top = src[static_cast<size_t>(y0) * w + x0] * (T(1) - fx) +
                                  src[static_cast<size_t>(y0) * w + x1] * fx;
                    const T bot = src[static_cast<size_t>(y1) * w + x0] * (T(1) - fx) +
                                  src[static_cast<size_t>(y1) * w + x1] * fx;
                    dst[static_cast<size_t>(oy) * 2 * w + ox] = top * (T(1) - fy) + bot * fy;
                }
            }
        }
        return unary(std::move(out), x, [this, h, w, planes](int id, int x2) {
            const auto& g = grad(id);
            auto& gx = grad(x2);
#pragma omp parallel for schedule(static)
            for (size_t p = 0; p < planes; ++p) {
                T* dst = gx.ptr() + p * h * w;
                const T* src = g.ptr() + p * (4 * static_cast<size_t>(h) * w);
                for (int oy = 0; oy < 2 * h; ++oy) {
                    int y0, y1;
                    T fy;
                    up_taps(oy, h, y0, y1, fy);
                    for (int ox = 0; ox < 2 * w; ++ox) {
                        int x0, x1;
                        T fx;
                        up_taps(ox, w, x0, x1, fx);
                        const T gv = src[static_cast<size_t>(oy) * 2 * w + ox];
                        dst[static_cast<size_t>(y0) * w + x0] += gv * (T(1) - fy) * (T(1) - fx);
                        dst[static_cast<size_t>(y0) * w + x1] += gv * (T(1) - fy) * fx;
                        dst[static_cast<size_t>(y1) * w + x0] += gv * fy * (T(1) - fx);
                        dst[static_cast<size_t>(y1) * w + x1] += gv * fy * fx;
                    }
                }
            }
        });
    }

    // (N,C,H,W) -> (N,C) spatial mean.
    int global_avg_spatial(int x) {
        const auto& vx = value(x);
        if (vx.rank() != 4) throw ConfigError("global_avg_spatial expects NCHW");
        const int n = vx.shape[0], c = vx.shape[1];
        const size_t plane = static_cast<size_t>(vx.shape[2]) * vx.shape[3];
        TensorT<T> out({n, c});
        for (int i = 0; i < n * c; ++i) {
            const T* src = vx.ptr() + static_cast<size_t>(i) * plane;
            T acc = 0;
            for (size_t p = 0; p < plane; ++p) acc += src[p];
            out.data[i] = acc / static_cast<T>(plane);
        }
        return unary(std::move(out), x, [this, n, c, plane](int id, int x2) {
            const auto& g = grad(id);
            auto& gx = grad(x2);
            for (int i = 0; i < n * c; ++i) {
                const T gv = g.data[i] / static_cast<T>(plane);
                T* dst = gx.ptr() + static_cast<size_t>(i) * plane;
                for (size_t p = 0; p < plane; ++p) dst[p] += gv;
            }
        });
    }

    // (N,Cin) x w(Cout,Cin) + b -> (N,Cout)
    int affine(int x, int w, int b) {
        const auto& vx = value(x);
        const auto& vw = value(w);
        if (vx.rank() != 2 || vw.rank() != 2 || vx.shape[1] != vw.shape[1])
            throw ConfigError("affine: shape mismatch");
        const int n = vx.shape[0], cin = vx.shape[1], cout = vw.shape[0];
        TensorT<T> out({n, cout});
        kernels::gemm_nt<T>(n, cout, cin, vx.ptr(), vw.ptr(), out.ptr(), false);
        if (b >= 0) {
            const auto& vb = value(b);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < cout; ++j) out.data[static_cast<size_t>(i) * cout + j] += vb.data[j];
        }
        const int id = push(std::move(out), needs_grad(x) || needs_grad(w) || (b >= 0 && needs_grad(b)));
        if (!nodes_[id].needs_grad) return id;
        nodes_[id].backward = [this, id, x, w, b, n, cin, cout]() {
            const auto& g = grad(id);
            if (needs_grad(x)) kernels::gemm<T>(n, cin, cout, g.ptr(), value(w).ptr(), grad(x).ptr(), true);
            if (needs_grad(w)) kernels::gemm_tn<T>(cout, cin, n, g.ptr(), value(x).ptr(), grad(w).ptr(), true);
            if (b >= 0 && needs_grad(b)) {
                auto& gb = grad(b);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < cout; ++j) gb.data[j] += g.data[static_cast<size_t>(i) * cout + j];
            }
        };
        return id;
    }

    // albedo (N,3,H,W) * shading (N,1,H,W) * color (N,3) -> (N,3,H,W)
    int compose_render(int a, int s, int c) {
        const auto& va = value(a);
        const auto& vs = value(s);
        const auto& vc = value(c);
        if (va.rank() != 4 || va.shape[1] != 3 || vs.shape[1] != 1 || vc.rank() != 2 || vc.shape[1] != 3)
            throw ConfigError("compose_render: bad shapes");
        const int n = va.shape[0];
        const size_t plane = static_cast<size_t>(va.shape[2]) * va.shape[3];
        TensorT<T> out(va.shape);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < 3; ++ch) {
                const T cv = vc.data[static_cast<size_t>(i) * 3 + ch];
                const T* ap = va.ptr() + (static_cast<size_t>(i) * 3 + ch) * plane;
                const T* sp = vs.ptr() + static_cast<size_t>(i) * plane;
                T* op = out.ptr() + (static_cast<size_t>(i) * 3 + ch) * plane;
                for (size_t p = 0; p < plane; ++p) op[p] = ap[p] * sp[p] * cv;
            }
        const int id = push(std::move(out), needs_grad(a) || needs_grad(s) || needs_grad(c));
        if (!nodes_[id].needs_grad) return id;
        nodes_[id].backward = [this, id, a, s, c, n, plane]() {
            const auto& g = grad(id);
            const auto& va2 = value(a);
            const auto& vs2 = value(s);
            const auto& vc2 = value(c);
            for (int i = 0; i < n; ++i)
                for (int ch = 0; ch < 3; ++ch) {
                    const size_t off = (static_cast<size_t>(i) * 3 + ch) * plane;
                    const T cv = vc2.data[static_cast<size_t>(i) * 3 + ch];
                    const T* sp = vs2.ptr() + static_cast<size_t>(i) * plane;
                    if (needs_grad(a)) {
                        auto& ga = grad(a);
                        for (size_t p = 0; p < plane; ++p) ga.data[off + p] += g.data[off + p] * sp[p] * cv;
                    }
                    if (needs_grad(s)) {
                        auto& gs = grad(s);
                        const size_t soff = static_cast<size_t>(i) * plane;
                        for (size_t p = 0; p < plane; ++p)
                            gs.data[soff + p] += g.data[off + p] * va2.data[off + p] * cv;
                    }
                    if (needs_grad(c)) {
                        auto& gc = grad(c);
                        T acc = 0;
                        for (size_t p = 0; p < plane; ++p) acc += g.data[off + p] * va2.data[off + p] * sp[p];
                        gc.data[static_cast<size_t>(i) * 3 + ch] += acc;
                    }
                }
        };
        return id;
    }

    // ---------------------------------------------------------- losses --

    // Per-example Huber mean against a constant target: (N,...) -> (N).
    int huber_per_example(int x, const TensorT<T>& target, T beta) {
        const auto& vx = value(x);
        if (!vx.same_shape(target)) throw ConfigError("huber_per_example: shape mismatch");
        const int n = vx.shape[0];
        const size_t per = vx.size() / static_cast<size_t>(n);
        TensorT<T> out({n});
        for (int i = 0; i < n; ++i) {
            T acc = 0;
            for (size_t p = 0; p < per; ++p) {
                const T t = vx.data[static_cast<size_t>(i) * per + p] - target.data[static_cast<size_t>(i) * per + p];
                const T a = std::abs(t);
                acc += a <= beta ? t * t / (T(2) * beta) : a - beta / T(2);
            }
            out.data[i] = acc / static_cast<T>(per);
        }
        return unary_bound(std::move(out), x, [this, target, beta, n, per](int id, int x2) {
            const auto& g = grad(id);
            const auto& vx2 = value(x2);
            auto& gx = grad(x2);
            for (int i = 0; i < n; ++i) {
                const T gv = g.data[i] / static_cast<T>(per);
                for (size_t p = 0; p < per; ++p) {
                    const size_t off = static_cast<size_t>(i) * per + p;
                    const T t = vx2.data[off] - target.data[off];
                    const T d = std::abs(t) <= beta ? t / beta : (t > T(0) ? T(1) : T(-1));
                    gx.data[off] += gv * d;
                }
            }
        });
    }

    // Per-example sum of squared differences: (N,K) -> (N).
    int sqerr_sum_per_example(int x, const TensorT<T>& target) {
        const auto& vx = value(x);
        if (!vx.same_shape(target)) throw ConfigError("sqerr_sum_per_example: shape mismatch");
        const int n = vx.shape[0];
        const size_t per = vx.size() / static_cast<size_t>(n);
        TensorT<T> out({n});
        for (int i = 0; i < n; ++i) {
            T acc = 0;
            for (size_t p = 0; p < per; ++p) {
                const T t = vx.data[static_cast<size_t>(i) * per + p] - target.data[static_cast<size_t>(i) * per + p];
                acc += t * t;
            }
            out.data[i] = acc;
        }
        return unary_bound(std::move(out), x, [this, target, n, per](int id, int x2) {
            const auto& g = grad(id);
            const auto& vx2 = value(x2);
            auto& gx = grad(x2);
            for (int i = 0; i < n; ++i)
                for (size_t p = 0; p < per; ++p) {
                    const size_t off = static_cast<size_t>(i) * per + p;
                    gx.data[off] += g.data[i] * T(2) * (vx2.data[off] - target.data[off]);
                }
        });
    }

    // Per-example range penalty (N,...) -> (N).
    // corrected: sum max(0,x-1)^2 + max(0,-x)^2
    // literal:   sum min(0,x-1)^2 + min(0,x)^2
    int range_per_example(int x, bool literal) {
        const auto& vx = value(x);
        const int n = vx.shape[0];
        const size_t per = vx.size() / static_cast<size_t>(n);
        TensorT<T> out({n});
        for (int i = 0; i < n; ++i) {
            T acc = 0;
            for (size_t p = 0; p < per; ++p) {
                const T v = vx.data[static_cast<size_t>(i) * per + p];
                if (literal) {
                    const T a = std::min(T(0), v - T(1));
                    const T b = std::min(T(0), v);
                    acc += a * a + b * b;
                } else {
                    const T a = std::max(T(0), v - T(1));
                    const T b = std::max(T(0), -v);
                    acc += a * a + b * b;
                }
            }
            out.data[i] = acc;
        }
        return unary(std::move(out), x, [this, literal, n, per](int id, int x2) {
            const auto& g = grad(id);
            const auto& vx2 = value(x2);
            auto& gx = grad(x2);
            for (int i = 0; i < n; ++i)
                for (size_t p = 0; p < per; ++p) {
                    const size_t off = static_cast<size_t>(i) * per + p;
                    const T v = vx2.data[off];
                    T d;
                    if (literal)
                        d = T(2) * std::min(T(0), v - T(1)) + T(2) * std::min(T(0), v);
                    else
                        d = T(2) * std::max(T(0), v - T(1)) - T(2) * std::max(T(0), -v);
                    gx.data[off] += g.data[i] * d;
                }
        });
    }

    // mean over examples of w[i] * v[i]; w is a constant mask.
    int dot_mean(int x, const TensorT<T>& w) {
        const auto& vx = value(x);
        if (!vx.same_shape(w)) throw ConfigError("dot_mean: shape mismatch");
        const int n = static_cast<int>(vx.size());
        T acc = 0;
        for (int i = 0; i < n; ++i) acc += vx.data[i] * w.data[i];
        TensorT<T> out({1});
        out.data[0] = acc / static_cast<T>(n);
        return unary_bound(std::move(out), x, [this, w, n](int id, int x2) {
            const T gv = grad(id).data[0] / static_cast<T>(n);
            auto& gx = grad(x2);
            for (int i = 0; i < n; ++i) gx.data[i] += gv * w.data[i];
        });
    }

    // mean over all elements of max(0, 1 + a*x) -> scalar.
    int hinge_mean(int x, T a) {
        const auto& vx = value(x);
        const size_t n = vx.size();
        T acc = 0;
        for (size_t i = 0; i < n; ++i) acc += std::max(T(0), T(1) + a * vx.data[i]);
        TensorT<T> out({1});
        out.data[0] = acc / static_cast<T>(n);
        return unary(std::move(out), x, [this, a, n](int id, int x2) {
            const T gv = grad(id).data[0] / static_cast<T>(n);
            const auto& vx2 = value(x2);
            auto& gx = grad(x2);
            for (size_t i = 0; i < n; ++i)
                if (T(1) + a * vx2.data[i] > T(0)) gx.data[i] += gv * a;
        });
    }

    int mean_all(int x) {
        const auto& vx = value(x);
        const size_t n = vx.size();
        T acc = 0;
        for (size_t i = 0; i < n; ++i) acc += vx.data[i];
        TensorT<T> out({1});
        out.data[0] = acc / static_cast<T>(n);
        return unary(std::move(out), x, [this, n](int id, int x2) {
            const T gv = grad(id).data[0] / static_cast<T>(n);
            auto& gx = grad(x2);
            for (size_t i = 0; i < n; ++i) gx.data[i] += gv;
        });
    }

    // sum_i weights[i] * scalar(ids[i]) -> scalar.
    int scalar_comb(const std::vector<int>& ids, const std::vector<T>& weights) {
        if (ids.size() != weights.size()) throw ConfigError("scalar_comb: size mismatch");
        T acc = 0;
        bool any = false;
        for (size_t i = 0; i < ids.size(); ++i) {
            if (value(ids[i]).size() != 1) throw ConfigError("scalar_comb: inputs must be scalar");
            acc += weights[i] * value(ids[i]).data[0];
            any = any || needs_grad(ids[i]);
        }
        TensorT<T> out({1});
        out.data[0] = acc;
        const int id = push(std::move(out), any);
        if (!any) return id;
        nodes_[id].backward = [this, id, ids, weights]() {
            const T gv = grad(id).data[0];
            for (size_t i = 0; i < ids.size(); ++i)
                if (needs_grad(ids[i])) grad(ids[i]).data[0] += weights[i] * gv;
        };
        return id;
    }

private:
    struct Node {
        TensorT<T> value;
        TensorT<T> grad;
        std::function<void()> backward;
        bool needs_grad = false;
    };

    int check(int id) const {
        if (id < 0 || id >= static_cast<int>(nodes_.size())) throw ConfigError("bad tape id");
        return id;
    }

    static void up_taps(int o, int n, int& i0, int& i1, T& f) {
        // source coordinate o/2 - 0.25, clamped to the valid range
        if (o % 2 == 0) {
            i0 = std::max(0, o / 2 - 1);
            i1 = o / 2;
            f = o == 0 ? T(1) : T(0.75);
        } else {
            i0 = o / 2;
            i1 = std::min(n - 1, o / 2 + 1);
            f = o == 2 * n - 1 ? T(0) : T(0.25);
        }
    }

    template <typename F>
    void accumulate(int x, F&& per_elem) {
        if (!needs_grad(x)) return;
        auto& gx = grad(x);
        for (size_t i = 0; i < gx.size(); ++i) gx.data[i] += per_elem(i);
    }

    template <typename F>
    int unary(TensorT<T> out, int x, F&& back) {
        const int id = push(std::move(out), needs_grad(x));
        if (nodes_[id].needs_grad)
            nodes_[id].backward = [this, id, x, back = std::forward<F>(back)]() { back(id, x); };
        return id;
    }

    // Same as unary but the closure owns captured tensors (targets, masks).
    template <typename F>
    int unary_bound(TensorT<T> out, int x, F&& back) {
        return unary(std::move(out), x, std::forward<F>(back));
    }

    template <typename F>
    int unary_pair(TensorT<T> out, int a, int b, F&& back) {
        const int id = push(std::move(out), needs_grad(a) || needs_grad(b));
        if (nodes_[id].needs_grad)
            nodes_[id].backward = [this, id, a, b, back = std::forward<F>(back)]() { back(id, a, b); };
        return id;
    }

    std::vector<Node> nodes_;
};

}  // namespace iik::ad
