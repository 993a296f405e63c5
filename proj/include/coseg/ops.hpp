#ifndef COSEG_OPS_HPP
#define COSEG_OPS_HPP

#include <vector>

#include "coseg/autodiff.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace coseg {

// Spatial ops in NHWC. Convolutions use ceil(H/stride) output sizing with the
// padding split before/after as evenly as possible (even 4x4 kernels at
// stride 1 pad 1 above and 2 below), so the halving arithmetic of the
// contracting paths is exact at every size divisible by the stride product.

struct ConvGeom {
    int oh, ow, pad_top, pad_left;
};

inline ConvGeom conv_geometry(int h, int w, int kh, int kw, int stride) {
    ConvGeom geo;
    geo.oh = (h + stride - 1) / stride;
    geo.ow = (w + stride - 1) / stride;
    int pad_h = std::max((geo.oh - 1) * stride + kh - h, 0);
    int pad_w = std::max((geo.ow - 1) * stride + kw - w, 0);
    geo.pad_top = pad_h / 2;
    geo.pad_left = pad_w / 2;
    return geo;
}

template <typename T>
MatRM<T> im2col(const Tensor<T>& x, int kh, int kw, int stride, const ConvGeom& geo) {
    const int n = x.shape.n, h = x.shape.h, w = x.shape.w, c = x.shape.c;
    MatRM<T> col(long(n) * geo.oh * geo.ow, long(kh) * kw * c);
#pragma omp parallel for schedule(static)
    for (long row = 0; row < long(n) * geo.oh; ++row) {
        const int ni = int(row / geo.oh);
        const int oy = int(row % geo.oh);
        for (int ox = 0; ox < geo.ow; ++ox) {
            T* dst = col.data() + (row * geo.ow + ox) * col.cols();
            for (int ky = 0; ky < kh; ++ky) {
                const int iy = oy * stride - geo.pad_top + ky;
                for (int kx = 0; kx < kw; ++kx) {
                    const int ix = ox * stride - geo.pad_left + kx;
                    T* cell = dst + (long(ky) * kw + kx) * c;
                    if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                        std::fill(cell, cell + c, T(0));
                    } else {
                        const T* src = x.data() + x.index(ni, iy, ix, 0);
                        std::copy(src, src + c, cell);
                    }
                }
            }
        }
    }
    return col;
}

// scatter-add of column gradients back onto the input image
template <typename T>
void col2im_add(const MatRM<T>& dcol, Tensor<T>& dx, int kh, int kw, int stride, const ConvGeom& geo) {
    const int n = dx.shape.n, h = dx.shape.h, w = dx.shape.w, c = dx.shape.c;
#pragma omp parallel for schedule(static)
    for (int ni = 0; ni < n; ++ni) {
        for (int oy = 0; oy < geo.oh; ++oy) {
            for (int ox = 0; ox < geo.ow; ++ox) {
                const T* src = dcol.data() + ((long(ni) * geo.oh + oy) * geo.ow + ox) * dcol.cols();
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride - geo.pad_top + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride - geo.pad_left + kx;
                        if (ix < 0 || ix >= w) continue;
                        T* dst = dx.data() + dx.index(ni, iy, ix, 0);
                        const T* cell = src + (long(ky) * kw + kx) * c;
                        for (int ci = 0; ci < c; ++ci) dst[ci] += cell[ci];
                    }
                }
            }
        }
    }
}

// w: (kh, kw, cin, cout); b: (1,1,1,cout). The im2col buffer is rebuilt in
// the backward pass instead of captured, trading a little compute for a much
// smaller live set during training.
template <typename T>
NodePtr<T> conv2d(Graph<T>& g, const NodePtr<T>& x, const NodePtr<T>& w, const NodePtr<T>& b, int stride) {
    const Shape4 xs = x->value.shape, ws = w->value.shape;
    if (xs.c != ws.w)
        throw ShapeError("conv2d: input channels " + std::to_string(xs.c) + " vs kernel cin " + std::to_string(ws.w));
    const int kh = ws.n, kw = ws.h, cout = ws.c;
    const ConvGeom geo = conv_geometry(xs.h, xs.w, kh, kw, stride);
    const long rows = long(xs.n) * geo.oh * geo.ow;
    const long k = long(kh) * kw * xs.c;

    MatRM<T> col = im2col(x->value, kh, kw, stride, geo);
    Tensor<T> out(Shape4{xs.n, geo.oh, geo.ow, cout});
    auto y = out.as_matrix(rows, cout);
    y.noalias() = col * w->value.as_matrix(k, cout);
    y.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(b->value.data(), cout);

    bool diff = x->requires_grad || w->requires_grad || b->requires_grad;
    auto node = g.result(std::move(out), diff);
    if (node->requires_grad) {
        bool dx = x->requires_grad, dw = w->requires_grad, db = b->requires_grad;
        g.record([=]() {
            if (!node->has_grad()) return;
            auto dy = node->grad.as_matrix(rows, cout);
            if (dw) {
                MatRM<T> col_b = im2col(x->value, kh, kw, stride, geo);
                w->g().as_matrix(k, cout).noalias() += col_b.transpose() * dy;
            }
            if (db) {
                Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(b->g().data(), cout) += dy.colwise().sum();
            }
            if (dx) {
                MatRM<T> dcol = dy * w->value.as_matrix(k, cout).transpose();
                col2im_add(dcol, x->g(), kh, kw, stride, geo);
            }
        });
    }
    return node;
}

// Per-sample, per-channel normalization over the spatial extent; no affine
// parameters. Since there is no affine term the output equals the normalized
// activation, which the backward pass reuses directly.
template <typename T>
NodePtr<T> instance_norm(Graph<T>& g, const NodePtr<T>& x, T eps = T(1e-5)) {
    const Shape4 s = x->value.shape;
    const long m = long(s.h) * s.w;
    const T inv_m = T(1) / T(m);
    Tensor<T> out(s);
    auto inv_std = std::make_shared<std::vector<T>>(size_t(s.n) * s.c);

    using RowArr = Eigen::Array<T, 1, Eigen::Dynamic>;
    for (int ni = 0; ni < s.n; ++ni) {
        auto xm = Eigen::Map<const MatRM<T>>(x->value.data() + x->value.index(ni, 0, 0, 0), m, s.c);
        auto ym = Eigen::Map<MatRM<T>>(out.data() + out.index(ni, 0, 0, 0), m, s.c);
        RowArr mean = xm.array().colwise().sum() * inv_m;
        ym.array() = xm.array().rowwise() - mean;
        RowArr var = ym.array().square().colwise().sum() * inv_m;
        RowArr istd = (var + eps).rsqrt();
        ym.array().rowwise() *= istd;
        for (int ci = 0; ci < s.c; ++ci) (*inv_std)[size_t(ni) * s.c + ci] = istd[ci];
    }

    auto node = g.result(std::move(out), x->requires_grad);
    if (node->requires_grad) {
        g.record([=]() {
            if (!node->has_grad()) return;
            Tensor<T>& dxt = x->g();
            for (int ni = 0; ni < s.n; ++ni) {
                auto dy = Eigen::Map<const MatRM<T>>(node->grad.data() + node->grad.index(ni, 0, 0, 0), m, s.c);
                auto yv = Eigen::Map<const MatRM<T>>(node->value.data() + node->value.index(ni, 0, 0, 0), m, s.c);
                auto dx = Eigen::Map<MatRM<T>>(dxt.data() + dxt.index(ni, 0, 0, 0), m, s.c);
                RowArr mean_dy = dy.array().colwise().sum() * inv_m;
                RowArr mean_dyy = (dy.array() * yv.array()).colwise().sum() * inv_m;
                for (int ci = 0; ci < s.c; ++ci) {
                    const T istd = (*inv_std)[size_t(ni) * s.c + ci];
                    dx.col(ci).array() +=
                        istd * (dy.col(ci).array() - mean_dy[ci] - yv.col(ci).array() * mean_dyy[ci]);
                }
            }
        });
    }
    return node;
}

template <typename T>
NodePtr<T> max_pool2(Graph<T>& g, const NodePtr<T>& x) {
    const Shape4 s = x->value.shape;
    if (s.h % 2 || s.w % 2) throw ShapeError("max_pool2: odd spatial size " + to_string(s));
    const Shape4 os{s.n, s.h / 2, s.w / 2, s.c};
    Tensor<T> out(os);
    auto argmax = std::make_shared<std::vector<int32_t>>(os.count());
    for (int ni = 0; ni < s.n; ++ni)
        for (int oy = 0; oy < os.h; ++oy)
            for (int ox = 0; ox < os.w; ++ox)
                for (int ci = 0; ci < s.c; ++ci) {
                    T best = x->value.at(ni, 2 * oy, 2 * ox, ci);
                    int besty = 2 * oy, bestx = 2 * ox;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            T v = x->value.at(ni, 2 * oy + dy, 2 * ox + dx, ci);
                            if (v > best) {
                                best = v;
                                besty = 2 * oy + dy;
                                bestx = 2 * ox + dx;
                            }
                        }
                    long oi = out.index(ni, oy, ox, ci);
                    out.v[oi] = best;
                    (*argmax)[oi] = int32_t(x->value.index(ni, besty, bestx, ci));
                }
    auto node = g.result(std::move(out), x->requires_grad);
    if (node->requires_grad) {
        g.record([=]() {
            if (!node->has_grad()) return;
            auto& dx = x->g();
            for (long i = 0; i < node->grad.size(); ++i) dx.v[(*argmax)[i]] += node->grad.v[i];
        });
    }
    return node;
}

template <typename T>
NodePtr<T> upsample2_nearest(Graph<T>& g, const NodePtr<T>& x) {
    const Shape4 s = x->value.shape;
    const Shape4 os{s.n, s.h * 2, s.w * 2, s.c};
    Tensor<T> out(os);
    for (int ni = 0; ni < s.n; ++ni)
        for (int y = 0; y < os.h; ++y)
            for (int xq = 0; xq < os.w; ++xq) {
                const T* src = x->value.data() + x->value.index(ni, y / 2, xq / 2, 0);
                T* dst = out.data() + out.index(ni, y, xq, 0);
                std::copy(src, src + s.c, dst);
            }
    auto node = g.result(std::move(out), x->requires_grad);
    if (node->requires_grad) {
        g.record([=]() {
            if (!node->has_grad()) return;
            auto& dx = x->g();
            for (int ni = 0; ni < s.n; ++ni)
                for (int y = 0; y < os.h; ++y)
                    for (int xq = 0; xq < os.w; ++xq) {
                        const T* src = node->grad.data() + node->grad.index(ni, y, xq, 0);
                        T* dst = dx.data() + dx.index(ni, y / 2, xq / 2, 0);
                        for (int ci = 0; ci < s.c; ++ci) dst[ci] += src[ci];
                    }
        });
    }
    return node;
}

template <typename T>
NodePtr<T> concat_channels(Graph<T>& g, const NodePtr<T>& a, const NodePtr<T>& b) {
    const Shape4 sa = a->value.shape, sb = b->value.shape;
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w)
        throw ShapeError("concat_channels: " + to_string(sa) + " vs " + to_string(sb));
    const Shape4 os{sa.n, sa.h, sa.w, sa.c + sb.c};
    Tensor<T> out(os);
    const long pixels = long(sa.n) * sa.h * sa.w;
    for (long p = 0; p < pixels; ++p) {
        T* dst = out.data() + p * os.c;
        std::copy(a->value.data() + p * sa.c, a->value.data() + (p + 1) * sa.c, dst);
        std::copy(b->value.data() + p * sb.c, b->value.data() + (p + 1) * sb.c, dst + sa.c);
    }
    auto node = g.result(std::move(out), a->requires_grad || b->requires_grad);
    if (node->requires_grad) {
        bool da = a->requires_grad, db = b->requires_grad;
        g.record([=]() {
            if (!node->has_grad()) return;
            for (long p = 0; p < pixels; ++p) {
                const T* src = node->grad.data() + p * os.c;
                if (da) {
                    T* dst = a->g().data() + p * sa.c;
                    for (int ci = 0; ci < sa.c; ++ci) dst[ci] += src[ci];
                }
                if (db) {
                    T* dst = b->g().data() + p * sb.c;
                    for (int ci = 0; ci < sb.c; ++ci) dst[ci] += src[ci];
                }
            }
        });
    }
    return node;
}

}  // namespace coseg

#endif
