#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lsd2/error.hpp"
#include "lsd2/image.hpp"

namespace lsd2 {

// Dense NCHW tensor. Float for production, double for the gradient-check
// builds of the same templates.
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    size_t size() const { return data.size(); }

    size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix;
    }
    T& at(int in, int ic, int iy, int ix) { return data[index(in, ic, iy, ix)]; }
    T at(int in, int ic, int iy, int ix) const { return data[index(in, ic, iy, ix)]; }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    std::string shape_str() const {
        return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + "]";
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(n, c, h, w);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

// Interleaved HWC image -> planar [1,3,H,W] tensor and back.
template <typename T>
Tensor<T> image_to_tensor(const Image& img) {
    Tensor<T> t(1, 3, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = static_cast<T>(img.at(x, y, c));
    return t;
}

template <typename T>
Image tensor_to_image(const Tensor<T>& t, int batch = 0) {
    if (t.c != 3) throw DimensionError("tensor_to_image: need 3 channels, got " + t.shape_str());
    Image img(t.w, t.h);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(t.at(batch, c, y, x));
    return img;
}

// ---- convolution -----------------------------------------------------------

// Cross-correlation with zero padding preserving spatial size. Weights are
// [out_ch, in_ch, k, k], k odd (3x3 and 1x1 are the only sizes the nets
// use). The kx/ky displacement loops run outside the row loop so the inner
// loop is a contiguous saxpy — this is the pipeline's hot path.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& weight, const std::vector<T>& bias) {
    const int k = weight.h;
    const int pad = (k - 1) / 2;
    if (weight.w != k || k % 2 == 0) throw DimensionError("conv2d: kernel must be odd square");
    if (weight.c != x.c) {
        throw DimensionError("conv2d: weight expects " + std::to_string(weight.c) +
                             " input channels, got " + std::to_string(x.c));
    }
    if (static_cast<int>(bias.size()) != weight.n) throw DimensionError("conv2d: bias size mismatch");

    Tensor<T> y(x.n, weight.n, x.h, x.w);
    for (int in = 0; in < x.n; ++in) {
        for (int oc = 0; oc < weight.n; ++oc) {
            T* ybase = &y.data[y.index(in, oc, 0, 0)];
            const T b = bias[static_cast<size_t>(oc)];
            for (size_t i = 0; i < static_cast<size_t>(x.h) * x.w; ++i) ybase[i] = b;
            for (int ic = 0; ic < x.c; ++ic) {
                const T* xbase = &x.data[x.index(in, ic, 0, 0)];
                for (int ky = 0; ky < k; ++ky) {
                    const int dy = ky - pad;
                    const int y0 = std::max(0, -dy);
                    const int y1 = std::min(x.h, x.h - dy);
                    for (int kx = 0; kx < k; ++kx) {
                        const int dx = kx - pad;
                        const T wv = weight.at(oc, ic, ky, kx);
                        if (wv == T(0)) continue;
                        const int x0 = std::max(0, -dx);
                        const int x1 = std::min(x.w, x.w - dx);
                        for (int yy = y0; yy < y1; ++yy) {
                            T* yrow = ybase + static_cast<size_t>(yy) * x.w;
                            const T* xrow = xbase + static_cast<size_t>(yy + dy) * x.w + dx;
                            for (int xx = x0; xx < x1; ++xx) yrow[xx] += wv * xrow[xx];
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
struct Conv2dGrads {
    Tensor<T> gx;
    Tensor<T> gweight;
    std::vector<T> gbias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weight,
                               const Tensor<T>& gout) {
    const int k = weight.h;
    const int pad = (k - 1) / 2;
    Conv2dGrads<T> g;
    g.gx = Tensor<T>(x.n, x.c, x.h, x.w);
    g.gweight = Tensor<T>(weight.n, weight.c, weight.h, weight.w);
    g.gbias.assign(static_cast<size_t>(weight.n), T(0));

    for (int in = 0; in < x.n; ++in) {
        for (int oc = 0; oc < weight.n; ++oc) {
            const T* gbase = &gout.data[gout.index(in, oc, 0, 0)];
            T bsum = T(0);
            for (size_t i = 0; i < static_cast<size_t>(x.h) * x.w; ++i) bsum += gbase[i];
            g.gbias[static_cast<size_t>(oc)] += bsum;

            for (int ic = 0; ic < x.c; ++ic) {
                const T* xbase = &x.data[x.index(in, ic, 0, 0)];
                T* gxbase = &g.gx.data[g.gx.index(in, ic, 0, 0)];
                for (int ky = 0; ky < k; ++ky) {
                    const int dy = ky - pad;
                    const int y0 = std::max(0, -dy);
                    const int y1 = std::min(x.h, x.h - dy);
                    for (int kx = 0; kx < k; ++kx) {
                        const int dx = kx - pad;
                        const int x0 = std::max(0, -dx);
                        const int x1 = std::min(x.w, x.w - dx);
                        // dL/dw[ky,kx] = sum gout(y,x) * x(y+dy, x+dx)
                        T wsum = T(0);
                        for (int yy = y0; yy < y1; ++yy) {
                            const T* grow = gbase + static_cast<size_t>(yy) * x.w;
                            const T* xrow = xbase + static_cast<size_t>(yy + dy) * x.w + dx;
                            for (int xx = x0; xx < x1; ++xx) wsum += grow[xx] * xrow[xx];
                        }
                        g.gweight.at(oc, ic, ky, kx) += wsum;
                        // dL/dx(y+dy, x+dx) += w * gout(y, x)
                        const T wv = weight.at(oc, ic, ky, kx);
                        if (wv == T(0)) continue;
                        for (int yy = y0; yy < y1; ++yy) {
                            const T* grow = gbase + static_cast<size_t>(yy) * x.w;
                            T* gxrow = gxbase + static_cast<size_t>(yy + dy) * x.w + dx;
                            for (int xx = x0; xx < x1; ++xx) gxrow[xx] += wv * grow[xx];
                        }
                    }
                }
            }
        }
    }
    return g;
}

// ---- pooling / resampling --------------------------------------------------

template <typename T>
struct MaxPoolResult {
    Tensor<T> y;
    std::vector<uint32_t> argmax; // flat input index per output element
};

template <typename T>
MaxPoolResult<T> maxpool2x2_forward(const Tensor<T>& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0) {
        throw DimensionError("maxpool2x2: spatial dims must be even, got " + x.shape_str());
    }
    MaxPoolResult<T> r;
    r.y = Tensor<T>(x.n, x.c, x.h / 2, x.w / 2);
    r.argmax.resize(r.y.size());
    size_t oi = 0;
    for (int in = 0; in < x.n; ++in) {
        for (int ic = 0; ic < x.c; ++ic) {
            for (int yy = 0; yy < x.h; yy += 2) {
                for (int xx = 0; xx < x.w; xx += 2) {
                    size_t best = x.index(in, ic, yy, xx);
                    T bv = x.data[best];
                    const size_t cand[3] = {x.index(in, ic, yy, xx + 1),
                                            x.index(in, ic, yy + 1, xx),
                                            x.index(in, ic, yy + 1, xx + 1)};
                    for (size_t ci : cand) {
                        if (x.data[ci] > bv) {
                            bv = x.data[ci];
                            best = ci;
                        }
                    }
                    r.y.data[oi] = bv;
                    r.argmax[oi] = static_cast<uint32_t>(best);
                    ++oi;
                }
            }
        }
    }
    return r;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<T>& x, const std::vector<uint32_t>& argmax,
                              const Tensor<T>& gout) {
    Tensor<T> gx(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < gout.size(); ++i) gx.data[argmax[i]] += gout.data[i];
    return gx;
}

// Nearest-neighbor 2x upsample; backward sums each replicated group.
template <typename T>
Tensor<T> upsample2x_forward(const Tensor<T>& x) {
    Tensor<T> y(x.n, x.c, x.h * 2, x.w * 2);
    for (int in = 0; in < x.n; ++in)
        for (int ic = 0; ic < x.c; ++ic)
            for (int yy = 0; yy < y.h; ++yy) {
                const T* xrow = &x.data[x.index(in, ic, yy / 2, 0)];
                T* yrow = &y.data[y.index(in, ic, yy, 0)];
                for (int xx = 0; xx < y.w; ++xx) yrow[xx] = xrow[xx / 2];
            }
    return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& gout) {
    if (gout.h % 2 != 0 || gout.w % 2 != 0) {
        throw DimensionError("upsample2x_backward: odd gradient extent");
    }
    Tensor<T> gx(gout.n, gout.c, gout.h / 2, gout.w / 2);
    for (int in = 0; in < gout.n; ++in)
        for (int ic = 0; ic < gout.c; ++ic)
            for (int yy = 0; yy < gout.h; ++yy) {
                const T* grow = &gout.data[gout.index(in, ic, yy, 0)];
                T* gxrow = &gx.data[gx.index(in, ic, yy / 2, 0)];
                for (int xx = 0; xx < gout.w; ++xx) gxrow[xx / 2] += grow[xx];
            }
    return gx;
}

// ---- activations -----------------------------------------------------------

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (T& v : y.data) v = std::max(v, T(0));
    return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& gout) {
    Tensor<T> gx = gout;
    for (size_t i = 0; i < gx.data.size(); ++i) {
        if (x.data[i] <= T(0)) gx.data[i] = T(0);
    }
    return gx;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x) {
    Tensor<T> y = x;
    for (T& v : y.data) v = T(1) / (T(1) + std::exp(-v));
    return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gout) {
    Tensor<T> gx = gout;
    for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= y.data[i] * (T(1) - y.data[i]);
    return gx;
}

// ---- structure -------------------------------------------------------------

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
        throw DimensionError("concat_channels: " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor<T> y(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int in = 0; in < a.n; ++in) {
        std::copy_n(&a.data[a.index(in, 0, 0, 0)], plane * a.c, &y.data[y.index(in, 0, 0, 0)]);
        std::copy_n(&b.data[b.index(in, 0, 0, 0)], plane * b.c, &y.data[y.index(in, a.c, 0, 0)]);
    }
    return y;
}

template <typename T>
void split_channels_backward(const Tensor<T>& gout, int c_a, Tensor<T>& ga, Tensor<T>& gb) {
    ga = Tensor<T>(gout.n, c_a, gout.h, gout.w);
    gb = Tensor<T>(gout.n, gout.c - c_a, gout.h, gout.w);
    const size_t plane = static_cast<size_t>(gout.h) * gout.w;
    for (int in = 0; in < gout.n; ++in) {
        std::copy_n(&gout.data[gout.index(in, 0, 0, 0)], plane * c_a, &ga.data[ga.index(in, 0, 0, 0)]);
        std::copy_n(&gout.data[gout.index(in, c_a, 0, 0)], plane * (gout.c - c_a),
                    &gb.data[gb.index(in, 0, 0, 0)]);
    }
}

// ---- loss ------------------------------------------------------------------

// Mean squared error over every element.
template <typename T>
double l2_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    if (!pred.same_shape(target)) throw DimensionError("l2_loss: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
        s += d * d;
    }
    return s / static_cast<double>(pred.data.size());
}

template <typename T>
Tensor<T> l2_loss_backward(const Tensor<T>& pred, const Tensor<T>& target) {
    if (!pred.same_shape(target)) throw DimensionError("l2_loss: shape mismatch");
    Tensor<T> g(pred.n, pred.c, pred.h, pred.w);
    const T scale = T(2) / static_cast<T>(pred.data.size());
    for (size_t i = 0; i < pred.data.size(); ++i) {
        g.data[i] = scale * (pred.data[i] - target.data[i]);
    }
    return g;
}

// ---- exposure fusion -------------------------------------------------------

// fused(i,j,k) = W(i,j) * long(i,j,k) + (1 - W(i,j)) * short(i,j,k).
// The arithmetic is arranged so W identically 1 returns `long_img` bit-exactly
// and W identically 0 returns `short_img` bit-exactly.
template <typename T>
Tensor<T> fuse_forward(const Tensor<T>& weight_map, const Tensor<T>& short_img,
                       const Tensor<T>& long_img) {
    if (!short_img.same_shape(long_img)) throw DimensionError("fuse: input shape mismatch");
    if (weight_map.n != short_img.n || weight_map.c != 1 || weight_map.h != short_img.h ||
        weight_map.w != short_img.w) {
        throw DimensionError("fuse: weight map " + weight_map.shape_str() + " vs image " +
                             short_img.shape_str());
    }
    Tensor<T> out(short_img.n, short_img.c, short_img.h, short_img.w);
    for (int in = 0; in < out.n; ++in)
        for (int ic = 0; ic < out.c; ++ic)
            for (int yy = 0; yy < out.h; ++yy)
                for (int xx = 0; xx < out.w; ++xx) {
                    const T w = weight_map.at(in, 0, yy, xx);
                    out.at(in, ic, yy, xx) = w * long_img.at(in, ic, yy, xx) +
                                             (T(1) - w) * short_img.at(in, ic, yy, xx);
                }
    return out;
}

// Gradient w.r.t. the weight map only; the two exposures are fixed inputs.
template <typename T>
Tensor<T> fuse_backward(const Tensor<T>& gout, const Tensor<T>& short_img,
                        const Tensor<T>& long_img) {
    Tensor<T> gw(gout.n, 1, gout.h, gout.w);
    for (int in = 0; in < gout.n; ++in)
        for (int ic = 0; ic < gout.c; ++ic)
            for (int yy = 0; yy < gout.h; ++yy)
                for (int xx = 0; xx < gout.w; ++xx) {
                    gw.at(in, 0, yy, xx) +=
                        gout.at(in, ic, yy, xx) *
                        (long_img.at(in, ic, yy, xx) - short_img.at(in, ic, yy, xx));
                }
    return gw;
}

} // namespace lsd2
