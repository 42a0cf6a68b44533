#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lsd2/error.hpp"
#include "lsd2/rng.hpp"
#include "lsd2/tensor.hpp"

namespace lsd2 {

template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
};

namespace detail {

// Fan-in-scaled uniform init: U[-1/sqrt(fan_in), 1/sqrt(fan_in)].
template <typename T>
Tensor<T> init_conv_weight(int out_ch, int in_ch, int k, Rng& rng) {
    Tensor<T> w(out_ch, in_ch, k, k);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * k * k);
    for (T& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
    return w;
}

// One conv with an optional ReLU; caches what backward needs. Parameters
// live in the owning net's store, referenced by index so the store can be
// swapped wholesale (checkpoint load).
template <typename T>
struct ConvUnit {
    int w_idx = -1;
    int b_idx = -1;
    bool relu = true;

    Tensor<T> x_cache;
    Tensor<T> z_cache; // pre-activation, needed for the ReLU mask

    void init(std::vector<Param<T>>& store, const std::string& name, int in_ch, int out_ch, int k,
              bool relu_after, Rng& rng) {
        relu = relu_after;
        w_idx = static_cast<int>(store.size());
        store.push_back({name + ".weight", init_conv_weight<T>(out_ch, in_ch, k, rng),
                         Tensor<T>(out_ch, in_ch, k, k)});
        b_idx = static_cast<int>(store.size());
        store.push_back({name + ".bias", Tensor<T>(out_ch, 1, 1, 1), Tensor<T>(out_ch, 1, 1, 1)});
    }

    Tensor<T> forward(std::vector<Param<T>>& store, const Tensor<T>& x) {
        x_cache = x;
        Tensor<T> z = conv2d_forward(x, store[w_idx].value, store[b_idx].value.data);
        if (!relu) return z;
        z_cache = z;
        return relu_forward(z);
    }

    Tensor<T> backward(std::vector<Param<T>>& store, const Tensor<T>& gout) {
        const Tensor<T> gz = relu ? relu_backward(z_cache, gout) : gout;
        Conv2dGrads<T> g = conv2d_backward(x_cache, store[w_idx].value, gz);
        for (size_t i = 0; i < g.gweight.data.size(); ++i) {
            store[w_idx].grad.data[i] += g.gweight.data[i];
        }
        for (size_t i = 0; i < g.gbias.size(); ++i) store[b_idx].grad.data[i] += g.gbias[i];
        return g.gx;
    }
};

} // namespace detail

struct UNetConfig {
    int in_channels = 6; // stacked short + long
    int out_channels = 3;
    int depth = 3;
    int base_features = 32;

    void validate() const {
        if (depth < 1 || base_features < 1 || in_channels < 1 || out_channels < 1) {
            throw InvalidParameterError("UNetConfig: all fields must be >= 1");
        }
    }

    int features_at(int level) const { return base_features << level; }
};

// Encoder/decoder with skip concatenations. Per level: two 3x3 conv+ReLU,
// 2x2 max-pool down; decoder mirrors with nearest upsample + 3x3 conv, skip
// concat, two 3x3 conv+ReLU; linear 1x1 head. Output is left unclamped so
// the loss sees the raw values; inference clamps to [0,1].
template <typename T>
class UNet {
public:
    explicit UNet(const UNetConfig& cfg, uint64_t init_seed = 1) : cfg_(cfg) {
        cfg.validate();
        Rng rng(init_seed);
        enc_a_.resize(cfg.depth);
        enc_b_.resize(cfg.depth);
        dec_up_.resize(cfg.depth);
        dec_a_.resize(cfg.depth);
        dec_b_.resize(cfg.depth);
        for (int i = 0; i < cfg.depth; ++i) {
            const int in_ch = (i == 0) ? cfg.in_channels : cfg.features_at(i - 1);
            const int f = cfg.features_at(i);
            enc_a_[i].init(params_, "enc" + std::to_string(i) + "a", in_ch, f, 3, true, rng);
            enc_b_[i].init(params_, "enc" + std::to_string(i) + "b", f, f, 3, true, rng);
        }
        const int fb = cfg.features_at(cfg.depth);
        bott_a_.init(params_, "bott_a", cfg.features_at(cfg.depth - 1), fb, 3, true, rng);
        bott_b_.init(params_, "bott_b", fb, fb, 3, true, rng);
        for (int i = cfg.depth - 1; i >= 0; --i) {
            const int f = cfg.features_at(i);
            const int above = cfg.features_at(i + 1);
            dec_up_[i].init(params_, "dec" + std::to_string(i) + "up", above, f, 3, true, rng);
            dec_a_[i].init(params_, "dec" + std::to_string(i) + "a", 2 * f, f, 3, true, rng);
            dec_b_[i].init(params_, "dec" + std::to_string(i) + "b", f, f, 3, true, rng);
        }
        head_.init(params_, "head", cfg.base_features, cfg.out_channels, 1, false, rng);
    }

    const UNetConfig& config() const { return cfg_; }
    std::vector<Param<T>>& params() { return params_; }
    const std::vector<Param<T>>& params() const { return params_; }

    void zero_grads() {
        for (Param<T>& p : params_) {
            std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
        }
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.c != cfg_.in_channels) {
            throw DimensionError("UNet: expected " + std::to_string(cfg_.in_channels) +
                                 " input channels, got " + std::to_string(x.c));
        }
        const int div = 1 << cfg_.depth;
        if (x.h % div != 0 || x.w % div != 0) {
            throw DimensionError("UNet: spatial dims must be divisible by " + std::to_string(div) +
                                 ", got " + x.shape_str());
        }
        skips_.assign(static_cast<size_t>(cfg_.depth), Tensor<T>());
        pools_.assign(static_cast<size_t>(cfg_.depth), MaxPoolResult<T>());

        Tensor<T> cur = x;
        for (int i = 0; i < cfg_.depth; ++i) {
            cur = enc_a_[i].forward(params_, cur);
            cur = enc_b_[i].forward(params_, cur);
            skips_[i] = cur;
            pools_[i] = maxpool2x2_forward(cur);
            cur = pools_[i].y;
        }
        cur = bott_a_.forward(params_, cur);
        cur = bott_b_.forward(params_, cur);
        for (int i = cfg_.depth - 1; i >= 0; --i) {
            cur = dec_up_[i].forward(params_, upsample2x_forward(cur));
            cur = concat_channels(skips_[i], cur);
            cur = dec_a_[i].forward(params_, cur);
            cur = dec_b_[i].forward(params_, cur);
        }
        return head_.forward(params_, cur);
    }

    // Accumulates parameter gradients (zero_grads() first), returns dL/dx.
    Tensor<T> backward(const Tensor<T>& gout) {
        Tensor<T> g = head_.backward(params_, gout);
        std::vector<Tensor<T>> skip_grads(static_cast<size_t>(cfg_.depth));
        for (int i = 0; i < cfg_.depth; ++i) {
            g = dec_b_[i].backward(params_, g);
            g = dec_a_[i].backward(params_, g);
            Tensor<T> g_skip, g_up;
            split_channels_backward(g, skips_[i].c, g_skip, g_up);
            skip_grads[i] = std::move(g_skip);
            g = upsample2x_backward(dec_up_[i].backward(params_, g_up));
        }
        g = bott_b_.backward(params_, g);
        g = bott_a_.backward(params_, g);
        for (int i = cfg_.depth - 1; i >= 0; --i) {
            Tensor<T> gp = maxpool2x2_backward(skips_[i], pools_[i].argmax, g);
            for (size_t j = 0; j < gp.data.size(); ++j) gp.data[j] += skip_grads[i].data[j];
            g = enc_b_[i].backward(params_, gp);
            g = enc_a_[i].backward(params_, g);
        }
        return g;
    }

private:
    UNetConfig cfg_;
    std::vector<Param<T>> params_;
    std::vector<detail::ConvUnit<T>> enc_a_, enc_b_, dec_up_, dec_a_, dec_b_;
    detail::ConvUnit<T> bott_a_, bott_b_, head_;
    std::vector<Tensor<T>> skips_;
    std::vector<MaxPoolResult<T>> pools_;
};

struct FusionNetConfig {
    int in_channels = 6;
    // Hidden feature widths from the fusion-network recipe; the 7th layer is
    // the 1x1 single-channel head.
    static constexpr int kFeatures[6] = {16, 16, 32, 32, 16, 16};
};

// Seven sequential convolutions: six 3x3+ReLU with widths 16,16,32,32,16,16
// and a 1x1 head squashed by a sigmoid so the weight map is a valid convex
// blending coefficient.
template <typename T>
class FusionNet {
public:
    explicit FusionNet(const FusionNetConfig& cfg = {}, uint64_t init_seed = 1) : cfg_(cfg) {
        Rng rng(init_seed);
        int in_ch = cfg.in_channels;
        for (int i = 0; i < 6; ++i) {
            convs_[i].init(params_, "conv" + std::to_string(i + 1), in_ch,
                           FusionNetConfig::kFeatures[i], 3, true, rng);
            in_ch = FusionNetConfig::kFeatures[i];
        }
        head_.init(params_, "conv7", in_ch, 1, 1, false, rng);
    }

    const FusionNetConfig& config() const { return cfg_; }
    std::vector<Param<T>>& params() { return params_; }
    const std::vector<Param<T>>& params() const { return params_; }

    void zero_grads() {
        for (Param<T>& p : params_) {
            std::fill(p.grad.data.begin(), p.grad.data.end(), T(0));
        }
    }

    // Weight map in [0,1], same spatial size as the input, one channel.
    Tensor<T> forward(const Tensor<T>& x) {
        if (x.c != cfg_.in_channels) {
            throw DimensionError("FusionNet: expected " + std::to_string(cfg_.in_channels) +
                                 " input channels, got " + std::to_string(x.c));
        }
        Tensor<T> cur = x;
        for (auto& conv : convs_) cur = conv.forward(params_, cur);
        w_cache_ = sigmoid_forward(head_.forward(params_, cur));
        return w_cache_;
    }

    Tensor<T> backward(const Tensor<T>& gout) {
        Tensor<T> g = head_.backward(params_, sigmoid_backward(w_cache_, gout));
        for (int i = 5; i >= 0; --i) g = convs_[i].backward(params_, g);
        return g;
    }

private:
    FusionNetConfig cfg_;
    std::vector<Param<T>> params_;
    detail::ConvUnit<T> convs_[6];
    detail::ConvUnit<T> head_;
};

// ---- image-level wrappers ----------------------------------------------

template <typename T>
Tensor<T> stack_pair(const Image& short_img, const Image& long_img) {
    if (!short_img.same_shape(long_img)) throw DimensionError("stack_pair: shape mismatch");
    return concat_channels(image_to_tensor<T>(short_img), image_to_tensor<T>(long_img));
}

namespace detail {

// Reflective pad to the next multiple of `div` on each axis (bottom/right),
// so arbitrary sizes can go through the U-Net; callers crop back.
inline Image pad_to_multiple(const Image& img, int div) {
    const int ph = (div - img.height % div) % div;
    const int pw = (div - img.width % div) % div;
    if (ph == 0 && pw == 0) return img;
    if (ph >= img.height || pw >= img.width) {
        throw DimensionError("pad_to_multiple: image too small to pad reflectively");
    }
    Image out(img.width + pw, img.height + ph);
    for (int y = 0; y < out.height; ++y) {
        const int sy = (y < img.height) ? y : 2 * img.height - 2 - y;
        for (int x = 0; x < out.width; ++x) {
            const int sx = (x < img.width) ? x : 2 * img.width - 2 - x;
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(sx, sy, c);
        }
    }
    return out;
}

inline Image crop_to(const Image& img, int width, int height) {
    Image out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(x, y, c);
    return out;
}

} // namespace detail

// Run the joint denoise/deblur net on an image pair. Pads reflectively to
// the U-Net's divisibility requirement, crops back, clamps to [0,1] (the
// clamp is inference-only; training reads the raw head output).
template <typename T>
Image unet_infer(UNet<T>& net, const Image& short_img, const Image& long_img) {
    const int div = 1 << net.config().depth;
    const Image ps = detail::pad_to_multiple(short_img, div);
    const Image pl = detail::pad_to_multiple(long_img, div);
    const Tensor<T> out = net.forward(stack_pair<T>(ps, pl));
    return clip(detail::crop_to(tensor_to_image(out), short_img.width, short_img.height), 1.0);
}

// Per-pixel convex combination of the two exposures under a weight map.
inline Image fuse(const Tensor<float>& weight_map, const Image& short_img, const Image& long_img) {
    const Tensor<float> fused = fuse_forward(weight_map, image_to_tensor<float>(short_img),
                                             image_to_tensor<float>(long_img));
    return tensor_to_image(fused);
}

template <typename T>
Tensor<T> fusion_weight_map(FusionNet<T>& net, const Image& short_img, const Image& long_img) {
    return net.forward(stack_pair<T>(short_img, long_img));
}

} // namespace lsd2
