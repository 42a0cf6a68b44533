#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "lsd2/error.hpp"
#include "lsd2/gyro.hpp"
#include "lsd2/image.hpp"
#include "lsd2/psf.hpp"
#include "lsd2/rng.hpp"

namespace lsd2 {

// Knobs of the data-generation pipeline. Defaults are the LSD2 training
// regime; fusion_mode switches to the exposure-fusion variant (s drawn from
// [1/3, 3], ground truth is the unscaled original, and no motion blur since
// the long input at fusion time is an already-deblurred image).
struct SynthParams {
    double s_min = 1.0;
    double s_max = 3.0;
    double a_min = 0.02;
    double a_max = 0.3;
    double b_min = 0.0;
    double b_max = 0.01;
    double photons_per_unit = 1000.0;
    double short_noise_factor = 4.0;
    double exposure_ratio = 1.0 / 30.0;
    double gamma = 2.2;
    int tile_size = 32;
    int psf_samples = 256;
    int max_kernel_radius = 64;
    bool fusion_mode = false;

    static SynthParams fusion_defaults() {
        SynthParams p;
        p.s_min = 1.0 / 3.0;
        p.s_max = 3.0;
        p.fusion_mode = true;
        return p;
    }

    void validate() const {
        if (!(s_min > 0.0) || !(s_max >= s_min)) {
            throw InvalidParameterError("SynthParams: s_range must be within (0, inf)");
        }
        if (!(photons_per_unit > 0.0)) {
            throw InvalidParameterError("SynthParams: photons_per_unit must be > 0");
        }
        if (!(short_noise_factor >= 1.0)) {
            throw InvalidParameterError("SynthParams: short_noise_factor must be >= 1");
        }
    }

    double lambda_long() const { return photons_per_unit; }
    // Dividing lambda by the factor squared makes the normalized noise
    // standard deviation larger by exactly short_noise_factor.
    double lambda_short() const { return photons_per_unit / (short_noise_factor * short_noise_factor); }
};

// Everything drawn or derived while generating one sample; enough to
// re-derive the sample given the source image and gyro track.
struct SynthMeta {
    uint64_t seed = 0;
    uint64_t sample_index = 0;
    std::string source;
    double s = 1.0;
    std::array<double, 3> a{1, 1, 1};
    std::array<double, 3> b{0, 0, 0};
    double t_1 = 0.0;
    double t_e = 0.0;
    double t_r = 0.0;
    int width = 0;
    int height = 0;
    int psf_grid_rows = 0;
    int psf_grid_cols = 0;
    int max_trail_px = 0;
    bool fusion_mode = false;
};

struct SynthSample {
    Image short_img;
    Image long_img;
    Image target;
    SynthMeta meta;
};

// Shot noise: v -> Poisson(lambda*v)/lambda, independent per pixel and
// channel.
inline Image add_shot_noise(const Image& img, double photons_per_unit, Rng& rng) {
    if (!(photons_per_unit > 0.0)) {
        throw InvalidParameterError("add_shot_noise: photons_per_unit must be > 0");
    }
    Image out(img.width, img.height);
    for (size_t i = 0; i < img.data.size(); ++i) {
        const float v = img.data[i];
        if (v < 0.0f || !std::isfinite(v)) {
            throw InvalidInputError("add_shot_noise: negative or non-finite input value");
        }
        out.data[i] = static_cast<float>(rng.poisson(photons_per_unit * v) / photons_per_unit);
    }
    return out;
}

// Ground truth: clip(s * I, 1). The unclipped s*I is kept separately by the
// caller; saturation enters the target here and nowhere else.
inline Image make_target(const Image& i_lin, double s, const SynthParams& params) {
    if (s < params.s_min || s > params.s_max) {
        throw InvalidParameterError("make_target: s outside configured s_range");
    }
    return clip(scale(i_lin, s), 1.0);
}

// Short exposure from the unclipped scaled image: per-channel affine
// distortion, then shot noise at lambda/factor^2, then clip to [0,1].
inline Image make_short(const Image& s_i, const ChannelAffine& t, const SynthParams& params,
                        Rng& rng) {
    params.validate();
    return clip(add_shot_noise(affine_channels(s_i, t), params.lambda_short(), rng), 1.0);
}

namespace detail {
// Noise + final clip shared by the blurred and the no-blur (fusion) long
// paths. Clipping comes last: blur and noise act on unclipped intensities.
inline Image finish_long(const Image& blurred, const SynthParams& params, Rng& rng) {
    return clip(add_shot_noise(blurred, params.lambda_long(), rng), 1.0);
}
} // namespace detail

// Long exposure: blur the UNCLIPPED scaled image, add shot noise, then clip
// at 1. Order matters: saturated trails stay saturated only when the clip
// happens after the blur.
inline Image make_long(const Image& s_i, const PsfField& field, const SynthParams& params,
                       Rng& rng) {
    params.validate();
    return detail::finish_long(apply_blur(s_i, field, BlurMode::tiled), params, rng);
}

// Full data-generation pipeline for one sample. Substream layout (split
// indices off the per-sample rng) is a documented contract so tests can
// reproduce any stage independently:
//   0: scalar draws, in order s, t_f, a0, a1, a2, b0, b1, b2
//   1: short-exposure noise
//   2: long-exposure noise
// The input shutter's t_f is ignored; the exposure start is drawn uniformly
// over the track (minus the exposure+readout window) and recorded in meta.
inline SynthSample synthesize_pair(const Image& i_srgb, const GyroTrack& track,
                                   const Intrinsics& k, const ShutterSpec& shutter,
                                   const SynthParams& params, const Rng& rng) {
    params.validate();
    shutter.validate();
    k.validate();

    Rng scalars = rng.split(0);
    Rng short_noise = rng.split(1);
    Rng long_noise = rng.split(2);

    const Image lin = gamma_decode(i_srgb, params.gamma);

    const double s = scalars.uniform(params.s_min, params.s_max);

    const double window = shutter.t_e + shutter.t_r;
    if (track.duration() <= window) {
        throw OutOfRangeError("synthesize_pair: gyro track shorter than exposure window");
    }
    const double t_f = scalars.uniform(track.start_time(), track.end_time() - window);

    ChannelAffine affine;
    for (int c = 0; c < 3; ++c) affine.a[c] = scalars.uniform(params.a_min, params.a_max);
    for (int c = 0; c < 3; ++c) affine.b[c] = scalars.uniform(params.b_min, params.b_max);

    const Image s_i = scale(lin, s);
    const Image target_lin = params.fusion_mode ? clip(lin, 1.0) : make_target(lin, s, params);

    const Image short_lin = make_short(s_i, affine, params, short_noise);

    SynthSample sample;
    sample.meta.s = s;
    sample.meta.a = affine.a;
    sample.meta.b = affine.b;
    sample.meta.t_1 = t_f;
    sample.meta.t_e = shutter.t_e;
    sample.meta.t_r = shutter.t_r;
    sample.meta.width = i_srgb.width;
    sample.meta.height = i_srgb.height;
    sample.meta.fusion_mode = params.fusion_mode;

    Image long_lin;
    if (params.fusion_mode) {
        long_lin = detail::finish_long(s_i, params, long_noise);
    } else {
        ShutterSpec sh = shutter;
        sh.t_f = t_f;
        sh.n_rows = i_srgb.height;
        const PsfField field = psf_field(track, k, sh, i_srgb.width, i_srgb.height,
                                         params.tile_size, params.psf_samples,
                                         params.max_kernel_radius);
        sample.meta.psf_grid_rows = field.rows;
        sample.meta.psf_grid_cols = field.cols;
        sample.meta.max_trail_px = field.max_trail_len();
        long_lin = make_long(s_i, field, params, long_noise);
    }

    sample.short_img = gamma_encode(short_lin, params.gamma);
    sample.long_img = gamma_encode(long_lin, params.gamma);
    sample.target = gamma_encode(target_lin, params.gamma);
    return sample;
}

} // namespace lsd2
