#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lsd2/error.hpp"
#include "lsd2/geometry.hpp"
#include "lsd2/gyro.hpp"
#include "lsd2/image.hpp"

namespace lsd2 {

// Rolling-shutter exposure timing. t_f is the start of the first row's
// exposure, t_e the per-row exposure duration, t_r the readout time (first
// to last row), n_rows the sensor row count N.
struct ShutterSpec {
    double t_f = 0.0;
    double t_e = 0.0;
    double t_r = 0.0;
    int n_rows = 1;

    void validate() const {
        if (!(t_e > 0.0)) throw InvalidParameterError("ShutterSpec: t_e must be > 0");
        if (t_r < 0.0) throw InvalidParameterError("ShutterSpec: t_r must be >= 0");
        if (n_rows < 1) throw InvalidParameterError("ShutterSpec: n_rows must be >= 1");
    }
};

// Exposure start of row y: t_1(y) = t_f + t_r * y / N. Accepts fractional
// rows (tile centers land between rows).
inline double row_start_time(const ShutterSpec& shutter, double y) {
    shutter.validate();
    if (y < 0.0 || y >= static_cast<double>(shutter.n_rows)) {
        throw InvalidParameterError("row_start_time: row index out of range");
    }
    return shutter.t_f + shutter.t_r * y / static_cast<double>(shutter.n_rows);
}

// One point-spread kernel. `origin` is the index of the center cell along
// each axis; the trajectory's start splats exactly there, so blur trails
// extend away from the origin rather than being centered on it. Weights are
// non-negative and sum to 1.
struct PsfKernel {
    int size = 1;
    int origin = 0;
    std::vector<double> weights;

    PsfKernel() : weights(1, 1.0) {}
    explicit PsfKernel(int side)
        : size(side), origin(side / 2), weights(static_cast<size_t>(side) * side, 0.0) {}

    double& at(int ix, int iy) { return weights[static_cast<size_t>(iy) * size + ix]; }
    double at(int ix, int iy) const { return weights[static_cast<size_t>(iy) * size + ix]; }

    bool is_delta() const {
        for (int iy = 0; iy < size; ++iy) {
            for (int ix = 0; ix < size; ++ix) {
                const double w = at(ix, iy);
                if (ix == origin && iy == origin) {
                    if (w != 1.0) return false;
                } else if (w != 0.0) {
                    return false;
                }
            }
        }
        return true;
    }

    // Support bounding box relative to the origin cell (cells with nonzero
    // weight). Used for trail-length measurements and metadata.
    struct Bbox {
        int min_x = 0, max_x = 0, min_y = 0, max_y = 0;
        int trail_len() const { return std::max(max_x - min_x, max_y - min_y); }
    };
    Bbox support() const {
        Bbox b;
        bool any = false;
        for (int iy = 0; iy < size; ++iy) {
            for (int ix = 0; ix < size; ++ix) {
                if (at(ix, iy) <= 0.0) continue;
                const int dx = ix - origin;
                const int dy = iy - origin;
                if (!any) {
                    b = {dx, dx, dy, dy};
                    any = true;
                } else {
                    b.min_x = std::min(b.min_x, dx);
                    b.max_x = std::max(b.max_x, dx);
                    b.min_y = std::min(b.min_y, dy);
                    b.max_y = std::max(b.max_y, dy);
                }
            }
        }
        return b;
    }
};

namespace detail {

// Forward-only cursor over track segments; psf_at advances it once per time
// sample instead of re-walking the track from scratch. Segment i holds the
// angular velocity of sample i over [t_i, t_{i+1}) (zero-order hold), same
// convention as integrate_rotation.
class RotationCursor {
public:
    RotationCursor(const GyroTrack& track, double t_start)
        : track_(&track), t_(t_start), seg_(0) {
        const auto& s = track.samples();
        while (seg_ + 2 < s.size() && s[seg_ + 1].t <= t_) ++seg_;
    }

    // Rotation accumulated so far, relative to the cursor's start time.
    const Rotation& rotation() const { return q_; }

    void advance_to(double t) {
        const auto& s = track_->samples();
        while (t_ < t) {
            const bool last = seg_ + 2 >= s.size();
            const double seg_end = last ? t : s[seg_ + 1].t;
            const double step_end = std::min(t, seg_end);
            q_ = (q_ * Rotation::from_angular_velocity(s[seg_].omega, step_end - t_)).normalized();
            t_ = step_end;
            if (!last && t_ >= seg_end) ++seg_;
        }
    }

private:
    const GyroTrack* track_;
    double t_;
    size_t seg_;
    Rotation q_ = Rotation::identity();
};

inline bool is_identity(const Rotation& q) {
    return q.w == 1.0 && q.x == 0.0 && q.y == 0.0 && q.z == 0.0;
}

} // namespace detail

// PSF at pixel position `pos`, timed by an explicit exposure window
// [t_start, t_start + t_e]. The displacement trajectory is sampled at
// n_samples uniform times, each sample bilinearly splatted with weight
// 1/n_samples relative to the start-of-exposure position (H(t_start) = I,
// so the trajectory begins at the origin cell — this is what makes the
// blurred image drift away from the sharp one).
inline PsfKernel psf_for_window(const GyroTrack& track, const Intrinsics& k, const Vec2& pos,
                                double t_start, double t_e, int n_samples, int max_radius = 64) {
    if (n_samples < 2) throw InvalidParameterError("psf: n_samples must be >= 2");
    if (!(t_e > 0.0)) throw InvalidParameterError("psf: exposure duration must be > 0");
    if (!track.contains(t_start, t_start + t_e)) {
        throw OutOfRangeError("psf: exposure window outside gyro track span");
    }
    k.validate();

    std::vector<Vec2> disp(static_cast<size_t>(n_samples));
    detail::RotationCursor cursor(track, t_start);
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    for (int i = 0; i < n_samples; ++i) {
        const double t = t_start + t_e * static_cast<double>(i) / (n_samples - 1);
        cursor.advance_to(t);
        const Rotation& q = cursor.rotation();
        Vec2 d{0.0, 0.0};
        if (!detail::is_identity(q)) {
            const Mat3 h = homography_at(k, q, Rotation::identity());
            const Vec2 p = project(h, pos);
            d = {p.x - pos.x, p.y - pos.y};
        }
        disp[static_cast<size_t>(i)] = d;
        min_x = std::min(min_x, d.x);
        max_x = std::max(max_x, d.x);
        min_y = std::min(min_y, d.y);
        max_y = std::max(max_y, d.y);
    }

    // Smallest odd side covering the trajectory bounding box plus a 1-px
    // bilinear margin, origin at the center cell.
    const double reach = std::max({-min_x, max_x, -min_y, max_y});
    const int half = static_cast<int>(std::ceil(reach)) + 1;
    if (2 * half + 1 > 2 * max_radius + 1) {
        throw OversizedBlurError("psf: trajectory needs kernel radius " + std::to_string(half) +
                                     " px (cap " + std::to_string(max_radius) + ")",
                                 half);
    }

    PsfKernel kern(2 * half + 1);
    const double w = 1.0 / static_cast<double>(n_samples);
    for (const Vec2& d : disp) {
        const double gx = d.x + kern.origin;
        const double gy = d.y + kern.origin;
        const int x0 = static_cast<int>(std::floor(gx));
        const int y0 = static_cast<int>(std::floor(gy));
        const double fx = gx - x0;
        const double fy = gy - y0;
        kern.at(x0, y0) += w * (1.0 - fx) * (1.0 - fy);
        kern.at(x0 + 1, y0) += w * fx * (1.0 - fy);
        kern.at(x0, y0 + 1) += w * (1.0 - fx) * fy;
        kern.at(x0 + 1, y0 + 1) += w * fx * fy;
    }

    double total = 0.0;
    for (double v : kern.weights) total += v;
    for (double& v : kern.weights) v /= total;
    return kern;
}

// PSF at pixel `pos` with rolling-shutter timing: the exposure window starts
// at t_1(y) of the pixel's own row.
inline PsfKernel psf_at(const GyroTrack& track, const Intrinsics& k, const ShutterSpec& shutter,
                        const Vec2& pos, int n_samples, int max_radius = 64) {
    const double t1 = row_start_time(shutter, pos.y);
    return psf_for_window(track, k, pos, t1, shutter.t_e, n_samples, max_radius);
}

// Grid of kernels at tile centers. Carries its generation inputs so exact
// per-pixel blur can be recomputed from the field alone.
struct PsfField {
    int tile_size = 32;
    int cols = 0;
    int rows = 0;
    int width = 0;
    int height = 0;
    std::vector<PsfKernel> grid; // row-major [rows][cols]

    GyroTrack track;
    Intrinsics intrinsics;
    ShutterSpec shutter;
    int n_samples = 256;
    int max_radius = 64;

    const PsfKernel& kernel(int r, int c) const { return grid[static_cast<size_t>(r) * cols + c]; }

    Vec2 tile_center(int r, int c) const {
        const double x = std::min((c + 0.5) * tile_size - 0.5, static_cast<double>(width - 1));
        const double y = std::min((r + 0.5) * tile_size - 0.5, static_cast<double>(height - 1));
        return {std::max(x, 0.0), std::max(y, 0.0)};
    }

    int max_trail_len() const {
        int m = 0;
        for (const PsfKernel& kern : grid) m = std::max(m, kern.support().trail_len());
        return m;
    }
};

inline PsfField psf_field(const GyroTrack& track, const Intrinsics& k, const ShutterSpec& shutter,
                          int width, int height, int tile_size, int n_samples,
                          int max_radius = 64) {
    if (tile_size < 1) throw InvalidParameterError("psf_field: tile_size must be >= 1");
    if (width < 1 || height < 1) throw InvalidParameterError("psf_field: empty image extent");

    PsfField field;
    field.tile_size = tile_size;
    field.cols = (width + tile_size - 1) / tile_size;
    field.rows = (height + tile_size - 1) / tile_size;
    field.width = width;
    field.height = height;
    field.track = track;
    field.intrinsics = k;
    field.shutter = shutter;
    field.n_samples = n_samples;
    field.max_radius = max_radius;
    field.grid.reserve(static_cast<size_t>(field.cols) * field.rows);
    for (int r = 0; r < field.rows; ++r) {
        for (int c = 0; c < field.cols; ++c) {
            field.grid.push_back(psf_at(track, k, shutter, field.tile_center(r, c), n_samples, max_radius));
        }
    }
    return field;
}

enum class BlurMode { tiled, exact };

namespace detail {

// Gather one output pixel through a kernel: out(q) = sum_c w[c] * in(q - d_c)
// with d_c the cell's offset from the origin. Borders replicate.
inline void gather_kernel(const Image& img, const PsfKernel& kern, int x, int y, double acc[3]) {
    for (int iy = 0; iy < kern.size; ++iy) {
        const int sy = std::clamp(y - (iy - kern.origin), 0, img.height - 1);
        for (int ix = 0; ix < kern.size; ++ix) {
            const double w = kern.at(ix, iy);
            if (w == 0.0) continue;
            const int sx = std::clamp(x - (ix - kern.origin), 0, img.width - 1);
            const float* px = &img.data[(static_cast<size_t>(sy) * img.width + sx) * 3];
            acc[0] += w * px[0];
            acc[1] += w * px[1];
            acc[2] += w * px[2];
        }
    }
}

} // namespace detail

// Spatially-variant convolution of the image with the PSF field. Tiled mode
// blends the four nearest tile kernels bilinearly per output pixel; exact
// mode recomputes the per-pixel PSF (slow reference path). Borders replicate,
// so unit-sum kernels conserve constant images.
inline Image apply_blur(const Image& img, const PsfField& field, BlurMode mode = BlurMode::tiled) {
    if (img.width != field.width || img.height != field.height) {
        throw DimensionError("apply_blur: field extent does not match image");
    }
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc[3] = {0.0, 0.0, 0.0};
            if (mode == BlurMode::exact) {
                const PsfKernel kern =
                    psf_at(field.track, field.intrinsics, field.shutter,
                           Vec2{static_cast<double>(x), static_cast<double>(y)}, field.n_samples,
                           field.max_radius);
                detail::gather_kernel(img, kern, x, y, acc);
            } else {
                const double gx = (x + 0.5) / field.tile_size - 0.5;
                const double gy = (y + 0.5) / field.tile_size - 0.5;
                const int c0 = std::clamp(static_cast<int>(std::floor(gx)), 0, field.cols - 1);
                const int r0 = std::clamp(static_cast<int>(std::floor(gy)), 0, field.rows - 1);
                const int c1 = std::min(c0 + 1, field.cols - 1);
                const int r1 = std::min(r0 + 1, field.rows - 1);
                const double ax = std::clamp(gx - c0, 0.0, 1.0);
                const double ay = std::clamp(gy - r0, 0.0, 1.0);
                const double beta[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
                const PsfKernel* kerns[4] = {&field.kernel(r0, c0), &field.kernel(r0, c1),
                                             &field.kernel(r1, c0), &field.kernel(r1, c1)};
                for (int i = 0; i < 4; ++i) {
                    if (beta[i] == 0.0) continue;
                    double part[3] = {0.0, 0.0, 0.0};
                    detail::gather_kernel(img, *kerns[i], x, y, part);
                    acc[0] += beta[i] * part[0];
                    acc[1] += beta[i] * part[1];
                    acc[2] += beta[i] * part[2];
                }
            }
            float* dst = &out.data[(static_cast<size_t>(y) * img.width + x) * 3];
            dst[0] = static_cast<float>(acc[0]);
            dst[1] = static_cast<float>(acc[1]);
            dst[2] = static_cast<float>(acc[2]);
        }
    }
    return out;
}

} // namespace lsd2
