#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lsd2/error.hpp"
#include "lsd2/image.hpp"
#include "lsd2/png_io.hpp"

namespace lsd2 {

// Peak signal-to-noise ratio over all pixels and channels. Identical images
// return +infinity, which reports map to the 99 dB sentinel.
inline double psnr(const Image& pred, const Image& ref, double max_val = 1.0) {
    if (!pred.same_shape(ref)) throw DimensionError("psnr: shape mismatch");
    double sq = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - static_cast<double>(ref.data[i]);
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(pred.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / mse);
}

constexpr double kPsnrSentinelDb = 99.0;

namespace detail {

inline std::vector<double> gaussian_window(int radius, double sigma) {
    std::vector<double> g(static_cast<size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
        g[static_cast<size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : g) v /= sum;
    return g;
}

// Separable Gaussian filter evaluated on the valid region only (centers
// where the full window fits). `plane` is w*h row-major.
inline std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h,
                                        const std::vector<double>& g) {
    const int radius = static_cast<int>(g.size() / 2);
    const int vw = w - 2 * radius;
    const int vh = h - 2 * radius;
    std::vector<double> horiz(static_cast<size_t>(vw) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (size_t k = 0; k < g.size(); ++k) {
                s += g[k] * plane[static_cast<size_t>(y) * w + x + k];
            }
            horiz[static_cast<size_t>(y) * vw + x] = s;
        }
    }
    std::vector<double> out(static_cast<size_t>(vw) * vh);
    for (int y = 0; y < vh; ++y) {
        for (int x = 0; x < vw; ++x) {
            double s = 0.0;
            for (size_t k = 0; k < g.size(); ++k) {
                s += g[k] * horiz[(static_cast<size_t>(y) + k) * vw + x];
            }
            out[static_cast<size_t>(y) * vw + x] = s;
        }
    }
    return out;
}

} // namespace detail

// Single-scale SSIM with the standard 11x11 Gaussian window (sigma 1.5,
// K1=0.01, K2=0.03, dynamic range 1), computed per channel over the valid
// region and averaged across channels.
inline double ssim(const Image& pred, const Image& ref) {
    if (!pred.same_shape(ref)) throw DimensionError("ssim: shape mismatch");
    constexpr int kRadius = 5;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    const int w = pred.width;
    const int h = pred.height;
    if (w < 2 * kRadius + 1 || h < 2 * kRadius + 1) {
        throw InvalidInputError("ssim: image smaller than the 11x11 window");
    }

    const std::vector<double> g = detail::gaussian_window(kRadius, kSigma);
    const size_t npx = static_cast<size_t>(w) * h;
    double channel_sum = 0.0;
    std::vector<double> x(npx), y(npx), xx(npx), yy(npx), xy(npx);
    for (int c = 0; c < 3; ++c) {
        for (size_t i = 0; i < npx; ++i) {
            const double a = pred.data[i * 3 + c];
            const double b = ref.data[i * 3 + c];
            x[i] = a;
            y[i] = b;
            xx[i] = a * a;
            yy[i] = b * b;
            xy[i] = a * b;
        }
        const std::vector<double> mx = detail::filter_valid(x, w, h, g);
        const std::vector<double> my = detail::filter_valid(y, w, h, g);
        const std::vector<double> mxx = detail::filter_valid(xx, w, h, g);
        const std::vector<double> myy = detail::filter_valid(yy, w, h, g);
        const std::vector<double> mxy = detail::filter_valid(xy, w, h, g);

        double sum = 0.0;
        for (size_t i = 0; i < mx.size(); ++i) {
            const double vx = mxx[i] - mx[i] * mx[i];
            const double vy = myy[i] - my[i] * my[i];
            const double cov = mxy[i] - mx[i] * my[i];
            const double num = (2.0 * mx[i] * my[i] + kC1) * (2.0 * cov + kC2);
            const double den = (mx[i] * mx[i] + my[i] * my[i] + kC1) * (vx + vy + kC2);
            sum += num / den;
        }
        channel_sum += sum / static_cast<double>(mx.size());
    }
    return channel_sum / 3.0;
}

// Scale each channel of img so its mean matches ref's (the paper's fairness
// adjustment before scoring); zero-mean channels pass through. Output is
// clipped to [0,1].
inline Image channel_mean_match(const Image& img, const Image& ref) {
    if (!img.same_shape(ref)) throw DimensionError("channel_mean_match: shape mismatch");
    Image out = img;
    const size_t n = img.pixel_count();
    for (int c = 0; c < 3; ++c) {
        const double m_img = channel_mean(img, c);
        const double m_ref = channel_mean(ref, c);
        const double gain = (m_img > 0.0) ? m_ref / m_img : 1.0;
        for (size_t i = 0; i < n; ++i) {
            out.data[i * 3 + c] = static_cast<float>(img.data[i * 3 + c] * gain);
        }
    }
    return clip(out, 1.0);
}

struct ImageScore {
    std::string name;
    double psnr_db = 0.0;
    bool psnr_exact = false; // true when MSE was exactly 0 (sentinel dB)
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<ImageScore> per_image;
    double mean_psnr_db = 0.0;
    double mean_ssim = 0.0;
    uint64_t count = 0;
    bool normalized = false;
};

namespace detail {

// Pairwise summation keeps the mean independent of accumulation order and
// bounds rounding drift on large datasets.
inline double pairwise_sum(const std::vector<double>& v, size_t lo, size_t hi) {
    if (hi - lo <= 4) {
        double s = 0.0;
        for (size_t i = lo; i < hi; ++i) s += v[i];
        return s;
    }
    const size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

inline double pairwise_mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return pairwise_sum(v, 0, v.size()) / static_cast<double>(v.size());
}

} // namespace detail

inline void finalize_report(MetricReport& report) {
    std::vector<double> psnrs, ssims;
    psnrs.reserve(report.per_image.size());
    ssims.reserve(report.per_image.size());
    for (const ImageScore& s : report.per_image) {
        psnrs.push_back(s.psnr_db);
        ssims.push_back(s.ssim);
    }
    report.mean_psnr_db = detail::pairwise_mean(psnrs);
    report.mean_ssim = detail::pairwise_mean(ssims);
    report.count = report.per_image.size();
}

inline nlohmann::json report_to_json(const MetricReport& r) {
    nlohmann::json images = nlohmann::json::array();
    for (const ImageScore& s : r.per_image) {
        nlohmann::json j = {{"name", s.name}, {"psnr_db", s.psnr_db}, {"ssim", s.ssim}};
        if (s.psnr_exact) j["exact"] = true;
        images.push_back(j);
    }
    return {{"per_image", images},
            {"mean_psnr_db", r.mean_psnr_db},
            {"mean_ssim", r.mean_ssim},
            {"count", r.count},
            {"normalized", r.normalized}};
}

inline MetricReport report_from_json(const nlohmann::json& j) {
    MetricReport r;
    for (const auto& e : j.at("per_image")) {
        ImageScore s;
        s.name = e.at("name").get<std::string>();
        s.psnr_db = e.at("psnr_db").get<double>();
        s.ssim = e.at("ssim").get<double>();
        s.psnr_exact = e.value("exact", false);
        r.per_image.push_back(std::move(s));
    }
    r.mean_psnr_db = j.at("mean_psnr_db").get<double>();
    r.mean_ssim = j.at("mean_ssim").get<double>();
    r.count = j.at("count").get<uint64_t>();
    r.normalized = j.at("normalized").get<bool>();
    return r;
}

inline ImageScore score_pair(const std::string& name, const Image& pred_in, const Image& ref,
                             bool normalize) {
    const Image pred = normalize ? channel_mean_match(pred_in, ref) : pred_in;
    ImageScore s;
    s.name = name;
    const double p = psnr(pred, ref);
    if (std::isinf(p)) {
        s.psnr_db = kPsnrSentinelDb;
        s.psnr_exact = true;
    } else {
        s.psnr_db = p;
    }
    s.ssim = ssim(pred, ref);
    return s;
}

// Score every matching image pair in two directories. Filename sets must
// match exactly; mismatches are listed in the error. Results are ordered by
// filename, so means do not depend on directory iteration order.
inline MetricReport evaluate_dataset(const std::filesystem::path& pred_dir,
                                     const std::filesystem::path& ref_dir, bool normalize) {
    auto list_images = [](const std::filesystem::path& dir) {
        std::set<std::string> names;
        if (!std::filesystem::is_directory(dir)) {
            throw IoError("not a directory: " + dir.string());
        }
        for (const auto& e : std::filesystem::directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            const std::string ext = e.path().extension().string();
            if (ext == ".png" || ext == ".f32") names.insert(e.path().filename().string());
        }
        return names;
    };

    const std::set<std::string> pred_names = list_images(pred_dir);
    const std::set<std::string> ref_names = list_images(ref_dir);
    if (pred_names != ref_names) {
        std::string msg = "evaluate_dataset: filename mismatch;";
        for (const std::string& n : pred_names) {
            if (!ref_names.count(n)) msg += " only-in-pred:" + n;
        }
        for (const std::string& n : ref_names) {
            if (!pred_names.count(n)) msg += " only-in-ref:" + n;
        }
        throw InvalidInputError(msg);
    }
    if (pred_names.empty()) throw InvalidInputError("evaluate_dataset: no image pairs found");

    MetricReport report;
    report.normalized = normalize;
    for (const std::string& name : pred_names) {
        const Image pred = read_image(pred_dir / name);
        const Image ref = read_image(ref_dir / name);
        report.per_image.push_back(score_pair(name, pred, ref, normalize));
    }
    finalize_report(report);
    return report;
}

} // namespace lsd2
