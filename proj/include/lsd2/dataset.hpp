#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lsd2/error.hpp"
#include "lsd2/png_io.hpp"
#include "lsd2/synth.hpp"

namespace lsd2 {

constexpr int kDatasetFormatVersion = 1;

inline std::string sample_basename(uint64_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(index));
    return buf;
}

inline nlohmann::json params_to_json(const SynthParams& p) {
    return {{"s_min", p.s_min},
            {"s_max", p.s_max},
            {"a_min", p.a_min},
            {"a_max", p.a_max},
            {"b_min", p.b_min},
            {"b_max", p.b_max},
            {"photons_per_unit", p.photons_per_unit},
            {"short_noise_factor", p.short_noise_factor},
            {"exposure_ratio", p.exposure_ratio},
            {"gamma", p.gamma},
            {"tile_size", p.tile_size},
            {"psf_samples", p.psf_samples},
            {"max_kernel_radius", p.max_kernel_radius},
            {"fusion_mode", p.fusion_mode}};
}

inline SynthParams params_from_json(const nlohmann::json& j) {
    SynthParams p;
    p.s_min = j.at("s_min").get<double>();
    p.s_max = j.at("s_max").get<double>();
    p.a_min = j.at("a_min").get<double>();
    p.a_max = j.at("a_max").get<double>();
    p.b_min = j.at("b_min").get<double>();
    p.b_max = j.at("b_max").get<double>();
    p.photons_per_unit = j.at("photons_per_unit").get<double>();
    p.short_noise_factor = j.at("short_noise_factor").get<double>();
    p.exposure_ratio = j.at("exposure_ratio").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.tile_size = j.at("tile_size").get<int>();
    p.psf_samples = j.at("psf_samples").get<int>();
    p.max_kernel_radius = j.at("max_kernel_radius").get<int>();
    p.fusion_mode = j.at("fusion_mode").get<bool>();
    return p;
}

inline nlohmann::json meta_to_json(const SynthMeta& m) {
    return {{"seed", m.seed},
            {"sample_index", m.sample_index},
            {"source", m.source},
            {"s", m.s},
            {"a", m.a},
            {"b", m.b},
            {"t_1", m.t_1},
            {"t_e", m.t_e},
            {"t_r", m.t_r},
            {"width", m.width},
            {"height", m.height},
            {"psf_grid_rows", m.psf_grid_rows},
            {"psf_grid_cols", m.psf_grid_cols},
            {"max_trail_px", m.max_trail_px},
            {"fusion_mode", m.fusion_mode}};
}

inline SynthMeta meta_from_json(const nlohmann::json& j) {
    SynthMeta m;
    m.seed = j.at("seed").get<uint64_t>();
    m.sample_index = j.at("sample_index").get<uint64_t>();
    m.source = j.at("source").get<std::string>();
    m.s = j.at("s").get<double>();
    m.a = j.at("a").get<std::array<double, 3>>();
    m.b = j.at("b").get<std::array<double, 3>>();
    m.t_1 = j.at("t_1").get<double>();
    m.t_e = j.at("t_e").get<double>();
    m.t_r = j.at("t_r").get<double>();
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.psf_grid_rows = j.at("psf_grid_rows").get<int>();
    m.psf_grid_cols = j.at("psf_grid_cols").get<int>();
    m.max_trail_px = j.at("max_trail_px").get<int>();
    m.fusion_mode = j.at("fusion_mode").get<bool>();
    return m;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    detail::atomic_write(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    return j;
}

// Writes NNNNNN_{short,long,target}.{png|f32} plus NNNNNN_meta.json.
inline void write_sample(const std::filesystem::path& dir, const SynthSample& sample,
                         bool raw_f32) {
    const std::string base = sample_basename(sample.meta.sample_index);
    const std::string ext = raw_f32 ? ".f32" : ".png";
    write_image(dir / (base + "_short" + ext), sample.short_img);
    write_image(dir / (base + "_long" + ext), sample.long_img);
    write_image(dir / (base + "_target" + ext), sample.target);
    write_json(dir / (base + "_meta.json"), meta_to_json(sample.meta));
}

// Center-anchored cover resize: bilinear-scale so the image covers the
// target extent, then crop the middle.
inline Image fit_to_size(const Image& img, int width, int height) {
    if (img.width == width && img.height == height) return img;
    const double sx = static_cast<double>(width) / img.width;
    const double sy = static_cast<double>(height) / img.height;
    const double s = std::max(sx, sy);
    const int rw = std::max(width, static_cast<int>(std::lround(img.width * s)));
    const int rh = std::max(height, static_cast<int>(std::lround(img.height * s)));

    Image resized(rw, rh);
    for (int y = 0; y < rh; ++y) {
        const double fy = (y + 0.5) / s - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double ay = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < rw; ++x) {
            const double fx = (x + 0.5) / s - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double ax = std::clamp(fx - x0, 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double top = (1 - ax) * img.at(x0, y0, c) + ax * img.at(x1, y0, c);
                const double bot = (1 - ax) * img.at(x0, y1, c) + ax * img.at(x1, y1, c);
                resized.at(x, y, c) = static_cast<float>((1 - ay) * top + ay * bot);
            }
        }
    }

    Image out(width, height);
    const int ox = (rw - width) / 2;
    const int oy = (rh - height) / 2;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = resized.at(x + ox, y + oy, c);
        }
    }
    return out;
}

struct GenFailure {
    uint64_t index = 0;
    std::string source;
    std::string message;
};

struct GenReport {
    uint64_t written = 0;
    std::vector<GenFailure> failures;
};

// Generate `count` samples into out_dir, cycling over the source images.
// Sample i uses the stream Rng(seed).split(i), so outputs are byte-identical
// for any worker count. The manifest is written last, after all samples.
inline GenReport generate_dataset(const std::vector<std::filesystem::path>& sources,
                                  const GyroTrack& track, const Intrinsics& k,
                                  const ShutterSpec& shutter, const SynthParams& params,
                                  uint64_t seed, uint64_t count, int width, int height,
                                  int workers, const std::filesystem::path& out_dir,
                                  bool raw_f32 = false) {
    if (sources.empty()) throw InvalidInputError("generate_dataset: no source images");
    if (workers < 1) workers = 1;
    std::filesystem::create_directories(out_dir);

    const Rng master(seed);
    std::atomic<uint64_t> next{0};
    std::mutex report_mutex;
    GenReport report;

    auto worker_fn = [&]() {
        for (;;) {
            const uint64_t i = next.fetch_add(1);
            if (i >= count) return;
            const std::filesystem::path& src = sources[i % sources.size()];
            try {
                const Image raw = read_image(src);
                const Image sized = fit_to_size(raw, width, height);
                SynthSample sample = synthesize_pair(sized, track, k, shutter, params, master.split(i));
                sample.meta.seed = seed;
                sample.meta.sample_index = i;
                sample.meta.source = src.filename().string();
                write_sample(out_dir, sample, raw_f32);
                std::lock_guard<std::mutex> lock(report_mutex);
                ++report.written;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(report_mutex);
                report.failures.push_back({i, src.string(), e.what()});
            }
        }
    };

    if (workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(worker_fn);
        for (std::thread& t : pool) t.join();
    }

    std::sort(report.failures.begin(), report.failures.end(),
              [](const GenFailure& a, const GenFailure& b) { return a.index < b.index; });

    nlohmann::json manifest = {
        {"format_version", kDatasetFormatVersion},
        {"seed", seed},
        {"count", count},
        {"width", width},
        {"height", height},
        {"extension", raw_f32 ? ".f32" : ".png"},
        {"params", params_to_json(params)},
        {"shutter", {{"t_e", shutter.t_e}, {"t_r", shutter.t_r}}},
        {"intrinsics", {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}}},
    };
    nlohmann::json src_list = nlohmann::json::array();
    for (const auto& s : sources) src_list.push_back(s.filename().string());
    manifest["sources"] = src_list;
    nlohmann::json failed = nlohmann::json::array();
    for (const GenFailure& f : report.failures) {
        failed.push_back({{"index", f.index}, {"source", f.source}, {"message", f.message}});
    }
    manifest["failures"] = failed;
    write_json(out_dir / "manifest.json", manifest);
    return report;
}

// One loaded training triple.
struct DatasetItem {
    Image short_img;
    Image long_img;
    Image target;
};

// Load every successfully generated triple listed by the manifest, in index
// order.
inline std::vector<DatasetItem> load_dataset(const std::filesystem::path& dir) {
    const nlohmann::json manifest = read_json(dir / "manifest.json");
    const uint64_t count = manifest.at("count").get<uint64_t>();
    const std::string ext = manifest.at("extension").get<std::string>();

    std::vector<bool> failed(count, false);
    for (const auto& f : manifest.at("failures")) {
        const uint64_t idx = f.at("index").get<uint64_t>();
        if (idx < count) failed[idx] = true;
    }

    std::vector<DatasetItem> items;
    items.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        if (failed[i]) continue;
        const std::string base = sample_basename(i);
        DatasetItem item;
        item.short_img = read_image(dir / (base + "_short" + ext));
        item.long_img = read_image(dir / (base + "_long" + ext));
        item.target = read_image(dir / (base + "_target" + ext));
        items.push_back(std::move(item));
    }
    if (items.empty()) throw InvalidInputError("load_dataset: no samples in " + dir.string());
    return items;
}

} // namespace lsd2
