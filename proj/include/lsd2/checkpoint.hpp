#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lsd2/adam.hpp"
#include "lsd2/error.hpp"
#include "lsd2/nets.hpp"
#include "lsd2/png_io.hpp"

namespace lsd2 {

class CheckpointError : public Error {
public:
    explicit CheckpointError(const std::string& msg) : Error(msg) {}
};

enum class ModelKind : uint32_t { lsd2 = 1, fusion = 2 };

inline const char* model_kind_name(ModelKind k) {
    return k == ModelKind::lsd2 ? "lsd2" : "fusion";
}

namespace detail {

// Everything on disk is little endian regardless of host.
inline void put_u32(std::string& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.append(b, 4);
}

inline void put_u64(std::string& out, uint64_t v) {
    put_u32(out, static_cast<uint32_t>(v & 0xffffffffull));
    put_u32(out, static_cast<uint32_t>(v >> 32));
}

inline void put_f32(std::string& out, float f) {
    uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(out, u);
}

inline void put_f64(std::string& out, double d) {
    uint64_t u;
    std::memcpy(&u, &d, 8);
    put_u64(out, u);
}

class ByteReader {
public:
    explicit ByteReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
        if (!in_) throw CheckpointError("cannot open " + path.string());
    }

    void bytes(char* dst, size_t n) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (!in_) throw CheckpointError("truncated file");
    }
    uint32_t u32() {
        unsigned char b[4];
        bytes(reinterpret_cast<char*>(b), 4);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }
    uint64_t u64() {
        const uint64_t lo = u32();
        return lo | (static_cast<uint64_t>(u32()) << 32);
    }
    float f32() {
        const uint32_t u = u32();
        float f;
        std::memcpy(&f, &u, 4);
        return f;
    }
    double f64() {
        const uint64_t u = u64();
        double d;
        std::memcpy(&d, &u, 8);
        return d;
    }
    std::string str(size_t n) {
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }

private:
    std::ifstream in_;
};

} // namespace detail

constexpr char kCheckpointMagic[8] = {'L', 'S', 'D', '2', 'C', 'K', 'P', 'T'};
constexpr uint32_t kCheckpointVersion = 1;

// Versioned parameter container: magic, version, model kind, config words,
// then per parameter (name length, name, rank, dims, float32 LE values).
struct Checkpoint {
    ModelKind kind = ModelKind::lsd2;
    std::vector<uint32_t> config;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
};

inline void save_checkpoint(const std::filesystem::path& path, ModelKind kind,
                            const std::vector<uint32_t>& config,
                            const std::vector<Param<float>>& params) {
    std::string out;
    out.append(kCheckpointMagic, 8);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<uint32_t>(kind));
    detail::put_u32(out, static_cast<uint32_t>(config.size()));
    for (uint32_t v : config) detail::put_u32(out, v);
    detail::put_u32(out, static_cast<uint32_t>(params.size()));
    for (const Param<float>& p : params) {
        detail::put_u32(out, static_cast<uint32_t>(p.name.size()));
        out.append(p.name);
        const uint32_t dims[4] = {static_cast<uint32_t>(p.value.n), static_cast<uint32_t>(p.value.c),
                                  static_cast<uint32_t>(p.value.h), static_cast<uint32_t>(p.value.w)};
        detail::put_u32(out, 4);
        for (uint32_t d : dims) detail::put_u32(out, d);
        for (float v : p.value.data) detail::put_f32(out, v);
    }
    detail::atomic_write(path, out);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    detail::ByteReader r(path);
    const std::string magic = r.str(8);
    if (std::memcmp(magic.data(), kCheckpointMagic, 8) != 0) {
        throw CheckpointError(path.string() + ": not a checkpoint file");
    }
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                              std::to_string(version));
    }
    Checkpoint ckpt;
    const uint32_t kind = r.u32();
    if (kind != static_cast<uint32_t>(ModelKind::lsd2) &&
        kind != static_cast<uint32_t>(ModelKind::fusion)) {
        throw CheckpointError(path.string() + ": unknown model kind tag " + std::to_string(kind));
    }
    ckpt.kind = static_cast<ModelKind>(kind);
    const uint32_t n_config = r.u32();
    for (uint32_t i = 0; i < n_config; ++i) ckpt.config.push_back(r.u32());
    const uint32_t n_params = r.u32();
    for (uint32_t i = 0; i < n_params; ++i) {
        const uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        const uint32_t rank = r.u32();
        if (rank != 4) throw CheckpointError(path.string() + ": expected rank-4 tensors");
        const int n = static_cast<int>(r.u32());
        const int c = static_cast<int>(r.u32());
        const int h = static_cast<int>(r.u32());
        const int w = static_cast<int>(r.u32());
        Tensor<float> t(n, c, h, w);
        for (float& v : t.data) v = r.f32();
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ckpt;
}

namespace detail {

inline void fill_params_from(const Checkpoint& ckpt, std::vector<Param<float>>& params,
                             const std::string& what) {
    if (ckpt.tensors.size() != params.size()) {
        throw CheckpointError(what + ": parameter count mismatch");
    }
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& [name, tensor] = ckpt.tensors[i];
        if (name != params[i].name || !tensor.same_shape(params[i].value)) {
            throw CheckpointError(what + ": parameter " + std::to_string(i) + " (" + name +
                                  ") does not match model layout");
        }
        params[i].value = tensor;
    }
}

} // namespace detail

inline void save_unet(const std::filesystem::path& path, const UNet<float>& net) {
    const UNetConfig& c = net.config();
    save_checkpoint(path, ModelKind::lsd2,
                    {static_cast<uint32_t>(c.in_channels), static_cast<uint32_t>(c.out_channels),
                     static_cast<uint32_t>(c.depth), static_cast<uint32_t>(c.base_features)},
                    net.params());
}

inline UNet<float> load_unet(const std::filesystem::path& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.kind != ModelKind::lsd2) {
        throw CheckpointError(path.string() + ": checkpoint holds a " +
                              model_kind_name(ckpt.kind) + " model, expected lsd2");
    }
    if (ckpt.config.size() != 4) throw CheckpointError(path.string() + ": bad lsd2 config record");
    UNetConfig cfg;
    cfg.in_channels = static_cast<int>(ckpt.config[0]);
    cfg.out_channels = static_cast<int>(ckpt.config[1]);
    cfg.depth = static_cast<int>(ckpt.config[2]);
    cfg.base_features = static_cast<int>(ckpt.config[3]);
    UNet<float> net(cfg);
    detail::fill_params_from(ckpt, net.params(), path.string());
    return net;
}

inline void save_fusion(const std::filesystem::path& path, const FusionNet<float>& net) {
    save_checkpoint(path, ModelKind::fusion,
                    {static_cast<uint32_t>(net.config().in_channels)}, net.params());
}

inline FusionNet<float> load_fusion(const std::filesystem::path& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.kind != ModelKind::fusion) {
        throw CheckpointError(path.string() + ": checkpoint holds a " +
                              model_kind_name(ckpt.kind) + " model, expected fusion");
    }
    if (ckpt.config.size() != 1) throw CheckpointError(path.string() + ": bad fusion config record");
    FusionNetConfig cfg;
    cfg.in_channels = static_cast<int>(ckpt.config[0]);
    FusionNet<float> net(cfg);
    detail::fill_params_from(ckpt, net.params(), path.string());
    return net;
}

constexpr char kTrainStateMagic[8] = {'L', 'S', 'D', '2', 'T', 'R', 'S', 'T'};

// Sidecar next to a checkpoint holding what resume needs beyond parameters:
// Adam moments, step counter, completed epochs and the loss history. The
// checkpoint itself stays a pure parameter container.
struct TrainState {
    uint64_t seed = 0;
    uint32_t completed_epochs = 0;
    AdamState<float> adam;
    std::vector<double> epoch_losses;
};

inline void save_train_state(const std::filesystem::path& path, const TrainState& st) {
    std::string out;
    out.append(kTrainStateMagic, 8);
    detail::put_u32(out, 1); // version
    detail::put_u64(out, st.seed);
    detail::put_u32(out, st.completed_epochs);
    detail::put_u64(out, static_cast<uint64_t>(st.adam.step));
    detail::put_f64(out, st.adam.lr);
    detail::put_u32(out, static_cast<uint32_t>(st.adam.m.size()));
    for (size_t i = 0; i < st.adam.m.size(); ++i) {
        detail::put_u32(out, static_cast<uint32_t>(st.adam.m[i].size()));
        for (float v : st.adam.m[i]) detail::put_f32(out, v);
        for (float v : st.adam.v[i]) detail::put_f32(out, v);
    }
    detail::put_u32(out, static_cast<uint32_t>(st.epoch_losses.size()));
    for (double v : st.epoch_losses) detail::put_f64(out, v);
    detail::atomic_write(path, out);
}

inline TrainState load_train_state(const std::filesystem::path& path) {
    detail::ByteReader r(path);
    const std::string magic = r.str(8);
    if (std::memcmp(magic.data(), kTrainStateMagic, 8) != 0) {
        throw CheckpointError(path.string() + ": not a train-state file");
    }
    const uint32_t version = r.u32();
    if (version != 1) throw CheckpointError(path.string() + ": unsupported train-state version");
    TrainState st;
    st.seed = r.u64();
    st.completed_epochs = r.u32();
    st.adam.step = static_cast<int64_t>(r.u64());
    st.adam.lr = r.f64();
    const uint32_t n = r.u32();
    st.adam.m.resize(n);
    st.adam.v.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t len = r.u32();
        st.adam.m[i].resize(len);
        st.adam.v[i].resize(len);
        for (float& v : st.adam.m[i]) v = r.f32();
        for (float& v : st.adam.v[i]) v = r.f32();
    }
    const uint32_t n_losses = r.u32();
    st.epoch_losses.resize(n_losses);
    for (double& v : st.epoch_losses) v = r.f64();
    return st;
}

} // namespace lsd2
