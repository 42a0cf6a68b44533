#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "lsd2/adam.hpp"
#include "lsd2/dataset.hpp"
#include "lsd2/error.hpp"
#include "lsd2/nets.hpp"
#include "lsd2/rng.hpp"
#include "lsd2/tensor.hpp"

namespace lsd2 {

struct TrainConfig {
    int epochs = 50;
    double lr = 5e-5;          // joint net default; fusion uses 2e-5
    int lr_halving_period = 10; // epochs between halvings, 0 disables
    int batch_size = 1;
    uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw InvalidParameterError("TrainConfig: epochs must be >= 1");
        if (!(lr > 0.0)) throw InvalidParameterError("TrainConfig: lr must be > 0");
        if (batch_size < 1) throw InvalidParameterError("TrainConfig: batch_size must be >= 1");
    }

    static TrainConfig lsd2_defaults() { return TrainConfig{}; }

    static TrainConfig fusion_defaults() {
        TrainConfig c;
        c.epochs = 5;
        c.lr = 2e-5;
        c.lr_halving_period = 0;
        return c;
    }
};

// Halving schedule, 1-based epochs: epoch 10 runs at lr/2, epoch 20 at lr/4.
inline double lr_for_epoch(const TrainConfig& cfg, int epoch) {
    if (cfg.lr_halving_period <= 0) return cfg.lr;
    return cfg.lr * std::pow(2.0, -static_cast<double>(epoch / cfg.lr_halving_period));
}

struct EpochLoss {
    int epoch = 0;
    double loss = 0.0;
};

namespace detail {

struct TrainItem {
    Tensor<float> input; // stacked short + long, 6 channels
    Tensor<float> short_t;
    Tensor<float> long_t;
    Tensor<float> target;
};

inline std::vector<TrainItem> prepare_items(const std::vector<DatasetItem>& data) {
    if (data.empty()) throw TrainingError("train: empty dataset");
    std::vector<TrainItem> items;
    items.reserve(data.size());
    for (const DatasetItem& d : data) {
        TrainItem it;
        it.short_t = image_to_tensor<float>(d.short_img);
        it.long_t = image_to_tensor<float>(d.long_img);
        it.input = concat_channels(it.short_t, it.long_t);
        it.target = image_to_tensor<float>(d.target);
        items.push_back(std::move(it));
    }
    return items;
}

inline Tensor<float> stack_batch(const std::vector<TrainItem>& items,
                                 const std::vector<size_t>& order, size_t lo, size_t hi,
                                 Tensor<float> TrainItem::* member) {
    const Tensor<float>& first = items[order[lo]].*member;
    Tensor<float> out(static_cast<int>(hi - lo), first.c, first.h, first.w);
    const size_t stride = first.size();
    for (size_t i = lo; i < hi; ++i) {
        const Tensor<float>& t = items[order[i]].*member;
        if (t.c != first.c || t.h != first.h || t.w != first.w) {
            throw DimensionError("train: dataset items have mixed shapes");
        }
        std::copy(t.data.begin(), t.data.end(), out.data.begin() + (i - lo) * stride);
    }
    return out;
}

inline std::vector<size_t> epoch_order(size_t count, uint64_t seed, int epoch) {
    std::vector<size_t> order(count);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng = Rng(seed).split(static_cast<uint64_t>(epoch));
    for (size_t i = count; i > 1; --i) {
        const size_t j = static_cast<size_t>(rng.next_u64() % i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

// Shared epoch loop. `step` maps (input batch, slice bounds) to the batch
// loss and performs backward + the optimizer update.
inline std::vector<EpochLoss> run_epochs(
    const std::vector<TrainItem>& items, const TrainConfig& cfg, int start_epoch,
    AdamState<float>& adam,
    const std::function<double(const std::vector<size_t>&, size_t, size_t)>& step,
    const std::function<void(int, double)>& on_epoch) {
    cfg.validate();
    std::vector<EpochLoss> losses;
    for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
        adam.lr = lr_for_epoch(cfg, epoch);
        const std::vector<size_t> order = epoch_order(items.size(), cfg.seed, epoch);
        double loss_sum = 0.0;
        size_t seen = 0;
        size_t batch_index = 0;
        for (size_t lo = 0; lo < order.size(); lo += static_cast<size_t>(cfg.batch_size)) {
            const size_t hi = std::min(order.size(), lo + static_cast<size_t>(cfg.batch_size));
            const double batch_loss = step(order, lo, hi);
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index));
            }
            loss_sum += batch_loss * static_cast<double>(hi - lo);
            seen += hi - lo;
            ++batch_index;
        }
        const double epoch_loss = loss_sum / static_cast<double>(seen);
        losses.push_back({epoch, epoch_loss});
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    return losses;
}

} // namespace detail

// Joint denoise/deblur training: inputs are the stacked pair, targets the
// clipped long-exposure ground truth, L2 on the raw head output.
inline std::vector<EpochLoss> train_unet(
    UNet<float>& net, AdamState<float>& adam, const std::vector<DatasetItem>& data,
    const TrainConfig& cfg, int start_epoch = 0,
    const std::function<void(int, double)>& on_epoch = nullptr) {
    const std::vector<detail::TrainItem> items = detail::prepare_items(data);
    if (!adam.matches(net.params())) adam.init_for(net.params());
    auto step = [&](const std::vector<size_t>& order, size_t lo, size_t hi) {
        const Tensor<float> input =
            detail::stack_batch(items, order, lo, hi, &detail::TrainItem::input);
        const Tensor<float> target =
            detail::stack_batch(items, order, lo, hi, &detail::TrainItem::target);
        net.zero_grads();
        const Tensor<float> pred = net.forward(input);
        const double loss = l2_loss(pred, target);
        net.backward(l2_loss_backward(pred, target));
        adam_step(net.params(), adam);
        return loss;
    };
    return detail::run_epochs(items, cfg, start_epoch, adam, step, on_epoch);
}

// Exposure-fusion training: the loss is applied to the fused image
// W*long + (1-W)*short against the original well-exposed target, and only
// the weight-map gradient flows into the network.
inline std::vector<EpochLoss> train_fusion(
    FusionNet<float>& net, AdamState<float>& adam, const std::vector<DatasetItem>& data,
    const TrainConfig& cfg, int start_epoch = 0,
    const std::function<void(int, double)>& on_epoch = nullptr) {
    const std::vector<detail::TrainItem> items = detail::prepare_items(data);
    if (!adam.matches(net.params())) adam.init_for(net.params());
    auto step = [&](const std::vector<size_t>& order, size_t lo, size_t hi) {
        const Tensor<float> input =
            detail::stack_batch(items, order, lo, hi, &detail::TrainItem::input);
        const Tensor<float> shorts =
            detail::stack_batch(items, order, lo, hi, &detail::TrainItem::short_t);
        const Tensor<float> longs =
            detail::stack_batch(items, order, lo, hi, &detail::TrainItem::long_t);
        const Tensor<float> target =
            detail::stack_batch(items, order, lo, hi, &detail::TrainItem::target);
        net.zero_grads();
        const Tensor<float> w = net.forward(input);
        const Tensor<float> fused = fuse_forward(w, shorts, longs);
        const double loss = l2_loss(fused, target);
        const Tensor<float> gw = fuse_backward(l2_loss_backward(fused, target), shorts, longs);
        net.backward(gw);
        adam_step(net.params(), adam);
        return loss;
    };
    return detail::run_epochs(items, cfg, start_epoch, adam, step, on_epoch);
}

inline std::string losses_to_csv(const std::vector<double>& losses) {
    std::string out = "epoch,loss\n";
    for (size_t i = 0; i < losses.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.9g\n", i + 1, losses[i]);
        out += buf;
    }
    return out;
}

} // namespace lsd2
