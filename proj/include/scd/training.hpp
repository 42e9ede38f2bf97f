#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "scd/autodiff.hpp"
#include "scd/backbone.hpp"
#include "scd/image.hpp"
#include "scd/manifest.hpp"
#include "scd/model.hpp"

namespace scd {

struct ClassWeights {
    double unchanged = 0.025;
    double change = 0.975;
};

// Mean over (valid) pixels of w[c] * -log softmax(logits)[c], c the true class.
// logits: H x W x 2.
Var weighted_ce(const Var& logits, const Mask& gt, const ClassWeights& weights, const Mask* valid = nullptr);

// lr0 * (1 + cos(pi * step / total)) / 2, for 0 <= step <= total.
double cosine_lr(std::size_t step, std::size_t total, double lr0);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update. Moments are allocated on first use.
void adam_step(std::span<Tensor* const> params, std::span<const std::vector<double>> grads, AdamState& state,
               double lr);

struct TrainConfig {
    double lr0 = 1e-4;
    std::size_t batch = 4;
    std::size_t steps = 500;
    ClassWeights weights;
    std::uint64_t seed = 0;
    ModelConfig model;
    std::size_t checkpoint_every = 0;  // 0 disables checkpoints
    std::filesystem::path checkpoint_dir;

    void validate() const;
};

struct LossRecord {
    std::size_t step = 0;
    double lr = 0.0;
    double loss = 0.0;

    bool operator==(const LossRecord&) const = default;
};

struct TrainingSample {
    FeatureMap f0;
    FeatureMap f1;
    Mask gt;
    std::optional<Mask> valid;
};

// Loads features and masks for every record, checking that mask geometry matches
// the feature grid.
std::vector<TrainingSample> load_training_set(const PairManifest& manifest, const FeatureSource& source);

struct Checkpoint {
    ModelParams model;  // full precision
    AdamState adam;
    std::size_t next_step = 0;
};

struct TrainResult {
    ModelParams model;
    AdamState adam;
    std::vector<LossRecord> trace;
};

// Deterministic given config.seed: initialisation, per-epoch shuffles and batch
// composition all derive from it. With `resume`, continues from the checkpoint and
// traces only the remaining steps.
TrainResult train(const TrainConfig& config, std::span<const TrainingSample> samples,
                  const std::optional<BackboneInfo>& backbone = std::nullopt, const Checkpoint* resume = nullptr);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model, const AdamState& adam,
                     std::size_t next_step);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// step,lr,loss
void write_loss_csv(std::span<const LossRecord> trace, const std::filesystem::path& path);

}  // namespace scd
