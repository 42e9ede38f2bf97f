#include "scd/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include "scd/binary_io.hpp"
#include "scd/error.hpp"
#include "scd/hash.hpp"
#include "scd/kernels.hpp"

namespace scd {

namespace {

// -log softmax for the two-class case: softplus(other - own).
double neg_log_prob(double own, double other) {
    const double z = other - own;
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

Var weighted_ce(const Var& logits, const Mask& gt, const ClassWeights& weights, const Mask* valid) {
    const Shape& s = logits.shape();
    if (s.rank() != 3 || s[2] != 2) throw ShapeError("weighted_ce expects H x W x 2 logits, got " + s.str());
    if (gt.height != s[0] || gt.width != s[1]) {
        throw ShapeError("ground truth " + std::to_string(gt.width) + "x" + std::to_string(gt.height) +
                         " vs logits " + s.str());
    }
    if (valid && !valid->same_size(gt)) throw ShapeError("validity mask does not match ground truth");
    if (!(weights.unchanged > 0.0) || !(weights.change > 0.0)) {
        throw ValidationError("class weights must be positive");
    }
    const std::size_t pixels = gt.bits.size();
    std::size_t counted = 0;
    for (std::size_t p = 0; p < pixels; ++p) counted += !valid || valid->bits[p];

    auto l = logits.value();
    // Compensated sum: the loss is a mean over up to ~10^5 pixels.
    double total = 0.0, carry = 0.0;
    for (std::size_t p = 0; p < pixels; ++p) {
        if (valid && !valid->bits[p]) continue;
        const int c = gt.bits[p] ? 1 : 0;
        const double w = c ? weights.change : weights.unchanged;
        const double term = w * neg_log_prob(l[2 * p + c], l[2 * p + 1 - c]);
        const double t = total + term;
        carry += std::abs(total) >= std::abs(term) ? (total - t) + term : (term - t) + total;
        total = t;
    }
    total += carry;
    const double norm = counted ? 1.0 / static_cast<double>(counted) : 0.0;
    const std::size_t il = logits.id();
    return logits.graph().record(
        "weighted_ce", Shape{1}, {total * norm}, {logits},
        [il, gt, weights, norm, mask = valid ? std::optional<Mask>(*valid) : std::nullopt](Graph& g,
                                                                                         std::size_t self) {
            const double gy = g.grad(self)[0] * norm;
            auto l = g.value(il);
            auto gl = g.grad(il);
            for (std::size_t p = 0; p < gt.bits.size(); ++p) {
                if (mask && !mask->bits[p]) continue;
                const int c = gt.bits[p] ? 1 : 0;
                const double w = c ? weights.change : weights.unchanged;
                // softmax probability of class 1
                const double z = l[2 * p] - l[2 * p + 1];
                const double p1 = z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
                const double p0 = 1.0 - p1;
                gl[2 * p] += gy * w * (p0 - (c == 0 ? 1.0 : 0.0));
                gl[2 * p + 1] += gy * w * (p1 - (c == 1 ? 1.0 : 0.0));
            }
        });
}

double cosine_lr(std::size_t step, std::size_t total, double lr0) {
    if (total == 0) throw ValidationError("cosine schedule needs at least one step");
    if (step > total) {
        throw ValidationError("step " + std::to_string(step) + " beyond schedule length " + std::to_string(total));
    }
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

void adam_step(std::span<Tensor* const> params, std::span<const std::vector<double>> grads, AdamState& state,
               double lr) {
    if (params.size() != grads.size()) throw ValidationError("adam: parameter/gradient count mismatch");
    if (state.m.empty()) {
        for (const Tensor* p : params) {
            state.m.emplace_back(p->numel(), 0.0);
            state.v.emplace_back(p->numel(), 0.0);
        }
    }
    if (state.m.size() != params.size()) throw ValidationError("adam: state does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (grads[i].size() != params[i]->numel() || state.m[i].size() != params[i]->numel()) {
            throw ShapeError("adam: gradient " + std::to_string(i) + " has wrong size");
        }
        for (std::size_t j = 0; j < grads[i].size(); ++j) {
            if (!std::isfinite(grads[i][j])) {
                throw NumericError("adam: non-finite gradient in parameter " + std::to_string(i) + " element " +
                                   std::to_string(j) + " at step " + std::to_string(state.t));
            }
        }
    }
    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& m = state.m[i];
        auto& v = state.v[i];
        auto& theta = params[i]->data;
        const auto& g = grads[i];
        for (std::size_t j = 0; j < g.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

void TrainConfig::validate() const {
    if (!(lr0 > 0.0)) throw ValidationError("initial learning rate must be positive");
    if (batch < 1) throw ValidationError("batch size must be at least 1");
    if (steps < 1) throw ValidationError("training needs at least one step");
    if (!(weights.unchanged > 0.0) || !(weights.change > 0.0)) throw ValidationError("class weights must be positive");
    model.validate();
}

std::vector<TrainingSample> load_training_set(const PairManifest& manifest, const FeatureSource& source) {
    if (manifest.records.empty()) throw ValidationError("manifest '" + manifest.split + "' has no records");
    std::vector<TrainingSample> out;
    out.reserve(manifest.records.size());
    for (const auto& r : manifest.records) {
        auto [f0, f1] = load_pair_features(manifest.base_dir, r, source);
        TrainingSample s{std::move(f0), std::move(f1), read_pgm_mask(manifest.resolve(r.gt)), std::nullopt};
        if (s.gt.height != s.f0.h * kPatchSize || s.gt.width != s.f0.w * kPatchSize) {
            throw ValidationError("feature/manifest mismatch for " + pair_id(r) + ": mask " +
                                  std::to_string(s.gt.width) + "x" + std::to_string(s.gt.height) + " vs grid " +
                                  std::to_string(s.f0.w) + "x" + std::to_string(s.f0.h));
        }
        if (!r.valid.empty()) {
            s.valid = read_pgm_mask(manifest.resolve(r.valid));
            if (!s.valid->same_size(s.gt)) throw ValidationError("validity mask size mismatch for " + pair_id(r));
        }
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

struct SampleGrad {
    double loss = 0.0;
    std::vector<std::vector<double>> grads;
};

SampleGrad sample_gradient(const ModelParams& model, const TrainingSample& s, const ClassWeights& w) {
    Graph g;
    const BoundParams bound = bind(g, model, true);
    const Var logits = forward(g, model.config, bound, s.f0, s.f1);
    const Var loss = weighted_ce(logits, s.gt, w, s.valid ? &*s.valid : nullptr);
    g.backward(loss);
    SampleGrad out;
    out.loss = loss.item();
    for (const Var& p : bound.all) out.grads.emplace_back(p.grad().begin(), p.grad().end());
    return out;
}

// Sample order within an epoch; every epoch reshuffles from its own stream.
class BatchPlan {
  public:
    BatchPlan(std::uint64_t seed, std::size_t samples, std::size_t batch)
        : seed_(seed), samples_(samples), batch_(batch) {}

    std::vector<std::size_t> batch(std::size_t step) {
        std::vector<std::size_t> out;
        for (std::size_t b = 0; b < batch_; ++b) {
            const std::size_t c = step * batch_ + b;
            out.push_back(permutation(c / samples_)[c % samples_]);
        }
        return out;
    }

  private:
    const std::vector<std::size_t>& permutation(std::size_t epoch) {
        auto it = cache_.find(epoch);
        if (it != cache_.end()) return it->second;
        std::vector<std::size_t> perm(samples_);
        std::iota(perm.begin(), perm.end(), 0);
        std::mt19937_64 rng(derive_seed(seed_, 0x5eed, epoch));
        std::shuffle(perm.begin(), perm.end(), rng);
        if (cache_.size() > 4) cache_.clear();
        return cache_.emplace(epoch, std::move(perm)).first->second;
    }

    std::uint64_t seed_;
    std::size_t samples_;
    std::size_t batch_;
    std::map<std::size_t, std::vector<std::size_t>> cache_;
};

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const TrainingSample> samples,
                  const std::optional<BackboneInfo>& backbone, const Checkpoint* resume) {
    config.validate();
    if (samples.empty()) throw ValidationError("training set is empty");
    for (const auto& s : samples) {
        if (s.f0.f != config.model.dim) {
            throw ValidationError("features have " + std::to_string(s.f0.f) + " channels, model expects " +
                                  std::to_string(config.model.dim));
        }
    }

    TrainResult result;
    std::size_t first_step = 0;
    if (resume) {
        if (!(resume->model.config == config.model)) throw ValidationError("checkpoint model config differs");
        if (resume->next_step > config.steps) throw ValidationError("checkpoint is past the configured step count");
        result.model = resume->model;
        result.adam = resume->adam;
        first_step = resume->next_step;
    } else {
        result.model = init_model(config.model, config.seed);
    }
    result.model.backbone = backbone;

    BatchPlan plan(config.seed, samples.size(), config.batch);
    const std::size_t n_params = result.model.parameters().size();
    for (std::size_t step = first_step; step < config.steps; ++step) {
        auto members = plan.batch(step);
        std::sort(members.begin(), members.end());
        std::vector<SampleGrad> per_sample(members.size());
        std::exception_ptr failure;
        const auto count = static_cast<std::ptrdiff_t>(members.size());
#pragma omp parallel for schedule(static) num_threads(kernels::threads()) if (kernels::threads() > 1)
        for (std::ptrdiff_t b = 0; b < count; ++b) {
            try {
                per_sample[b] = sample_gradient(result.model, samples[members[b]], config.weights);
            } catch (...) {
#pragma omp critical(scd_train_failure)
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);

        // Reduction in ascending sample index.
        std::vector<std::vector<double>> grads(n_params);
        double loss = 0.0;
        const double inv = 1.0 / static_cast<double>(members.size());
        for (std::size_t i = 0; i < n_params; ++i) grads[i].assign(per_sample[0].grads[i].size(), 0.0);
        for (const auto& sg : per_sample) {
            loss += sg.loss;
            for (std::size_t i = 0; i < n_params; ++i)
                for (std::size_t j = 0; j < grads[i].size(); ++j) grads[i][j] += sg.grads[i][j];
        }
        for (auto& g : grads)
            for (double& v : g) v *= inv;
        loss *= inv;

        const double lr = cosine_lr(step, config.steps, config.lr0);
        auto params = result.model.parameters();
        adam_step(params, grads, result.adam, lr);
        result.trace.push_back({step, lr, loss});

        if (config.checkpoint_every > 0 && (step + 1) % config.checkpoint_every == 0) {
            save_checkpoint(config.checkpoint_dir / ("ckpt_" + std::to_string(step + 1) + ".scdm"), result.model,
                            result.adam, step + 1);
        }
    }
    return result;
}

// ---- checkpoints -------------------------------------------------------------------

namespace {
constexpr std::uint32_t kAdamVersion = 1;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& model, const AdamState& adam,
                     std::size_t next_step) {
    auto bytes = encode_model(model);
    binio::Writer w;
    w.bytes("ADAM");
    w.u32(kAdamVersion);
    w.u64(next_step);
    w.u64(adam.t);
    w.f64(adam.beta1);
    w.f64(adam.beta2);
    w.f64(adam.eps);
    const auto params = model.parameters();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::size_t n = params[i]->numel();
        w.u64(n);
        for (double v : params[i]->data) w.f64(v);
        const bool have = i < adam.m.size();
        for (std::size_t j = 0; j < n; ++j) w.f64(have ? adam.m[i][j] : 0.0);
        for (std::size_t j = 0; j < n; ++j) w.f64(have ? adam.v[i][j] : 0.0);
    }
    const auto& tail = w.buffer();
    bytes.insert(bytes.end(), tail.begin(), tail.end());
    binio::write_file(path, bytes);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto bytes = binio::read_file(path);
    std::size_t used = 0;
    Checkpoint ck;
    ck.model = decode_model(bytes, path.string(), &used);
    binio::Reader r(std::span<const char>(bytes).subspan(used), path.string() + " (optimizer section)");
    if (r.remaining() < 4 || r.bytes(4) != "ADAM") {
        throw FormatError(FormatFault::BadMagic, path.string() + ": no optimizer section");
    }
    if (r.u32() != kAdamVersion) throw FormatError(FormatFault::BadVersion, path.string() + ": optimizer version");
    ck.next_step = r.u64();
    ck.adam.t = r.u64();
    ck.adam.beta1 = r.f64();
    ck.adam.beta2 = r.f64();
    ck.adam.eps = r.f64();
    auto params = ck.model.parameters();
    if (r.u32() != params.size()) throw FormatError(FormatFault::BadHeader, path.string() + ": parameter count");
    for (Tensor* p : params) {
        if (r.u64() != p->numel()) throw FormatError(FormatFault::BadHeader, path.string() + ": parameter size");
        for (double& v : p->data) v = r.f64();
        auto& m = ck.adam.m.emplace_back(p->numel());
        auto& v = ck.adam.v.emplace_back(p->numel());
        for (double& x : m) x = r.f64();
        for (double& x : v) x = r.f64();
    }
    if (ck.adam.t == 0) {
        ck.adam.m.clear();
        ck.adam.v.clear();
    }
    return ck;
}

void write_loss_csv(std::span<const LossRecord> trace, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "step,lr,loss\n";
    char line[128];
    for (const auto& r : trace) {
        std::snprintf(line, sizeof line, "%zu,%.9g,%.9g\n", r.step, r.lr, r.loss);
        out << line;
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace scd
