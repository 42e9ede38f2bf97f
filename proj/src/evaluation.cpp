#include "scd/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <memory>
#include <set>

#include "scd/error.hpp"
#include "scd/kernels.hpp"

namespace scd {

ConfusionCounts confusion(const Mask& pred, const Mask& gt, const Mask* valid) {
    if (!pred.same_size(gt)) {
        throw ShapeError("prediction " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                         " vs ground truth " + std::to_string(gt.width) + "x" + std::to_string(gt.height));
    }
    if (valid && !valid->same_size(gt)) throw ShapeError("validity mask does not match ground truth");
    ConfusionCounts c;
    for (std::size_t i = 0; i < gt.bits.size(); ++i) {
        if (valid && !valid->bits[i]) continue;
        const bool p = pred.bits[i] != 0, g = gt.bits[i] != 0;
        if (p && g) ++c.tp;
        else if (p) ++c.fp;
        else if (g) ++c.fn;
        else ++c.tn;
    }
    return c;
}

double f1_from_counts(const ConfusionCounts& c) noexcept {
    const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
    if (denom == 0) return 1.0;
    return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double f1_change(const Mask& pred, const Mask& gt, const Mask* valid) {
    return f1_from_counts(confusion(pred, gt, valid));
}

const SplitScore* EvalReport::split(const std::string& name) const {
    for (const auto& s : splits)
        if (s.split == name) return &s;
    return nullptr;
}

FeaturePredictor feature_predictor(const ModelParams& model) {
    auto m = std::make_shared<const ModelParams>(model);
    return [m](const FeatureMap& f0, const FeatureMap& f1) { return logits_to_mask(predict(*m, f0, f1)); };
}

ImagePredictor image_predictor(const ModelParams& model) {
    if (!model.backbone) {
        throw ValidationError("model carries no backbone identity; images cannot be re-encoded");
    }
    if (model.backbone->dim != model.config.dim) {
        throw ValidationError("backbone dimension " + std::to_string(model.backbone->dim) + " != model dimension " +
                              std::to_string(model.config.dim));
    }
    auto m = std::make_shared<const ModelParams>(model);
    auto bb = std::make_shared<const ToyBackbone>(model.backbone->instantiate());
    return [m, bb](const Image& t0, const Image& t1) {
        return logits_to_mask(predict(*m, bb->encode(t0), bb->encode(t1)));
    };
}

namespace {

struct Outcome {
    std::optional<EvalRow> row;
    std::optional<EvalFailure> failure;
};

}  // namespace

EvalReport evaluate(const FeaturePredictor& predictor, std::span<const PairManifest> splits,
                    const FeatureSource& source, Averaging averaging) {
    const auto start = std::chrono::steady_clock::now();
    if (splits.empty()) throw ValidationError("nothing to evaluate");
    std::vector<std::pair<std::size_t, std::size_t>> work;
    for (std::size_t s = 0; s < splits.size(); ++s) {
        if (splits[s].records.empty()) throw ValidationError("manifest '" + splits[s].split + "' has no records");
        for (std::size_t r = 0; r < splits[s].records.size(); ++r) work.emplace_back(s, r);
    }

    std::vector<Outcome> outcomes(work.size());
    std::exception_ptr fatal;
    const auto n = static_cast<std::ptrdiff_t>(work.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::threads()) if (kernels::threads() > 1)
    for (std::ptrdiff_t w = 0; w < n; ++w) {
        const auto [s, r] = work[static_cast<std::size_t>(w)];
        const PairManifest& m = splits[s];
        const PairRecord& rec = m.records[r];
        try {
            FeatureMap f0, f1;
            Mask gt;
            std::optional<Mask> valid;
            try {
                std::tie(f0, f1) = load_pair_features(m.base_dir, rec, source);
                gt = read_pgm_mask(m.resolve(rec.gt));
                if (!rec.valid.empty()) valid = read_pgm_mask(m.resolve(rec.valid));
            } catch (const ValidationError& e) {
                outcomes[w].failure = EvalFailure{m.split, pair_id(rec), e.what()};
                continue;
            } catch (const IoError& e) {
                outcomes[w].failure = EvalFailure{m.split, pair_id(rec), e.what()};
                continue;
            }
            const Mask pred = predictor(f0, f1);
            EvalRow row{pair_id(rec), m.split, rec.k, 0.0, confusion(pred, gt, valid ? &*valid : nullptr)};
            row.f1 = f1_from_counts(row.counts);
            outcomes[w].row = std::move(row);
        } catch (...) {
#pragma omp critical(scd_eval_failure)
            if (!fatal) fatal = std::current_exception();
        }
    }
    if (fatal) std::rethrow_exception(fatal);

    EvalReport report;
    report.averaging = averaging;
    std::vector<double> sums(splits.size(), 0.0);
    std::vector<ConfusionCounts> pooled(splits.size());
    std::vector<std::size_t> counts(splits.size(), 0);
    for (std::size_t w = 0; w < work.size(); ++w) {
        const std::size_t s = work[w].first;
        if (outcomes[w].failure) {
            report.failures.push_back(*outcomes[w].failure);
            continue;
        }
        const EvalRow& row = *outcomes[w].row;
        sums[s] += row.f1;
        pooled[s] += row.counts;
        ++counts[s];
        report.rows.push_back(row);
    }
    double total = 0.0;
    for (std::size_t s = 0; s < splits.size(); ++s) {
        if (counts[s] == 0) {
            throw ValidationError("no record of split '" + splits[s].split + "' could be scored (first failure: " +
                                  (report.failures.empty() ? std::string("none") : report.failures.front().message) +
                                  ")");
        }
        const double mean = averaging == Averaging::Macro ? sums[s] / static_cast<double>(counts[s])
                                                          : f1_from_counts(pooled[s]);
        report.splits.push_back({splits[s].split, mean, counts[s]});
        total += mean;
    }
    report.avg = total / static_cast<double>(splits.size());
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

EvalReport evaluate(const ModelParams& model, std::span<const PairManifest> splits, const FeatureSource& source,
                    Averaging averaging) {
    EvalReport report = evaluate(feature_predictor(model), splits, source, averaging);
    report.model_hash = model_hash(model);
    return report;
}

// ---- sweeps ----------------------------------------------------------------------

std::string_view sweep_mode_name(SweepMode mode) {
    return mode == SweepMode::Translate ? "translate" : "rotate";
}

SweepMode parse_sweep_mode(std::string_view name) {
    if (name == "translate") return SweepMode::Translate;
    if (name == "rotate") return SweepMode::Rotate;
    throw UsageError("unknown sweep mode '" + std::string(name) + "' (translate|rotate)");
}

std::size_t direction_count(SweepMode mode) { return mode == SweepMode::Translate ? 4 : 2; }

AffineParams sweep_params(SweepMode mode, std::size_t direction, double value) {
    if (direction >= direction_count(mode)) throw ValidationError("sweep direction out of range");
    if (mode == SweepMode::Rotate) return {direction == 0 ? value : -value, 0.0, 0.0};
    switch (direction) {
        case 0: return {0.0, value, 0.0};
        case 1: return {0.0, -value, 0.0};
        case 2: return {0.0, 0.0, -value};
        default: return {0.0, 0.0, value};
    }
}

SweepCurve sweep_affine(const ImagePredictor& predictor, const PairManifest& manifest, SweepMode mode,
                        double range, double stride) {
    const double limit = mode == SweepMode::Translate ? kSweepBounds.max_translation : kSweepBounds.max_rotation_deg;
    if (!(range >= 0.0) || range > limit) {
        throw ValidationError("sweep range " + format_value(range) + " outside [0, " + format_value(limit) + "] for " +
                              std::string(sweep_mode_name(mode)));
    }
    if (!(stride > 0.0)) throw ValidationError("sweep stride must be positive");
    if (manifest.records.empty()) throw ValidationError("manifest '" + manifest.split + "' has no records");

    SweepCurve curve;
    curve.mode = mode;
    const auto points = static_cast<std::size_t>(std::floor(range / stride + 1e-9)) + 1;
    for (std::size_t i = 0; i < points; ++i) curve.params.push_back(static_cast<double>(i) * stride);

    struct Loaded {
        Image t0, t1;
        Mask gt;
        std::optional<Mask> valid;
    };
    const std::size_t R = manifest.records.size(), D = direction_count(mode);
    std::vector<Loaded> data(R);
    for (std::size_t r = 0; r < R; ++r) {
        const auto& rec = manifest.records[r];
        data[r].t0 = read_ppm(manifest.resolve(rec.t0));
        data[r].t1 = read_ppm(manifest.resolve(rec.t1));
        data[r].gt = read_pgm_mask(manifest.resolve(rec.gt));
        if (!rec.valid.empty()) data[r].valid = read_pgm_mask(manifest.resolve(rec.valid));
    }

    // (point, direction, record); parameter 0 is scored once and shared by every direction.
    std::vector<double> f1(points * D * R, 0.0);
    std::vector<std::array<std::size_t, 3>> work;
    for (std::size_t p = 0; p < points; ++p)
        for (std::size_t d = 0; d < (curve.params[p] == 0.0 ? 1 : D); ++d)
            for (std::size_t r = 0; r < R; ++r) work.push_back({p, d, r});

    std::exception_ptr fatal;
    const auto n = static_cast<std::ptrdiff_t>(work.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::threads()) if (kernels::threads() > 1)
    for (std::ptrdiff_t w = 0; w < n; ++w) {
        try {
            const auto [p, d, r] = work[static_cast<std::size_t>(w)];
            const Loaded& in = data[r];
            const AffineResult moved = affine_augment(in.t0, in.gt, sweep_params(mode, d, curve.params[p]),
                                                      kSweepBounds, in.valid ? &*in.valid : nullptr);
            f1[(p * D + d) * R + r] = f1_change(predictor(moved.image, in.t1), moved.mask, &moved.valid);
        } catch (...) {
#pragma omp critical(scd_sweep_failure)
            if (!fatal) fatal = std::current_exception();
        }
    }
    if (fatal) std::rethrow_exception(fatal);

    for (std::size_t p = 0; p < points; ++p) {
        std::vector<double> dirs(D);
        for (std::size_t d = 0; d < D; ++d) {
            const std::size_t src = curve.params[p] == 0.0 ? 0 : d;
            double sum = 0.0;
            for (std::size_t r = 0; r < R; ++r) sum += f1[(p * D + src) * R + r];
            dirs[d] = sum / static_cast<double>(R);
        }
        // Pairwise, so identical directions reproduce their common value exactly.
        const double mean = D == 4 ? ((dirs[0] + dirs[1]) + (dirs[2] + dirs[3])) / 4.0 : (dirs[0] + dirs[1]) / 2.0;
        curve.mean.push_back(mean);
        curve.per_direction.push_back(std::move(dirs));
    }
    return curve;
}

// ---- ablation --------------------------------------------------------------------

AblationReport ablate(std::span<const TrainingSample> train_set, std::span<const PairManifest> splits,
                      const FeatureSource& source, std::span<const ComparatorKind> kinds, const TrainConfig& config,
                      const std::optional<BackboneInfo>& backbone, std::vector<ModelParams>* models) {
    if (kinds.size() < 2) throw UsageError("ablation needs at least two comparator kinds");
    std::set<ComparatorKind> seen(kinds.begin(), kinds.end());
    if (seen.size() != kinds.size()) throw UsageError("ablation comparator kinds must be distinct");
    AblationReport report;
    for (const auto& s : splits) report.splits.push_back(s.split);
    for (ComparatorKind kind : kinds) {
        TrainConfig c = config;
        c.model.kind = kind;
        TrainResult trained = train(c, train_set, backbone);
        const EvalReport ev = evaluate(trained.model, splits, source);
        AblationRow row{kind, {}, ev.avg};
        for (const auto& s : ev.splits) row.split_means.push_back(s.mean);
        report.rows.push_back(std::move(row));
        if (models) models->push_back(std::move(trained.model));
    }
    return report;
}

}  // namespace scd
