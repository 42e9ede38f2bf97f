#pragma once

// Per-image F1 scoring, split aggregation, affine robustness sweeps, comparator
// ablation, and CSV / SVG report emission.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scd/backbone.hpp"
#include "scd/datagen.hpp"
#include "scd/image.hpp"
#include "scd/manifest.hpp"
#include "scd/model.hpp"
#include "scd/training.hpp"

namespace scd {

// Change is the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
        tp += o.tp, fp += o.fp, fn += o.fn, tn += o.tn;
        return *this;
    }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const Mask& pred, const Mask& gt, const Mask* valid = nullptr);

// 2TP / (2TP + FP + FN). Both prediction and truth empty scores 1, exactly one empty 0.
double f1_from_counts(const ConfusionCounts& c) noexcept;
double f1_change(const Mask& pred, const Mask& gt, const Mask* valid = nullptr);

inline constexpr const char* kEmptyConvention = "both-empty=1.0";

enum class Averaging { Macro, Micro };

struct EvalRow {
    std::string pair_id;
    std::string split;
    std::size_t k = 0;
    double f1 = 0.0;
    ConfusionCounts counts;
};

struct EvalFailure {
    std::string split;
    std::string pair_id;
    std::string message;
};

struct SplitScore {
    std::string split;
    double mean = 0.0;
    std::size_t count = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;  // manifest order, split after split
    std::vector<SplitScore> splits;
    double avg = 0.0;  // arithmetic mean of the split means
    std::vector<EvalFailure> failures;
    Averaging averaging = Averaging::Macro;
    std::string model_hash;
    std::string config_hash;
    std::uint64_t seed = 0;
    double seconds = 0.0;  // wall clock, informational

    const SplitScore* split(const std::string& name) const;
};

using FeaturePredictor = std::function<Mask(const FeatureMap& f0, const FeatureMap& f1)>;
using ImagePredictor = std::function<Mask(const Image& t0, const Image& t1)>;

FeaturePredictor feature_predictor(const ModelParams& model);
// Re-encodes both images with the model's recorded backbone.
ImagePredictor image_predictor(const ModelParams& model);

// Records whose features cannot be resolved are listed as failures and skipped.
EvalReport evaluate(const FeaturePredictor& predictor, std::span<const PairManifest> splits,
                    const FeatureSource& source, Averaging averaging = Averaging::Macro);
EvalReport evaluate(const ModelParams& model, std::span<const PairManifest> splits, const FeatureSource& source,
                    Averaging averaging = Averaging::Macro);

// ---- sweeps ----------------------------------------------------------------------

enum class SweepMode { Translate, Rotate };

std::string_view sweep_mode_name(SweepMode mode);
SweepMode parse_sweep_mode(std::string_view name);

struct SweepCurve {
    SweepMode mode = SweepMode::Translate;
    std::vector<double> params;
    std::vector<double> mean;
    // per parameter: translate right, left, up, down; rotate clockwise, counterclockwise
    std::vector<std::vector<double>> per_direction;
};

std::size_t direction_count(SweepMode mode);
AffineParams sweep_params(SweepMode mode, std::size_t direction, double value);

// Transforms t0 and its ground truth (with a validity mask) by each parameter in
// 0, stride, ..., range and every direction, then scores against the untouched t1.
SweepCurve sweep_affine(const ImagePredictor& predictor, const PairManifest& manifest, SweepMode mode,
                        double range, double stride);

// ---- ablation --------------------------------------------------------------------

struct AblationRow {
    ComparatorKind kind = ComparatorKind::Cross;
    std::vector<double> split_means;
    double avg = 0.0;
};

struct AblationReport {
    std::vector<std::string> splits;
    std::vector<AblationRow> rows;
};

// Trains every kind with the same seed and data, then evaluates each on `splits`.
AblationReport ablate(std::span<const TrainingSample> train_set, std::span<const PairManifest> splits,
                      const FeatureSource& source, std::span<const ComparatorKind> kinds, const TrainConfig& config,
                      const std::optional<BackboneInfo>& backbone = std::nullopt,
                      std::vector<ModelParams>* models = nullptr);

// ---- reports ---------------------------------------------------------------------

// %.9g
std::string format_value(double v);

// pair_id,split,k,f1
void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);
// mode,param,f1_mean,f1_dir1,f1_dir2[,f1_dir3,f1_dir4]
void write_sweep_csv(const SweepCurve& curve, const std::filesystem::path& path);
// comparator,aligned,diff1,diff2,avg
void write_ablation_csv(const AblationReport& report, const std::filesystem::path& path);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<std::string> x_ticks;  // categorical labels at x = 0, 1, ...; empty for numeric axes
};

std::string render_svg(const PlotSpec& spec, std::span<const PlotSeries> series);
void write_svg(const PlotSpec& spec, std::span<const PlotSeries> series, const std::filesystem::path& path);

void write_sweep_svg(std::span<const SweepCurve> curves, std::span<const std::string> labels,
                     const std::filesystem::path& path);
void write_ablation_svg(const AblationReport& report, const std::filesystem::path& path);

}  // namespace scd
