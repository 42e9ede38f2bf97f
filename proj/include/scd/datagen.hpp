#pragma once

// Synthetic scene sequences with exact change ground truth, aligned and Diff-k pair
// construction, and affine viewpoint augmentation.
//
// A sequence covers `views` camera positions, each captured at two epochs. Frame
// index v (0 <= v < views) is view v at epoch t0, frame views + v the same view at
// epoch t1. Objects carry a presence interval over frame indices; the change mask
// between two frames is the union of footprints of objects present in exactly one.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scd/image.hpp"
#include "scd/manifest.hpp"

namespace scd {

// 2D rigid camera. A frame pixel centre p maps to the world point
// R(theta) (p - c) + c + (dx, dy), c the image centre.
struct CameraPose {
    double dx = 0.0;
    double dy = 0.0;
    double theta_deg = 0.0;

    bool operator==(const CameraPose&) const = default;
};

double camera_displacement(const CameraPose& a, const CameraPose& b);

enum class ObjectShape : std::uint32_t { Rect = 0, Ellipse = 1, Polygon = 2 };

struct SceneObject {
    std::uint32_t id = 0;
    ObjectShape shape = ObjectShape::Rect;
    double cx = 0.0, cy = 0.0;  // world centre
    double rx = 0.0, ry = 0.0;  // half extents (rect, ellipse)
    double angle_deg = 0.0;
    std::vector<std::pair<double, double>> polygon;  // world vertices (polygon)
    std::array<std::uint8_t, 3> color{};
    std::size_t first = 0;           // present for frames in [first, last)
    std::size_t last = SIZE_MAX;

    bool present(std::size_t frame) const noexcept { return frame >= first && frame < last; }
    bool contains(double wx, double wy) const;
};

struct SceneConfig {
    std::size_t width = 224;
    std::size_t height = 224;
    std::size_t views = 6;
    std::size_t objects = 6;
    double change_rate = 0.5;      // probability that an object appears or vanishes
    double max_camera_step = 8.0;  // pixels per view
    double max_rotation_step = 1.0;  // degrees per view
    double min_object_radius = 14.0;
    double max_object_radius = 36.0;
    bool grid_snap = false;  // axis-aligned rectangles on the 14 px patch grid

    void validate() const;
    bool operator==(const SceneConfig&) const = default;
};

struct SceneSequence {
    SceneConfig config;
    std::uint64_t seed = 0;
    std::vector<CameraPose> poses;  // one per view
    std::vector<SceneObject> objects;  // drawn in order, later on top
    // Procedural background
    std::array<double, 3> base{};
    std::vector<std::array<double, 6>> waves;  // fx, fy, phase, r, g, b amplitudes
    std::array<std::array<double, 3>, 2> epoch_gain{};

    std::size_t frame_count() const noexcept { return 2 * poses.size(); }
    std::size_t view_of(std::size_t frame) const { return frame % poses.size(); }
    std::size_t epoch_of(std::size_t frame) const { return frame / poses.size(); }
    const CameraPose& pose(std::size_t frame) const { return poses.at(view_of(frame)); }
};

SceneSequence gen_scene(std::uint64_t seed, const SceneConfig& config);

Image render_frame(const SceneSequence& seq, std::size_t frame);

// Footprint of one object in a frame's coordinates.
Mask object_footprint(const SceneSequence& seq, const SceneObject& object, std::size_t frame);

// Objects present in exactly one of frames i, j, rasterised in frame i.
Mask change_mask(const SceneSequence& seq, std::size_t i, std::size_t j);

// ---- pairs -----------------------------------------------------------------------

// Pairs of views (a, b, direction) at distance k within a sequence of `views`
// views, in emission order: (i, i+k, 0), (i+k, i, 1) for ascending i. k = 0 gives
// (i, i, 0).
std::vector<std::array<std::size_t, 3>> diff_pair_views(std::size_t views, std::size_t k);

// From an aligned split, pairs t0 of view a with t1 of view b for every in-sequence
// pair at distance k; the ground truth is the one of view a. k = 0 returns the split
// unchanged. Views are ordered by frame index within each sequence.
PairManifest make_diff_pairs(const PairManifest& aligned, std::size_t k);

// ---- affine augmentation ---------------------------------------------------------

struct AffineParams {
    double theta_deg = 0.0;
    double tx = 0.0;
    double ty = 0.0;

    bool identity() const noexcept { return theta_deg == 0.0 && tx == 0.0 && ty == 0.0; }
    bool operator==(const AffineParams&) const = default;
};

struct AffineBounds {
    double max_rotation_deg = 15.0;
    double max_translation = 50.0;
};

inline constexpr AffineBounds kTrainingBounds{15.0, 50.0};
inline constexpr AffineBounds kSweepBounds{45.0, 255.0};

// Applying `first` then `second`.
AffineParams compose(const AffineParams& first, const AffineParams& second);

struct AffineResult {
    Image image;
    Mask mask;
    Mask valid;  // 1 where the output pixel came from inside the source frame
};

// Rotation about the image centre, then translation. Bilinear for the image,
// nearest for masks; out-of-frame pixels are black and invalid. `valid_in`, when
// given, is carried through the same mapping.
AffineResult affine_augment(const Image& image, const Mask& mask, const AffineParams& params,
                            const AffineBounds& bounds = kTrainingBounds, const Mask* valid_in = nullptr);

AffineParams random_affine(std::uint64_t seed, const AffineBounds& bounds);

// ---- datasets --------------------------------------------------------------------

struct DatasetConfig {
    SceneConfig scene;
    std::size_t scenes = 8;
    std::uint64_t seed = 0;
    std::vector<std::size_t> diff_ks{1, 2};
};

struct DatasetSummary {
    std::vector<std::filesystem::path> manifests;  // aligned first, then diff<k>
    std::size_t images = 0;
};

// Writes <dir>/s<NNN>/{t0_<v>.ppm, t1_<v>.ppm, gt_<v>.pgm} per scene and the
// manifests <dir>/aligned.manifest, <dir>/diff<k>.manifest.
DatasetSummary materialize_dataset(const DatasetConfig& config, const std::filesystem::path& dir);

// Per-scene seed used by materialize_dataset.
std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t scene);

struct AugmentConfig {
    std::size_t copies = 1;
    std::uint64_t seed = 0;
    AffineBounds bounds = kTrainingBounds;
    bool rotation_only = false;
    bool keep_original = true;
};

// Affine-augments the t0 side of every record (t0 image and its ground truth) and
// writes a self-contained split with validity masks under `dir`.
PairManifest augment_dataset(const PairManifest& manifest, const AugmentConfig& config,
                             const std::filesystem::path& dir);

}  // namespace scd
