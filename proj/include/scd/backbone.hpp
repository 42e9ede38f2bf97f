#pragma once

// Frozen dense features: the feature-map type, a deterministic toy patch encoder,
// and the SCDF on-disk format.
//
// SCDF v1 (little-endian):
//   "SCDF" | u32 version = 1 | u32 h | u32 w | u32 f | u32 dtype = 0 (float32)
//   | h*w*f float32, row-major channel-last

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scd/image.hpp"
#include "scd/tensor.hpp"

namespace scd {

struct PairRecord;

inline constexpr std::size_t kPatchSize = 14;

struct FeatureMap {
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t f = 0;
    std::vector<double> data;  // (y * w + x) * f + ch

    FeatureMap() = default;
    FeatureMap(std::size_t rows, std::size_t cols, std::size_t dim)
        : h(rows), w(cols), f(dim), data(rows * cols * dim, 0.0) {}

    std::size_t tokens() const noexcept { return h * w; }
    std::span<double> token(std::size_t i) { return {data.data() + i * f, f}; }
    std::span<const double> token(std::size_t i) const { return {data.data() + i * f, f}; }
    bool same_geometry(const FeatureMap& o) const noexcept { return h == o.h && w == o.w && f == o.f; }

    Tensor tensor() const { return Tensor(Shape{h, w, f}, data); }
    static FeatureMap from_tensor(const Tensor& t);

    bool operator==(const FeatureMap&) const = default;
};

// Per-channel standardisation, frozen once fitted. Values are held at float32
// precision so that every serialised copy reproduces encode() exactly.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

class ToyBackbone {
  public:
    static constexpr std::size_t kPatchInputs = kPatchSize * kPatchSize * 3;

    explicit ToyBackbone(std::uint64_t seed, std::size_t dim = 384);

    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> projection() const noexcept { return projection_; }
    std::uint64_t projection_hash() const;

    bool fitted() const noexcept { return stats_.has_value(); }
    const ChannelStats& stats() const;

    // Accumulates statistics over the patch tokens of every image and freezes them.
    void fit(std::span<const Image> images);
    void set_stats(ChannelStats stats);

    // Raw patch projection (no normalisation).
    FeatureMap project(const Image& image) const;
    // Projection, then per-channel standardisation if fitted, rounded to float32.
    FeatureMap encode(const Image& image) const;

  private:
    std::uint64_t seed_;
    std::size_t dim_;
    std::vector<double> projection_;  // [kPatchInputs x dim], row-major
    std::optional<ChannelStats> stats_;
};

// Streaming accumulator used when the fitting set does not fit in memory.
class StatsAccumulator {
  public:
    explicit StatsAccumulator(std::size_t dim) : sum_(dim, 0.0), sum_sq_(dim, 0.0) {}
    void add(const FeatureMap& raw);
    ChannelStats finish() const;

  private:
    std::vector<double> sum_;
    std::vector<double> sum_sq_;
    std::size_t count_ = 0;
};

// Backbone identity + frozen statistics, written next to exported toy features.
void write_backbone(const ToyBackbone& backbone, const std::filesystem::path& path);
ToyBackbone read_backbone(const std::filesystem::path& path);

// ---- SCDF ------------------------------------------------------------------

std::vector<char> encode_scdf(const FeatureMap& fm);
FeatureMap decode_scdf(std::span<const char> bytes, const std::string& what = "SCDF");
void write_features(const FeatureMap& fm, const std::filesystem::path& path);
FeatureMap read_features(const std::filesystem::path& path);

// ---- feature sources ---------------------------------------------------------

// Resolves a manifest-relative image path to its feature map.
class FeatureSource {
  public:
    virtual ~FeatureSource() = default;
    virtual FeatureMap load(const std::filesystem::path& base_dir, const std::string& image) const = 0;
};

// Encodes images on demand.
class ToyFeatureSource final : public FeatureSource {
  public:
    explicit ToyFeatureSource(const ToyBackbone& backbone) : backbone_(backbone) {}
    FeatureMap load(const std::filesystem::path& base_dir, const std::string& image) const override;

  private:
    const ToyBackbone& backbone_;
};

// Reads pre-exported SCDF files laid out as <dir>/<image path with .scdf extension>.
class ScdfFeatureSource final : public FeatureSource {
  public:
    explicit ScdfFeatureSource(std::filesystem::path dir) : dir_(std::move(dir)) {}
    FeatureMap load(const std::filesystem::path& base_dir, const std::string& image) const override;
    std::filesystem::path path_for(const std::string& image) const;

  private:
    std::filesystem::path dir_;
};

// Memoises another source. Safe for concurrent load().
class CachedFeatureSource final : public FeatureSource {
  public:
    explicit CachedFeatureSource(const FeatureSource& inner) : inner_(inner) {}
    FeatureMap load(const std::filesystem::path& base_dir, const std::string& image) const override;

  private:
    const FeatureSource& inner_;
    mutable std::mutex mutex_;
    mutable std::map<std::string, std::shared_ptr<const FeatureMap>> cache_;
};

std::filesystem::path feature_file_for(const std::filesystem::path& features_dir, const std::string& image);

// Features of both members of a pair; their geometry must agree.
std::pair<FeatureMap, FeatureMap> load_pair_features(const std::filesystem::path& base_dir,
                                                     const PairRecord& record,
                                                     const FeatureSource& source);

}  // namespace scd
