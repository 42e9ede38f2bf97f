#include "scd/backbone.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "scd/binary_io.hpp"
#include "scd/error.hpp"
#include "scd/hash.hpp"
#include "scd/kernels.hpp"
#include "scd/manifest.hpp"

namespace scd {

namespace {

constexpr std::uint32_t kScdfVersion = 1;
constexpr std::uint32_t kDtypeFloat32 = 0;
constexpr std::uint32_t kBackboneVersion = 1;

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

FeatureMap FeatureMap::from_tensor(const Tensor& t) {
    if (t.shape.rank() != 3) throw ShapeError("feature map needs rank 3, got " + t.shape.str());
    FeatureMap fm(t.shape[0], t.shape[1], t.shape[2]);
    fm.data = t.data;
    return fm;
}

// ---- ToyBackbone ----------------------------------------------------------------

ToyBackbone::ToyBackbone(std::uint64_t seed, std::size_t dim) : seed_(seed), dim_(dim) {
    if (dim == 0) throw ValidationError("backbone dimension must be positive");
    projection_.resize(kPatchInputs * dim_);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kPatchInputs));
    for (double& v : projection_) v = normal(rng) * scale;
}

std::uint64_t ToyBackbone::projection_hash() const {
    Fnv1a h;
    h.update(std::span(reinterpret_cast<const std::uint8_t*>(projection_.data()),
                       projection_.size() * sizeof(double)));
    return h.digest();
}

const ChannelStats& ToyBackbone::stats() const {
    if (!stats_) throw ValidationError("toy backbone has no fitted statistics");
    return *stats_;
}

void ToyBackbone::set_stats(ChannelStats stats) {
    if (stats.mean.size() != dim_ || stats.stddev.size() != dim_) {
        throw ValidationError("backbone statistics have wrong dimension");
    }
    for (std::size_t i = 0; i < dim_; ++i) {
        stats.mean[i] = to_f32(stats.mean[i]);
        stats.stddev[i] = to_f32(stats.stddev[i]);
        if (!std::isfinite(stats.mean[i]) || !(stats.stddev[i] > 0.0)) {
            throw NumericError("backbone statistics are degenerate in channel " + std::to_string(i));
        }
    }
    stats_ = std::move(stats);
}

void ToyBackbone::fit(std::span<const Image> images) {
    if (stats_) throw ValidationError("toy backbone statistics are already frozen");
    if (images.empty()) throw ValidationError("cannot fit backbone statistics on zero images");
    StatsAccumulator acc(dim_);
    for (const auto& img : images) acc.add(project(img));
    set_stats(acc.finish());
}

FeatureMap ToyBackbone::project(const Image& image) const {
    if (image.height % kPatchSize != 0) {
        throw ValidationError("height not multiple of 14 (" + std::to_string(image.height) + ")");
    }
    if (image.width % kPatchSize != 0) {
        throw ValidationError("width not multiple of 14 (" + std::to_string(image.width) + ")");
    }
    const std::size_t h = image.height / kPatchSize, w = image.width / kPatchSize;
    std::vector<double> patches(h * w * kPatchInputs);
    for (std::size_t py = 0; py < h; ++py) {
        for (std::size_t px = 0; px < w; ++px) {
            double* dst = patches.data() + (py * w + px) * kPatchInputs;
            for (std::size_t y = 0; y < kPatchSize; ++y) {
                const std::uint8_t* src = image.pixel(px * kPatchSize, py * kPatchSize + y);
                for (std::size_t i = 0; i < kPatchSize * 3; ++i) *dst++ = src[i] / 255.0;
            }
        }
    }
    FeatureMap fm(h, w, dim_);
    kernels::gemm(patches, projection_, fm.data, h * w, kPatchInputs, dim_, false);
    return fm;
}

FeatureMap ToyBackbone::encode(const Image& image) const {
    FeatureMap fm = project(image);
    for (std::size_t t = 0; t < fm.tokens(); ++t) {
        auto tok = fm.token(t);
        for (std::size_t c = 0; c < dim_; ++c) {
            double v = tok[c];
            if (stats_) v = (v - stats_->mean[c]) / stats_->stddev[c];
            tok[c] = to_f32(v);
        }
    }
    return fm;
}

void StatsAccumulator::add(const FeatureMap& raw) {
    if (raw.f != sum_.size()) throw ValidationError("statistics dimension mismatch");
    for (std::size_t t = 0; t < raw.tokens(); ++t) {
        auto tok = raw.token(t);
        for (std::size_t c = 0; c < raw.f; ++c) {
            sum_[c] += tok[c];
            sum_sq_[c] += tok[c] * tok[c];
        }
    }
    count_ += raw.tokens();
}

ChannelStats StatsAccumulator::finish() const {
    if (count_ == 0) throw ValidationError("no tokens accumulated");
    ChannelStats s;
    const double n = static_cast<double>(count_);
    for (std::size_t c = 0; c < sum_.size(); ++c) {
        const double mean = sum_[c] / n;
        const double var = std::max(0.0, sum_sq_[c] / n - mean * mean);
        s.mean.push_back(mean);
        s.stddev.push_back(std::sqrt(var + 1e-12));
    }
    return s;
}

void write_backbone(const ToyBackbone& backbone, const std::filesystem::path& path) {
    binio::Writer w;
    w.bytes("SCDB");
    w.u32(kBackboneVersion);
    w.u64(backbone.seed());
    w.u32(static_cast<std::uint32_t>(backbone.dim()));
    w.u32(backbone.fitted() ? 1 : 0);
    if (backbone.fitted()) {
        for (double v : backbone.stats().mean) w.f32(static_cast<float>(v));
        for (double v : backbone.stats().stddev) w.f32(static_cast<float>(v));
    }
    binio::write_file(path, w.buffer());
}

ToyBackbone read_backbone(const std::filesystem::path& path) {
    const auto bytes = binio::read_file(path);
    binio::Reader r(bytes, path.string());
    if (r.bytes(4) != "SCDB") throw FormatError(FormatFault::BadMagic, path.string() + ": bad magic");
    if (r.u32() != kBackboneVersion) throw FormatError(FormatFault::BadVersion, path.string() + ": bad version");
    const std::uint64_t seed = r.u64();
    const std::size_t dim = r.u32();
    ToyBackbone bb(seed, dim);
    if (r.u32() != 0) {
        ChannelStats s;
        for (std::size_t i = 0; i < dim; ++i) s.mean.push_back(r.f32());
        for (std::size_t i = 0; i < dim; ++i) s.stddev.push_back(r.f32());
        bb.set_stats(std::move(s));
    }
    return bb;
}

// ---- SCDF ------------------------------------------------------------------------

std::vector<char> encode_scdf(const FeatureMap& fm) {
    if (fm.h == 0 || fm.w == 0 || fm.f == 0 || fm.data.size() != fm.h * fm.w * fm.f) {
        throw ValidationError("cannot encode a feature map with inconsistent geometry");
    }
    binio::Writer w;
    w.bytes("SCDF");
    w.u32(kScdfVersion);
    w.u32(static_cast<std::uint32_t>(fm.h));
    w.u32(static_cast<std::uint32_t>(fm.w));
    w.u32(static_cast<std::uint32_t>(fm.f));
    w.u32(kDtypeFloat32);
    for (double v : fm.data) {
        const float f = static_cast<float>(v);
        if (!std::isfinite(f)) throw FormatError(FormatFault::NonFinite, "non-finite feature value");
        w.f32(f);
    }
    return w.take();
}

FeatureMap decode_scdf(std::span<const char> bytes, const std::string& what) {
    binio::Reader r(bytes, what);
    if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != "SCDF") {
        throw FormatError(FormatFault::BadMagic, what + ": bad magic");
    }
    r.bytes(4);
    const std::uint32_t version = r.u32();
    if (version != kScdfVersion) {
        throw FormatError(FormatFault::BadVersion, what + ": unsupported version " + std::to_string(version));
    }
    const std::size_t h = r.u32(), w = r.u32(), f = r.u32();
    const std::uint32_t dtype = r.u32();
    if (dtype != kDtypeFloat32) throw FormatError(FormatFault::BadHeader, what + ": unsupported dtype");
    if (h == 0 || w == 0 || f == 0) throw FormatError(FormatFault::BadHeader, what + ": zero dimension");
    const std::size_t n = h * w * f;
    if (r.remaining() < n * 4) {
        throw FormatError(FormatFault::Truncated, what + ": payload holds " + std::to_string(r.remaining()) +
                                                      " bytes, expected " + std::to_string(n * 4));
    }
    if (r.remaining() > n * 4) throw FormatError(FormatFault::BadHeader, what + ": trailing bytes");
    FeatureMap fm(h, w, f);
    for (std::size_t i = 0; i < n; ++i) {
        const float v = r.f32();
        if (!std::isfinite(v)) {
            throw FormatError(FormatFault::NonFinite, what + ": non-finite value at element " + std::to_string(i));
        }
        fm.data[i] = v;
    }
    return fm;
}

void write_features(const FeatureMap& fm, const std::filesystem::path& path) {
    binio::write_file(path, encode_scdf(fm));
}

FeatureMap read_features(const std::filesystem::path& path) {
    return decode_scdf(binio::read_file(path), path.string());
}

// ---- sources ---------------------------------------------------------------------

FeatureMap ToyFeatureSource::load(const std::filesystem::path& base_dir, const std::string& image) const {
    return backbone_.encode(read_ppm(base_dir / image));
}

std::filesystem::path feature_file_for(const std::filesystem::path& features_dir, const std::string& image) {
    std::filesystem::path rel(image);
    rel.replace_extension(".scdf");
    return features_dir / rel;
}

std::filesystem::path ScdfFeatureSource::path_for(const std::string& image) const {
    return feature_file_for(dir_, image);
}

FeatureMap ScdfFeatureSource::load(const std::filesystem::path&, const std::string& image) const {
    return read_features(path_for(image));
}

FeatureMap CachedFeatureSource::load(const std::filesystem::path& base_dir, const std::string& image) const {
    const std::string key = (base_dir / image).lexically_normal().string();
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return *it->second;
    }
    auto fm = std::make_shared<const FeatureMap>(inner_.load(base_dir, image));
    std::lock_guard lock(mutex_);
    return *cache_.emplace(key, std::move(fm)).first->second;
}

std::pair<FeatureMap, FeatureMap> load_pair_features(const std::filesystem::path& base_dir,
                                                     const PairRecord& record, const FeatureSource& source) {
    FeatureMap f0 = source.load(base_dir, record.t0);
    FeatureMap f1 = source.load(base_dir, record.t1);
    if (!f0.same_geometry(f1)) {
        throw ValidationError("pair dimension mismatch for " + pair_id(record) + ": " + std::to_string(f0.h) + "x" +
                              std::to_string(f0.w) + "x" + std::to_string(f0.f) + " vs " + std::to_string(f1.h) +
                              "x" + std::to_string(f1.w) + "x" + std::to_string(f1.f));
    }
    return {std::move(f0), std::move(f1)};
}

}  // namespace scd
