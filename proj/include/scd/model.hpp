#pragma once

// Change model: a comparator that fuses the two frozen feature maps into an
// h x w x 2f "advanced feature matrix", followed by a segmentation head
// (3x3 conv halving channels, ReLU, 1x1 conv to two classes, x14 nearest upsample).

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scd/autodiff.hpp"
#include "scd/backbone.hpp"
#include "scd/image.hpp"

namespace scd {

enum class ComparatorKind : std::uint32_t {
    Cross = 0,   // two full-image cross-attention blocks
    Diff = 1,    // (F0 - F1, F1 - F0)
    Concat = 2,  // (F0, F1)
    Corr = 3,    // features gated by their best local cosine match in the other image
};

std::string_view comparator_name(ComparatorKind kind);
ComparatorKind parse_comparator(std::string_view name);

// Which image supplies the queries of the first attention block.
enum class QueryOrientation : std::uint32_t {
    T0Queries = 0,  // block A: queries F0, keys/values F1; block B the reverse
    T1Queries = 1,  // block A: queries F1, keys/values F0; block B the reverse
};

struct ModelConfig {
    ComparatorKind kind = ComparatorKind::Cross;
    std::size_t dim = 384;
    std::size_t heads = 1;
    std::size_t blocks = 2;  // 1 duplicates block A's output to fill 2f channels
    QueryOrientation orientation = QueryOrientation::T0Queries;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct AttentionParams {
    Tensor wq, wk, wv, wo;  // each f x f
};

struct HeadParams {
    Tensor conv3_kernel;  // 3 x 3 x 2f x f
    Tensor conv3_bias;    // f
    Tensor conv1_kernel;  // 1 x 1 x f x 2
    Tensor conv1_bias;    // 2
};

// Identity of the toy backbone the model was trained against, so images can be
// re-encoded consistently (affine sweeps).
struct BackboneInfo {
    std::uint64_t seed = 0;
    std::size_t dim = 0;
    std::optional<ChannelStats> stats;

    ToyBackbone instantiate() const;
};

struct ModelParams {
    ModelConfig config;
    std::vector<AttentionParams> blocks;
    HeadParams head;
    std::optional<BackboneInfo> backbone;

    // Declared order: block A (wq, wk, wv, wo), block B (...), conv3 kernel, conv3
    // bias, conv1 kernel, conv1 bias. Serialisation and the optimiser use it.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::vector<std::string> parameter_names() const;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);

// Model parameters placed on a graph.
struct BoundParams {
    std::vector<std::array<Var, 4>> blocks;
    Var conv3_kernel, conv3_bias, conv1_kernel, conv1_bias;
    std::vector<Var> all;  // declared order
};

BoundParams bind(Graph& g, const ModelParams& params, bool trainable);

// Full-image cross-attention: every query token attends over all key/value tokens.
// fq, fkv: h x w x f. Returns h x w x f on the query grid.
Var cross_attention_block(const Var& fq, const Var& fkv, const std::array<Var, 4>& weights,
                          std::size_t heads);
FeatureMap cross_attention_block(const AttentionParams& params, std::size_t heads, const FeatureMap& fq,
                                 const FeatureMap& fkv);

// h x w x 2f comparator output.
Var compare(Graph& g, const ModelConfig& config, const BoundParams& params, const FeatureMap& f0,
            const FeatureMap& f1);
FeatureMap compare(const ModelParams& params, const FeatureMap& f0, const FeatureMap& f1);

// Logits on the pixel grid: (14h) x (14w) x 2.
Var forward(Graph& g, const ModelConfig& config, const BoundParams& params, const FeatureMap& f0,
            const FeatureMap& f1);

struct ChangeLogits {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;  // (y * width + x) * 2 + class; class 1 = change

    bool operator==(const ChangeLogits&) const = default;
};

ChangeLogits predict(const ModelParams& params, const FeatureMap& f0, const FeatureMap& f1);

// Per-pixel argmax. Ties resolve to unchanged.
Mask logits_to_mask(const ChangeLogits& logits);

// ---- SCDM ------------------------------------------------------------------------
//
//   "SCDM" | u32 version | u32 kind | u32 dim | u32 heads | u32 blocks | u32 orientation
//   | u32 has_backbone [ u64 seed | u32 dim | u32 has_stats [ f32 mean[dim] | f32 std[dim] ] ]
//   | u32 tensor_count | per tensor: u32 rank | u32 dims[rank] | f32 values
//   | optional trailing sections, each introduced by a 4-byte tag

std::vector<char> encode_model(const ModelParams& params);
// Decodes the model part; `consumed` receives the offset of the first trailing section.
ModelParams decode_model(std::span<const char> bytes, const std::string& what, std::size_t* consumed = nullptr);

void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

// Fingerprint of the serialised model bytes.
std::string model_hash(const ModelParams& params);

}  // namespace scd
