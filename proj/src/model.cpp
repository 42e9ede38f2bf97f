#include "scd/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "scd/binary_io.hpp"
#include "scd/error.hpp"
#include "scd/hash.hpp"

namespace scd {

namespace {
constexpr std::uint32_t kScdmVersion = 1;
}  // namespace

std::string_view comparator_name(ComparatorKind kind) {
    switch (kind) {
        case ComparatorKind::Cross: return "cross";
        case ComparatorKind::Diff: return "diff";
        case ComparatorKind::Concat: return "concat";
        case ComparatorKind::Corr: return "corr";
    }
    return "unknown";
}

ComparatorKind parse_comparator(std::string_view name) {
    if (name == "cross") return ComparatorKind::Cross;
    if (name == "diff") return ComparatorKind::Diff;
    if (name == "concat" || name == "concatOnly") return ComparatorKind::Concat;
    if (name == "corr") return ComparatorKind::Corr;
    throw UsageError("unknown comparator kind '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
    if (static_cast<std::uint32_t>(kind) > 3) throw ValidationError("unknown comparator kind");
    if (dim == 0) throw ValidationError("feature dimension must be positive");
    if (heads == 0 || dim % heads != 0) {
        throw ValidationError("head count " + std::to_string(heads) + " does not divide feature dimension " +
                              std::to_string(dim));
    }
    if (blocks != 1 && blocks != 2) throw ValidationError("attention block count must be 1 or 2");
    if (static_cast<std::uint32_t>(orientation) > 1) throw ValidationError("unknown query orientation");
}

ToyBackbone BackboneInfo::instantiate() const {
    ToyBackbone bb(seed, dim);
    if (stats) bb.set_stats(*stats);
    return bb;
}

std::vector<Tensor*> ModelParams::parameters() {
    std::vector<Tensor*> out;
    for (auto& b : blocks) {
        out.insert(out.end(), {&b.wq, &b.wk, &b.wv, &b.wo});
    }
    out.insert(out.end(), {&head.conv3_kernel, &head.conv3_bias, &head.conv1_kernel, &head.conv1_bias});
    return out;
}

std::vector<const Tensor*> ModelParams::parameters() const {
    auto mut = const_cast<ModelParams*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> ModelParams::parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = i == 0 ? "block_a." : "block_b.";
        for (const char* n : {"wq", "wk", "wv", "wo"}) out.push_back(p + n);
    }
    for (const char* n : {"conv3.kernel", "conv3.bias", "conv1.kernel", "conv1.bias"}) out.emplace_back(n);
    return out;
}

namespace {

std::size_t attention_block_count(const ModelConfig& c) {
    return c.kind == ComparatorKind::Cross ? c.blocks : 0;
}

std::vector<Shape> expected_shapes(const ModelConfig& c) {
    std::vector<Shape> s;
    for (std::size_t b = 0; b < attention_block_count(c); ++b) {
        for (int i = 0; i < 4; ++i) s.push_back(Shape{c.dim, c.dim});
    }
    s.push_back(Shape{3, 3, 2 * c.dim, c.dim});
    s.push_back(Shape{c.dim});
    s.push_back(Shape{1, 1, c.dim, 2});
    s.push_back(Shape{2});
    return s;
}

ModelParams skeleton(const ModelConfig& c) {
    ModelParams p;
    p.config = c;
    p.blocks.resize(attention_block_count(c));
    auto slots = p.parameters();
    const auto shapes = expected_shapes(c);
    for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = Tensor(shapes[i]);
    return p;
}

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams p = skeleton(config);

    std::mt19937_64 attn_rng(derive_seed(seed, 1));
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config.dim)));
    for (auto& b : p.blocks) {
        for (Tensor* t : {&b.wq, &b.wk, &b.wv, &b.wo}) {
            for (double& v : t->data) v = normal(attn_rng);
        }
    }

    // Head initialisation does not depend on the comparator kind, so ablation runs
    // from one seed share their head start.
    std::mt19937_64 head_rng(derive_seed(seed, 2));
    auto fan_in_uniform = [&](Tensor& k) {
        const double fan_in = static_cast<double>(k.shape[0] * k.shape[1] * k.shape[2]);
        const double bound = 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& v : k.data) v = u(head_rng);
    };
    fan_in_uniform(p.head.conv3_kernel);
    fan_in_uniform(p.head.conv1_kernel);
    return p;
}

BoundParams bind(Graph& g, const ModelParams& params, bool trainable) {
    auto place = [&](const Tensor& t) { return trainable ? g.parameter(t) : g.constant(t); };
    BoundParams b;
    for (const auto& blk : params.blocks) {
        b.blocks.push_back({place(blk.wq), place(blk.wk), place(blk.wv), place(blk.wo)});
        b.all.insert(b.all.end(), b.blocks.back().begin(), b.blocks.back().end());
    }
    b.conv3_kernel = place(params.head.conv3_kernel);
    b.conv3_bias = place(params.head.conv3_bias);
    b.conv1_kernel = place(params.head.conv1_kernel);
    b.conv1_bias = place(params.head.conv1_bias);
    b.all.insert(b.all.end(), {b.conv3_kernel, b.conv3_bias, b.conv1_kernel, b.conv1_bias});
    return b;
}

// ---- comparators -----------------------------------------------------------------

Var cross_attention_block(const Var& fq, const Var& fkv, const std::array<Var, 4>& weights, std::size_t heads) {
    const Shape& sq = fq.shape();
    if (sq.rank() != 3 || !(sq == fkv.shape())) {
        throw ShapeError("cross attention needs equal h x w x f maps, got " + sq.str() + " and " +
                         fkv.shape().str());
    }
    const std::size_t h = sq[0], w = sq[1], f = sq[2], n = h * w;
    if (heads == 0 || f % heads != 0) {
        throw ValidationError("head count " + std::to_string(heads) + " does not divide " + std::to_string(f));
    }
    for (const Var& wt : weights) {
        if (!(wt.shape() == Shape{f, f})) throw ShapeError("attention projection " + wt.shape().str());
    }
    const Var q_tokens = reshape(fq, Shape{n, f});
    const Var kv_tokens = reshape(fkv, Shape{n, f});
    const Var q = matmul(q_tokens, weights[0]);
    const Var k = matmul(kv_tokens, weights[1]);
    const Var v = matmul(kv_tokens, weights[2]);

    const std::size_t d = f / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Var context;
    for (std::size_t hd = 0; hd < heads; ++hd) {
        const Var qh = heads == 1 ? q : slice_channels(q, hd * d, d);
        const Var kh = heads == 1 ? k : slice_channels(k, hd * d, d);
        const Var vh = heads == 1 ? v : slice_channels(v, hd * d, d);
        const Var attn = softmax_rows(matmul_nt(qh, kh), scale);
        const Var ctx = matmul(attn, vh);
        context = hd == 0 ? ctx : concat_channels(context, ctx);
    }
    return reshape(matmul(context, weights[3]), Shape{h, w, f});
}

FeatureMap cross_attention_block(const AttentionParams& params, std::size_t heads, const FeatureMap& fq,
                                 const FeatureMap& fkv) {
    Graph g;
    const std::array<Var, 4> w{g.constant(params.wq), g.constant(params.wk), g.constant(params.wv),
                               g.constant(params.wo)};
    return FeatureMap::from_tensor(
        cross_attention_block(g.constant(fq.tensor()), g.constant(fkv.tensor()), w, heads).tensor());
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb) + 1e-12);
}

// Best cosine match of each token of `a` within the 3x3 neighbourhood in `b`.
std::vector<double> local_match(const FeatureMap& a, const FeatureMap& b) {
    std::vector<double> out(a.tokens());
    const auto H = static_cast<std::ptrdiff_t>(a.h), W = static_cast<std::ptrdiff_t>(a.w);
    for (std::ptrdiff_t y = 0; y < H; ++y) {
        for (std::ptrdiff_t x = 0; x < W; ++x) {
            double best = -1.0;
            for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
                for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
                    const std::ptrdiff_t yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                    best = std::max(best, cosine(a.token(y * W + x), b.token(yy * W + xx)));
                }
            }
            out[y * W + x] = best;
        }
    }
    return out;
}

Tensor fixed_comparator(ComparatorKind kind, const FeatureMap& f0, const FeatureMap& f1) {
    const std::size_t f = f0.f;
    Tensor out(Shape{f0.h, f0.w, 2 * f});
    std::vector<double> gate0, gate1;
    if (kind == ComparatorKind::Corr) {
        gate0 = local_match(f0, f1);
        gate1 = local_match(f1, f0);
    }
    for (std::size_t t = 0; t < f0.tokens(); ++t) {
        auto a = f0.token(t);
        auto b = f1.token(t);
        double* dst = out.data.data() + t * 2 * f;
        for (std::size_t c = 0; c < f; ++c) {
            switch (kind) {
                case ComparatorKind::Diff:
                    dst[c] = a[c] - b[c];
                    dst[f + c] = b[c] - a[c];
                    break;
                case ComparatorKind::Concat:
                    dst[c] = a[c];
                    dst[f + c] = b[c];
                    break;
                case ComparatorKind::Corr:
                    dst[c] = a[c] * gate0[t];
                    dst[f + c] = b[c] * gate1[t];
                    break;
                case ComparatorKind::Cross: break;
            }
        }
    }
    return out;
}

void check_inputs(const ModelConfig& config, const FeatureMap& f0, const FeatureMap& f1) {
    if (!f0.same_geometry(f1)) throw ShapeError("feature maps of a pair differ in geometry");
    if (f0.f != config.dim) {
        throw ShapeError("features have " + std::to_string(f0.f) + " channels, model expects " +
                         std::to_string(config.dim));
    }
}

}  // namespace

Var compare(Graph& g, const ModelConfig& config, const BoundParams& params, const FeatureMap& f0,
            const FeatureMap& f1) {
    check_inputs(config, f0, f1);
    if (config.kind != ComparatorKind::Cross) return g.constant(fixed_comparator(config.kind, f0, f1));
    if (params.blocks.size() != config.blocks) throw ValidationError("attention parameters missing");

    const Var v0 = g.constant(f0.tensor());
    const Var v1 = g.constant(f1.tensor());
    const bool t0_first = config.orientation == QueryOrientation::T0Queries;
    const Var& qa = t0_first ? v0 : v1;
    const Var& kva = t0_first ? v1 : v0;
    const Var a = cross_attention_block(qa, kva, params.blocks[0], config.heads);
    const Var b = config.blocks == 2 ? cross_attention_block(kva, qa, params.blocks[1], config.heads) : a;
    return concat_channels(a, b);
}

FeatureMap compare(const ModelParams& params, const FeatureMap& f0, const FeatureMap& f1) {
    Graph g;
    const BoundParams bound = bind(g, params, false);
    return FeatureMap::from_tensor(compare(g, params.config, bound, f0, f1).tensor());
}

Var forward(Graph& g, const ModelConfig& config, const BoundParams& params, const FeatureMap& f0,
            const FeatureMap& f1) {
    const Var advanced = compare(g, config, params, f0, f1);
    const Var halved = relu(conv2d(advanced, params.conv3_kernel, params.conv3_bias));
    const Var logits = conv2d(halved, params.conv1_kernel, params.conv1_bias);
    return upsample_nearest(logits, kPatchSize);
}

ChangeLogits predict(const ModelParams& params, const FeatureMap& f0, const FeatureMap& f1) {
    Graph g;
    const BoundParams bound = bind(g, params, false);
    const Var out = forward(g, params.config, bound, f0, f1);
    ChangeLogits logits;
    logits.height = out.shape()[0];
    logits.width = out.shape()[1];
    logits.data.assign(out.value().begin(), out.value().end());
    return logits;
}

Mask logits_to_mask(const ChangeLogits& logits) {
    Mask m(logits.width, logits.height);
    for (std::size_t p = 0; p < m.bits.size(); ++p) {
        if (!std::isfinite(logits.data[2 * p]) || !std::isfinite(logits.data[2 * p + 1])) {
            throw NumericError("non-finite logit at pixel " + std::to_string(p));
        }
        m.bits[p] = logits.data[2 * p + 1] > logits.data[2 * p] ? 1 : 0;
    }
    return m;
}

// ---- SCDM ------------------------------------------------------------------------

std::vector<char> encode_model(const ModelParams& params) {
    params.config.validate();
    binio::Writer w;
    w.bytes("SCDM");
    w.u32(kScdmVersion);
    w.u32(static_cast<std::uint32_t>(params.config.kind));
    w.u32(static_cast<std::uint32_t>(params.config.dim));
    w.u32(static_cast<std::uint32_t>(params.config.heads));
    w.u32(static_cast<std::uint32_t>(params.config.blocks));
    w.u32(static_cast<std::uint32_t>(params.config.orientation));
    w.u32(params.backbone ? 1 : 0);
    if (params.backbone) {
        const auto& bb = *params.backbone;
        w.u64(bb.seed);
        w.u32(static_cast<std::uint32_t>(bb.dim));
        w.u32(bb.stats ? 1 : 0);
        if (bb.stats) {
            for (double v : bb.stats->mean) w.f32(static_cast<float>(v));
            for (double v : bb.stats->stddev) w.f32(static_cast<float>(v));
        }
    }
    const auto tensors = params.parameters();
    const auto shapes = expected_shapes(params.config);
    if (tensors.size() != shapes.size()) throw ValidationError("model parameter layout does not match its config");
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const Tensor& t = *tensors[i];
        if (!(t.shape == shapes[i])) throw ShapeError("parameter " + std::to_string(i) + " is " + t.shape.str());
        w.u32(static_cast<std::uint32_t>(t.shape.rank()));
        for (std::size_t d : t.shape.dims()) w.u32(static_cast<std::uint32_t>(d));
        for (double v : t.data) {
            const float f = static_cast<float>(v);
            if (!std::isfinite(f)) throw FormatError(FormatFault::NonFinite, "non-finite model parameter");
            w.f32(f);
        }
    }
    return w.take();
}

ModelParams decode_model(std::span<const char> bytes, const std::string& what, std::size_t* consumed) {
    if (bytes.size() < 4 || std::string_view(bytes.data(), 4) != "SCDM") {
        throw FormatError(FormatFault::BadMagic, what + ": bad magic");
    }
    binio::Reader r(bytes, what);
    r.bytes(4);
    const std::uint32_t version = r.u32();
    if (version != kScdmVersion) {
        throw FormatError(FormatFault::BadVersion, what + ": unsupported version " + std::to_string(version));
    }
    ModelConfig c;
    c.kind = static_cast<ComparatorKind>(r.u32());
    c.dim = r.u32();
    c.heads = r.u32();
    c.blocks = r.u32();
    c.orientation = static_cast<QueryOrientation>(r.u32());
    try {
        c.validate();
    } catch (const ValidationError& e) {
        throw FormatError(FormatFault::BadHeader, what + ": " + e.what());
    }
    ModelParams p = skeleton(c);
    if (r.u32() != 0) {
        BackboneInfo bb;
        bb.seed = r.u64();
        bb.dim = r.u32();
        if (bb.dim != c.dim) throw FormatError(FormatFault::BadHeader, what + ": backbone/model dim mismatch");
        if (r.u32() != 0) {
            ChannelStats s;
            for (std::size_t i = 0; i < bb.dim; ++i) s.mean.push_back(r.f32());
            for (std::size_t i = 0; i < bb.dim; ++i) s.stddev.push_back(r.f32());
            bb.stats = std::move(s);
        }
        p.backbone = std::move(bb);
    }
    auto tensors = p.parameters();
    const std::uint32_t count = r.u32();
    if (count != tensors.size()) {
        throw FormatError(FormatFault::BadHeader, what + ": " + std::to_string(count) + " tensors, expected " +
                                                      std::to_string(tensors.size()));
    }
    for (Tensor* t : tensors) {
        const std::uint32_t rank = r.u32();
        std::vector<std::size_t> dims;
        for (std::uint32_t i = 0; i < rank && i < 8; ++i) dims.push_back(r.u32());
        if (dims != t->shape.dims()) {
            throw FormatError(FormatFault::BadHeader, what + ": parameter dimensions do not match the config");
        }
        for (double& v : t->data) {
            const float f = r.f32();
            if (!std::isfinite(f)) throw FormatError(FormatFault::NonFinite, what + ": non-finite parameter");
            v = f;
        }
    }
    if (consumed) *consumed = r.position();
    return p;
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
    binio::write_file(path, encode_model(params));
}

ModelParams load_model(const std::filesystem::path& path) {
    const auto bytes = binio::read_file(path);
    std::size_t used = 0;
    ModelParams p = decode_model(bytes, path.string(), &used);
    const std::size_t rest = bytes.size() - used;
    if (rest != 0 && (rest < 4 || std::string_view(bytes.data() + used, 4) != "ADAM")) {
        throw FormatError(FormatFault::BadHeader, path.string() + ": unexpected trailing bytes");
    }
    return p;
}

std::string model_hash(const ModelParams& params) {
    const auto bytes = encode_model(params);
    Fnv1a h;
    h.update(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
    return h.hex();
}

}  // namespace scd
