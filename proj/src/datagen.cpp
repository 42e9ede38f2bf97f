#include "scd/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <numbers>
#include <random>

#include "scd/error.hpp"
#include "scd/hash.hpp"
#include "scd/kernels.hpp"

namespace scd {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

class Uniform {
  public:
    explicit Uniform(std::uint64_t seed) : rng_(seed) {}
    double operator()(double lo, double hi) { return lo + (hi - lo) * unit_(rng_); }
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }

  private:
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

struct Point {
    double x, y;
};

Point frame_to_world(const CameraPose& pose, double cx, double cy, double px, double py) {
    const double c = std::cos(pose.theta_deg * kDeg), s = std::sin(pose.theta_deg * kDeg);
    const double rx = px - cx, ry = py - cy;
    return {c * rx - s * ry + cx + pose.dx, s * rx + c * ry + cy + pose.dy};
}

std::uint8_t clamp_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Small per-pixel sensor noise in [-3, 3].
double pixel_noise(std::uint64_t seed, std::size_t frame, std::size_t x, std::size_t y, int ch) {
    const std::uint64_t h = derive_seed(seed ^ 0x6e6f697365ULL, frame * 8 + static_cast<std::uint64_t>(ch),
                                        (static_cast<std::uint64_t>(y) << 32) | x);
    return static_cast<double>(h % 7) - 3.0;
}

}  // namespace

double camera_displacement(const CameraPose& a, const CameraPose& b) {
    return std::hypot(b.dx - a.dx, b.dy - a.dy);
}

bool SceneObject::contains(double wx, double wy) const {
    if (shape == ObjectShape::Polygon) {
        bool inside = false;
        const std::size_t n = polygon.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const auto [xi, yi] = polygon[i];
            const auto [xj, yj] = polygon[j];
            if ((yi > wy) != (yj > wy) && wx < (xj - xi) * (wy - yi) / (yj - yi) + xi) inside = !inside;
        }
        return inside;
    }
    const double c = std::cos(angle_deg * kDeg), s = std::sin(angle_deg * kDeg);
    const double dx = wx - cx, dy = wy - cy;
    const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
    if (shape == ObjectShape::Rect) return std::abs(lx) <= rx && std::abs(ly) <= ry;
    return (lx / rx) * (lx / rx) + (ly / ry) * (ly / ry) <= 1.0;
}

void SceneConfig::validate() const {
    if (width == 0 || height == 0 || width % 14 != 0 || height % 14 != 0) {
        throw ValidationError("image size " + std::to_string(width) + "x" + std::to_string(height) +
                              " is not a positive multiple of 14");
    }
    if (views < 1) throw ValidationError("a sequence needs at least one frame");
    if (!(change_rate >= 0.0 && change_rate <= 1.0)) throw ValidationError("change rate must lie in [0, 1]");
    if (!(max_camera_step >= 0.0) || !(max_rotation_step >= 0.0)) {
        throw ValidationError("camera steps must be non-negative");
    }
    if (!(min_object_radius > 0.0) || !(max_object_radius >= min_object_radius)) {
        throw ValidationError("invalid object radius range");
    }
}

SceneSequence gen_scene(std::uint64_t seed, const SceneConfig& config) {
    config.validate();
    Uniform u(derive_seed(seed, 0x5ce7e));
    SceneSequence seq;
    seq.config = config;
    seq.seed = seed;
    const double W = static_cast<double>(config.width), H = static_cast<double>(config.height);

    // Camera: consistent drift with bounded jitter, so displacement grows with view distance.
    const double phi = u(0.0, 2.0 * std::numbers::pi);
    const double ux = std::cos(phi), uy = std::sin(phi);
    CameraPose pose;
    seq.poses.push_back(pose);
    for (std::size_t v = 1; v < config.views; ++v) {
        const double step = config.max_camera_step * u(0.6, 1.0);
        const double side = config.max_camera_step * u(-0.1, 0.1);
        pose.dx += step * ux - side * uy;
        pose.dy += step * uy + side * ux;
        pose.theta_deg += u(-config.max_rotation_step, config.max_rotation_step);
        seq.poses.push_back(pose);
    }
    double mx = 0.0, my = 0.0;
    for (const auto& p : seq.poses) {
        mx += p.dx;
        my += p.dy;
    }
    mx /= static_cast<double>(config.views);
    my /= static_cast<double>(config.views);

    // Background
    for (double& b : seq.base) b = u(60.0, 190.0);
    for (int i = 0; i < 4; ++i) {
        const double f = u(0.02, 0.12), a = u(0.0, 2.0 * std::numbers::pi);
        seq.waves.push_back({f * std::cos(a), f * std::sin(a), u(0.0, 2.0 * std::numbers::pi), u(-25.0, 25.0),
                             u(-25.0, 25.0), u(-25.0, 25.0)});
    }
    for (auto& gain : seq.epoch_gain)
        for (double& g : gain) g = 1.0 + u(-0.06, 0.06);

    // Objects; changed ones are drawn last.
    std::vector<bool> changed(config.objects);
    bool any = false;
    for (std::size_t i = 0; i < config.objects; ++i) {
        changed[i] = u(0.0, 1.0) < config.change_rate;
        any = any || changed[i];
    }
    if (config.change_rate > 0.0 && !any && config.objects > 0) changed.back() = true;
    std::stable_partition(changed.begin(), changed.end(), [](bool c) { return !c; });

    const std::size_t V = config.views;
    for (std::size_t i = 0; i < config.objects; ++i) {
        SceneObject o;
        o.id = static_cast<std::uint32_t>(i);
        const double r = u(config.min_object_radius, config.max_object_radius);
        o.cx = W / 2 + mx + u(-0.3, 0.3) * W;
        o.cy = H / 2 + my + u(-0.3, 0.3) * H;
        if (config.grid_snap) {
            o.shape = ObjectShape::Rect;
            const double cells_x = std::max(1.0, std::round(2.0 * r / 14.0));
            const double cells_y = std::max(1.0, std::round(2.0 * r * u(0.5, 1.0) / 14.0));
            const double x0 = std::round((o.cx - cells_x * 7.0) / 14.0) * 14.0;
            const double y0 = std::round((o.cy - cells_y * 7.0) / 14.0) * 14.0;
            o.rx = cells_x * 7.0;
            o.ry = cells_y * 7.0;
            o.cx = x0 + o.rx;
            o.cy = y0 + o.ry;
        } else {
            o.shape = static_cast<ObjectShape>(u.index(3));
            o.rx = r;
            o.ry = r * u(0.5, 1.0);
            o.angle_deg = u(0.0, 180.0);
            if (o.shape == ObjectShape::Polygon) {
                const std::size_t n = 3 + u.index(4);
                for (std::size_t k = 0; k < n; ++k) {
                    const double a = 2.0 * std::numbers::pi * (static_cast<double>(k) + u(-0.3, 0.3)) /
                                     static_cast<double>(n);
                    const double rr = r * u(0.7, 1.0);
                    o.polygon.emplace_back(o.cx + rr * std::cos(a), o.cy + rr * std::sin(a));
                }
            }
        }
        std::array<double, 3> col{u(180.0, 255.0), u(0.0, 70.0), u(60.0, 200.0)};
        const std::size_t rot = u.index(3);
        for (std::size_t ch = 0; ch < 3; ++ch) o.color[ch] = clamp_byte(col[(ch + rot) % 3]);
        if (u(0.0, 1.0) < 0.5) std::swap(o.color[0], o.color[2]);
        if (changed[i]) {
            if (u(0.0, 1.0) < 0.5) {
                o.first = 0;
                o.last = V;
            } else {
                o.first = V;
                o.last = 2 * V;
            }
        } else {
            o.first = 0;
            o.last = 2 * V;
        }
        seq.objects.push_back(std::move(o));
    }
    return seq;
}

Image render_frame(const SceneSequence& seq, std::size_t frame) {
    if (frame >= seq.frame_count()) throw ValidationError("frame index " + std::to_string(frame) + " out of range");
    const auto& cfg = seq.config;
    Image img(cfg.width, cfg.height);
    const CameraPose& pose = seq.pose(frame);
    const auto& gain = seq.epoch_gain[seq.epoch_of(frame)];
    const double cx = cfg.width / 2.0, cy = cfg.height / 2.0;
    std::vector<const SceneObject*> live;
    for (const auto& o : seq.objects)
        if (o.present(frame)) live.push_back(&o);
    for (std::size_t y = 0; y < cfg.height; ++y) {
        for (std::size_t x = 0; x < cfg.width; ++x) {
            const Point w = frame_to_world(pose, cx, cy, x + 0.5, y + 0.5);
            std::array<double, 3> c = seq.base;
            for (const auto& wave : seq.waves) {
                const double s = std::sin(wave[0] * w.x + wave[1] * w.y + wave[2]);
                for (int ch = 0; ch < 3; ++ch) c[ch] += wave[3 + ch] * s;
            }
            for (const SceneObject* o : live) {
                if (o->contains(w.x, w.y))
                    for (int ch = 0; ch < 3; ++ch) c[ch] = o->color[ch];
            }
            std::uint8_t* px = img.pixel(x, y);
            for (int ch = 0; ch < 3; ++ch) px[ch] = clamp_byte(c[ch] * gain[ch] + pixel_noise(seq.seed, frame, x, y, ch));
        }
    }
    return img;
}

Mask object_footprint(const SceneSequence& seq, const SceneObject& object, std::size_t frame) {
    if (frame >= seq.frame_count()) throw ValidationError("frame index " + std::to_string(frame) + " out of range");
    const auto& cfg = seq.config;
    Mask m(cfg.width, cfg.height);
    const CameraPose& pose = seq.pose(frame);
    const double cx = cfg.width / 2.0, cy = cfg.height / 2.0;
    for (std::size_t y = 0; y < cfg.height; ++y)
        for (std::size_t x = 0; x < cfg.width; ++x) {
            const Point w = frame_to_world(pose, cx, cy, x + 0.5, y + 0.5);
            m.at(x, y) = object.contains(w.x, w.y) ? 1 : 0;
        }
    return m;
}

Mask change_mask(const SceneSequence& seq, std::size_t i, std::size_t j) {
    const std::size_t n = seq.frame_count();
    if (i >= n || j >= n) {
        throw ValidationError("change_mask: frame index out of range (" + std::to_string(i) + ", " +
                              std::to_string(j) + " of " + std::to_string(n) + ")");
    }
    Mask out(seq.config.width, seq.config.height);
    for (const auto& o : seq.objects) {
        if (o.present(i) == o.present(j)) continue;
        const Mask fp = object_footprint(seq, o, i);
        for (std::size_t p = 0; p < fp.bits.size(); ++p) out.bits[p] |= fp.bits[p];
    }
    return out;
}

// ---- pairs -----------------------------------------------------------------------

std::vector<std::array<std::size_t, 3>> diff_pair_views(std::size_t views, std::size_t k) {
    std::vector<std::array<std::size_t, 3>> out;
    if (k == 0) {
        for (std::size_t i = 0; i < views; ++i) out.push_back({i, i, 0});
        return out;
    }
    for (std::size_t i = 0; i + k < views; ++i) {
        out.push_back({i, i + k, 0});
        out.push_back({i + k, i, 1});
    }
    return out;
}

PairManifest make_diff_pairs(const PairManifest& aligned, std::size_t k) {
    if (k == 0) return aligned;
    std::vector<std::string> order;
    std::map<std::string, std::vector<const PairRecord*>> groups;
    for (const auto& r : aligned.records) {
        if (r.k != 0) throw ValidationError("Diff-k pairs need an aligned split; " + pair_id(r) + " has k != 0");
        auto [it, inserted] = groups.try_emplace(r.sequence);
        if (inserted) order.push_back(r.sequence);
        it->second.push_back(&r);
    }
    PairManifest out;
    out.split = "diff" + std::to_string(k);
    out.note = "k=" + std::to_string(k) + " neighbours of " + aligned.split;
    out.base_dir = aligned.base_dir;
    for (const auto& name : order) {
        auto& views = groups[name];
        std::stable_sort(views.begin(), views.end(),
                         [](const PairRecord* a, const PairRecord* b) { return a->frame < b->frame; });
        for (const auto& [a, b, dir] : diff_pair_views(views.size(), k)) {
            PairRecord r;
            r.t0 = views[a]->t0;
            r.t1 = views[b]->t1;
            r.gt = views[a]->gt;
            r.valid = views[a]->valid;
            r.sequence = name;
            r.frame = views[a]->frame;
            r.k = k;
            r.direction = static_cast<std::uint32_t>(dir);
            out.records.push_back(std::move(r));
        }
    }
    return out;
}

// ---- affine augmentation ---------------------------------------------------------

AffineParams compose(const AffineParams& first, const AffineParams& second) {
    const double c = std::cos(second.theta_deg * kDeg), s = std::sin(second.theta_deg * kDeg);
    return {first.theta_deg + second.theta_deg, c * first.tx - s * first.ty + second.tx,
            s * first.tx + c * first.ty + second.ty};
}

AffineResult affine_augment(const Image& image, const Mask& mask, const AffineParams& params,
                            const AffineBounds& bounds, const Mask* valid_in) {
    if (mask.width != image.width || mask.height != image.height) {
        throw ShapeError("mask " + std::to_string(mask.width) + "x" + std::to_string(mask.height) + " vs image " +
                         std::to_string(image.width) + "x" + std::to_string(image.height));
    }
    if (valid_in && !valid_in->same_size(mask)) throw ShapeError("validity mask does not match image");
    if (!std::isfinite(params.theta_deg) || !std::isfinite(params.tx) || !std::isfinite(params.ty) ||
        std::abs(params.theta_deg) > bounds.max_rotation_deg + 1e-9 ||
        std::abs(params.tx) > bounds.max_translation + 1e-9 || std::abs(params.ty) > bounds.max_translation + 1e-9) {
        throw ValidationError("affine parameters out of bounds (rotation " + std::to_string(params.theta_deg) +
                              ", translation " + std::to_string(params.tx) + ", " + std::to_string(params.ty) + ")");
    }
    const std::size_t W = image.width, H = image.height;
    AffineResult out{image, mask, valid_in ? *valid_in : Mask(W, H, 1)};
    if (params.identity()) return out;

    const double c = std::cos(params.theta_deg * kDeg), s = std::sin(params.theta_deg * kDeg);
    const double cx = W / 2.0, cy = H / 2.0;
    for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
            const double rx = x + 0.5 - params.tx - cx, ry = y + 0.5 - params.ty - cy;
            const double px = c * rx + s * ry + cx, py = -s * rx + c * ry + cy;
            std::uint8_t* dst = out.image.pixel(x, y);
            const std::size_t o = y * W + x;
            if (!(px >= 0.0 && px < static_cast<double>(W) && py >= 0.0 && py < static_cast<double>(H))) {
                dst[0] = dst[1] = dst[2] = 0;
                out.mask.bits[o] = 0;
                out.valid.bits[o] = 0;
                continue;
            }
            const std::size_t nx = static_cast<std::size_t>(px), ny = static_cast<std::size_t>(py);
            out.mask.bits[o] = mask.bits[ny * W + nx];
            out.valid.bits[o] = valid_in ? valid_in->bits[ny * W + nx] : 1;

            const double sx = px - 0.5, sy = py - 0.5;
            const double fx0 = std::floor(sx), fy0 = std::floor(sy);
            const double fx = sx - fx0, fy = sy - fy0;
            auto clampi = [](double v, std::size_t n) {
                return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n - 1)));
            };
            const std::size_t x0 = clampi(fx0, W), x1 = clampi(fx0 + 1, W);
            const std::size_t y0 = clampi(fy0, H), y1 = clampi(fy0 + 1, H);
            for (int ch = 0; ch < 3; ++ch) {
                const double top = (1 - fx) * image.pixel(x0, y0)[ch] + fx * image.pixel(x1, y0)[ch];
                const double bot = (1 - fx) * image.pixel(x0, y1)[ch] + fx * image.pixel(x1, y1)[ch];
                dst[ch] = clamp_byte((1 - fy) * top + fy * bot);
            }
        }
    }
    return out;
}

AffineParams random_affine(std::uint64_t seed, const AffineBounds& bounds) {
    Uniform u(derive_seed(seed, 0xaff1e));
    AffineParams p;
    p.theta_deg = u(-bounds.max_rotation_deg, bounds.max_rotation_deg);
    p.tx = u(-bounds.max_translation, bounds.max_translation);
    p.ty = u(-bounds.max_translation, bounds.max_translation);
    return p;
}

// ---- datasets --------------------------------------------------------------------

std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t scene) {
    return derive_seed(dataset_seed, 0x5ce4e, scene);
}

namespace {

std::string scene_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%03zu", i);
    return buf;
}

}  // namespace

DatasetSummary materialize_dataset(const DatasetConfig& config, const std::filesystem::path& dir) {
    config.scene.validate();
    if (config.scenes < 1) throw ValidationError("dataset needs at least one scene");
    const std::size_t V = config.scene.views;
    std::filesystem::create_directories(dir);

    std::exception_ptr failure;
    const auto n = static_cast<std::ptrdiff_t>(config.scenes);
#pragma omp parallel for schedule(dynamic) num_threads(kernels::threads()) if (kernels::threads() > 1)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
        try {
            const auto idx = static_cast<std::size_t>(s);
            const SceneSequence seq = gen_scene(scene_seed(config.seed, idx), config.scene);
            const auto sdir = dir / scene_name(idx);
            std::filesystem::create_directories(sdir);
            for (std::size_t v = 0; v < V; ++v) {
                write_ppm(render_frame(seq, v), sdir / ("t0_" + std::to_string(v) + ".ppm"));
                write_ppm(render_frame(seq, V + v), sdir / ("t1_" + std::to_string(v) + ".ppm"));
                write_pgm_mask(change_mask(seq, v, V + v), sdir / ("gt_" + std::to_string(v) + ".pgm"));
            }
        } catch (...) {
#pragma omp critical(scd_datagen_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    PairManifest aligned;
    aligned.split = "aligned";
    aligned.note = "synthetic seed=" + std::to_string(config.seed) + " scenes=" + std::to_string(config.scenes) +
                   " views=" + std::to_string(V);
    aligned.base_dir = dir;
    for (std::size_t s = 0; s < config.scenes; ++s) {
        const std::string name = scene_name(s);
        for (std::size_t v = 0; v < V; ++v) {
            const std::string vs = std::to_string(v);
            aligned.records.push_back(
                {name + "/t0_" + vs + ".ppm", name + "/t1_" + vs + ".ppm", name + "/gt_" + vs + ".pgm", "", name, v, 0, 0});
        }
    }
    DatasetSummary summary;
    summary.images = 2 * V * config.scenes;
    summary.manifests.push_back(dir / "aligned.manifest");
    write_manifest(aligned, summary.manifests.back());
    for (std::size_t k : config.diff_ks) {
        if (k == 0) continue;
        summary.manifests.push_back(dir / ("diff" + std::to_string(k) + ".manifest"));
        write_manifest(make_diff_pairs(aligned, k), summary.manifests.back());
    }
    return summary;
}

PairManifest augment_dataset(const PairManifest& manifest, const AugmentConfig& config,
                             const std::filesystem::path& dir) {
    if (manifest.records.empty()) throw ValidationError("manifest '" + manifest.split + "' has no records");
    std::filesystem::create_directories(dir);
    PairManifest out;
    out.split = manifest.split + "_aug";
    out.note = "affine copies=" + std::to_string(config.copies) + " seed=" + std::to_string(config.seed) + " of " +
               manifest.split;
    out.base_dir = dir;

    std::vector<std::vector<PairRecord>> per_record(manifest.records.size());
    std::exception_ptr failure;
    const auto n = static_cast<std::ptrdiff_t>(manifest.records.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::threads()) if (kernels::threads() > 1)
    for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
        try {
            const auto i = static_cast<std::size_t>(ii);
            const PairRecord& r = manifest.records[i];
            const Image t0 = read_ppm(manifest.resolve(r.t0));
            const Mask gt = read_pgm_mask(manifest.resolve(r.gt));
            std::optional<Mask> valid;
            if (!r.valid.empty()) valid = read_pgm_mask(manifest.resolve(r.valid));
            const std::string stem = "a" + std::to_string(i);
            write_ppm(read_ppm(manifest.resolve(r.t1)), dir / (stem + "_t1.ppm"));
            auto& recs = per_record[i];
            auto emit = [&](const std::string& tag, const AffineResult& res, bool with_valid) {
                PairRecord a = r;
                a.t0 = stem + tag + "_t0.ppm";
                a.t1 = stem + "_t1.ppm";
                a.gt = stem + tag + "_gt.pgm";
                a.valid = with_valid ? stem + tag + "_valid.pgm" : "";
                write_ppm(res.image, dir / a.t0);
                write_pgm_mask(res.mask, dir / a.gt);
                if (with_valid) write_pgm_mask(res.valid, dir / a.valid);
                recs.push_back(std::move(a));
            };
            if (config.keep_original) {
                emit("", AffineResult{t0, gt, valid ? *valid : Mask()}, valid.has_value());
            }
            for (std::size_t c = 0; c < config.copies; ++c) {
                AffineParams p = random_affine(derive_seed(config.seed, i, c), config.bounds);
                if (config.rotation_only) p.tx = p.ty = 0.0;
                emit("_" + std::to_string(c), affine_augment(t0, gt, p, config.bounds, valid ? &*valid : nullptr),
                     true);
            }
        } catch (...) {
#pragma omp critical(scd_augment_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    for (auto& recs : per_record)
        for (auto& r : recs) out.records.push_back(std::move(r));
    write_manifest(out, dir / "augmented.manifest");
    return out;
}

}  // namespace scd
