#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "scd/datagen.hpp"
#include "scd/error.hpp"
#include "scd/manifest.hpp"

using namespace scd;
namespace fs = std::filesystem;

namespace {

SceneConfig small_scene() {
    SceneConfig c;
    c.width = 112;
    c.height = 84;
    c.views = 4;
    c.objects = 5;
    c.min_object_radius = 8;
    c.max_object_radius = 18;
    return c;
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("scd_test_datagen_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Frame pixel -> world -> pixel index in another frame (inverse camera), or false if outside.
bool map_pixel(const SceneSequence& seq, std::size_t from, std::size_t to, std::size_t x, std::size_t y,
               std::size_t& ox, std::size_t& oy) {
    const double cx = seq.config.width / 2.0, cy = seq.config.height / 2.0;
    const auto& a = seq.pose(from);
    const auto& b = seq.pose(to);
    const double ta = a.theta_deg * std::numbers::pi / 180.0, tb = b.theta_deg * std::numbers::pi / 180.0;
    const double px = x + 0.5 - cx, py = y + 0.5 - cy;
    const double wx = std::cos(ta) * px - std::sin(ta) * py + cx + a.dx;
    const double wy = std::sin(ta) * px + std::cos(ta) * py + cy + a.dy;
    const double qx = wx - cx - b.dx, qy = wy - cy - b.dy;
    const double fx = std::cos(tb) * qx + std::sin(tb) * qy + cx;
    const double fy = -std::sin(tb) * qx + std::cos(tb) * qy + cy;
    if (fx < 0 || fy < 0 || fx >= seq.config.width || fy >= seq.config.height) return false;
    ox = static_cast<std::size_t>(fx);
    oy = static_cast<std::size_t>(fy);
    return true;
}

// Perimeter of the footprint's bounding box: an upper bound on the boundary band of a
// convex-ish shape.
std::size_t bbox_perimeter(const Mask& m) {
    std::size_t x0 = m.width, y0 = m.height, x1 = 0, y1 = 0;
    for (std::size_t y = 0; y < m.height; ++y)
        for (std::size_t x = 0; x < m.width; ++x)
            if (m.at(x, y)) {
                x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
            }
    return x0 > x1 ? 0 : 2 * ((x1 - x0 + 1) + (y1 - y0 + 1));
}

PairRecord aligned_record(const std::string& seq, std::size_t v) {
    PairRecord r;
    r.sequence = seq;
    r.frame = v;
    r.t0 = seq + "/t0_" + std::to_string(v) + ".ppm";
    r.t1 = seq + "/t1_" + std::to_string(v) + ".ppm";
    r.gt = seq + "/gt_" + std::to_string(v) + ".pgm";
    return r;
}

Image pattern_image(std::size_t w, std::size_t h) {
    Image img(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            auto* p = img.pixel(x, y);
            p[0] = static_cast<std::uint8_t>(x * 3 + y);
            p[1] = static_cast<std::uint8_t>(y * 5);
            p[2] = static_cast<std::uint8_t>(x ^ y);
        }
    return img;
}

Mask disk_mask(std::size_t w, std::size_t h, double cx, double cy, double r) {
    Mask m(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) m.at(x, y) = std::hypot(x + 0.5 - cx, y + 0.5 - cy) < r;
    return m;
}

}  // namespace

TEST(GenScene, SameSeedGivesIdenticalFrames) {
    const SceneSequence a = gen_scene(7, small_scene()), b = gen_scene(7, small_scene());
    for (std::size_t f = 0; f < a.frame_count(); ++f) EXPECT_EQ(render_frame(a, f), render_frame(b, f));
    EXPECT_NE(render_frame(gen_scene(8, small_scene()), 0), render_frame(a, 0));
}

TEST(GenScene, InvalidConfigurations) {
    SceneConfig c = small_scene();
    c.width = 100;
    EXPECT_THROW(gen_scene(1, c), ValidationError);
    c = small_scene();
    c.views = 0;
    EXPECT_THROW(gen_scene(1, c), ValidationError);
    c = small_scene();
    c.change_rate = 1.5;
    EXPECT_THROW(gen_scene(1, c), ValidationError);
}

TEST(ChangeMask, ZeroChangeRateGivesEmptyMasks) {
    SceneConfig c = small_scene();
    c.change_rate = 0.0;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const SceneSequence s = gen_scene(seed, c);
        for (std::size_t i = 0; i < s.frame_count(); ++i)
            for (std::size_t j = 0; j < s.frame_count(); ++j) EXPECT_EQ(change_mask(s, i, j).count(), 0u);
    }
}

TEST(ChangeMask, SameFrameIsEmptyAndIndicesChecked) {
    const SceneSequence s = gen_scene(3, small_scene());
    for (std::size_t i = 0; i < s.frame_count(); ++i) EXPECT_EQ(change_mask(s, i, i).count(), 0u);
    EXPECT_THROW(change_mask(s, 0, s.frame_count()), ValidationError);
}

TEST(ChangeMask, AddedObjectFootprint) {
    SceneSequence s = gen_scene(5, small_scene());
    for (auto& o : s.objects) {
        o.first = 0;
        o.last = s.frame_count();
    }
    s.objects[2].first = 3;
    const Mask m = change_mask(s, 2, 3);
    EXPECT_EQ(m, object_footprint(s, s.objects[2], 2));
    EXPECT_GT(m.count(), 0u);
    EXPECT_EQ(change_mask(s, 3, 4).count(), 0u);
}

TEST(ChangeMask, LedgerUnionOracle) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const SceneSequence s = gen_scene(seed, small_scene());
        const std::size_t V = s.poses.size();
        for (auto [i, j] : {std::pair<std::size_t, std::size_t>{0, V}, {1, V + 3}, {V + 2, 0}}) {
            Mask expected(s.config.width, s.config.height);
            for (const auto& o : s.objects) {
                if (o.present(i) == o.present(j)) continue;
                const Mask fp = object_footprint(s, o, i);
                for (std::size_t p = 0; p < fp.bits.size(); ++p) expected.bits[p] |= fp.bits[p];
            }
            EXPECT_EQ(change_mask(s, i, j), expected);
        }
    }
}

TEST(ChangeMask, ReverseDirectionMapsThroughCamera) {
    SceneConfig c = small_scene();
    c.change_rate = 0.8;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const SceneSequence s = gen_scene(seed, c);
        const std::size_t V = s.poses.size();
        const std::size_t i = 0, j = V + 2;
        const Mask mij = change_mask(s, i, j), mji = change_mask(s, j, i);
        std::size_t mismatches = 0, compared = 0;
        for (std::size_t y = 0; y < mij.height; ++y)
            for (std::size_t x = 0; x < mij.width; ++x) {
                std::size_t ox, oy;
                if (!map_pixel(s, i, j, x, y, ox, oy)) continue;
                ++compared;
                mismatches += mij.at(x, y) != mji.at(ox, oy);
            }
        std::size_t bound = 0;
        for (const auto& o : s.objects)
            if (o.present(i) != o.present(j)) bound += bbox_perimeter(object_footprint(s, o, i));
        EXPECT_GT(compared, mij.bits.size() / 2);
        EXPECT_LE(mismatches, bound) << "seed " << seed;
    }
}

TEST(ChangeMask, AreaOfDisappearingSquare) {
    SceneSequence s = gen_scene(1, small_scene());
    for (auto& p : s.poses) p = CameraPose{};
    SceneObject sq;
    sq.shape = ObjectShape::Rect;
    sq.cx = 40.3;
    sq.cy = 30.7;
    sq.rx = sq.ry = 5.0;
    sq.first = 0;
    sq.last = 1;
    s.objects = {sq};
    const std::size_t n = change_mask(s, 0, 1).count();
    EXPECT_LE(n > 100 ? n - 100 : 100 - n, 40u);
}

TEST(DiffPairs, FiveFrameSequence) {
    PairManifest aligned;
    aligned.split = "aligned";
    for (std::size_t v = 0; v < 5; ++v) aligned.records.push_back(aligned_record("s000", v));
    const PairManifest d1 = make_diff_pairs(aligned, 1);
    ASSERT_EQ(d1.records.size(), 8u);
    for (std::size_t n = 0; n < 8; ++n) {
        const auto& r = d1.records[n];
        const std::size_t i = n / 2;
        const std::size_t a = n % 2 == 0 ? i : i + 1, b = n % 2 == 0 ? i + 1 : i;
        EXPECT_EQ(r.t0, aligned.records[a].t0);
        EXPECT_EQ(r.gt, aligned.records[a].gt);
        EXPECT_EQ(r.t1, aligned.records[b].t1);
        EXPECT_EQ(r.k, 1u);
        EXPECT_EQ(r.direction, n % 2);
    }
    EXPECT_EQ(make_diff_pairs(aligned, 4).records.size(), 2u);
    EXPECT_TRUE(make_diff_pairs(aligned, 5).records.empty());
}

TEST(DiffPairs, ZeroIsIdentity) {
    PairManifest aligned;
    aligned.split = "aligned";
    for (std::size_t s = 0; s < 43; ++s)
        for (std::size_t v = 0; v < 10 && aligned.records.size() < 429; ++v)
            aligned.records.push_back(aligned_record("s" + std::to_string(s), v));
    ASSERT_EQ(aligned.records.size(), 429u);
    const PairManifest same = make_diff_pairs(aligned, 0);
    EXPECT_EQ(same.records.size(), 429u);
    EXPECT_EQ(same, aligned);
}

TEST(DiffPairs, EnumerationCounts) {
    for (std::size_t views = 1; views <= 7; ++views)
        for (std::size_t k = 1; k <= 3; ++k) {
            const auto p = diff_pair_views(views, k);
            EXPECT_EQ(p.size(), views > k ? 2 * (views - k) : 0u);
        }
}

TEST(Camera, DisplacementGrowsWithViewDistance) {
    SceneConfig c = small_scene();
    c.views = 6;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const SceneSequence s = gen_scene(seed, c);
        double mean[4] = {0, 0, 0, 0};
        for (std::size_t k = 1; k <= 3; ++k) {
            for (std::size_t v = 0; v + k < 6; ++v) mean[k] += camera_displacement(s.poses[v], s.poses[v + k]);
            mean[k] /= static_cast<double>(6 - k);
        }
        EXPECT_LT(mean[1], mean[2]);
        EXPECT_LT(mean[2], mean[3]);
        for (std::size_t v = 1; v + 1 < 6; ++v)
            EXPECT_LT(camera_displacement(s.poses[0], s.poses[v]), camera_displacement(s.poses[0], s.poses[v + 1]));
    }
}

TEST(Affine, IdentityIsExact) {
    const Image img = pattern_image(56, 42);
    const Mask m = disk_mask(56, 42, 20, 20, 9);
    const AffineResult r = affine_augment(img, m, AffineParams{});
    EXPECT_EQ(r.image, img);
    EXPECT_EQ(r.mask, m);
    EXPECT_EQ(r.valid.count(), 56u * 42u);
}

TEST(Affine, PureShift) {
    const Image img = pattern_image(112, 56);
    const Mask m = disk_mask(112, 56, 30, 28, 12);
    const AffineResult r = affine_augment(img, m, AffineParams{0.0, 50.0, 0.0});
    for (std::size_t y = 0; y < 56; ++y)
        for (std::size_t x = 0; x < 112; ++x) {
            if (x < 50) {
                EXPECT_EQ(r.valid.at(x, y), 0);
                EXPECT_EQ(r.image.pixel(x, y)[0] | r.image.pixel(x, y)[1] | r.image.pixel(x, y)[2], 0);
            } else {
                EXPECT_EQ(r.valid.at(x, y), 1);
                EXPECT_TRUE(std::equal(r.image.pixel(x, y), r.image.pixel(x, y) + 3, img.pixel(x - 50, y)));
                EXPECT_EQ(r.mask.at(x, y), m.at(x - 50, y));
            }
        }
}

TEST(Affine, RotationRoundTripIoU) {
    const Image img = pattern_image(112, 112);
    for (double theta : {5.0, 10.0, 15.0}) {
        const Mask m = disk_mask(112, 112, 50, 60, 25);
        const AffineResult a = affine_augment(img, m, AffineParams{theta, 0, 0});
        const AffineResult b = affine_augment(a.image, a.mask, AffineParams{-theta, 0, 0}, kTrainingBounds, &a.valid);
        std::size_t inter = 0, uni = 0;
        for (std::size_t p = 0; p < m.bits.size(); ++p) {
            inter += m.bits[p] && b.mask.bits[p];
            uni += m.bits[p] || b.mask.bits[p];
        }
        EXPECT_GE(static_cast<double>(inter) / uni, 0.98) << theta;
    }
}

TEST(Affine, CompositionWithinOnePixel) {
    const Image img = pattern_image(112, 112);
    const Mask m = disk_mask(112, 112, 56, 50, 22);
    const AffineParams p1{7.0, 10.0, -4.0}, p2{-3.0, 5.0, 12.0};
    const AffineResult a = affine_augment(img, m, p1);
    const AffineResult two = affine_augment(a.image, a.mask, p2, kTrainingBounds, &a.valid);
    const AffineResult one = affine_augment(img, m, compose(p1, p2), kSweepBounds);
    auto near = [](const Mask& mk, std::size_t x, std::size_t y, std::uint8_t v) {
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                const long xx = long(x) + dx, yy = long(y) + dy;
                if (xx >= 0 && yy >= 0 && xx < long(mk.width) && yy < long(mk.height) && mk.at(xx, yy) == v)
                    return true;
            }
        return false;
    };
    std::size_t checked = 0;
    for (std::size_t y = 1; y + 1 < 112; ++y)
        for (std::size_t x = 1; x + 1 < 112; ++x) {
            if (!two.valid.at(x, y) || !one.valid.at(x, y)) continue;
            ++checked;
            EXPECT_TRUE(near(one.mask, x, y, two.mask.at(x, y))) << x << "," << y;
        }
    EXPECT_GT(checked, 5000u);
}

TEST(Affine, BoundsAreEnforced) {
    const Image img = pattern_image(28, 28);
    const Mask m(28, 28);
    EXPECT_THROW(affine_augment(img, m, AffineParams{16.0, 0, 0}), ValidationError);
    EXPECT_THROW(affine_augment(img, m, AffineParams{0, 51.0, 0}), ValidationError);
    EXPECT_NO_THROW(affine_augment(img, m, AffineParams{40.0, 200.0, 0}, kSweepBounds));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const AffineParams p = random_affine(seed, kTrainingBounds);
        EXPECT_LE(std::abs(p.theta_deg), 15.0);
        EXPECT_LE(std::abs(p.tx), 50.0);
        EXPECT_LE(std::abs(p.ty), 50.0);
    }
}

TEST(Manifest, RoundTripPreservesOrder) {
    const fs::path dir = temp_dir("manifest");
    PairManifest m;
    m.split = "diff1";
    m.note = "synthetic test split";
    for (std::size_t v : {3u, 0u, 2u, 1u}) {
        PairRecord r = aligned_record("s001", v);
        r.k = 1;
        r.direction = v % 2;
        if (v == 2) r.valid = "s001/valid_2.pgm";
        m.records.push_back(r);
    }
    write_manifest(m, dir / "x.manifest");
    const PairManifest back = read_manifest(dir / "x.manifest", false);
    EXPECT_EQ(back, m);
    EXPECT_EQ(back.base_dir, dir);
}

TEST(Manifest, MissingGroundTruthNamesRecord) {
    const fs::path dir = temp_dir("missing");
    PairManifest m;
    m.split = "aligned";
    m.records = {aligned_record("s000", 0), aligned_record("s000", 1)};
    fs::create_directories(dir / "s000");
    for (const auto& r : m.records)
        for (const auto& f : {r.t0, r.t1, r.gt}) std::ofstream(dir / f) << "x";
    fs::remove(dir / m.records[1].gt);
    write_manifest(m, dir / "a.manifest");
    try {
        read_manifest(dir / "a.manifest");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find(pair_id(m.records[1])), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("gt_1.pgm"), std::string::npos);
    }
}

TEST(Manifest, RejectsDuplicatesAndVersion) {
    const fs::path dir = temp_dir("dups");
    std::ofstream(dir / "d.manifest") << "scd-manifest 1\nsplit a\n"
                                         "pair a.ppm b.ppm g.pgm - s 0 0 0\npair a.ppm b.ppm g.pgm - s 1 0 0\n";
    EXPECT_THROW(read_manifest(dir / "d.manifest", false), ValidationError);
    std::ofstream(dir / "v.manifest") << "scd-manifest 2\nsplit a\n";
    EXPECT_THROW(read_manifest(dir / "v.manifest", false), ValidationError);
}

TEST(Dataset, MaterializeIsDeterministicAndConsistent) {
    DatasetConfig c;
    c.scene = small_scene();
    c.scenes = 3;
    c.seed = 9;
    const fs::path a = temp_dir("ds_a"), b = temp_dir("ds_b");
    const DatasetSummary sa = materialize_dataset(c, a);
    materialize_dataset(c, b);
    ASSERT_EQ(sa.manifests.size(), 3u);
    const PairManifest aligned = read_manifest(a / "aligned.manifest");
    EXPECT_EQ(aligned.records.size(), 3u * c.scene.views);
    EXPECT_EQ(read_manifest(a / "diff1.manifest").records.size(), 3u * 2 * (c.scene.views - 1));
    EXPECT_EQ(read_manifest(a / "diff2.manifest").records, make_diff_pairs(aligned, 2).records);
    for (const auto& r : aligned.records) {
        EXPECT_EQ(read_ppm(a / r.t0), read_ppm(b / r.t0));
        const SceneSequence s = gen_scene(scene_seed(9, std::stoul(r.sequence.substr(1))), c.scene);
        EXPECT_EQ(read_pgm_mask(a / r.gt), change_mask(s, r.frame, s.poses.size() + r.frame));
        EXPECT_EQ(read_ppm(a / r.t1), render_frame(s, s.poses.size() + r.frame));
    }
}

TEST(Dataset, AugmentWritesValidSplit) {
    DatasetConfig c;
    c.scene = small_scene();
    c.scenes = 1;
    const fs::path dir = temp_dir("aug");
    materialize_dataset(c, dir / "base");
    const PairManifest base = read_manifest(dir / "base" / "aligned.manifest");
    AugmentConfig ac;
    ac.copies = 2;
    ac.seed = 4;
    ac.rotation_only = true;
    const PairManifest aug = augment_dataset(base, ac, dir / "aug");
    EXPECT_EQ(aug.records.size(), base.records.size() * 3);
    const PairManifest reread = read_manifest(dir / "aug" / "augmented.manifest");
    EXPECT_EQ(reread, aug);
    std::size_t with_valid = 0;
    for (const auto& r : reread.records) with_valid += !r.valid.empty();
    EXPECT_GE(with_valid, base.records.size() * 2);
}
