#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "scd/backbone.hpp"
#include "scd/error.hpp"
#include "scd/manifest.hpp"

using namespace scd;
namespace fs = std::filesystem;

namespace {

Image random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Image img(w, h);
    for (auto& b : img.rgb) b = static_cast<std::uint8_t>(rng() & 0xff);
    return img;
}

FeatureMap random_features(std::size_t h, std::size_t w, std::size_t f, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n;
    FeatureMap fm(h, w, f);
    for (double& v : fm.data) v = n(rng);  // float32-representable
    return fm;
}

FormatFault fault_of(std::span<const char> bytes) {
    try {
        decode_scdf(bytes);
    } catch (const FormatError& e) {
        return e.fault();
    }
    ADD_FAILURE() << "decode accepted a corrupt buffer";
    return FormatFault::BadHeader;
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("scd_test_backbone_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Scdf, ByteLayoutOfTinyMap) {
    FeatureMap fm(1, 1, 2);
    fm.data = {1.0, -2.5};
    const std::vector<char> bytes = encode_scdf(fm);
    const std::vector<unsigned char> expected = {
        'S', 'C', 'D', 'F', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0,
        0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x20, 0xc0};
    ASSERT_EQ(bytes.size(), expected.size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        EXPECT_EQ(static_cast<unsigned char>(bytes[i]), expected[i]) << "byte " << i;
}

TEST(Scdf, RoundTripIsExact) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const FeatureMap fm = random_features(3 + seed, 2 + seed, 7, seed);
        EXPECT_EQ(decode_scdf(encode_scdf(fm)), fm);
    }
    const fs::path dir = temp_dir("roundtrip");
    const FeatureMap fm = random_features(4, 5, 6, 9);
    write_features(fm, dir / "x.scdf");
    EXPECT_EQ(read_features(dir / "x.scdf"), fm);
}

TEST(Scdf, DistinctFaults) {
    const std::vector<char> good = encode_scdf(random_features(2, 2, 3, 1));
    std::vector<char> magic = good;
    magic[0] = 'X';
    EXPECT_EQ(fault_of(magic), FormatFault::BadMagic);
    std::vector<char> version = good;
    version[4] = 2;
    EXPECT_EQ(fault_of(version), FormatFault::BadVersion);
    EXPECT_EQ(fault_of(std::span<const char>(good).first(good.size() - 1)), FormatFault::Truncated);
    std::vector<char> nan = good;
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan.data() + 24 + 4, &q, 4);
    EXPECT_EQ(fault_of(nan), FormatFault::NonFinite);
    std::vector<char> dtype = good;
    dtype[20] = 1;
    EXPECT_EQ(fault_of(dtype), FormatFault::BadHeader);
    std::vector<char> zero = good;
    zero[8] = 0;
    EXPECT_EQ(fault_of(zero), FormatFault::BadHeader);
}

TEST(Scdf, TruncatedFileNamesPath) {
    const fs::path dir = temp_dir("trunc");
    const std::vector<char> good = encode_scdf(random_features(2, 2, 3, 1));
    {
        std::ofstream out(dir / "bad.scdf", std::ios::binary);
        out.write(good.data(), static_cast<std::streamsize>(good.size() - 3));
    }
    try {
        read_features(dir / "bad.scdf");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_EQ(e.fault(), FormatFault::Truncated);
        EXPECT_NE(std::string(e.what()).find("bad.scdf"), std::string::npos);
    }
}

TEST(ToyBackbone, RejectsHeightNotMultipleOf14) {
    const ToyBackbone bb(1, 8);
    try {
        bb.project(Image(504, 500));
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("height not multiple of 14"), std::string::npos);
    }
    EXPECT_THROW(bb.project(Image(500, 504)), ValidationError);
}

TEST(ToyBackbone, TokenGridShapes) {
    const ToyBackbone bb(3);
    const FeatureMap big = bb.project(random_image(504, 504, 1));
    EXPECT_EQ(big.h, 36u);
    EXPECT_EQ(big.w, 36u);
    EXPECT_EQ(big.f, 384u);
    const FeatureMap small = bb.project(random_image(224, 224, 2));
    EXPECT_EQ(small.h, 16u);
    EXPECT_EQ(small.w, 16u);
}

TEST(ToyBackbone, DeterministicAndPatchLocal) {
    const Image img = random_image(56, 28, 4);
    const ToyBackbone a(7, 16), b(7, 16), c(8, 16);
    EXPECT_EQ(a.projection_hash(), b.projection_hash());
    EXPECT_NE(a.projection_hash(), c.projection_hash());
    EXPECT_EQ(a.project(img), b.project(img));
    // Changing one patch only moves that patch's token.
    Image edited = img;
    edited.pixel(20, 3)[0] ^= 0x55;
    const FeatureMap f0 = a.project(img), f1 = a.project(edited);
    for (std::size_t t = 0; t < f0.tokens(); ++t) {
        const bool same = std::equal(f0.token(t).begin(), f0.token(t).end(), f1.token(t).begin());
        EXPECT_EQ(same, t != 1) << "token " << t;
    }
}

TEST(ToyBackbone, EncodeStandardisesFittedImages) {
    std::vector<Image> imgs;
    for (int i = 0; i < 4; ++i) imgs.push_back(random_image(56, 56, 10 + i));
    ToyBackbone bb(5, 12);
    bb.fit(imgs);
    std::vector<double> mean(12, 0.0), sq(12, 0.0);
    std::size_t n = 0;
    for (const Image& img : imgs) {
        const FeatureMap fm = bb.encode(img);
        for (std::size_t t = 0; t < fm.tokens(); ++t, ++n)
            for (std::size_t c = 0; c < 12; ++c) {
                mean[c] += fm.token(t)[c];
                sq[c] += fm.token(t)[c] * fm.token(t)[c];
            }
    }
    for (std::size_t c = 0; c < 12; ++c) {
        EXPECT_NEAR(mean[c] / n, 0.0, 1e-5);
        EXPECT_NEAR(sq[c] / n, 1.0, 1e-4);
    }
    // Values are float32-representable so SCDF round-trips encode() bit-exactly.
    const FeatureMap fm = bb.encode(imgs[0]);
    EXPECT_EQ(decode_scdf(encode_scdf(fm)), fm);
    EXPECT_THROW(bb.fit(imgs), ValidationError);
}

TEST(Scdb, RoundTripReproducesEncode) {
    std::vector<Image> imgs = {random_image(28, 28, 1), random_image(28, 28, 2)};
    ToyBackbone bb(9, 10);
    bb.fit(imgs);
    const fs::path dir = temp_dir("scdb");
    write_backbone(bb, dir / "backbone.scdb");
    const ToyBackbone back = read_backbone(dir / "backbone.scdb");
    EXPECT_EQ(back.seed(), 9u);
    EXPECT_EQ(back.dim(), 10u);
    EXPECT_EQ(back.projection_hash(), bb.projection_hash());
    EXPECT_EQ(back.encode(imgs[1]), bb.encode(imgs[1]));
}

namespace {

class FixedSource final : public FeatureSource {
  public:
    FeatureMap load(const fs::path&, const std::string& image) const override {
        return image == "a.ppm" ? FeatureMap(16, 16, 8) : FeatureMap(36, 36, 8);
    }
};

}  // namespace

TEST(PairFeatures, GeometryMismatchNamesPair) {
    PairRecord r;
    r.t0 = "a.ppm";
    r.t1 = "b.ppm";
    r.gt = "g.pgm";
    r.sequence = "s000";
    try {
        load_pair_features(".", r, FixedSource{});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("mismatch"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find(pair_id(r)), std::string::npos);
    }
}

TEST(PairFeatures, CachedSourceMatchesInner) {
    const ToyBackbone bb(2, 6);
    const fs::path dir = temp_dir("cache");
    write_ppm(random_image(28, 14, 3), dir / "x.ppm");
    const ToyFeatureSource toy(bb);
    const CachedFeatureSource cached(toy);
    EXPECT_EQ(cached.load(dir, "x.ppm"), toy.load(dir, "x.ppm"));
    EXPECT_EQ(cached.load(dir, "x.ppm"), toy.load(dir, "x.ppm"));
}
