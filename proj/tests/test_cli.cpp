#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string output;
};

Outcome scdlab(const std::string& args) {
    const std::string cmd = std::string(SCDLAB_EXE) + " " + args + " 2>&1";
    Outcome r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("scd_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), {});
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Every regular file below dir, relative path -> bytes.
std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "run.meta")
            out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    return out;
}

// Names of files that differ between two trees (run.meta excluded: it records paths and time).
std::vector<std::string> tree_diff(const fs::path& a, const fs::path& b) {
    const auto ta = tree(a), tb = tree(b);
    std::vector<std::string> out;
    for (const auto& [name, bytes] : ta)
        if (!tb.contains(name) || tb.at(name) != bytes) out.push_back(name);
    for (const auto& [name, bytes] : tb)
        if (!ta.contains(name)) out.push_back(name);
    return out;
}

const char* kSmallGen = " --scenes 2 --frames 3 --size 56x56 --min-radius 6 --max-radius 12";

// One small dataset with features, shared by the tests that need them.
class CliPipeline : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        dir_ = temp_dir("pipeline");
        ASSERT_EQ(scdlab("gen --out " + q(dir_ / "data") + kSmallGen + " --seed 5").code, 0);
        ASSERT_EQ(scdlab("features --manifest " + q(dir_ / "data/aligned.manifest") + " --out " + q(dir_ / "feat") +
                         " --dim 8 --seed 2")
                      .code,
                  0);
    }
    static fs::path dir_;
};
fs::path CliPipeline::dir_;

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(scdlab("--help").code, 0);
    EXPECT_EQ(scdlab("").code, 2);
    EXPECT_EQ(scdlab("frobnicate").code, 2);
    EXPECT_EQ(scdlab("gen --out /tmp/x --scenes 0").code, 2);
}

TEST(Cli, GenWritesManifestsDeterministically) {
    const fs::path dir = temp_dir("gen");
    const Outcome a = scdlab("gen --out " + q(dir / "a") + kSmallGen + " --seed 3");
    ASSERT_EQ(a.code, 0) << a.output;
    ASSERT_EQ(scdlab("gen --out " + q(dir / "b") + kSmallGen + " --seed 3").code, 0);
    for (const char* m : {"aligned.manifest", "diff1.manifest", "diff2.manifest"}) {
        ASSERT_TRUE(fs::exists(dir / "a" / m)) << m;
        EXPECT_NE(slurp(dir / "a" / m).find("pair "), std::string::npos) << m;
    }
    EXPECT_TRUE(tree_diff(dir / "a", dir / "b").empty());
    ASSERT_EQ(scdlab("gen --out " + q(dir / "c") + kSmallGen + " --seed 4").code, 0);
    EXPECT_FALSE(tree_diff(dir / "a", dir / "c").empty());
    EXPECT_EQ(scdlab("gen --out " + q(dir / "d") + " --size 100x100").code, 3);
}

TEST_F(CliPipeline, FeaturesRerunIsIdentical) {
    const fs::path again = temp_dir("feat_again");
    ASSERT_EQ(scdlab("features --manifest " + q(dir_ / "data/aligned.manifest") + " --out " + q(again) +
                     " --dim 8 --seed 2")
                  .code,
              0);
    EXPECT_TRUE(tree_diff(dir_ / "feat", again).empty());
    EXPECT_TRUE(fs::exists(again / "backbone.scdb"));
}

TEST_F(CliPipeline, ImportValidationNamesCorruptFile) {
    const fs::path copy = temp_dir("import");
    fs::copy(dir_ / "feat", copy, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    EXPECT_EQ(scdlab("features --manifest " + q(dir_ / "data/aligned.manifest") + " --import " + q(copy)).code, 0);
    fs::path victim;
    for (const auto& e : fs::recursive_directory_iterator(copy))
        if (e.path().extension() == ".scdf") {
            victim = e.path();
            break;
        }
    ASSERT_FALSE(victim.empty());
    const std::string bytes = slurp(victim);
    std::ofstream(victim, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    const Outcome r = scdlab("features --manifest " + q(dir_ / "data/aligned.manifest") + " --import " + q(copy));
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.output.find(victim.filename().string()), std::string::npos) << r.output;
}

TEST_F(CliPipeline, TrainEvalSweepAblate) {
    const fs::path out = temp_dir("train");
    EXPECT_NE(scdlab("train --manifest " + q(dir_ / "data/aligned.manifest") + " --features " + q(out / "nowhere") +
                     " --steps 2 --out " + q(out / "x.scdm"))
                  .code,
              0);
    const Outcome t = scdlab("train --manifest " + q(dir_ / "data/aligned.manifest") + " --features " + q(dir_ / "feat") +
                         " --steps 6 --batch 2 --lr 0.001 --comparator cross --out " + q(out / "m.scdm"));
    ASSERT_EQ(t.code, 0) << t.output;
    EXPECT_TRUE(fs::exists(out / "m.scdm"));
    const std::string meta = slurp(out / "m.run.meta");
    for (const char* key : {"lr", "batch", "w-change", "w-unchanged", "config_hash"})
        EXPECT_NE(meta.find(key), std::string::npos) << key;
    const std::string loss = slurp(out / "m.loss.csv");
    EXPECT_EQ(loss.rfind("step,lr,loss\n", 0), 0u);
    EXPECT_EQ(std::count(loss.begin(), loss.end(), '\n'), 7);

    const Outcome e = scdlab("eval --model " + q(out / "m.scdm") + " --manifest " + q(dir_ / "data/aligned.manifest") +
                         " --manifest " + q(dir_ / "data/diff1.manifest") + " --features " + q(dir_ / "feat") +
                         " --report " + q(out / "e.csv") + " --plot " + q(out / "e.svg"));
    ASSERT_EQ(e.code, 0) << e.output;
    EXPECT_NE(e.output.find("avg"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "e.svg"));
    const std::string first = slurp(out / "e.csv");
    ASSERT_EQ(scdlab("eval --model " + q(out / "m.scdm") + " --manifest " + q(dir_ / "data/aligned.manifest") +
                     " --manifest " + q(dir_ / "data/diff1.manifest") + " --features " + q(dir_ / "feat") +
                     " --report " + q(out / "e.csv"))
                  .code,
              0);
    EXPECT_EQ(slurp(out / "e.csv"), first);

    const Outcome s = scdlab("sweep --model " + q(out / "m.scdm") + " --manifest " + q(dir_ / "data/aligned.manifest") +
                         " --mode rotate --range 45 --stride 5 --report " + q(out / "s.csv"));
    ASSERT_EQ(s.code, 0) << s.output;
    const std::string sweep = slurp(out / "s.csv");
    EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 11);
    EXPECT_EQ(scdlab("sweep --model " + q(out / "m.scdm") + " --manifest " + q(dir_ / "data/aligned.manifest") +
                     " --mode translate --range 300 --stride 50 --report " + q(out / "bad.csv"))
                  .code,
              3);

    EXPECT_EQ(scdlab("ablate --train " + q(dir_ / "data/aligned.manifest") + " --features " + q(dir_ / "feat") +
                     " --eval " + q(dir_ / "data/aligned.manifest") + " --comparators cross --steps 2 --report " +
                     q(out / "ab.csv"))
                  .code,
              2);
    const Outcome a = scdlab("ablate --train " + q(dir_ / "data/aligned.manifest") + " --features " + q(dir_ / "feat") +
                         " --eval " + q(dir_ / "data/aligned.manifest") + " --comparators cross,diff --steps 2 --report " +
                         q(out / "ab.csv"));
    ASSERT_EQ(a.code, 0) << a.output;
    EXPECT_EQ(slurp(out / "ab.csv").rfind("comparator,aligned,avg\n", 0), 0u);
}

TEST_F(CliPipeline, CheckpointResumeMatches) {
    const fs::path out = temp_dir("resume");
    const std::string base = "train --manifest " + q(dir_ / "data/aligned.manifest") + " --features " +
                             q(dir_ / "feat") + " --steps 6 --batch 2 --lr 0.001 ";
    ASSERT_EQ(scdlab(base + "--checkpoint-every 3 --checkpoint-dir " + q(out / "ck") + " --out " + q(out / "full.scdm"))
                  .code,
              0);
    ASSERT_TRUE(fs::exists(out / "ck/ckpt_3.scdm"));
    const Outcome r = scdlab(base + "--resume " + q(out / "ck/ckpt_3.scdm") + " --out " + q(out / "resumed.scdm"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_EQ(slurp(out / "full.scdm"), slurp(out / "resumed.scdm"));
}
