#include "cli.hpp"

#include "spdnn/io.hpp"
#include "spdnn/pgm.hpp"
#include "spdnn/topology.hpp"
#include "spdnn/weights_io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <unistd.h>

#include <filesystem>
#include <sstream>

using namespace spdnn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome spdnn_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("spdnn_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::vector<std::string> fixture_paths() {
        EXPECT_EQ(spdnn_cli({"fixtures", "--out", path("fx")}).code, 0);
        std::vector<std::string> paths;
        for (int i = 1; i <= 8; ++i) paths.push_back(path("fx/net" + std::to_string(i) + ".json"));
        return paths;
    }

    fs::path dir_;
};

std::string last_line(const std::string& text) {
    auto trimmed = text.substr(0, text.find_last_not_of('\n') + 1);
    return trimmed.substr(trimmed.rfind('\n') + 1);
}

} // namespace

TEST_F(Cli, FixturesAreCanonicalAndStable) {
    const auto paths = fixture_paths();
    std::vector<std::string> first;
    for (const auto& p : paths) {
        first.push_back(read_file(p));
        EXPECT_NO_THROW(parse_topology(first.back())) << p;
    }
    EXPECT_EQ(spdnn_cli({"fixtures", "--out", path("fx")}).code, 0);
    for (std::size_t i = 0; i < paths.size(); ++i) EXPECT_EQ(read_file(paths[i]), first[i]);
    EXPECT_NE(first[1].find(R"({"id":"pool1","op":"maxpool","inputs":["conv1"],"factor":2})"), std::string::npos)
        << first[1];
}

TEST_F(Cli, ParseAndGraph) {
    const auto paths = fixture_paths();
    const auto parsed = spdnn_cli({"parse", paths[1]});
    EXPECT_EQ(parsed.code, 0);
    EXPECT_EQ(parsed.out, read_file(paths[1]));
    const auto dot = spdnn_cli({"graph", paths[1]});
    EXPECT_EQ(dot.code, 0);
    EXPECT_NE(dot.out.find("\"3C2P,4\""), std::string::npos);
    EXPECT_EQ(spdnn_cli({"graph", paths[1], "--out", path("net2.dot")}).code, 0);
    EXPECT_EQ(read_file(path("net2.dot")), dot.out);

    write_file_atomic(path("bad.json"), R"({"name": "b", "input": [1, 8, 8], "nodes": [)");
    const auto bad = spdnn_cli({"parse", path("bad.json")});
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("byte"), std::string::npos) << bad.err;
}

TEST_F(Cli, MergeFixtures) {
    auto args = std::vector<std::string>{"merge"};
    for (const auto& p : fixture_paths()) args.push_back(p);
    args.insert(args.end(), {"--out", path("merged.json"), "--report", path("report.json")});
    const auto r = spdnn_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("44 → 17"), std::string::npos) << r.out;
    EXPECT_NO_THROW(parse_topology(read_file(path("merged.json"))));
    EXPECT_NE(read_file(path("report.json")).find("\"merged_nodes\": 17"), std::string::npos);

    const auto shapes = spdnn_cli({"shapes", path("merged.json")});
    EXPECT_EQ(shapes.code, 0);
    EXPECT_EQ(last_line(shapes.out), "output            1×80×264");
    const auto odd = spdnn_cli({"shapes", path("merged.json"), "--size", "81x264"});
    EXPECT_EQ(odd.code, 2);
    EXPECT_NE(odd.err.find("pool"), std::string::npos) << odd.err;
    EXPECT_NE(odd.err.find("81"), std::string::npos) << odd.err;
}

TEST_F(Cli, MergeOfTwinsGivesTheSingleNet) {
    const auto paths = fixture_paths();
    ASSERT_EQ(spdnn_cli({"merge", paths[2], paths[2], "--out", path("twin.json")}).code, 0);
    EXPECT_TRUE(same_structure(parse_topology(read_file(path("twin.json"))),
                               parse_topology(read_file(paths[2]))));
}

TEST_F(Cli, MergeMismatchNamesBothFiles) {
    const auto paths = fixture_paths();
    ASSERT_EQ(spdnn_cli({"fixtures", "--out", path("small"), "--size", "40x40"}).code, 0);
    const auto r = spdnn_cli({"merge", paths[0], path("small/net2.json"), "--out", path("m.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find(paths[0]), std::string::npos) << r.err;
    EXPECT_NE(r.err.find(path("small/net2.json")), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("m.json")));
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(spdnn_cli({}).code, 1);
    EXPECT_EQ(spdnn_cli({"frobnicate"}).code, 1);
    EXPECT_EQ(spdnn_cli({"fixtures", "--out", path("x"), "--bogus"}).code, 1);
    EXPECT_EQ(spdnn_cli({"fixtures", "--out", path("x"), "--size", "80by264"}).code, 1);
    EXPECT_EQ(spdnn_cli({"merge", "a.json", "b.json", "--out", path("m"), "--policy", "left"}).code, 1);
    EXPECT_FALSE(fs::exists(path("x")));
    EXPECT_EQ(spdnn_cli({"parse", path("missing.json")}).code, 3);
}

TEST_F(Cli, RunIdentityNetworkPreservesPixels) {
    write_file_atomic(path("id.json"), R"({"name": "id", "input": [1, 4, 4], "nodes": [
        {"id": "c", "op": "conv", "kernel": 1, "channels": 1},
        {"id": "output", "op": "output"}]})");
    save_weights(path("id.spdw"), {{"c/weight", Tensor({1, 1, 1, 1}, {1.0})}, {"c/bias", Tensor({1})}});
    GrayImage img{5, 3, 1000, {}};
    for (std::uint16_t i = 0; i < 15; ++i) img.pixels.push_back(static_cast<std::uint16_t>(i * 71));
    write_pgm(path("in.pgm"), img);
    const auto r = spdnn_cli({"run", path("id.json"), path("in.pgm"), "--out", path("out.pgm"),
                              "--weights", path("id.spdw")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_pgm(path("out.pgm")), img);
}

TEST_F(Cli, RunMergedFixture) {
    auto args = std::vector<std::string>{"merge"};
    for (const auto& p : fixture_paths()) args.push_back(p);
    args.insert(args.end(), {"--out", path("merged.json")});
    ASSERT_EQ(spdnn_cli(args).code, 0);
    GrayImage img{264, 80, 255, std::vector<std::uint16_t>(264 * 80)};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint16_t>((i * 37) % 256);
    write_pgm(path("in.pgm"), img);
    const auto r = spdnn_cli({"run", path("merged.json"), path("in.pgm"), "--out", path("a.pgm"), "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(spdnn_cli({"run", path("merged.json"), path("in.pgm"), "--out", path("b.pgm"), "--seed", "4"}).code, 0);
    const auto out = read_pgm(path("a.pgm"));
    EXPECT_EQ(out.width, 264u);
    EXPECT_EQ(out.height, 80u);
    EXPECT_EQ(out.maxval, 255u);
    for (auto p : out.pixels) EXPECT_LE(p, 255);
    EXPECT_EQ(read_file(path("a.pgm")), read_file(path("b.pgm")));

    write_file_atomic(path("cut.pgm"), read_file(path("in.pgm")).substr(0, 500));
    const auto cut = spdnn_cli({"run", path("merged.json"), path("cut.pgm"), "--out", path("c.pgm")});
    EXPECT_EQ(cut.code, 2);
    EXPECT_NE(cut.err.find("byte"), std::string::npos) << cut.err;
    EXPECT_FALSE(fs::exists(path("c.pgm")));

    save_weights(path("wrong.spdw"), {{"x/weight", Tensor({1})}});
    EXPECT_EQ(spdnn_cli({"run", path("merged.json"), path("in.pgm"), "--out", path("d.pgm"),
                         "--weights", path("wrong.spdw")}).code, 2);
    EXPECT_FALSE(fs::exists(path("d.pgm")));
}

TEST_F(Cli, TrainDemoWritesCsv) {
    const auto paths = fixture_paths();
    const auto r = spdnn_cli({"train-demo", paths[1], "--size", "16x16", "--steps", "5", "--samples", "1",
                              "--out", path("loss.csv"), "--save-weights", path("w.spdw")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = read_file(path("loss.csv"));
    EXPECT_EQ(csv.rfind("step,loss\n0,", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_EQ(load_weights(path("w.spdw")).size(), 4u * 4 + 2);
    const auto again = spdnn_cli({"train-demo", paths[1], "--size", "16x16", "--steps", "5",
                                  "--samples", "1", "--out", path("loss2.csv")});
    EXPECT_EQ(read_file(path("loss2.csv")), csv);
}

TEST_F(Cli, EvalIdentity) {
    GrayImage img{8, 8, 255, {}};
    for (int i = 0; i < 64; ++i) img.pixels.push_back(static_cast<std::uint16_t>((i * 53) % 256));
    write_pgm(path("x.pgm"), img);
    const auto r = spdnn_cli({"eval", path("x.pgm"), path("x.pgm"), "--out", path("m.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream lines(r.out);
    bool found = false;
    for (std::string l; std::getline(lines, l);)
        if (l.rfind("SSIM", 0) == 0) found = l.find("1.0000") != std::string::npos;
    EXPECT_TRUE(found) << r.out;
    EXPECT_NE(read_file(path("m.json")).find("\"psnr\": \"inf\""), std::string::npos);

    write_pgm(path("y.pgm"), GrayImage{4, 4, 255, std::vector<std::uint16_t>(16)});
    EXPECT_EQ(spdnn_cli({"eval", path("x.pgm"), path("y.pgm")}).code, 2);
}

TEST_F(Cli, BenchReportsSecondsPerMegapixel) {
    const auto paths = fixture_paths();
    const auto r = spdnn_cli({"bench", paths[0], "--size", "16x16"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("sec/MP"), std::string::npos);
    EXPECT_NE(r.out.find("~ 1.23 sec/MP"), std::string::npos);
    EXPECT_NE(r.out.find("hardware"), std::string::npos);
}

#ifdef SPDNN_BIN
TEST_F(Cli, BinaryExitCodes) {
    const std::string bin = SPDNN_BIN;
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(status(bin + " fixtures --out " + path("fx")), 0);
    EXPECT_EQ(status(bin + " --nope"), 1);
    EXPECT_EQ(status(bin + " shapes " + path("fx/net4.json") + " --size 12x264"), 2);
    EXPECT_EQ(status(bin + " eval " + path("none.pgm") + " " + path("none.pgm")), 3);
}
#endif
