#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "test_support.hpp"

namespace fishsynth {
namespace {

using testing::TempDir;

struct Outcome {
  int status;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fishsynth");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {status, out.str(), err.str()};
}

TEST(Cli, ProjectPrintsJsonPoint) {
  const Outcome r = run_cli({"project", "--model", "equidistant", "--c", "100", "--pp", "0,0", "--point", "1,0,1"});
  ASSERT_EQ(r.status, cli::kExitOk) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j.at("x").get<double>(), 78.53981633974483, 1e-12);
  EXPECT_EQ(j.at("y").get<double>(), 0.0);
}

TEST(Cli, ProjectReadsALensConfig) {
  TempDir dir("cli_lens");
  std::ofstream(dir.path() / "lens.json") << R"({"model": "stereographic", "c": 100, "principal_point": [10, 20]})";
  const Outcome r = run_cli({"project", "--config", (dir.path() / "lens.json").string(), "--point", "0,0,1"});
  ASSERT_EQ(r.status, cli::kExitOk) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j.at("x").get<double>(), 10.0);
  EXPECT_EQ(j.at("y").get<double>(), 20.0);
}

TEST(Cli, HelpExitsZero) {
  const Outcome r = run_cli({"--help"});
  EXPECT_EQ(r.status, cli::kExitOk);
  EXPECT_NE(r.out.find("generate"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({}).status, cli::kExitUsage);
  EXPECT_EQ(run_cli({"project", "--bogus"}).status, cli::kExitUsage);
  EXPECT_EQ(run_cli({"project", "--model", "pinhole", "--point", "1,0,1"}).status, cli::kExitUsage);
  EXPECT_EQ(run_cli({"warp", "--output", "x.png"}).status, cli::kExitUsage);
}

TEST(Cli, MissingFilesExitTwoAndNameThePath) {
  const Outcome r = run_cli({"warp", "--input", "/nonexistent/in.png", "--output", "/tmp/out.png"});
  EXPECT_EQ(r.status, cli::kExitRuntime);
  EXPECT_NE(r.err.find("/nonexistent/in.png"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, WarpProducesAGrayDiscOnBlack) {
  TempDir dir("cli_warp");
  const auto in = dir.path() / "gray.png";
  const auto out = dir.path() / "fish.png";
  write_image(in, Raster(512, 512, {128, 128, 128}));
  const Outcome r = run_cli({"warp", "--input", in.string(), "--output", out.string()});
  ASSERT_EQ(r.status, cli::kExitOk) << r.err;
  const Raster img = read_image(out);
  ASSERT_EQ(img.width(), 512);
  EXPECT_EQ(img.at(256, 256), (Rgb{128, 128, 128}));
  EXPECT_EQ(img.at(0, 0), kBlack);
  EXPECT_EQ(img.at(511, 256), kBlack);
  // Same argv, same bytes.
  const auto first = testing::read_file(out);
  ASSERT_EQ(run_cli({"warp", "--input", in.string(), "--output", out.string()}).status, cli::kExitOk);
  EXPECT_EQ(testing::read_file(out), first);
}

TEST(Cli, GridWritesAnImage) {
  TempDir dir("cli_grid");
  const auto out = dir.path() / "grid.png";
  const Outcome r = run_cli({"grid", "--output", out.string(), "--model", "orthographic", "--hfov-deg", "120"});
  ASSERT_EQ(r.status, cli::kExitOk) << r.err;
  EXPECT_EQ(read_image(out).at(256, 100), (Rgb{255, 255, 255}));
}

TEST(Cli, CalibratePrintsAFitReport) {
  TempDir dir("cli_cal");
  const auto truth = dir.path() / "truth.json";
  const auto csv = dir.path() / "points.csv";
  std::ofstream(truth) << R"({"model": "equisolid", "c": 180, "principal_point": [256, 256], "radial": [2e-8, 0, 0]})";
  const Outcome r = run_cli({"calibrate", "--truth", truth.string(), "--points", "120", "--noise", "0.1", "--seed", "3",
                             "--free", "c,pp,radial", "--dump-csv", csv.string()});
  ASSERT_EQ(r.status, cli::kExitOk) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(j.at("converged").get<bool>());
  EXPECT_LT(j.at("rms_residual").get<double>(), 0.2);
  EXPECT_TRUE(j.at("per_parameter_error").contains("c"));
  // Refitting the dumped points reproduces the report.
  const Outcome again = run_cli({"calibrate", "--truth", truth.string(), "--load-csv", csv.string(), "--free", "c,pp,radial"});
  ASSERT_EQ(again.status, cli::kExitOk) << again.err;
  EXPECT_NEAR(Json::parse(again.out).at("rms_residual").get<double>(), j.at("rms_residual").get<double>(), 1e-9);
}

TEST(Cli, GenerateWritesAManifest) {
  TempDir in("cli_gen_in");
  TempDir out("cli_gen_out");
  for (const char* label : {"a", "b"}) {
    std::filesystem::create_directories(in.path() / label);
    for (int i = 0; i < 2; ++i) {
      write_image(in.path() / label / ("p" + std::to_string(i) + ".png"), testing::ramp_raster(40, 30, i));
    }
  }
  std::ofstream(in.path() / "cfg.json") << R"({"split_ratios": [0.5, 0.5, 0.0]})";
  const Outcome r = run_cli({"generate", "--input", in.path().string(), "--output", out.path().string(), "--config",
                             (in.path() / "cfg.json").string(), "--variants", "2", "--seed", "4"});
  ASSERT_EQ(r.status, cli::kExitOk) << r.err;
  EXPECT_EQ(read_manifest(out.path() / "manifest.jsonl").size(), 8u);
  EXPECT_NE(r.err.find("cfg.json"), std::string::npos);  // loose file warning
  EXPECT_EQ(Json::parse(r.out).at("records").get<int>(), 8);
}

}  // namespace
}  // namespace fishsynth
