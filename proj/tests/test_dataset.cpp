#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "fishsynth/dataset.hpp"
#include "test_support.hpp"

namespace fishsynth {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

void write_corpus(const fs::path& root, int classes, int per_class, int w = 96, int h = 64) {
  for (int c = 0; c < classes; ++c) {
    const fs::path dir = root / ("class" + std::to_string(c));
    fs::create_directories(dir);
    for (int i = 0; i < per_class; ++i) {
      write_image(dir / ("img" + std::to_string(i) + ".png"), testing::ramp_raster(w, h, c * 31 + i));
    }
  }
}

Manifest synthetic_manifest(int classes, int sources_per_class, int variants) {
  Manifest m;
  for (int c = 0; c < classes; ++c) {
    for (int s = 0; s < sources_per_class; ++s) {
      for (int k = 0; k < variants; ++k) {
        ManifestRecord rec;
        rec.class_label = "c" + std::to_string(c);
        rec.source_path = rec.class_label + "/s" + std::to_string(s) + ".jpg";
        rec.output_path = rec.class_label + "/s" + std::to_string(s) + "_v" + std::to_string(k) + ".png";
        m.push_back(rec);
      }
    }
  }
  return m;
}

// Maps each source to its split, failing the test if its variants disagree.
std::map<std::string, Split> split_by_source(const Manifest& m) {
  std::map<std::string, Split> out;
  for (const auto& rec : m) {
    auto [it, inserted] = out.emplace(rec.source_path, rec.split);
    EXPECT_EQ(it->second, rec.split) << rec.source_path << " leaks across splits";
  }
  return out;
}

std::array<long long, 3> split_counts(const Manifest& m) {
  std::array<long long, 3> n{};
  for (const auto& rec : m) ++n[static_cast<int>(rec.split)];
  return n;
}

// --- config and view sampling --------------------------------------------------

TEST(GenerationConfig, Validation) {
  GenerationConfig ok;
  EXPECT_NO_THROW(validate(ok));
  auto bad = ok;
  bad.split_ratios = {0.6, 0.2, 0.3};
  EXPECT_THROW(validate(bad), ConfigError);
  bad = ok;
  bad.variants_per_image = 0;
  EXPECT_THROW(validate(bad), ConfigError);
  bad = ok;
  bad.offset_distance_range = {10.0, 5.0};
  EXPECT_THROW(validate(bad), ConfigError);
  bad = ok;
  bad.offset_distance_range = {0.0, 200.0};
  EXPECT_THROW(validate(bad), ConfigError);
}

TEST(GenerationConfig, JsonOverridesOnlyGivenKeys) {
  const auto j = Json::parse(R"({"model": "stereographic", "variants_per_image": 3, "offset_azimuth_range_deg": [10, 20],
                                 "rng_seed": 9, "source_hfov_deg": 70})");
  const GenerationConfig c = apply_config_json({}, j);
  EXPECT_EQ(c.model, ProjectionModel::Stereographic);
  EXPECT_EQ(c.variants_per_image, 3);
  EXPECT_NEAR(c.offset_azimuth_range[1], deg_to_rad(20.0), 1e-15);
  EXPECT_EQ(c.rng_seed, 9u);
  EXPECT_NEAR(c.source_hfov, deg_to_rad(70.0), 1e-15);
  EXPECT_EQ(c.split_ratios, (std::array<double, 3>{0.6, 0.2, 0.2}));
  EXPECT_THROW(apply_config_json({}, Json::parse(R"({"model": "pinhole"})")), ConfigError);
}

TEST(SampleViewParams, DegenerateRangesPinTheValue) {
  GenerationConfig c;
  c.offset_distance_range = {20.0, 20.0};
  c.offset_azimuth_range = {deg_to_rad(30.0), deg_to_rad(30.0)};
  for (int k = 0; k < c.variants_per_image; ++k) {
    const ViewParams v = sample_view_params(c, 7, k);
    EXPECT_EQ(v.offset_distance, 20.0);
    EXPECT_EQ(v.offset_azimuth, deg_to_rad(30.0));
  }
}

TEST(SampleViewParams, DeterministicAndSeedDependent) {
  GenerationConfig c;
  GenerationConfig d = c;
  d.rng_seed = c.rng_seed + 1;
  int differing = 0;
  for (int k = 0; k < c.variants_per_image; ++k) {
    EXPECT_EQ(sample_view_params(c, 3, k), sample_view_params(c, 3, k));
    differing += !(sample_view_params(c, 3, k) == sample_view_params(d, 3, k));
  }
  EXPECT_EQ(differing, c.variants_per_image);
  EXPECT_THROW(sample_view_params(c, 0, c.variants_per_image), ConfigError);
}

TEST(SampleViewParams, UniformOverTheConfiguredRanges) {
  GenerationConfig c;
  c.variants_per_image = 100;
  double sum = 0.0;
  int n = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    for (int k = 0; k < 100; ++k) {
      const ViewParams v = sample_view_params(c, s, k);
      ASSERT_GE(v.offset_distance, 0.0);
      ASSERT_LE(v.offset_distance, 512.0 / 6.0);
      ASSERT_GE(v.offset_azimuth, deg_to_rad(26.0));
      ASSERT_LE(v.offset_azimuth, deg_to_rad(35.0));
      sum += v.offset_distance;
      ++n;
    }
  }
  // Uniform on [0, 512/6]: mean 42.6667, standard error of a 1e4 mean 0.2463.
  EXPECT_NEAR(sum / n, 42.666666666666667, 3 * 0.2463);
}

// --- corpus enumeration ---------------------------------------------------------

TEST(EnumerateCorpus, SortedWithWarningsForStrayFiles) {
  TempDir dir("corpus");
  write_corpus(dir.path(), 2, 3);
  std::ofstream(dir.path() / "README.txt") << "loose";
  std::ofstream(dir.path() / "class1" / "notes.txt") << "not an image";
  const CorpusListing listing = enumerate_corpus(dir.path());
  ASSERT_EQ(listing.entries.size(), 6u);
  EXPECT_EQ(listing.entries.front().relative, "class0/img0.png");
  EXPECT_EQ(listing.entries.back().relative, "class1/img2.png");
  EXPECT_EQ(listing.entries.back().class_label, "class1");
  EXPECT_EQ(listing.warnings.size(), 2u);
}

TEST(EnumerateCorpus, EmptyOrMissingRootFails) {
  TempDir dir("empty");
  EXPECT_THROW(enumerate_corpus(dir.path()), IoError);
  EXPECT_THROW(enumerate_corpus(dir.path() / "missing"), IoError);
}

// --- splits ----------------------------------------------------------------------

TEST(AssignSplits, TenSourcesPerClassSplitSixTwoTwo) {
  const Manifest m = assign_splits(synthetic_manifest(3, 10, 4), {0.6, 0.2, 0.2}, 42);
  std::map<std::string, std::array<int, 3>> per_class;
  for (const auto& [src, split] : split_by_source(m)) ++per_class[src.substr(0, src.find('/'))][static_cast<int>(split)];
  for (const auto& [label, n] : per_class) EXPECT_EQ(n, (std::array<int, 3>{6, 2, 2})) << label;
  EXPECT_EQ(split_counts(m), (std::array<long long, 3>{72, 24, 24}));
}

TEST(AssignSplits, EverythingToTrain) {
  const Manifest m = assign_splits(synthetic_manifest(2, 3, 2), {1.0, 0.0, 0.0}, 1);
  EXPECT_EQ(split_counts(m), (std::array<long long, 3>{12, 0, 0}));
}

TEST(AssignSplits, DeterministicAndSeedSensitive) {
  const Manifest base = synthetic_manifest(4, 20, 3);
  const Manifest a = assign_splits(base, {0.6, 0.2, 0.2}, 5);
  const Manifest b = assign_splits(base, {0.6, 0.2, 0.2}, 5);
  const Manifest c = assign_splits(base, {0.6, 0.2, 0.2}, 6);
  EXPECT_EQ(manifest_to_jsonl(a), manifest_to_jsonl(b));
  EXPECT_NE(manifest_to_jsonl(a), manifest_to_jsonl(c));
}

TEST(AssignSplits, FullScaleCountsStayWithinOneSourceOfTheRatios) {
  // 12 classes, 16725 sources, 10 variants: 167250 records.
  Manifest m;
  for (int s = 0; s < 16725; ++s) {
    const std::string label = "c" + std::to_string(s % 12);
    for (int k = 0; k < 10; ++k) {
      ManifestRecord rec;
      rec.class_label = label;
      rec.source_path = label + "/s" + std::to_string(s);
      rec.output_path = rec.source_path + "_v" + std::to_string(k);
      m.push_back(std::move(rec));
    }
  }
  m = assign_splits(std::move(m), {0.6, 0.2, 0.2}, 2024);
  ASSERT_EQ(m.size(), 167250u);
  const auto n = split_counts(m);
  EXPECT_LE(std::abs(n[0] - 100350), 10);
  EXPECT_LE(std::abs(n[1] - 33450), 10);
  EXPECT_LE(std::abs(n[2] - 33450), 10);
  split_by_source(m);
}

TEST(AssignSplits, PerClassFractionsWithinOneSource) {
  for (int sources : {3, 5, 7, 11, 13}) {
    const Manifest m = assign_splits(synthetic_manifest(5, sources, 2), {0.5, 0.3, 0.2}, sources);
    std::map<std::string, std::array<int, 3>> per_class;
    for (const auto& [src, split] : split_by_source(m)) ++per_class[src.substr(0, src.find('/'))][static_cast<int>(split)];
    const std::array<double, 3> ratios{0.5, 0.3, 0.2};
    for (const auto& [label, counts] : per_class) {
      for (int b = 0; b < 3; ++b) EXPECT_LT(std::abs(counts[b] - sources * ratios[b]), 1.0) << label << " bucket " << b;
    }
  }
}

TEST(AssignSplits, TooFewSourcesForTheBuckets) {
  EXPECT_THROW(assign_splits(synthetic_manifest(2, 2, 3), {0.6, 0.2, 0.2}, 0), ConfigError);
  EXPECT_NO_THROW(assign_splits(synthetic_manifest(2, 2, 3), {0.5, 0.5, 0.0}, 0));
}

// --- manifest I/O -----------------------------------------------------------------

TEST(Manifest, JsonRoundTrip) {
  GenerationConfig c;
  ManifestRecord rec;
  rec.output_path = "cat/a_jpg_v03.png";
  rec.source_path = "cat/a.jpg";
  rec.class_label = "cat";
  rec.model = ProjectionModel::Orthographic;
  rec.view = sample_view_params(c, 0, 3);
  rec.intrinsics = inscribed_intrinsics(rec.model);
  rec.intrinsics.principal_point = effective_principal_point(rec.view);
  rec.intrinsics.radial = {1e-8, 2e-13, 0.0};
  rec.split = Split::Val;
  rec.seed = 77;
  const Json j = to_json(rec);
  for (const char* key : {"output_path", "source_path", "class_label", "model", "intrinsics", "view", "split", "seed"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const ManifestRecord back = manifest_record_from_json(Json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

// --- generation ---------------------------------------------------------------------

GenerationConfig small_config(const fs::path& in, const fs::path& out) {
  GenerationConfig c;
  c.input_root = in;
  c.output_root = out;
  c.variants_per_image = 2;
  c.split_ratios = {0.5, 0.5, 0.0};
  c.rng_seed = 11;
  return c;
}

TEST(GenerateDataset, WritesImagesManifestAndSummary) {
  TempDir in("gen_in");
  TempDir out("gen_out");
  write_corpus(in.path(), 3, 2, 120, 80);
  const GenerationResult r = generate_dataset(small_config(in.path(), out.path()));
  ASSERT_EQ(r.manifest.size(), 12u);
  std::set<std::string> outputs;
  for (const auto& rec : r.manifest) {
    EXPECT_TRUE(outputs.insert(rec.output_path).second);
    const Raster img = read_image(out.path() / rec.output_path);
    EXPECT_EQ(img.width(), 512);
    EXPECT_EQ(img.height(), 512);
  }
  EXPECT_EQ(read_manifest(out.path() / "manifest.jsonl").size(), 12u);
  const Json summary = read_json_file(out.path() / "summary.json");
  EXPECT_EQ(summary.at("records").get<int>(), 12);
  EXPECT_EQ(summary.at("class_counts").at("class2").get<int>(), 4);
  EXPECT_EQ(summary.at("split_counts").at("train").get<int>() + summary.at("split_counts").at("val").get<int>(), 12);
}

TEST(GenerateDataset, RerunsAndThreadCountsAreByteIdentical) {
  TempDir in("det_in");
  TempDir a("det_a");
  TempDir b("det_b");
  write_corpus(in.path(), 2, 3, 80, 100);
  GenerationConfig ca = small_config(in.path(), a.path());
  GenerationConfig cb = small_config(in.path(), b.path());
  ca.jobs = 1;
  cb.jobs = 3;
  const GenerationResult ra = generate_dataset(ca);
  generate_dataset(cb);
  for (const char* f : {"manifest.jsonl", "summary.json"}) {
    EXPECT_EQ(testing::read_file(a.path() / f), testing::read_file(b.path() / f)) << f;
  }
  for (const auto& rec : ra.manifest) {
    EXPECT_EQ(testing::read_file(a.path() / rec.output_path), testing::read_file(b.path() / rec.output_path));
  }
}

TEST(GenerateDataset, UndecodableSourcesAreSkipped) {
  TempDir in("bad_in");
  TempDir out("bad_out");
  write_corpus(in.path(), 2, 2);
  std::ofstream(in.path() / "class0" / "broken.png") << "definitely not a png";
  const GenerationResult r = generate_dataset(small_config(in.path(), out.path()));
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].source_path, "class0/broken.png");
  EXPECT_EQ(r.manifest.size(), 8u);
  for (const auto& rec : r.manifest) EXPECT_NE(rec.source_path, "class0/broken.png");
}

TEST(GenerateDataset, ManifestIntrinsicsCarryTheEffectivePrincipalPoint) {
  TempDir in("pp_in");
  TempDir out("pp_out");
  write_corpus(in.path(), 2, 2);
  const GenerationResult r = generate_dataset(small_config(in.path(), out.path()));
  for (const auto& rec : r.manifest) {
    const PixelPoint pp = effective_principal_point(rec.view);
    EXPECT_EQ(rec.intrinsics.principal_point.x, pp.x);
    EXPECT_EQ(rec.intrinsics.principal_point.y, pp.y);
    EXPECT_EQ(rec.seed, 11u);
  }
}

}  // namespace
}  // namespace fishsynth
