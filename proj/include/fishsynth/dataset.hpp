#pragma once

// Batch synthesis of a labeled fisheye dataset from a perspective corpus.
//
// Corpus layout: <input_root>/<class>/<image>. Every source image yields
// `variants_per_image` fisheye images whose view parameters are drawn from a
// counter-based generator keyed by (seed, source index, variant index), so
// the output does not depend on scheduling. Splits are stratified per class
// and grouped per source image.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fishsynth/errors.hpp"
#include "fishsynth/image_io.hpp"
#include "fishsynth/json_io.hpp"
#include "fishsynth/projection.hpp"
#include "fishsynth/warp.hpp"

namespace fishsynth {

namespace fs = std::filesystem;

enum class Split { Train, Val, Test };

inline constexpr std::array<Split, 3> kAllSplits = {Split::Train, Split::Val, Split::Test};

constexpr std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

struct GenerationConfig {
  fs::path input_root;
  fs::path output_root;
  int variants_per_image = 12;
  std::array<double, 2> offset_distance_range{0.0, kDefaultOutputSize / 6.0};  // px
  std::array<double, 2> offset_azimuth_range{deg_to_rad(26.0), deg_to_rad(35.0)};
  ProjectionModel model = ProjectionModel::Equidistant;
  std::array<double, 3> split_ratios{0.6, 0.2, 0.2};
  std::uint64_t rng_seed = 0;
  int output_size = kDefaultOutputSize;
  double source_hfov = kDefaultSourceHfov;
  double phi_max = kDefaultPhiMax;
  /// Principal distance; unset means "image circle inscribed in the output".
  std::optional<double> c;
  std::array<double, 3> radial{};
  std::array<double, 2> decentering{};
  std::array<double, 2> affine{};
  int jobs = 1;
};

inline void validate(const GenerationConfig& config) {
  if (config.variants_per_image < 1) throw ConfigError("variants_per_image must be at least 1");
  if (config.output_size <= 0) throw ConfigError("output_size must be positive");
  const auto [dlo, dhi] = config.offset_distance_range;
  if (!(dlo >= 0.0 && dlo <= dhi && dhi <= config.output_size / 6.0 + 1e-9)) {
    throw ConfigError("offset_distance_range must satisfy 0 <= lo <= hi <= output_size / 6");
  }
  const auto [alo, ahi] = config.offset_azimuth_range;
  if (!(alo <= ahi) || !std::isfinite(alo) || !std::isfinite(ahi)) {
    throw ConfigError("offset_azimuth_range must be a finite interval lo <= hi");
  }
  double sum = 0.0;
  for (double r : config.split_ratios) {
    if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (config.jobs < 1) throw ConfigError("jobs must be at least 1");
}

/// The undisplaced lens used for every variant; views only move its principal point.
inline Intrinsics base_intrinsics(const GenerationConfig& config) {
  Intrinsics intr = inscribed_intrinsics(config.model, config.output_size, config.phi_max);
  if (config.c) intr.c = *config.c;
  intr.radial = config.radial;
  intr.decentering = config.decentering;
  intr.affine = config.affine;
  validate(config.model, intr);
  return intr;
}

// ---------------------------------------------------------------------------
// Counter-based randomness

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) determined solely by its four keys.
inline constexpr double counter_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t stream) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b + 0x632be59bd9b4e019ULL));
  h = splitmix64(h ^ (stream * 0x8cb92ba72f3d8dd7ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline ViewParams sample_view_params(const GenerationConfig& config, std::uint64_t source_index, int variant_index) {
  if (variant_index < 0 || variant_index >= config.variants_per_image) {
    throw ConfigError("variant_index out of range");
  }
  const auto [dlo, dhi] = config.offset_distance_range;
  const auto [alo, ahi] = config.offset_azimuth_range;
  const auto k = static_cast<std::uint64_t>(variant_index);
  ViewParams view;
  view.offset_distance = dlo + (dhi - dlo) * counter_uniform(config.rng_seed, source_index, k, 0);
  view.offset_azimuth = alo + (ahi - alo) * counter_uniform(config.rng_seed, source_index, k, 1);
  view.source_hfov = config.source_hfov;
  view.output_size = config.output_size;
  return view;
}

// ---------------------------------------------------------------------------
// Corpus

struct CorpusEntry {
  fs::path path;           // input_root / relative
  std::string relative;    // "<class>/<file>", generic separators
  std::string class_label;

  friend bool operator==(const CorpusEntry&, const CorpusEntry&) = default;
};

struct CorpusListing {
  std::vector<CorpusEntry> entries;
  std::vector<std::string> warnings;
};

/// Lists <root>/<class>/<image> in (class, filename) order. Files that are
/// not images, or that sit outside a class directory, are skipped with a warning.
inline CorpusListing enumerate_corpus(const fs::path& input_root) {
  std::error_code ec;
  if (!fs::is_directory(input_root, ec)) throw IoError("input root is not a directory: " + input_root.string());
  CorpusListing listing;
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(input_root)) {
    if (entry.is_directory()) {
      class_dirs.push_back(entry.path());
    } else {
      listing.warnings.push_back("skipping file outside a class directory: " + entry.path().string());
    }
  }
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  for (const auto& dir : class_dirs) {
    const std::string label = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      if (has_image_extension(entry.path())) {
        files.push_back(entry.path());
      } else {
        listing.warnings.push_back("skipping non-image file: " + entry.path().string());
      }
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    for (const auto& f : files) {
      listing.entries.push_back({f, label + "/" + f.filename().string(), label});
    }
  }
  if (listing.entries.empty()) throw IoError("no images found under " + input_root.string());
  return listing;
}

// ---------------------------------------------------------------------------
// Manifest

struct ManifestRecord {
  std::string output_path;  // relative to the output root
  std::string source_path;  // relative to the input root
  std::string class_label;
  ProjectionModel model = ProjectionModel::Equidistant;
  Intrinsics intrinsics;    // effective: principal point includes the view offset
  ViewParams view;
  Split split = Split::Train;
  std::uint64_t seed = 0;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

using Manifest = std::vector<ManifestRecord>;

inline Json to_json(const ManifestRecord& rec, bool with_split = true) {
  Json j;
  j["output_path"] = rec.output_path;
  j["source_path"] = rec.source_path;
  j["class_label"] = rec.class_label;
  j["model"] = std::string(to_string(rec.model));
  j["intrinsics"] = to_json(Lens{rec.model, rec.intrinsics});
  j["view"] = to_json(rec.view);
  if (with_split) j["split"] = std::string(to_string(rec.split));
  j["seed"] = rec.seed;
  return j;
}

inline ManifestRecord manifest_record_from_json(const Json& j) {
  ManifestRecord rec;
  rec.output_path = j.at("output_path").get<std::string>();
  rec.source_path = j.at("source_path").get<std::string>();
  rec.class_label = j.at("class_label").get<std::string>();
  rec.model = projection_model_from_string(j.at("model").get<std::string>());
  rec.intrinsics = lens_from_json(j.at("intrinsics")).intrinsics;
  rec.view = view_from_json(j.at("view"));
  const auto split = j.at("split").get<std::string>();
  auto it = std::find_if(kAllSplits.begin(), kAllSplits.end(), [&](Split s) { return to_string(s) == split; });
  if (it == kAllSplits.end()) throw ConfigError("unknown split '" + split + "'");
  rec.split = *it;
  rec.seed = j.at("seed").get<std::uint64_t>();
  return rec;
}

inline std::string manifest_to_jsonl(const Manifest& manifest, bool with_split = true) {
  std::string out;
  for (const auto& rec : manifest) {
    out += to_json(rec, with_split).dump();
    out += '\n';
  }
  return out;
}

inline Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Manifest manifest;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) manifest.push_back(manifest_record_from_json(Json::parse(line)));
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Splits

namespace detail {

// Largest-remainder apportionment of `total` items over `ratios`.
inline std::array<long long, 3> apportion(long long total, const std::array<double, 3>& ratios) {
  std::array<long long, 3> counts{};
  std::array<double, 3> frac{};
  long long assigned = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    const double exact = total * ratios[b];
    counts[b] = static_cast<long long>(std::floor(exact + 1e-9));
    frac[b] = exact - counts[b];
    assigned += counts[b];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

}  // namespace detail

/// Assigns a split to every record.
///
/// All records of one source share a split. Within each class the number of
/// sources per split is the floor or ceiling of its exact share, and the
/// ceilings are distributed so that the corpus-wide totals equal the
/// largest-remainder apportionment of all sources. Which sources land where
/// is a seeded permutation.
inline Manifest assign_splits(Manifest manifest, const std::array<double, 3>& ratios, std::uint64_t rng_seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw ConfigError("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  const auto nonzero = std::count_if(ratios.begin(), ratios.end(), [](double r) { return r > 0.0; });

  std::map<std::string, std::vector<std::string>> sources_by_class;
  for (const auto& rec : manifest) sources_by_class[rec.class_label].push_back(rec.source_path);
  long long total_sources = 0;
  for (auto& [label, sources] : sources_by_class) {
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    if (static_cast<long long>(sources.size()) < nonzero) {
      throw ConfigError("class '" + label + "' has " + std::to_string(sources.size()) +
                        " source images, fewer than the " + std::to_string(nonzero) + " non-empty splits");
    }
    total_sources += static_cast<long long>(sources.size());
  }

  struct ClassPlan {
    std::string label;
    std::array<long long, 3> counts{};
    std::array<double, 3> frac{};
    long long leftover = 0;
  };
  std::vector<ClassPlan> plans;
  std::array<long long, 3> demand = detail::apportion(total_sources, ratios);
  for (const auto& [label, sources] : sources_by_class) {
    ClassPlan plan{label};
    const auto n = static_cast<long long>(sources.size());
    long long assigned = 0;
    for (std::size_t b = 0; b < 3; ++b) {
      const double exact = n * ratios[b];
      plan.counts[b] = static_cast<long long>(std::floor(exact + 1e-9));
      plan.frac[b] = exact - plan.counts[b];
      assigned += plan.counts[b];
      demand[b] -= plan.counts[b];
    }
    plan.leftover = n - assigned;
    plans.push_back(plan);
  }

  // Hand out the per-class leftovers, largest first, to the buckets that still
  // need the most sources globally; each class gives at most one to a bucket.
  std::vector<std::size_t> order(plans.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return plans[a].leftover > plans[b].leftover; });
  for (std::size_t idx : order) {
    ClassPlan& plan = plans[idx];
    std::array<std::size_t, 3> buckets{0, 1, 2};
    std::stable_sort(buckets.begin(), buckets.end(), [&](auto a, auto b) {
      if ((ratios[a] > 0.0) != (ratios[b] > 0.0)) return ratios[a] > 0.0;
      if (demand[a] != demand[b]) return demand[a] > demand[b];
      return plan.frac[a] > plan.frac[b];
    });
    for (long long k = 0; k < plan.leftover; ++k) {
      ++plan.counts[buckets[k]];
      --demand[buckets[k]];
    }
  }

  std::map<std::string, Split> split_of_source;
  for (const auto& plan : plans) {
    std::vector<std::string> sources = sources_by_class[plan.label];
    const std::uint64_t class_key = fnv1a(plan.label);
    for (std::size_t i = sources.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(counter_uniform(rng_seed, class_key, i, 2) * static_cast<double>(i));
      std::swap(sources[i - 1], sources[j]);
    }
    std::size_t pos = 0;
    for (std::size_t b = 0; b < 3; ++b) {
      for (long long k = 0; k < plan.counts[b]; ++k) split_of_source[sources[pos++]] = kAllSplits[b];
    }
  }
  for (auto& rec : manifest) rec.split = split_of_source.at(rec.source_path);
  return manifest;
}

// ---------------------------------------------------------------------------
// Generation

struct SourceFailure {
  std::string source_path;
  std::string error;
};

struct GenerationResult {
  Manifest manifest;
  std::vector<SourceFailure> failures;
  std::vector<std::string> warnings;
};

inline std::string variant_filename(const fs::path& source, int variant_index) {
  std::string ext = source.extension().string();
  if (!ext.empty()) ext[0] = '_';
  char suffix[32];
  std::snprintf(suffix, sizeof suffix, "_v%02d.png", variant_index);
  return source.stem().string() + ext + suffix;
}

inline Json config_to_json(const GenerationConfig& config) {
  Json j;
  j["model"] = std::string(to_string(config.model));
  j["variants_per_image"] = config.variants_per_image;
  j["offset_distance_range"] = config.offset_distance_range;
  j["offset_azimuth_range_deg"] = {rad_to_deg(config.offset_azimuth_range[0]),
                                   rad_to_deg(config.offset_azimuth_range[1])};
  j["split_ratios"] = config.split_ratios;
  j["rng_seed"] = config.rng_seed;
  j["output_size"] = config.output_size;
  j["source_hfov_deg"] = rad_to_deg(config.source_hfov);
  j["phi_max_deg"] = rad_to_deg(config.phi_max);
  if (config.c) j["c"] = *config.c;
  j["radial"] = config.radial;
  j["decentering"] = config.decentering;
  j["affine"] = config.affine;
  return j;
}

/// Applies the keys present in `j` on top of `config`.
inline GenerationConfig apply_config_json(GenerationConfig config, const Json& j) {
  if (!j.is_object()) throw ConfigError("generation config must be a JSON object");
  if (j.contains("model")) config.model = projection_model_from_string(j.at("model").get<std::string>());
  if (j.contains("variants_per_image")) config.variants_per_image = j.at("variants_per_image").get<int>();
  if (j.contains("output_size")) {
    config.output_size = j.at("output_size").get<int>();
    if (!j.contains("offset_distance_range")) config.offset_distance_range = {0.0, config.output_size / 6.0};
  }
  config.offset_distance_range = detail::read_array<2>(j, "offset_distance_range", config.offset_distance_range);
  if (j.contains("offset_azimuth_range_deg")) {
    const auto deg = detail::read_array<2>(j, "offset_azimuth_range_deg");
    config.offset_azimuth_range = {deg_to_rad(deg[0]), deg_to_rad(deg[1])};
  }
  config.split_ratios = detail::read_array<3>(j, "split_ratios", config.split_ratios);
  if (j.contains("rng_seed")) config.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  config.source_hfov = deg_to_rad(detail::read_number(j, "source_hfov_deg", rad_to_deg(config.source_hfov)));
  config.phi_max = deg_to_rad(detail::read_number(j, "phi_max_deg", rad_to_deg(config.phi_max)));
  if (j.contains("c")) config.c = detail::read_number(j, "c", 0.0);
  config.radial = detail::read_array<3>(j, "radial", config.radial);
  config.decentering = detail::read_array<2>(j, "decentering", config.decentering);
  config.affine = detail::read_array<2>(j, "affine", config.affine);
  if (j.contains("jobs")) config.jobs = j.at("jobs").get<int>();
  return config;
}

/// Letterboxes, warps and writes every (source, variant) pair, then writes
/// `manifest.jsonl` and `summary.json` under the output root.
///
/// Undecodable sources are skipped and reported in the result. A failed write
/// stops the run: the completed records go to `manifest.partial.jsonl` and an
/// IoError is thrown.
inline GenerationResult generate_dataset(const GenerationConfig& config) {
  validate(config);
  const Intrinsics base = base_intrinsics(config);
  CorpusListing listing = enumerate_corpus(config.input_root);
  const auto& entries = listing.entries;

  std::error_code ec;
  fs::create_directories(config.output_root, ec);
  if (ec) throw IoError("cannot create " + config.output_root.string() + ": " + ec.message());
  for (const auto& e : entries) {
    fs::create_directories(config.output_root / e.class_label, ec);
    if (ec) throw IoError("cannot create " + (config.output_root / e.class_label).string() + ": " + ec.message());
  }

  struct SourceOutcome {
    std::vector<ManifestRecord> records;
    std::optional<std::string> decode_error;
  };
  std::vector<SourceOutcome> outcomes(entries.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex abort_mutex;
  std::string abort_reason;

  auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= entries.size()) return;
      const CorpusEntry& entry = entries[i];
      Raster normalized;
      try {
        normalized = letterbox_normalize(read_image(entry.path), config.output_size);
      } catch (const Error& e) {
        outcomes[i].decode_error = e.what();
        continue;
      }
      for (int k = 0; k < config.variants_per_image; ++k) {
        ManifestRecord rec;
        rec.view = sample_view_params(config, i, k);
        const FisheyeWarp warp(config.model, base, rec.view, normalized.width(), normalized.height());
        rec.output_path = entry.class_label + "/" + variant_filename(entry.path, k);
        rec.source_path = entry.relative;
        rec.class_label = entry.class_label;
        rec.model = config.model;
        rec.intrinsics = warp.intrinsics();
        rec.seed = config.rng_seed;
        try {
          write_bytes(config.output_root / rec.output_path, encode_png(warp.apply(normalized)));
        } catch (const Error& e) {
          std::lock_guard lock(abort_mutex);
          if (!abort.exchange(true)) abort_reason = e.what();
          return;
        }
        outcomes[i].records.push_back(std::move(rec));
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    const int workers = std::max(1, std::min<int>(config.jobs, static_cast<int>(entries.size())));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  GenerationResult result;
  result.warnings = std::move(listing.warnings);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (outcomes[i].decode_error) {
      result.failures.push_back({entries[i].relative, *outcomes[i].decode_error});
      result.warnings.push_back("skipping undecodable image " + entries[i].relative + ": " +
                                *outcomes[i].decode_error);
    }
    for (auto& rec : outcomes[i].records) result.manifest.push_back(std::move(rec));
  }

  if (abort.load()) {
    const fs::path partial = config.output_root / "manifest.partial.jsonl";
    std::ofstream out(partial, std::ios::trunc);
    out << manifest_to_jsonl(result.manifest, false);
    throw IoError("generation aborted after " + std::to_string(result.manifest.size()) + " of " +
                  std::to_string(entries.size() * config.variants_per_image) + " images (" + abort_reason +
                  "); partial manifest: " + partial.string());
  }
  if (result.manifest.empty()) throw IoError("no decodable images under " + config.input_root.string());

  result.manifest = assign_splits(std::move(result.manifest), config.split_ratios, config.rng_seed);

  const std::string jsonl = manifest_to_jsonl(result.manifest);
  write_bytes(config.output_root / "manifest.jsonl", std::vector<std::uint8_t>(jsonl.begin(), jsonl.end()));

  Json summary;
  summary["config"] = config_to_json(config);
  summary["records"] = result.manifest.size();
  Json class_counts = Json::object();
  Json split_counts = Json::object();
  for (Split s : kAllSplits) split_counts[std::string(to_string(s))] = 0;
  for (const auto& rec : result.manifest) {
    class_counts[rec.class_label] = class_counts.value(rec.class_label, 0) + 1;
    split_counts[std::string(to_string(rec.split))] = split_counts[std::string(to_string(rec.split))].get<int>() + 1;
  }
  summary["class_counts"] = class_counts;
  summary["split_counts"] = split_counts;
  Json failures = Json::array();
  for (const auto& f : result.failures) failures.push_back({{"source_path", f.source_path}, {"error", f.error}});
  summary["failures"] = failures;
  const std::string text = summary.dump(2) + "\n";
  write_bytes(config.output_root / "summary.json", std::vector<std::uint8_t>(text.begin(), text.end()));
  return result;
}

}  // namespace fishsynth
