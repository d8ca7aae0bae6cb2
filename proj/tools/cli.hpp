#pragma once

// fishsynth command line: project | warp | grid | generate | calibrate.
//
// Exit status: 0 success, 1 usage or configuration error, 2 runtime failure.
// Machine-readable results go to `out`, diagnostics to `err`.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fishsynth/fishsynth.hpp"

namespace fishsynth::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

namespace detail {

// Lens and view flags shared by warp and grid.
struct LensViewFlags {
  std::string config;
  std::string lens;
  std::string model;
  double c = 0.0;
  double phi_max_deg = 0.0;
  std::vector<double> radial;
  std::vector<double> decentering;
  std::vector<double> affine;
  double offset_distance = 0.0;
  double offset_azimuth_deg = 0.0;
  double source_hfov_deg = 0.0;
  int output_size = 0;

  CLI::Option* c_opt = nullptr;
  CLI::Option* phi_opt = nullptr;
  CLI::Option* dist_opt = nullptr;
  CLI::Option* az_opt = nullptr;
  CLI::Option* hfov_opt = nullptr;
  CLI::Option* size_opt = nullptr;

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "JSON file with lens and view keys");
    app.add_option("--lens", lens, "Lens JSON (model, c, principal_point, distortion, image_size, phi_max_deg)");
    app.add_option("--model", model, "equidistant | stereographic | equisolid | orthographic");
    c_opt = app.add_option("--c", c, "Principal distance in px (default: image circle inscribed)");
    phi_opt = app.add_option("--phi-max-deg", phi_max_deg, "Maximum incidence angle in degrees");
    app.add_option("--radial", radial, "A1,A2,A3")->delimiter(',')->expected(3);
    app.add_option("--decentering", decentering, "B1,B2")->delimiter(',')->expected(2);
    app.add_option("--affine", affine, "C1,C2")->delimiter(',')->expected(2);
    dist_opt = app.add_option("--offset-distance", offset_distance, "Principal point offset in px");
    az_opt = app.add_option("--offset-azimuth-deg", offset_azimuth_deg, "Offset direction in degrees");
    hfov_opt = app.add_option("--hfov-deg", source_hfov_deg, "Horizontal FOV of the virtual source camera");
    size_opt = app.add_option("--size", output_size, "Square output size in px");
  }

  // Resolves defaults < config file < --lens < individual flags.
  std::pair<Lens, ViewParams> resolve() const {
    Json cfg = Json::object();
    if (!config.empty()) cfg = read_json_file(config);
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");

    ViewParams view = view_from_json(cfg);
    if (*size_opt) view.output_size = output_size;
    if (*dist_opt) view.offset_distance = offset_distance;
    if (*az_opt) view.offset_azimuth = deg_to_rad(offset_azimuth_deg);
    if (*hfov_opt) view.source_hfov = deg_to_rad(source_hfov_deg);
    validate(view);

    Lens lens;
    std::optional<Json> lens_json;
    if (cfg.contains("lens")) lens_json = cfg.at("lens");
    if (!this->lens.empty()) lens_json = read_json_file(this->lens);
    if (lens_json) {
      lens = lens_from_json(*lens_json);
    } else {
      if (cfg.contains("model")) lens.model = projection_model_from_string(cfg.at("model").get<std::string>());
      if (!model.empty()) lens.model = projection_model_from_string(model);
      double phi_max = std::min(kDefaultPhiMax, max_incidence(lens.model));
      phi_max = deg_to_rad(fishsynth::detail::read_number(cfg, "phi_max_deg", rad_to_deg(phi_max)));
      if (*phi_opt) phi_max = deg_to_rad(phi_max_deg);
      lens.intrinsics = inscribed_intrinsics(lens.model, view.output_size, phi_max);
      if (cfg.contains("c")) lens.intrinsics.c = fishsynth::detail::read_number(cfg, "c", 0.0);
      lens.intrinsics.radial = fishsynth::detail::read_array<3>(cfg, "radial");
      lens.intrinsics.decentering = fishsynth::detail::read_array<2>(cfg, "decentering");
      lens.intrinsics.affine = fishsynth::detail::read_array<2>(cfg, "affine");
    }
    if (!model.empty() && lens_json) lens.model = projection_model_from_string(model);
    if (*c_opt) lens.intrinsics.c = c;
    if (*phi_opt && lens_json) lens.intrinsics.phi_max = deg_to_rad(phi_max_deg);
    if (!radial.empty()) lens.intrinsics.radial = {radial[0], radial[1], radial[2]};
    if (!decentering.empty()) lens.intrinsics.decentering = {decentering[0], decentering[1]};
    if (!affine.empty()) lens.intrinsics.affine = {affine[0], affine[1]};
    if (lens.intrinsics.image_size[0] == 0 && lens.intrinsics.image_size[1] == 0) {
      lens.intrinsics.image_size = {view.output_size, view.output_size};
    }
    validate(lens.model, lens.intrinsics);
    return {lens, view};
  }
};

}  // namespace detail

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parameterized fisheye projection, synthesis and calibration bench", "fishsynth"};
  app.require_subcommand(1, 1);

  // project
  auto* project = app.add_subcommand("project", "Project a camera-frame point; prints {\"x\", \"y\"}");
  std::string project_config;
  std::string project_model;
  double project_c = 0.0;
  std::vector<double> project_pp;
  std::vector<double> point_arg;
  std::vector<double> project_radial, project_decentering, project_affine;
  double project_phi_max_deg = 0.0;
  project->add_option("--config", project_config, "Lens JSON file");
  project->add_option("--model", project_model, "Projection model");
  auto* project_c_opt = project->add_option("--c", project_c, "Principal distance in px");
  project->add_option("--pp", project_pp, "Principal point x,y")->delimiter(',')->expected(2);
  project->add_option("--point", point_arg, "Camera point x,y,z")->delimiter(',')->expected(3)->required();
  project->add_option("--radial", project_radial, "A1,A2,A3")->delimiter(',')->expected(3);
  project->add_option("--decentering", project_decentering, "B1,B2")->delimiter(',')->expected(2);
  project->add_option("--affine", project_affine, "C1,C2")->delimiter(',')->expected(2);
  auto* project_phi_opt = project->add_option("--phi-max-deg", project_phi_max_deg, "Maximum incidence angle");

  // warp
  auto* warp = app.add_subcommand("warp", "Letterbox one image and synthesize its fisheye view");
  std::string warp_input, warp_output;
  warp->add_option("--input", warp_input, "Source image")->required();
  warp->add_option("--output", warp_output, "Output PNG")->required();
  detail::LensViewFlags warp_flags;
  warp_flags.add_to(*warp);

  // grid
  auto* grid = app.add_subcommand("grid", "Render the fisheye image of a regular grid");
  std::string grid_output;
  int grid_spacing = 64;
  grid->add_option("--output", grid_output, "Output PNG")->required();
  grid->add_option("--spacing", grid_spacing, "Grid spacing in px")->check(CLI::PositiveNumber);
  detail::LensViewFlags grid_flags;
  grid_flags.add_to(*grid);

  // generate
  auto* generate = app.add_subcommand("generate", "Synthesize a fisheye dataset from a class-labeled corpus");
  std::string gen_input, gen_output, gen_config;
  std::uint64_t gen_seed = 0;
  int gen_variants = 0;
  int gen_jobs = 0;
  generate->add_option("--input", gen_input, "Corpus root with one directory per class")->required();
  generate->add_option("--output", gen_output, "Output root")->required();
  generate->add_option("--config", gen_config, "Generation config JSON");
  auto* gen_seed_opt = generate->add_option("--seed", gen_seed, "RNG seed");
  auto* gen_variants_opt = generate->add_option("--variants", gen_variants, "Variants per source image");
  auto* gen_jobs_opt = generate->add_option("--jobs", gen_jobs, "Worker threads");

  // calibrate
  auto* calibrate = app.add_subcommand("calibrate", "Recover lens parameters from synthetic correspondences");
  std::string cal_truth, cal_config, cal_free = "all", cal_dump, cal_load;
  int cal_points = 200;
  double cal_noise = 0.0;
  std::uint64_t cal_seed = 0;
  int cal_max_iter = 200;
  int cal_jobs = 1;
  calibrate->add_option("--truth", cal_truth, "Ground-truth lens JSON");
  calibrate->add_option("--config", cal_config, "JSON with points, noise, seed, free, max_iterations, truth");
  auto* cal_points_opt = calibrate->add_option("--points", cal_points, "Number of correspondences");
  auto* cal_noise_opt = calibrate->add_option("--noise", cal_noise, "Gaussian noise sigma in px");
  auto* cal_seed_opt = calibrate->add_option("--seed", cal_seed, "Noise seed");
  auto* cal_free_opt = calibrate->add_option("--free", cal_free, "Free parameters: c,pp,radial,decentering,affine|all");
  calibrate->add_option("--dump-csv", cal_dump, "Write the correspondences as CSV");
  calibrate->add_option("--load-csv", cal_load, "Fit correspondences read from CSV instead of generating them");
  auto* cal_iter_opt = calibrate->add_option("--max-iterations", cal_max_iter, "LM iteration cap");
  calibrate->add_option("--jobs", cal_jobs, "Accepted for uniformity; the fit is sequential");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*project) {
      Lens lens;
      Json cfg = project_config.empty() ? Json::object() : read_json_file(project_config);
      if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
      if (cfg.contains("c") && cfg.contains("principal_point") && cfg.contains("model")) {
        lens = lens_from_json(cfg);
      } else {
        if (cfg.contains("model")) lens.model = projection_model_from_string(cfg.at("model").get<std::string>());
        lens.intrinsics.c = fishsynth::detail::read_number(cfg, "c", 1.0);
        const auto pp = fishsynth::detail::read_array<2>(cfg, "principal_point");
        lens.intrinsics.principal_point = {pp[0], pp[1]};
        lens.intrinsics.radial = fishsynth::detail::read_array<3>(cfg, "radial");
        lens.intrinsics.decentering = fishsynth::detail::read_array<2>(cfg, "decentering");
        lens.intrinsics.affine = fishsynth::detail::read_array<2>(cfg, "affine");
        lens.intrinsics.phi_max = deg_to_rad(fishsynth::detail::read_number(
            cfg, "phi_max_deg", rad_to_deg(std::min(kDefaultPhiMax, max_incidence(lens.model)))));
      }
      if (!project_model.empty()) {
        lens.model = projection_model_from_string(project_model);
        if (!cfg.contains("phi_max_deg") && !*project_phi_opt) {
          lens.intrinsics.phi_max = std::min(kDefaultPhiMax, max_incidence(lens.model));
        }
      }
      if (*project_c_opt) lens.intrinsics.c = project_c;
      if (!project_pp.empty()) lens.intrinsics.principal_point = {project_pp[0], project_pp[1]};
      if (!project_radial.empty()) lens.intrinsics.radial = {project_radial[0], project_radial[1], project_radial[2]};
      if (!project_decentering.empty()) {
        lens.intrinsics.decentering = {project_decentering[0], project_decentering[1]};
      }
      if (!project_affine.empty()) lens.intrinsics.affine = {project_affine[0], project_affine[1]};
      if (*project_phi_opt) lens.intrinsics.phi_max = deg_to_rad(project_phi_max_deg);
      validate(lens.model, lens.intrinsics);
      const PixelPoint q =
          project_point(lens.model, lens.intrinsics, {point_arg[0], point_arg[1], point_arg[2]});
      Json j;
      j["x"] = q.x;
      j["y"] = q.y;
      out << j.dump() << '\n';
      return kExitOk;
    }

    if (*warp) {
      const auto [lens, view] = warp_flags.resolve();
      const Raster src = read_image(warp_input);
      write_image(warp_output, synthesize_fisheye(src, lens.model, lens.intrinsics, view));
      err << "wrote " << warp_output << '\n';
      return kExitOk;
    }

    if (*grid) {
      const auto [lens, view] = grid_flags.resolve();
      write_image(grid_output, render_distortion_grid(lens.model, lens.intrinsics, grid_spacing, view));
      err << "wrote " << grid_output << '\n';
      return kExitOk;
    }

    if (*generate) {
      GenerationConfig config;
      if (!gen_config.empty()) config = apply_config_json(config, read_json_file(gen_config));
      config.input_root = gen_input;
      config.output_root = gen_output;
      if (*gen_seed_opt) config.rng_seed = gen_seed;
      if (*gen_variants_opt) config.variants_per_image = gen_variants;
      if (*gen_jobs_opt) config.jobs = gen_jobs;
      const GenerationResult result = generate_dataset(config);
      for (const auto& w : result.warnings) err << "warning: " << w << '\n';
      Json summary;
      summary["records"] = result.manifest.size();
      Json splits = Json::object();
      for (Split s : kAllSplits) splits[std::string(to_string(s))] = 0;
      for (const auto& rec : result.manifest) {
        auto& slot = splits[std::string(to_string(rec.split))];
        slot = slot.get<int>() + 1;
      }
      summary["split_counts"] = splits;
      summary["failures"] = result.failures.size();
      summary["manifest"] = (config.output_root / "manifest.jsonl").generic_string();
      out << summary.dump() << '\n';
      return kExitOk;
    }

    if (*calibrate) {
      Json cfg = cal_config.empty() ? Json::object() : read_json_file(cal_config);
      if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
      std::optional<Lens> truth;
      if (cfg.contains("truth")) truth = lens_from_json(cfg.at("truth"));
      if (!cal_truth.empty()) truth = lens_from_json(read_json_file(cal_truth));
      if (!truth) throw ConfigError("calibrate needs --truth (or a 'truth' object in --config)");
      if (!*cal_points_opt && cfg.contains("points")) cal_points = cfg.at("points").get<int>();
      if (!*cal_noise_opt && cfg.contains("noise")) cal_noise = cfg.at("noise").get<double>();
      if (!*cal_seed_opt && cfg.contains("seed")) cal_seed = cfg.at("seed").get<std::uint64_t>();
      if (!*cal_free_opt && cfg.contains("free")) cal_free = cfg.at("free").get<std::string>();
      if (!*cal_iter_opt && cfg.contains("max_iterations")) cal_max_iter = cfg.at("max_iterations").get<int>();

      Correspondences data;
      if (!cal_load.empty()) {
        data = read_correspondences_csv(cal_load);
      } else {
        data = generate_correspondences(truth->model, truth->intrinsics, AngularGrid::with_count(cal_points),
                                        cal_noise, cal_seed);
      }
      if (!cal_dump.empty()) {
        const std::string csv = correspondences_to_csv(data);
        write_bytes(cal_dump, std::vector<std::uint8_t>(csv.begin(), csv.end()));
      }

      FitOptions options;
      options.free = parse_parameter_mask(cal_free);
      options.max_iterations = cal_max_iter;
      const Intrinsics initial = perturbed_start(truth->intrinsics, options.free);
      FitReport report = fit_parameters(truth->model, data, initial, options);
      compare_to_truth(report, truth->intrinsics);
      out << to_json(report, truth->model).dump(2) << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Json::exception& e) {
    err << "error: malformed configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace fishsynth::cli
