#pragma once

// Recovering lens parameters from synthetic correspondences.
//
// Object points are laid on an angular grid, projected through a ground-truth
// lens and optionally perturbed with Gaussian noise. fit_parameters then
// minimizes the squared reprojection error with Levenberg-Marquardt using a
// central-difference Jacobian.
//
// The optimizer works on a normalized parameter vector
//   [c, x0, y0, A1 R^2, A2 R^4, A3 R^6, B1 R, B2 R, C1, C2]
// where R is the principal distance of the initial guess, so every entry is
// in pixels or dimensionless and the finite-difference steps are comparable.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fishsynth/errors.hpp"
#include "fishsynth/json_io.hpp"
#include "fishsynth/projection.hpp"

namespace fishsynth {

struct Correspondence {
  CameraPoint object_point;
  PixelPoint image_point;
  double noise_sigma = 0.0;
};

using Correspondences = std::vector<Correspondence>;

/// Rings of constant incidence angle, each sampled at evenly spaced azimuths.
/// Ring i sits at phi = max_fraction * phi_max * (i + 1) / rings; odd rings
/// are rotated by half an azimuth step.
struct AngularGrid {
  int rings = 10;
  int azimuths = 20;
  double max_fraction = 0.9;
  /// Keep only the first `limit` points (0 = all).
  int limit = 0;

  /// A near-square grid with exactly `count` points.
  static AngularGrid with_count(int count) {
    AngularGrid grid;
    grid.rings = std::max(2, static_cast<int>(std::lround(std::sqrt(count / 2.0))));
    grid.azimuths = std::max(1, (count + grid.rings - 1) / grid.rings);
    grid.limit = count;
    return grid;
  }
};

inline constexpr int kMinCorrespondences = 20;

namespace detail {

// Box-Muller over mt19937_64 so the stream is identical across standard libraries.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace detail

/// Projects an angular grid through `truth` and adds isotropic Gaussian noise.
/// Throws ConfigError when fewer than 20 points fall inside the field of view.
inline Correspondences generate_correspondences(ProjectionModel model, const Intrinsics& truth,
                                                const AngularGrid& grid, double noise_sigma,
                                                std::uint64_t rng_seed) {
  validate(model, truth);
  if (grid.rings < 1 || grid.azimuths < 1) throw ConfigError("angular grid needs at least one ring and azimuth");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  detail::GaussianSource noise(rng_seed);
  Correspondences out;
  for (int i = 0; i < grid.rings; ++i) {
    const double phi = grid.max_fraction * truth.phi_max * (i + 1) / grid.rings;
    for (int j = 0; j < grid.azimuths; ++j) {
      if (grid.limit > 0 && static_cast<int>(out.size()) >= grid.limit) break;
      const double theta = 2.0 * std::numbers::pi * (j + 0.5 * (i % 2)) / grid.azimuths;
      const double depth = 1.0 + 0.5 * ((i + j) % 3);
      CameraPoint p = ray_direction({phi, theta});
      p = {p.x * depth, p.y * depth, p.z * depth};
      auto q = try_project_point(model, truth, p);
      if (!q) continue;
      const double nx = noise_sigma * noise();
      const double ny = noise_sigma * noise();
      out.push_back({p, {q->x + nx, q->y + ny}, noise_sigma});
    }
  }
  if (static_cast<int>(out.size()) < kMinCorrespondences) {
    throw ConfigError("only " + std::to_string(out.size()) + " correspondences inside the field of view; need 20");
  }
  return out;
}

inline constexpr double kDefaultPenaltyResidual = 1e3;

/// Stacked (dx, dy) residuals of candidate projections against the observed
/// image points. Points the candidate cannot project get `penalty` in both slots.
inline Eigen::VectorXd reprojection_residuals(ProjectionModel model, const Intrinsics& candidate,
                                              const Correspondences& data,
                                              double penalty = kDefaultPenaltyResidual) {
  if (data.empty()) throw ConfigError("no correspondences");
  Eigen::VectorXd r(2 * static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto q = try_project_point(model, candidate, data[i].object_point);
    const auto k = static_cast<Eigen::Index>(2 * i);
    if (q && std::isfinite(q->x) && std::isfinite(q->y)) {
      r[k] = q->x - data[i].image_point.x;
      r[k + 1] = q->y - data[i].image_point.y;
    } else {
      r[k] = penalty;
      r[k + 1] = penalty;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Parameter vector

inline constexpr int kParameterCount = 10;

inline constexpr std::array<std::string_view, kParameterCount> kParameterNames = {
    "c", "x0", "y0", "A1", "A2", "A3", "B1", "B2", "C1", "C2"};

/// Which parameters the fit may move.
using ParameterMask = std::array<bool, kParameterCount>;

inline constexpr ParameterMask kAllParameters = {true, true, true, true, true, true, true, true, true, true};

/// Parses a comma list of groups (c, pp, radial, decentering, affine, all) or
/// single names (x0, A2, ...) into a mask.
inline ParameterMask parse_parameter_mask(std::string_view list) {
  ParameterMask mask{};
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    const std::string_view item = list.substr(start, end - start);
    start = end + 1;
    if (item.empty()) {
      if (end == list.size()) break;
      continue;
    }
    if (item == "all") {
      mask = kAllParameters;
    } else if (item == "pp") {
      mask[1] = mask[2] = true;
    } else if (item == "radial") {
      mask[3] = mask[4] = mask[5] = true;
    } else if (item == "decentering") {
      mask[6] = mask[7] = true;
    } else if (item == "affine") {
      mask[8] = mask[9] = true;
    } else {
      auto it = std::find(kParameterNames.begin(), kParameterNames.end(), item);
      if (it == kParameterNames.end()) throw ConfigError("unknown fit parameter '" + std::string(item) + "'");
      mask[static_cast<std::size_t>(it - kParameterNames.begin())] = true;
    }
  }
  return mask;
}

/// Maps Intrinsics to and from the normalized optimizer vector.
class ParameterPacking {
 public:
  explicit ParameterPacking(double reference_radius) : ref_(reference_radius) {
    if (!(ref_ > 0.0)) throw ConfigError("reference radius must be positive");
  }

  std::array<double, kParameterCount> pack(const Intrinsics& in) const {
    const double r2 = ref_ * ref_;
    return {in.c,
            in.principal_point.x,
            in.principal_point.y,
            in.radial[0] * r2,
            in.radial[1] * r2 * r2,
            in.radial[2] * r2 * r2 * r2,
            in.decentering[0] * ref_,
            in.decentering[1] * ref_,
            in.affine[0],
            in.affine[1]};
  }

  /// Fields not carried by the vector (image size, phi_max) come from `base`.
  Intrinsics unpack(const std::array<double, kParameterCount>& p, const Intrinsics& base) const {
    const double r2 = ref_ * ref_;
    Intrinsics in = base;
    in.c = p[0];
    in.principal_point = {p[1], p[2]};
    in.radial = {p[3] / r2, p[4] / (r2 * r2), p[5] / (r2 * r2 * r2)};
    in.decentering = {p[6] / ref_, p[7] / ref_};
    in.affine = {p[8], p[9]};
    return in;
  }

  double reference_radius() const { return ref_; }

 private:
  double ref_;
};

/// Central-difference Jacobian of the residuals with respect to the free
/// normalized parameters. Column j uses step step_scale * max(1e-6 |p_j|, 1e-9).
inline Eigen::MatrixXd residual_jacobian(ProjectionModel model, const Intrinsics& at, const Correspondences& data,
                                         const ParameterPacking& packing, const ParameterMask& mask,
                                         double step_scale = 1.0, double penalty = kDefaultPenaltyResidual) {
  const auto base = packing.pack(at);
  std::vector<int> free;
  for (int i = 0; i < kParameterCount; ++i) {
    if (mask[static_cast<std::size_t>(i)]) free.push_back(i);
  }
  Eigen::MatrixXd jac(2 * static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(free.size()));
  for (std::size_t col = 0; col < free.size(); ++col) {
    const auto idx = static_cast<std::size_t>(free[col]);
    const double h = step_scale * std::max(1e-6 * std::abs(base[idx]), 1e-9);
    auto plus = base;
    auto minus = base;
    plus[idx] += h;
    minus[idx] -= h;
    const Eigen::VectorXd rp = reprojection_residuals(model, packing.unpack(plus, at), data, penalty);
    const Eigen::VectorXd rm = reprojection_residuals(model, packing.unpack(minus, at), data, penalty);
    jac.col(static_cast<Eigen::Index>(col)) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

struct FitOptions {
  ParameterMask free = kAllParameters;
  int max_iterations = 200;
  double initial_lambda = 1e-3;
  double relative_cost_tolerance = 1e-12;
  double gradient_tolerance = 1e-10;
  double penalty = kDefaultPenaltyResidual;
};

struct FitReport {
  Intrinsics estimated;
  double rms_residual = 0.0;  // sqrt(sum of squared residuals / (2 N)), px
  /// estimate - truth per parameter name; filled by compare_to_truth.
  std::map<std::string, double> per_parameter_error;
  int iterations = 0;
  bool converged = false;
  std::string termination;
  /// Cost (sum of squared residuals) at the start and after every accepted step.
  std::vector<double> cost_history;
};

/// Levenberg-Marquardt over the free parameters, starting from `initial`.
/// Never throws on non-convergence; check FitReport::converged.
inline FitReport fit_parameters(ProjectionModel model, const Correspondences& data, const Intrinsics& initial,
                                const FitOptions& options = {}) {
  if (data.size() < 10) throw ConfigError("fitting needs at least 10 correspondences");
  const auto free_count = std::count(options.free.begin(), options.free.end(), true);
  if (free_count == 0) throw ConfigError("no free parameters");
  if (2 * static_cast<long>(data.size()) < free_count) throw ConfigError("fewer residuals than free parameters");
  validate(model, initial);

  const ParameterPacking packing(initial.c);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < options.free.size(); ++i) {
    if (options.free[i]) free.push_back(i);
  }

  Intrinsics current = initial;
  Eigen::VectorXd residual = reprojection_residuals(model, current, data, options.penalty);
  double cost = residual.squaredNorm();

  FitReport report;
  report.cost_history.push_back(cost);
  double lambda = options.initial_lambda;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    report.iterations = iter;
    if (cost == 0.0) {
      report.converged = true;
      report.termination = "zero cost";
      break;
    }
    const Eigen::MatrixXd jac = residual_jacobian(model, current, data, packing, options.free, 1.0, options.penalty);
    const Eigen::VectorXd gradient = jac.transpose() * residual;
    if (gradient.norm() < options.gradient_tolerance) {
      report.converged = true;
      report.termination = "gradient norm below tolerance";
      break;
    }
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    Eigen::VectorXd diag = normal.diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
      if (!(diag[i] > 0.0)) diag[i] = 1.0;
    }

    bool accepted = false;
    bool stalled = false;
    while (!accepted) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
      auto packed = packing.pack(current);
      for (std::size_t k = 0; k < free.size(); ++k) packed[free[k]] += step[static_cast<Eigen::Index>(k)];
      const Intrinsics trial = packing.unpack(packed, current);
      const Eigen::VectorXd trial_residual = reprojection_residuals(model, trial, data, options.penalty);
      const double trial_cost = trial_residual.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        const double relative_decrease = (cost - trial_cost) / cost;
        current = trial;
        residual = trial_residual;
        cost = trial_cost;
        report.cost_history.push_back(cost);
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (relative_decrease < options.relative_cost_tolerance) {
          report.converged = true;
          report.termination = "relative cost decrease below tolerance";
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          stalled = true;
          break;
        }
      }
    }
    if (stalled) {
      // No step along any damping reduces the cost: a numerical stationary point.
      report.converged = true;
      report.termination = "no cost-reducing step";
      break;
    }
    if (report.converged) break;
  }
  if (!report.converged) report.termination = "iteration limit reached";

  report.estimated = current;
  report.rms_residual = std::sqrt(cost / static_cast<double>(residual.size()));
  return report;
}

/// Starting point used by the calibration bench: free c scaled by 1.05, free
/// principal point moved by (+5, +5) px, free distortion terms zeroed. Frozen
/// parameters keep their true values.
inline Intrinsics perturbed_start(const Intrinsics& truth, const ParameterMask& free) {
  const ParameterPacking unit(1.0);
  auto p = unit.pack(truth);
  if (free[0]) p[0] *= 1.05;
  if (free[1]) p[1] += 5.0;
  if (free[2]) p[2] += 5.0;
  for (std::size_t i = 3; i < p.size(); ++i) {
    if (free[i]) p[i] = 0.0;
  }
  return unit.unpack(p, truth);
}

/// Fills per_parameter_error with estimate - truth in each parameter's own units.
inline void compare_to_truth(FitReport& report, const Intrinsics& truth) {
  const ParameterPacking unit(1.0);
  const auto est = unit.pack(report.estimated);
  const auto ref = unit.pack(truth);
  for (int i = 0; i < kParameterCount; ++i) {
    report.per_parameter_error[std::string(kParameterNames[static_cast<std::size_t>(i)])] =
        est[static_cast<std::size_t>(i)] - ref[static_cast<std::size_t>(i)];
  }
}

inline Json to_json(const FitReport& report, ProjectionModel model) {
  Json j;
  j["estimated"] = to_json(Lens{model, report.estimated});
  j["rms_residual"] = report.rms_residual;
  Json errors = Json::object();
  for (auto name : kParameterNames) {
    auto it = report.per_parameter_error.find(std::string(name));
    if (it != report.per_parameter_error.end()) errors[std::string(name)] = it->second;
  }
  j["per_parameter_error"] = errors;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["termination"] = report.termination;
  j["final_cost"] = report.cost_history.empty() ? 0.0 : report.cost_history.back();
  return j;
}

// ---------------------------------------------------------------------------
// CSV: x,y,z,x_img,y_img

inline std::string correspondences_to_csv(const Correspondences& data) {
  std::ostringstream out;
  out.precision(17);
  out << "x,y,z,x_img,y_img\n";
  for (const auto& c : data) {
    out << c.object_point.x << ',' << c.object_point.y << ',' << c.object_point.z << ',' << c.image_point.x << ','
        << c.image_point.y << '\n';
  }
  return out.str();
}

inline Correspondences correspondences_from_csv(std::istream& in) {
  Correspondences data;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("x,", 0) == 0) continue;
    std::array<double, 5> v{};
    std::istringstream fields(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(fields, cell, ',')) {
      if (n >= v.size()) throw ConfigError("CSV line " + std::to_string(line_no) + ": too many columns");
      try {
        v[n++] = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError("CSV line " + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
    }
    if (n != v.size()) throw ConfigError("CSV line " + std::to_string(line_no) + ": expected 5 columns");
    data.push_back({{v[0], v[1], v[2]}, {v[3], v[4]}, 0.0});
  }
  return data;
}

inline Correspondences read_correspondences_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return correspondences_from_csv(in);
}

}  // namespace fishsynth
