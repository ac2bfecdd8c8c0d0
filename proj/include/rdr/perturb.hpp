#pragma once

// The perturbation family: five degradation kernels at three intensity
// levels, plus the per-question view plan that picks which (kind, intensity)
// cells a question gets. All kernels are pure functions of
// (image, parameters, random stream) and preserve image dimensions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "rdr/error.hpp"
#include "rdr/image.hpp"
#include "rdr/rng.hpp"

namespace rdr {

enum class PerturbationKind {
  gaussian_noise,
  salt_pepper,
  motion_blur,
  occlusion,
  rotation,
};

inline constexpr PerturbationKind kAllKinds[5] = {
    PerturbationKind::gaussian_noise, PerturbationKind::salt_pepper,
    PerturbationKind::motion_blur, PerturbationKind::occlusion,
    PerturbationKind::rotation};

enum class IntensityLevel { low, medium, high };

inline constexpr IntensityLevel kAllLevels[3] = {
    IntensityLevel::low, IntensityLevel::medium, IntensityLevel::high};

inline const char* to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::gaussian_noise: return "gaussian_noise";
    case PerturbationKind::salt_pepper: return "salt_pepper";
    case PerturbationKind::motion_blur: return "motion_blur";
    case PerturbationKind::occlusion: return "occlusion";
    case PerturbationKind::rotation: return "rotation";
  }
  return "?";
}

inline const char* to_string(IntensityLevel l) {
  switch (l) {
    case IntensityLevel::low: return "low";
    case IntensityLevel::medium: return "medium";
    case IntensityLevel::high: return "high";
  }
  return "?";
}

inline PerturbationKind kind_from_string(const std::string& s) {
  for (auto k : kAllKinds) {
    if (s == to_string(k)) return k;
  }
  throw ValidationError("unknown perturbation kind: " + s);
}

inline IntensityLevel level_from_string(const std::string& s) {
  for (auto l : kAllLevels) {
    if (s == to_string(l)) return l;
  }
  throw ValidationError("unknown intensity level: " + s);
}

// Numeric parameters per (kind, level). The defaults span mild to severe
// while keeping diagrams legible; everything is overridable from config.
struct IntensityTable {
  double gaussian_sigma[3] = {10.0, 20.0, 35.0};   // gray levels
  double salt_pepper_p[3] = {0.02, 0.05, 0.10};    // pixel fraction
  int motion_blur_len[3] = {5, 9, 15};             // px, odd
  double occlusion_area[3] = {0.05, 0.10, 0.20};   // fraction of W*H
  double rotation_deg[3] = {2.0, 5.0, 8.0};        // |theta|

  static IntensityTable defaults() { return {}; }

  // All parameters zero: every kernel becomes the identity.
  static IntensityTable zero() {
    IntensityTable t;
    for (int i = 0; i < 3; ++i) {
      t.gaussian_sigma[i] = 0.0;
      t.salt_pepper_p[i] = 0.0;
      t.motion_blur_len[i] = 1;
      t.occlusion_area[i] = 0.0;
      t.rotation_deg[i] = 0.0;
    }
    return t;
  }

  void validate() const {
    const auto increasing = [](auto a, auto b, auto c) {
      return a < b && b < c;
    };
    if (!increasing(gaussian_sigma[0], gaussian_sigma[1], gaussian_sigma[2]) ||
        !increasing(salt_pepper_p[0], salt_pepper_p[1], salt_pepper_p[2]) ||
        !increasing(motion_blur_len[0], motion_blur_len[1], motion_blur_len[2]) ||
        !increasing(occlusion_area[0], occlusion_area[1], occlusion_area[2]) ||
        !increasing(rotation_deg[0], rotation_deg[1], rotation_deg[2])) {
      throw ConfigError(
          "intensity table: parameters must strictly increase low->high");
    }
    for (int i = 0; i < 3; ++i) {
      if (gaussian_sigma[i] < 0) throw ConfigError("intensity table: sigma < 0");
      if (salt_pepper_p[i] < 0 || salt_pepper_p[i] > 1) {
        throw ConfigError("intensity table: salt_pepper p outside [0,1]");
      }
      if (motion_blur_len[i] < 1 || motion_blur_len[i] % 2 == 0) {
        throw ConfigError("intensity table: motion_blur length must be odd >= 1");
      }
      if (occlusion_area[i] < 0 || occlusion_area[i] >= 1) {
        throw ConfigError("intensity table: occlusion area outside [0,1)");
      }
      if (rotation_deg[i] < 0 || rotation_deg[i] >= 45) {
        throw ConfigError("intensity table: rotation outside [0,45)");
      }
    }
  }

  nlohmann::json to_json() const {
    const auto row3 = [](auto const* v) {
      return nlohmann::json{{"low", v[0]}, {"medium", v[1]}, {"high", v[2]}};
    };
    return {{"gaussian_noise", row3(gaussian_sigma)},
            {"salt_pepper", row3(salt_pepper_p)},
            {"motion_blur", row3(motion_blur_len)},
            {"occlusion", row3(occlusion_area)},
            {"rotation", row3(rotation_deg)}};
  }

  static IntensityTable from_json(const nlohmann::json& j) {
    IntensityTable t;
    const auto fill = [&j](const char* key, auto* out) {
      const auto& row = j.at(key);
      out[0] = row.at("low");
      out[1] = row.at("medium");
      out[2] = row.at("high");
    };
    fill("gaussian_noise", t.gaussian_sigma);
    fill("salt_pepper", t.salt_pepper_p);
    fill("motion_blur", t.motion_blur_len);
    fill("occlusion", t.occlusion_area);
    fill("rotation", t.rotation_deg);
    t.validate();
    return t;
  }
};

// One degradation instruction. View index 0 is reserved for the clean
// original, so specs always carry view_index >= 1.
struct PerturbationSpec {
  PerturbationKind kind;
  IntensityLevel intensity;
  StreamLineage lineage;
};

struct ViewPlan {
  std::string question_id;
  std::vector<PerturbationSpec> specs;
};

// Deterministic plan: the question's stream (lineage view 0) first picks one
// intensity per kind in shuffled kind order, guaranteeing type coverage, then
// fills the remaining views by sampling the unused (kind, intensity) cells
// without replacement. Order of specs is the draw order.
inline ViewPlan build_view_plan(const std::string& question_id,
                                std::uint64_t master_seed, int n_views) {
  if (n_views < 5 || n_views > 15) {
    throw ConfigError("n_views must be in [5, 15], got " +
                      std::to_string(n_views));
  }
  RandomStream stream = derive_stream(master_seed, question_id, 0);

  std::vector<PerturbationKind> kinds(std::begin(kAllKinds), std::end(kAllKinds));
  for (std::size_t i = kinds.size(); i > 1; --i) {
    std::swap(kinds[i - 1], kinds[stream.next_below(i)]);
  }

  ViewPlan plan;
  plan.question_id = question_id;
  bool used[5][3] = {};
  for (auto kind : kinds) {
    const auto level = kAllLevels[stream.next_below(3)];
    used[static_cast<int>(kind)][static_cast<int>(level)] = true;
    plan.specs.push_back({kind, level, {}});
  }

  std::vector<std::pair<PerturbationKind, IntensityLevel>> rest;
  for (auto kind : kAllKinds) {
    for (auto level : kAllLevels) {
      if (!used[static_cast<int>(kind)][static_cast<int>(level)]) {
        rest.emplace_back(kind, level);
      }
    }
  }
  for (std::size_t i = rest.size(); i > 1; --i) {
    std::swap(rest[i - 1], rest[stream.next_below(i)]);
  }
  for (int i = 0; i < n_views - 5; ++i) {
    plan.specs.push_back({rest[i].first, rest[i].second, {}});
  }

  for (std::size_t i = 0; i < plan.specs.size(); ++i) {
    plan.specs[i].lineage = {master_seed, question_id,
                             static_cast<std::uint32_t>(i + 1)};
  }
  return plan;
}

// --- kernels ---------------------------------------------------------------

inline std::uint8_t clamp_u8(long v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
}

// i.i.d. N(0, sigma^2) per channel, clamped and rounded to nearest.
inline Image kernel_gaussian_noise(const Image& img, double sigma,
                                   RandomStream& rng) {
  if (sigma < 0) throw ConfigError("gaussian_noise: sigma < 0");
  Image out = img;
  if (sigma == 0) return out;
  double spare = 0;
  bool has_spare = false;
  for (auto& v : out.pixels) {
    double z;
    if (has_spare) {
      z = spare;
      has_spare = false;
    } else {
      auto [a, b] = rng.next_normal_pair();
      z = a;
      spare = b;
      has_spare = true;
    }
    v = clamp_u8(std::lround(static_cast<double>(v) + sigma * z));
  }
  return out;
}

// Each pixel independently hit with probability p; hits go black or white
// (all three channels) with equal probability.
inline Image kernel_salt_pepper(const Image& img, double p, RandomStream& rng) {
  if (p < 0 || p > 1) throw ConfigError("salt_pepper: p outside [0,1]");
  Image out = img;
  if (p == 0) return out;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      if (rng.next_double() < p) {
        const std::uint8_t v = rng.next_bool() ? 255 : 0;
        out.set(x, y, v, v, v);
      }
    }
  }
  return out;
}

// Normalized 1-D line kernel of `length` taps at the given angle; borders
// replicate edge pixels so constant images are fixed points. Integer sums
// with half-up rounding keep the result exact.
inline Image motion_blur_at_angle(const Image& img, int length,
                                  double angle_deg) {
  if (length < 1 || length % 2 == 0) {
    throw ConfigError("motion_blur: length must be odd >= 1");
  }
  if (length > std::min(img.width, img.height)) {
    throw DegenerateInputError("motion_blur: length " + std::to_string(length) +
                               " exceeds image extent " +
                               std::to_string(std::min(img.width, img.height)));
  }
  if (length == 1) return img;

  const double rad = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const int half = (length - 1) / 2;
  std::vector<std::pair<int, int>> taps;
  taps.reserve(length);
  for (int t = -half; t <= half; ++t) {
    taps.emplace_back(static_cast<int>(std::lround(t * c)),
                      static_cast<int>(std::lround(t * s)));
  }

  Image out = Image::create(img.width, img.height);
  const long n = length;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      long sum[3] = {0, 0, 0};
      for (const auto& [dx, dy] : taps) {
        const int sx = std::clamp(x + dx, 0, img.width - 1);
        const int sy = std::clamp(y + dy, 0, img.height - 1);
        const std::size_t o = img.offset(sx, sy);
        sum[0] += img.pixels[o];
        sum[1] += img.pixels[o + 1];
        sum[2] += img.pixels[o + 2];
      }
      out.set(x, y, static_cast<std::uint8_t>((2 * sum[0] + n) / (2 * n)),
              static_cast<std::uint8_t>((2 * sum[1] + n) / (2 * n)),
              static_cast<std::uint8_t>((2 * sum[2] + n) / (2 * n)));
    }
  }
  return out;
}

inline Image kernel_motion_blur(const Image& img, int length,
                                RandomStream& rng) {
  const double angle = rng.next_in(0.0, 180.0);
  return motion_blur_at_angle(img, length, angle);
}

struct OcclusionRect {
  int x0 = 0, y0 = 0, w = 0, h = 0;  // w == 0 means no occlusion
};

// Rectangle geometry: aspect uniform in [0.5, 2], area matching the target
// fraction up to rounding, position uniform among valid placements. Draw
// order is aspect, then y position, then x position.
inline OcclusionRect occlusion_geometry(int width, int height,
                                        double area_fraction,
                                        RandomStream& rng) {
  if (area_fraction < 0 || area_fraction >= 1) {
    throw ConfigError("occlusion: area_fraction outside [0,1)");
  }
  const long area = std::lround(area_fraction * width * height);
  if (area == 0) return {};
  if (width < 4 || height < 4) {
    throw DegenerateInputError("occlusion: image smaller than 4x4");
  }
  const double aspect = rng.next_in(0.5, 2.0);  // w / h
  int h = static_cast<int>(std::lround(std::sqrt(static_cast<double>(area) / aspect)));
  h = std::clamp(h, 1, height);
  int w = static_cast<int>(std::lround(static_cast<double>(area) / h));
  w = std::clamp(w, 1, width);
  OcclusionRect rect;
  rect.w = w;
  rect.h = h;
  rect.y0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(height - h + 1)));
  rect.x0 = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(width - w + 1)));
  return rect;
}

inline constexpr std::uint8_t kOcclusionFill[3] = {128, 128, 128};

inline Image kernel_occlusion(const Image& img, double area_fraction,
                              RandomStream& rng,
                              OcclusionRect* rect_out = nullptr) {
  const OcclusionRect rect =
      occlusion_geometry(img.width, img.height, area_fraction, rng);
  if (rect_out) *rect_out = rect;
  Image out = img;
  for (int y = rect.y0; y < rect.y0 + rect.h; ++y) {
    for (int x = rect.x0; x < rect.x0 + rect.w; ++x) {
      out.set(x, y, kOcclusionFill[0], kOcclusionFill[1], kOcclusionFill[2]);
    }
  }
  return out;
}

// Rotation about the image center, bilinear interpolation, canvas unchanged,
// out-of-source samples white (diagrams are white-background).
inline Image rotate_about_center(const Image& img, double angle_deg) {
  if (angle_deg == 0.0) return img;
  const double rad = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const double cx = (img.width - 1) / 2.0;
  const double cy = (img.height - 1) / 2.0;

  Image out = Image::create(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // inverse map: rotate by -angle
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      if (sx < 0 || sy < 0 || sx > img.width - 1 || sy > img.height - 1) {
        out.set(x, y, 255, 255, 255);
        continue;
      }
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const int y1 = std::min(y0 + 1, img.height - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      std::uint8_t rgb[3];
      for (int ch = 0; ch < 3; ++ch) {
        const double v00 = img.pixels[img.offset(x0, y0) + ch];
        const double v10 = img.pixels[img.offset(x1, y0) + ch];
        const double v01 = img.pixels[img.offset(x0, y1) + ch];
        const double v11 = img.pixels[img.offset(x1, y1) + ch];
        const double v = v00 * (1 - fx) * (1 - fy) + v10 * fx * (1 - fy) +
                         v01 * (1 - fx) * fy + v11 * fx * fy;
        rgb[ch] = clamp_u8(std::lround(v));
      }
      out.set(x, y, rgb[0], rgb[1], rgb[2]);
    }
  }
  return out;
}

inline Image kernel_rotation(const Image& img, double max_degrees,
                             RandomStream& rng) {
  if (max_degrees < 0 || max_degrees >= 45) {
    throw ConfigError("rotation: max_degrees outside [0,45)");
  }
  if (max_degrees == 0) return img;
  const double theta = rng.next_bool() ? max_degrees : -max_degrees;
  return rotate_about_center(img, theta);
}

// Dispatches the spec's kind to its kernel with the table's parameters.
// Pure function of (img, spec, table): the stream is re-derived from the
// spec's lineage on every call.
inline Image apply_perturbation(const Image& img, const PerturbationSpec& spec,
                                const IntensityTable& table) {
  RandomStream rng = derive_stream(spec.lineage.master_seed,
                                   spec.lineage.question_id,
                                   spec.lineage.view_index);
  const int lvl = static_cast<int>(spec.intensity);
  switch (spec.kind) {
    case PerturbationKind::gaussian_noise:
      return kernel_gaussian_noise(img, table.gaussian_sigma[lvl], rng);
    case PerturbationKind::salt_pepper:
      return kernel_salt_pepper(img, table.salt_pepper_p[lvl], rng);
    case PerturbationKind::motion_blur:
      return kernel_motion_blur(img, table.motion_blur_len[lvl], rng);
    case PerturbationKind::occlusion:
      return kernel_occlusion(img, table.occlusion_area[lvl], rng);
    case PerturbationKind::rotation:
      return kernel_rotation(img, table.rotation_deg[lvl], rng);
  }
  throw ConfigError("apply_perturbation: unknown kind");
}

}  // namespace rdr
