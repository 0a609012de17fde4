#include "crowdsd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "crowdsd/errors.hpp"

namespace crowdsd {
namespace {

struct Rect {
  double x0, y0, x1, y1;
};

bool overlaps(const Rect& a, const Rect& b, double gap) {
  return a.x0 - gap < b.x1 && b.x0 - gap < a.x1 && a.y0 - gap < b.y1 && b.y0 - gap < a.y1;
}

class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  double normal(double sd) { return std::normal_distribution<double>(0.0, sd)(engine_); }

 private:
  std::mt19937_64 engine_;
};

struct Object {
  Point2 center;
  double size;
};

std::vector<Point2> lattice(ClusterLayout layout, int rows, int cols, double spacing) {
  std::vector<Point2> pts;
  const double row_step = layout == ClusterLayout::Hex ? spacing * std::sqrt(3.0) / 2.0 : spacing;
  for (int r = 0; r < rows; ++r) {
    const double shift = (layout == ClusterLayout::Hex && r % 2 == 1) ? spacing / 2.0 : 0.0;
    for (int c = 0; c < cols; ++c) pts.push_back({c * spacing + shift, r * row_step});
  }
  return pts;
}

void render(PointScene& scene, const std::vector<Object>& objects,
            const std::vector<double>& amplitudes, const SceneSpec& spec, SceneRng& rng) {
  Grid image(spec.height, spec.width, 0.0);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const Object& o = objects[i];
    const double radius = o.size / 2.0;
    const int r0 = std::max(0, static_cast<int>(std::floor(o.center.y - radius)));
    const int r1 = std::min(spec.height - 1, static_cast<int>(std::ceil(o.center.y + radius)));
    const int c0 = std::max(0, static_cast<int>(std::floor(o.center.x - radius)));
    const int c1 = std::min(spec.width - 1, static_cast<int>(std::ceil(o.center.x + radius)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double d = distance({static_cast<double>(c), static_cast<double>(r)}, o.center);
        image(r, c) = std::max(image(r, c), blob_profile(d, o.size, amplitudes[i]));
      }
    }
  }
  for (double& v : image.values()) {
    const double noisy = std::clamp(v + (spec.noise > 0.0 ? rng.normal(spec.noise) : 0.0), 0.0, 1.0);
    v = std::round(noisy * 255.0) / 255.0;
  }
  scene.image = std::move(image);
}

}  // namespace

void SceneSpec::validate() const {
  if (width < 8 || height < 8) throw ConfigError("synth: image must be at least 8x8");
  if (min_clusters < 0 || max_clusters < min_clusters) throw ConfigError("synth: bad cluster count range");
  if (min_cluster_side < 1 || max_cluster_side < min_cluster_side) {
    throw ConfigError("synth: bad cluster side range");
  }
  if (!(spacing_min > 1.0) || spacing_max < spacing_min) throw ConfigError("synth: bad spacing range");
  for (double s : cluster_spacings) {
    if (!(s > 1.0)) throw ConfigError("synth: cluster spacings must exceed 1 px");
  }
  if (position_jitter < 0.0 || position_jitter >= 0.25) {
    throw ConfigError("synth: position jitter must lie in [0, 0.25)");
  }
  if (min_sparse < 0 || max_sparse < min_sparse) throw ConfigError("synth: bad sparse count range");
  if (!(sparse_clearance > 1.0)) throw ConfigError("synth: sparse clearance must exceed 1 px");
  if (sparse_size_min < 0.0 || sparse_size_max < sparse_size_min ||
      (sparse_size_max > 0.0 && !(sparse_size_min > 0.0))) {
    throw ConfigError("synth: bad sparse size range");
  }
  if (!(size_ratio > 0.0)) throw ConfigError("synth: size ratio must be positive");
  if (!(amplitude_min > 0.0) || amplitude_max < amplitude_min || amplitude_max > 1.0) {
    throw ConfigError("synth: amplitudes must lie in (0, 1]");
  }
  if (noise < 0.0) throw ConfigError("synth: noise must be >= 0");
  if (max_attempts < 1) throw ConfigError("synth: max attempts must be >= 1");
}

double blob_profile(double r, double size, double amplitude) noexcept {
  const double radius = size / 2.0;
  if (!(r < radius)) return 0.0;
  const double t = 1.0 - (r / radius) * (r / radius);
  return amplitude * t * t;
}

PointScene generate_scene(const SceneSpec& spec, const std::string& image_id) {
  spec.validate();
  SceneRng rng(spec.seed);
  PointScene scene;
  scene.image_id = image_id;
  scene.width = spec.width;
  scene.height = spec.height;

  std::vector<Object> objects;
  std::vector<Rect> occupied;

  const int clusters = spec.cluster_spacings.empty()
                           ? rng.integer(spec.min_clusters, spec.max_clusters)
                           : static_cast<int>(spec.cluster_spacings.size());
  for (int k = 0; k < clusters; ++k) {
    double spacing = spec.cluster_spacings.empty() ? rng.uniform(spec.spacing_min, spec.spacing_max)
                                                   : spec.cluster_spacings[static_cast<std::size_t>(k)];
    if (spec.snap_to_pixels && spec.layout != ClusterLayout::Hex) spacing = std::round(spacing);
    const int rows = rng.integer(spec.min_cluster_side, spec.max_cluster_side);
    const int cols = rng.integer(spec.min_cluster_side, spec.max_cluster_side);
    const double size = spacing * spec.size_ratio;
    const auto base = lattice(spec.layout, rows, cols, spacing);
    double ext_x = 0.0;
    double ext_y = 0.0;
    for (const Point2& p : base) {
      ext_x = std::max(ext_x, p.x);
      ext_y = std::max(ext_y, p.y);
    }
    const double jitter = spec.layout == ClusterLayout::Jitter ? spec.position_jitter * spacing : 0.0;
    const double margin = size / 2.0 + jitter + 1.0;

    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      const double hi_x = spec.width - 1 - margin - ext_x;
      const double hi_y = spec.height - 1 - margin - ext_y;
      if (hi_x < margin || hi_y < margin) break;
      double ox = rng.uniform(margin, hi_x);
      double oy = rng.uniform(margin, hi_y);
      if (spec.snap_to_pixels) {
        ox = std::round(ox);
        oy = std::round(oy);
      }
      const Rect rect{ox - margin, oy - margin, ox + ext_x + margin, oy + ext_y + margin};
      bool clash = false;
      for (const Rect& o : occupied) clash = clash || overlaps(rect, o, spec.cluster_gap);
      if (clash) continue;
      occupied.push_back(rect);
      for (const Point2& p : base) {
        double x = ox + p.x;
        double y = oy + p.y;
        if (jitter > 0.0) {
          x += rng.uniform(-jitter, jitter);
          y += rng.uniform(-jitter, jitter);
        }
        if (spec.snap_to_pixels) {
          x = std::round(x);
          y = std::round(y);
        }
        objects.push_back({{x, y}, size});
      }
      placed = true;
    }
    if (!placed) {
      throw InfeasibleSpec("cannot place cluster " + std::to_string(k) + " in scene " + image_id);
    }
  }

  const int sparse = rng.integer(spec.min_sparse, spec.max_sparse);
  for (int k = 0; k < sparse; ++k) {
    const double size = spec.sparse_size_max > 0.0
                            ? rng.uniform(spec.sparse_size_min, spec.sparse_size_max)
                            : rng.uniform(spec.spacing_min, spec.spacing_max) * spec.size_ratio;
    const double margin = size / 2.0 + 1.0;
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      double x = rng.uniform(margin, spec.width - 1 - margin);
      double y = rng.uniform(margin, spec.height - 1 - margin);
      if (spec.snap_to_pixels) {
        x = std::round(x);
        y = std::round(y);
      }
      bool clear = true;
      for (const Object& o : objects) {
        clear = clear && distance(o.center, {x, y}) >= spec.sparse_clearance;
      }
      if (!clear) continue;
      objects.push_back({{x, y}, size});
      placed = true;
    }
    if (!placed) {
      throw InfeasibleSpec("cannot place sparse object " + std::to_string(k) + " in scene " +
                           image_id);
    }
  }

  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      if (!(distance(objects[i].center, objects[j].center) > 1.0)) {
        throw InfeasibleSpec("objects closer than one pixel in scene " + image_id);
      }
    }
  }

  std::vector<double> amplitudes;
  std::vector<Box> boxes;
  for (const Object& o : objects) {
    scene.points.push_back(o.center);
    boxes.emplace_back(o.center, o.size);
    amplitudes.push_back(rng.uniform(spec.amplitude_min, spec.amplitude_max));
  }
  scene.gt_boxes = std::move(boxes);
  render(scene, objects, amplitudes, spec, rng);
  return scene;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept {
  // splitmix64 finalizer over a golden-ratio stride.
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<PointScene> generate_dataset(SceneSpec spec, std::size_t count, std::uint64_t seed) {
  std::vector<PointScene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    spec.seed = derive_seed(seed, i);
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%04zu", i);
    scenes.push_back(generate_scene(spec, id));
  }
  return scenes;
}

DatasetSplit split_dataset(std::vector<PointScene> scenes) {
  const std::size_t n = scenes.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = (n - n_train) / 2;
  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? split.train : (i < n_train + n_val ? split.val : split.test);
    dst.push_back(std::move(scenes[i]));
  }
  return split;
}

}  // namespace crowdsd
