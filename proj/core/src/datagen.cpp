#include "ipcnet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ipcnet/mesh_io.hpp"
#include "ipcnet/rng.hpp"

namespace ipcnet::datagen {

namespace fs = std::filesystem;
using geometry::TriangleMesh;
using geometry::Vec3;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }

// Orthonormal frame; local (x, y, z) maps to origin + x ex + y ey + z ez.
struct Frame {
  Vec3 origin{0, 0, 0};
  Vec3 ex{1, 0, 0}, ey{0, 1, 0}, ez{0, 0, 1};

  Vec3 operator()(double x, double y, double z) const { return origin + x * ex + y * ey + z * ez; }
};

Frame along_x(const Vec3& origin) { return {origin, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}}; }
Frame along_y(const Vec3& origin) { return {origin, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}}; }
Frame along_z(const Vec3& origin) { return {origin, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}; }

class MeshBuilder {
 public:
  explicit MeshBuilder(double edge) : edge_(edge) {}

  // Parametric patch over [0,1]^2; `wrap_u` closes the u direction.
  template <typename F>
  void surface(int label, std::size_t nu, std::size_t nv, bool wrap_u, F&& f) {
    const std::size_t base = mesh_.vertices.size();
    const std::size_t cols = wrap_u ? nu : nu + 1;
    for (std::size_t j = 0; j <= nv; ++j)
      for (std::size_t i = 0; i < cols; ++i)
        mesh_.vertices.push_back(f(static_cast<double>(i) / nu, static_cast<double>(j) / nv));
    auto idx = [&](std::size_t i, std::size_t j) { return base + j * cols + (i % cols); };
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nu; ++i) {
        const std::size_t a = idx(i, j), b = idx(i + 1, j), c = idx(i + 1, j + 1), d = idx(i, j + 1);
        mesh_.faces.push_back({a, b, c});
        mesh_.faces.push_back({a, c, d});
        mesh_.face_labels.push_back(label);
        mesh_.face_labels.push_back(label);
      }
  }

  std::size_t segments(double length, std::size_t minimum = 1) const {
    return std::max<std::size_t>(minimum, static_cast<std::size_t>(std::ceil(length / edge_)));
  }

  // Side of a (possibly tapered) tube along the frame's z axis.
  void tube(int label, const Frame& fr, double r0, double r1, double length) {
    const double r = std::max(r0, r1);
    surface(label, segments(2 * kPi * r, 8), segments(length), true, [&](double u, double v) {
      const double rad = r0 + (r1 - r0) * v;
      return fr(rad * std::cos(2 * kPi * u), rad * std::sin(2 * kPi * u), length * v);
    });
  }

  void disk(int label, const Frame& fr, double radius, double z) {
    surface(label, segments(2 * kPi * radius, 8), segments(radius), true, [&](double u, double v) {
      return fr(radius * v * std::cos(2 * kPi * u), radius * v * std::sin(2 * kPi * u), z);
    });
  }

  void cylinder(int label, const Frame& fr, double radius, double length) {
    tube(label, fr, radius, radius, length);
    disk(label, fr, radius, 0.0);
    disk(label, fr, radius, length);
  }

  // Axis-aligned box given by centre and half extents, in frame axes.
  void box(int label, const Frame& fr, const Vec3& c, const Vec3& h) {
    for (int axis = 0; axis < 3; ++axis) {
      const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
      for (double side : {-1.0, 1.0}) {
        surface(label, segments(2 * h[a1]), segments(2 * h[a2]), false, [&](double u, double v) {
          Vec3 p;
          p[axis] = c[axis] + side * h[axis];
          p[a1] = c[a1] + (2 * u - 1) * h[a1];
          p[a2] = c[a2] + (2 * v - 1) * h[a2];
          return fr(p[0], p[1], p[2]);
        });
      }
    }
  }

  void ellipsoid(int label, const Frame& fr, const Vec3& c, const Vec3& r) {
    const double rmax = std::max({r[0], r[1], r[2]});
    surface(label, segments(2 * kPi * rmax, 8), segments(kPi * rmax, 4), true, [&](double u, double v) {
      const double phi = 2 * kPi * u, theta = kPi * v;
      return fr(c[0] + r[0] * std::sin(theta) * std::cos(phi), c[1] + r[1] * std::sin(theta) * std::sin(phi),
                c[2] + r[2] * std::cos(theta));
    });
  }

  TriangleMesh take() { return std::move(mesh_); }

 private:
  double edge_;
  TriangleMesh mesh_;
};

struct Draw {
  CounterRng& rng;
  double jitter;

  // base * (1 + jitter * U[-1, 1])
  double operator()(double base) { return base * (1.0 + jitter * rng.uniform(-1.0, 1.0)); }
};

TriangleMesh rocket(Draw& d, double s) {
  MeshBuilder b(0.07 * s);
  const double radius = d(0.2) * s, height = d(2.0) * s, nose = d(0.6) * s;
  const double span = d(0.35) * s, fin_h = d(0.55) * s, thick = 0.03 * s;
  const int fins = d.rng.uniform() < 0.5 ? 3 : 4;
  const double phase = d.rng.uniform(0.0, 2 * kPi);
  const Frame up = along_z({0, 0, 0});
  b.tube(0, up, radius, radius, height);
  b.disk(0, up, radius, 0.0);
  b.tube(1, along_z({0, 0, height}), radius, 0.0, nose);
  for (int f = 0; f < fins; ++f) {
    const double a = phase + 2 * kPi * f / fins;
    const Frame radial{{0, 0, 0}, {std::cos(a), std::sin(a), 0}, {-std::sin(a), std::cos(a), 0}, {0, 0, 1}};
    const double inner = 0.9 * radius;
    b.box(2, radial, {inner + span / 2, 0, fin_h / 2}, {span / 2, thick / 2, fin_h / 2});
  }
  return b.take();
}

TriangleMesh aircraft(Draw& d, double s) {
  MeshBuilder b(0.08 * s);
  const double length = d(3.0) * s, body_r = d(0.18) * s;
  const double span = d(2.8) * s, chord = d(0.6) * s, wing_x = d(0.1) * s;
  const double eng_r = d(0.09) * s, eng_len = d(0.45) * s;
  const Frame world = along_z({0, 0, 0});
  b.ellipsoid(0, world, {0, 0, 0}, {length / 2, body_r, body_r});
  b.box(3, world, {wing_x, 0, 0}, {chord / 2, span / 2, 0.03 * s});
  for (double side : {-1.0, 1.0}) {
    b.cylinder(1, along_x({wing_x - eng_len / 3, side * span * 0.3, -0.16 * s}), eng_r, eng_len);
  }
  const double tail_x = -length / 2 + 0.2 * s;
  b.box(2, world, {tail_x, 0, d(0.3) * s}, {0.2 * s, 0.02 * s, d(0.28) * s});
  b.box(2, world, {tail_x - 0.05 * s, 0, 0.05 * s}, {0.15 * s, d(0.5) * s, 0.02 * s});
  return b.take();
}

TriangleMesh car(Draw& d, double s) {
  MeshBuilder b(0.07 * s);
  const double half_len = d(1.0) * s, half_w = d(0.45) * s, chassis_h = d(0.2) * s;
  const double wheel_r = d(0.22) * s, wheel_w = 0.15 * s;
  const double base_z = wheel_r;
  const Frame world = along_z({0, 0, 0});
  b.box(0, world, {0, 0, base_z + chassis_h}, {half_len, half_w, chassis_h});
  b.box(0, world, {-0.15 * half_len, 0, base_z + 2 * chassis_h + d(0.2) * s}, {0.5 * half_len, 0.9 * half_w, d(0.2) * s});
  const double hood_len = d(0.35) * half_len;
  b.box(1, world, {half_len - hood_len, 0, base_z + 2 * chassis_h + 0.02 * s}, {hood_len, 0.95 * half_w, 0.02 * s});
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0}) {
      const double y0 = sy > 0 ? half_w : -half_w - wheel_w;
      b.cylinder(2, along_y({sx * 0.65 * half_len, y0, wheel_r}), wheel_r, wheel_w);
    }
  return b.take();
}

TriangleMesh motorbike(Draw& d, double s) {
  MeshBuilder b(0.06 * s);
  const double wheel_r = d(0.35) * s, wheel_w = 0.1 * s, base = d(0.75) * s;
  const Frame world = along_z({0, 0, 0});
  for (double sx : {-1.0, 1.0}) b.cylinder(4, along_y({sx * base, -wheel_w / 2, wheel_r}), wheel_r, wheel_w);
  const double frame_z = wheel_r + d(0.15) * s;
  b.box(0, world, {0, 0, frame_z}, {0.55 * s, 0.08 * s, 0.12 * s});
  b.ellipsoid(2, world, {0.2 * s, 0, frame_z + 0.25 * s}, {d(0.25) * s, 0.14 * s, 0.12 * s});
  b.box(3, world, {-0.3 * s, 0, frame_z + 0.2 * s}, {d(0.28) * s, 0.12 * s, 0.04 * s});
  const double bar_z = frame_z + d(0.5) * s;
  b.cylinder(1, along_y({0.55 * s, -0.35 * s, bar_z}), 0.04 * s, 0.7 * s);
  b.cylinder(1, along_z({0.55 * s, 0, frame_z + 0.1 * s}), 0.035 * s, bar_z - frame_z - 0.1 * s);
  return b.take();
}

bool parts_well_represented(const TriangleMesh& mesh, int classes, double min_fraction) {
  const auto w = geometry::sampling_weights(mesh);
  std::vector<double> per(classes, 0.0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) per[mesh.face_labels[f]] += w.per_face[f];
  return std::all_of(per.begin(), per.end(), [&](double x) { return x >= min_fraction * w.total(); });
}

}  // namespace

Family parse_family(const std::string& name) {
  if (name == "rocket") return Family::Rocket;
  if (name == "aircraft") return Family::Aircraft;
  if (name == "car") return Family::Car;
  if (name == "motorbike") return Family::Motorbike;
  throw std::invalid_argument("unknown shape family '" + name + "' (rocket, aircraft, car, motorbike)");
}

std::string family_name(Family f) {
  switch (f) {
    case Family::Rocket: return "rocket";
    case Family::Aircraft: return "aircraft";
    case Family::Car: return "car";
    case Family::Motorbike: return "motorbike";
  }
  return "?";
}

const std::vector<std::string>& family_labels(Family f) {
  static const std::vector<std::string> rocket{"Body", "Nose", "Fin"};
  static const std::vector<std::string> aircraft{"Body", "Engine", "Tail", "Wing"};
  static const std::vector<std::string> car{"Body", "Hood", "Wheel"};
  static const std::vector<std::string> motorbike{"Body", "Handle", "Gas-tank", "Seat", "Wheel"};
  switch (f) {
    case Family::Rocket: return rocket;
    case Family::Aircraft: return aircraft;
    case Family::Car: return car;
    case Family::Motorbike: return motorbike;
  }
  return rocket;
}

ShapeSpec ShapeSpec::for_family(Family f) {
  ShapeSpec s;
  s.family = f;
  return s;
}

TriangleMesh gen_shape(const ShapeSpec& spec, std::uint64_t seed) {
  if (!(spec.min_scale > 0.0) || spec.max_scale < spec.min_scale) throw std::invalid_argument("gen_shape: bad scale range");
  if (spec.jitter < 0.0 || spec.jitter >= 1.0) throw std::invalid_argument("gen_shape: jitter must lie in [0, 1)");
  const int classes = family_class_count(spec.family);
  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    CounterRng rng(seed, static_cast<std::uint64_t>(attempt));
    Draw draw{rng, spec.jitter};
    const double scale = rng.uniform(spec.min_scale, spec.max_scale);
    TriangleMesh mesh;
    switch (spec.family) {
      case Family::Rocket: mesh = rocket(draw, scale); break;
      case Family::Aircraft: mesh = aircraft(draw, scale); break;
      case Family::Car: mesh = car(draw, scale); break;
      case Family::Motorbike: mesh = motorbike(draw, scale); break;
    }
    mesh.validate();
    if (parts_well_represented(mesh, classes, spec.min_part_fraction)) return mesh;
  }
  throw std::runtime_error("gen_shape: no valid " + family_name(spec.family) + " after " +
                           std::to_string(spec.max_attempts) + " draws (seed " + std::to_string(seed) + ")");
}

std::vector<geometry::LabeledPointCloud> gen_dataset(const ShapeSpec& spec, std::size_t count, std::size_t points,
                                                     std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("gen_dataset: count must be >= 1");
  std::vector<geometry::LabeledPointCloud> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const TriangleMesh mesh = gen_shape(spec, CounterRng::derive(seed, 2 * i));
    geometry::LabeledPointCloud cloud = geometry::sample_surface(mesh, points, CounterRng::derive(seed, 2 * i + 1));
    cloud.points = geometry::unit_sphere_normalize(cloud.points);
    cloud.class_count = family_class_count(spec.family);
    out.push_back(std::move(cloud));
  }
  return out;
}

void write_dataset(const fs::path& root, const Dataset& dataset) {
  if (dataset.clouds.size() != dataset.names.size()) throw std::invalid_argument("write_dataset: one name per cloud required");
  fs::create_directories(root);
  std::ofstream manifest(root / "manifest.txt", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write " + (root / "manifest.txt").string());
  manifest << "# family=" << dataset.family << " classes=" << dataset.class_count << '\n';
  for (std::size_t i = 0; i < dataset.clouds.size(); ++i) {
    const fs::path pts = fs::path(dataset.family) / "points" / (dataset.names[i] + ".pts");
    const fs::path seg = fs::path(dataset.family) / "labels" / (dataset.names[i] + ".seg");
    io::write_pts(root / pts, dataset.clouds[i].points);
    io::write_seg(root / seg, dataset.clouds[i].labels);
    manifest << pts.generic_string() << ' ' << seg.generic_string() << '\n';
  }
}

Dataset read_dataset(const fs::path& root, const std::string& family, int label_base) {
  Dataset ds;
  ds.family = family;
  std::vector<std::pair<fs::path, fs::path>> pairs;
  const fs::path manifest = root / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        std::istringstream hs(line.substr(1));
        std::string tok;
        while (hs >> tok) {
          if (tok.rfind("family=", 0) == 0 && ds.family.empty()) ds.family = tok.substr(7);
          if (tok.rfind("classes=", 0) == 0) ds.class_count = std::stoi(tok.substr(8));
        }
        continue;
      }
      std::istringstream ls(line);
      std::string a, b;
      if (!(ls >> a >> b)) throw io::InputError(manifest.string() + ": malformed line '" + line + "'");
      if (!family.empty() && fs::path(a).begin()->string() != family) continue;
      pairs.emplace_back(root / a, root / b);
    }
  } else {
    std::vector<fs::path> family_dirs;
    if (!family.empty()) {
      family_dirs.push_back(root / family);
    } else if (fs::exists(root / "points")) {
      family_dirs.push_back(root);
    } else if (fs::is_directory(root)) {
      for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) family_dirs.push_back(e.path());
      std::sort(family_dirs.begin(), family_dirs.end());
    }
    for (const fs::path& dir : family_dirs) {
      if (!fs::is_directory(dir / "points")) continue;
      const fs::path labels = fs::is_directory(dir / "labels") ? dir / "labels" : dir / "points_label";
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir / "points"))
        if (e.path().extension() == ".pts") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const fs::path& p : files) pairs.emplace_back(p, labels / (p.stem().string() + ".seg"));
      if (ds.family.empty()) ds.family = dir.filename().string();
    }
  }
  if (pairs.empty()) throw io::InputError("no point clouds found under " + root.string());

  int max_label = -1;
  for (const auto& [pts, seg] : pairs) {
    geometry::LabeledPointCloud cloud;
    cloud.points = io::read_pts(pts);
    cloud.labels = io::read_seg(seg);
    for (int& l : cloud.labels) {
      l -= label_base;
      max_label = std::max(max_label, l);
    }
    ds.names.push_back(pts.stem().string());
    ds.clouds.push_back(std::move(cloud));
  }
  if (ds.class_count == 0) ds.class_count = max_label + 1;
  for (std::size_t i = 0; i < ds.clouds.size(); ++i) {
    ds.clouds[i].class_count = ds.class_count;
    try {
      ds.clouds[i].validate();
    } catch (const std::invalid_argument& e) {
      throw io::InputError(pairs[i].first.string() + ": " + e.what());
    }
  }
  return ds;
}

}  // namespace ipcnet::datagen
