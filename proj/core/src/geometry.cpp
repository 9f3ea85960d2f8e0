#include "ipcnet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ipcnet/rng.hpp"

namespace ipcnet::geometry {

namespace {

Vec3 minus(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace

void TriangleMesh::validate() const {
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& face = faces[f];
    for (std::size_t idx : face) {
      if (idx >= vertices.size()) {
        throw std::invalid_argument("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                                    " but the mesh has " + std::to_string(vertices.size()));
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw std::invalid_argument("face " + std::to_string(f) + " repeats a vertex index");
    }
  }
  if (!face_labels.empty() && face_labels.size() != faces.size()) {
    throw std::invalid_argument(std::to_string(face_labels.size()) + " face labels for " +
                                std::to_string(faces.size()) + " faces");
  }
  for (int label : face_labels) {
    if (label < 0) throw std::invalid_argument("negative face label " + std::to_string(label));
  }
}

void LabeledPointCloud::validate() const {
  if (points.empty()) throw std::invalid_argument("point cloud is empty");
  if (labels.size() != points.size()) {
    throw std::invalid_argument(std::to_string(labels.size()) + " labels for " + std::to_string(points.size()) +
                                " points");
  }
  if (class_count < 1) throw std::invalid_argument("class count must be positive");
  for (int label : labels) {
    if (label < 0 || label >= class_count) {
      throw std::invalid_argument("label " + std::to_string(label) + " outside [0, " + std::to_string(class_count) +
                                  ")");
    }
  }
}

Vec3 bbox_center(std::span<const Vec3> points, CenterMode mode) {
  if (points.empty()) throw std::invalid_argument("bbox_center: empty point cloud");
  Vec3 lo = points[0], hi = points[0];
  for (const Vec3& p : points) {
    for (int j = 0; j < 3; ++j) {
      lo[j] = std::min(lo[j], p[j]);
      hi[j] = std::max(hi[j], p[j]);
    }
  }
  Vec3 c;
  for (int j = 0; j < 3; ++j)
    c[j] = mode == CenterMode::BoundingBoxMidpoint ? (hi[j] + lo[j]) * 0.5 : (hi[j] - lo[j]) * 0.5;
  return c;
}

std::vector<Vec3> unit_sphere_normalize(std::span<const Vec3> points, CenterMode mode) {
  const Vec3 c = bbox_center(points, mode);
  double radius = 0.0;
  for (const Vec3& p : points) radius = std::max(radius, norm(minus(p, c)));
  if (!(radius > 0.0)) throw std::invalid_argument("unit_sphere_normalize: all points coincide with the centre");
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) {
    const Vec3 d = minus(p, c);
    out.push_back({d[0] / radius, d[1] / radius, d[2] / radius});
  }
  return out;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * norm(cross(minus(b, a), minus(c, a)));
}

double equilaterality_ratio(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double perimeter = norm(minus(b, a)) + norm(minus(c, b)) + norm(minus(a, c));
  if (!(perimeter > 0.0)) throw std::invalid_argument("equilaterality_ratio: zero-perimeter triangle");
  const double ratio = 12.0 * std::sqrt(3.0) * triangle_area(a, b, c) / (perimeter * perimeter);
  return std::min(ratio, 1.0);
}

SamplingWeights sampling_weights(const TriangleMesh& mesh) {
  mesh.validate();
  SamplingWeights w;
  w.per_face.reserve(mesh.faces.size());
  w.cumulative.reserve(mesh.faces.size());
  double running = 0.0;
  for (const Face& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double area = triangle_area(a, b, c);
    const double weight = area > 0.0 ? area * equilaterality_ratio(a, b, c) : 0.0;
    w.per_face.push_back(weight);
    running += weight;
    w.cumulative.push_back(running);
  }
  return w;
}

std::size_t select_face(const SamplingWeights& weights, double u) {
  const double total = weights.total();
  if (!(total > 0.0)) throw std::invalid_argument("select_face: no face with positive sampling weight");
  const double target = u * total;
  auto it = std::upper_bound(weights.cumulative.begin(), weights.cumulative.end(), target);
  if (it == weights.cumulative.end()) {
    // u * total rounded up to total; take the last positively weighted face.
    it = std::lower_bound(weights.cumulative.begin(), weights.cumulative.end(), total);
  }
  return static_cast<std::size_t>(it - weights.cumulative.begin());
}

std::array<double, 3> barycentric_weights(double r1, double r2) {
  const double s = std::sqrt(r1);
  return {1.0 - s, s * (1.0 - r2), s * r2};
}

Vec3 triangle_point(const Vec3& a, const Vec3& b, const Vec3& c, double r1, double r2) {
  const auto [wa, wb, wc] = barycentric_weights(r1, r2);
  return {wa * a[0] + wb * b[0] + wc * c[0], wa * a[1] + wb * b[1] + wc * c[1], wa * a[2] + wb * b[2] + wc * c[2]};
}

LabeledPointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_surface: point count must be >= 1");
  const SamplingWeights weights = sampling_weights(mesh);
  if (!(weights.total() > 0.0)) throw std::invalid_argument("sample_surface: no face with positive sampling weight");

  LabeledPointCloud cloud;
  cloud.points.reserve(n);
  cloud.labels.reserve(n);
  int max_label = 0;
  for (int label : mesh.face_labels) max_label = std::max(max_label, label);
  cloud.class_count = max_label + 1;

  CounterRng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double r1 = rng.uniform();
    const double r2 = rng.uniform();
    const std::size_t f = select_face(weights, u);
    const Face& face = mesh.faces[f];
    cloud.points.push_back(triangle_point(mesh.vertices[face[0]], mesh.vertices[face[1]], mesh.vertices[face[2]], r1, r2));
    cloud.labels.push_back(mesh.face_labels.empty() ? 0 : mesh.face_labels[f]);
  }
  return cloud;
}

double max_norm(std::span<const Vec3> points) {
  double m = 0.0;
  for (const Vec3& p : points) m = std::max(m, norm(p));
  return m;
}

}  // namespace ipcnet::geometry
