#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ipcnet::geometry {

using Vec3 = std::array<double, 3>;
using Face = std::array<std::size_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  // One class id per face, or empty for an unlabeled mesh.
  std::vector<int> face_labels;

  // Index range, repeated-vertex faces and label count.
  void validate() const;
};

struct LabeledPointCloud {
  std::vector<Vec3> points;
  std::vector<int> labels;
  int class_count = 1;

  std::size_t size() const { return points.size(); }
  void validate() const;
};

struct SamplingWeights {
  std::vector<double> per_face;    // area x equilaterality ratio
  std::vector<double> cumulative;  // inclusive prefix sums of per_face

  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

enum class CenterMode {
  // (max + min) / 2 per axis.
  BoundingBoxMidpoint,
  // (max - min) / 2 per axis, the half extent. Only centres shapes whose
  // minimum corner sits at the origin; kept for auditing old pipelines.
  LiteralHalfExtent,
};

Vec3 bbox_center(std::span<const Vec3> points, CenterMode mode = CenterMode::BoundingBoxMidpoint);

// (X - centre) / max_i |X_i - centre|.
std::vector<Vec3> unit_sphere_normalize(std::span<const Vec3> points,
                                        CenterMode mode = CenterMode::BoundingBoxMidpoint);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

// 12 sqrt(3) area / perimeter^2: 1 for equilateral triangles, 0 for collinear
// ones, invariant under scaling.
double equilaterality_ratio(const Vec3& a, const Vec3& b, const Vec3& c);

SamplingWeights sampling_weights(const TriangleMesh& mesh);

// Binary search of u * total against the cumulative weights; u in [0, 1).
// Faces with zero weight are never returned.
std::size_t select_face(const SamplingWeights& weights, double u);

// Barycentric weights (1 - sqrt(r1), sqrt(r1)(1 - r2), sqrt(r1) r2) of a, b, c.
// r1 sets the distance from a towards edge bc, r2 the position along it.
std::array<double, 3> barycentric_weights(double r1, double r2);
Vec3 triangle_point(const Vec3& a, const Vec3& b, const Vec3& c, double r1, double r2);

// Draws n points: for each, a face u, then r1 and r2, all from one
// CounterRng(seed) stream in that order. Labels come from the face labels
// (0 for unlabeled meshes).
LabeledPointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

double max_norm(std::span<const Vec3> points);

}  // namespace ipcnet::geometry
