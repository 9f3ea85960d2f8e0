#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipcnet/geometry.hpp"

namespace ipcnet::io {

// Thrown for unreadable or malformed input files.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ASCII OFF / OBJ subsets: vertices and triangular faces only. Labels are
// read from a sidecar `<mesh>.flab` (one integer per face) when present.
geometry::TriangleMesh read_off(const std::filesystem::path& path);
geometry::TriangleMesh read_obj(const std::filesystem::path& path);
// Dispatches on extension and attaches sidecar labels.
geometry::TriangleMesh read_mesh(const std::filesystem::path& path);

std::filesystem::path face_label_path(const std::filesystem::path& mesh_path);
std::vector<int> read_face_labels(const std::filesystem::path& path);

void write_off(const std::filesystem::path& path, const geometry::TriangleMesh& mesh);
void write_face_labels(const std::filesystem::path& path, const std::vector<int>& labels);

// `.pts`: "x y z" per line, 17 significant digits. `.seg`: one label per line.
void write_pts(const std::filesystem::path& path, const std::vector<geometry::Vec3>& points);
void write_seg(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<geometry::Vec3> read_pts(const std::filesystem::path& path);
std::vector<int> read_seg(const std::filesystem::path& path);

// Shortest text for `v` with 17 significant digits (round-trips exactly).
std::string format_real(double v);

}  // namespace ipcnet::io
