#include "ipcnet/mesh_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ipcnet::io {

namespace fs = std::filesystem;
using geometry::TriangleMesh;
using geometry::Vec3;

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

[[noreturn]] void malformed(const fs::path& path, std::size_t line, const std::string& what) {
  throw InputError(path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_real(std::string_view token, const fs::path& path, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) malformed(path, line, "bad number '" + std::string(token) + "'");
  return v;
}

long parse_int(std::string_view token, const fs::path& path, std::size_t line) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) malformed(path, line, "bad integer '" + std::string(token) + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

// Strips comments and blank lines from OFF content, keeping line numbers.
std::vector<std::pair<std::size_t, std::vector<std::string>>> off_records(std::istream& in) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto tokens = split(line);
    if (!tokens.empty()) out.emplace_back(n, std::move(tokens));
  }
  return out;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

TriangleMesh read_off(const fs::path& path) {
  auto in = open_input(path);
  const auto records = off_records(in);
  if (records.empty()) malformed(path, 1, "empty file");
  std::size_t r = 0;
  auto header = records[r].second;
  // "OFF" may share its line with the counts.
  if (header[0] != "OFF") malformed(path, records[r].first, "missing OFF header");
  header.erase(header.begin());
  if (header.empty()) {
    if (++r >= records.size()) malformed(path, records.back().first, "missing counts");
    header = records[r].second;
  }
  if (header.size() < 2) malformed(path, records[r].first, "expected vertex and face counts");
  const long nv = parse_int(header[0], path, records[r].first);
  const long nf = parse_int(header[1], path, records[r].first);
  if (nv < 0 || nf < 0) malformed(path, records[r].first, "negative counts");
  ++r;
  if (records.size() < r + static_cast<std::size_t>(nv + nf)) malformed(path, records.back().first, "truncated file");

  TriangleMesh mesh;
  for (long i = 0; i < nv; ++i, ++r) {
    const auto& [line, tok] = records[r];
    if (tok.size() < 3) malformed(path, line, "vertex needs 3 coordinates");
    mesh.vertices.push_back({parse_real(tok[0], path, line), parse_real(tok[1], path, line), parse_real(tok[2], path, line)});
  }
  for (long i = 0; i < nf; ++i, ++r) {
    const auto& [line, tok] = records[r];
    if (tok.empty() || parse_int(tok[0], path, line) != 3 || tok.size() < 4) malformed(path, line, "only triangular faces are supported");
    geometry::Face f;
    for (int k = 0; k < 3; ++k) {
      const long idx = parse_int(tok[1 + k], path, line);
      if (idx < 0 || idx >= nv) malformed(path, line, "vertex index out of range");
      f[k] = static_cast<std::size_t>(idx);
    }
    mesh.faces.push_back(f);
  }
  return mesh;
}

TriangleMesh read_obj(const fs::path& path) {
  auto in = open_input(path);
  TriangleMesh mesh;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto tok = split(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "v") {
      if (tok.size() < 4) malformed(path, n, "vertex needs 3 coordinates");
      mesh.vertices.push_back({parse_real(tok[1], path, n), parse_real(tok[2], path, n), parse_real(tok[3], path, n)});
    } else if (tok[0] == "f") {
      if (tok.size() != 4) malformed(path, n, "only triangular faces are supported");
      geometry::Face f;
      for (int k = 0; k < 3; ++k) {
        const std::string& ref = tok[1 + k];
        const long idx = parse_int(std::string_view(ref).substr(0, ref.find('/')), path, n);
        const long count = static_cast<long>(mesh.vertices.size());
        const long resolved = idx < 0 ? count + idx : idx - 1;  // OBJ is 1-based; negatives are relative
        if (idx == 0 || resolved < 0 || resolved >= count) malformed(path, n, "vertex index out of range");
        f[k] = static_cast<std::size_t>(resolved);
      }
      mesh.faces.push_back(f);
    }
  }
  return mesh;
}

fs::path face_label_path(const fs::path& mesh_path) {
  fs::path p = mesh_path;
  p += ".flab";
  return p;
}

TriangleMesh read_mesh(const fs::path& path) {
  const std::string ext = path.extension().string();
  TriangleMesh mesh;
  if (ext == ".off" || ext == ".OFF") {
    mesh = read_off(path);
  } else if (ext == ".obj" || ext == ".OBJ") {
    mesh = read_obj(path);
  } else {
    throw InputError("unsupported mesh format '" + ext + "' for " + path.string());
  }
  if (const fs::path labels = face_label_path(path); fs::exists(labels)) mesh.face_labels = read_face_labels(labels);
  try {
    mesh.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return mesh;
}

std::vector<int> read_face_labels(const fs::path& path) { return read_seg(path); }

void write_off(const fs::path& path, const TriangleMesh& mesh) {
  auto out = open_output(path);
  out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
  for (const Vec3& v : mesh.vertices) out << format_real(v[0]) << ' ' << format_real(v[1]) << ' ' << format_real(v[2]) << '\n';
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_face_labels(const fs::path& path, const std::vector<int>& labels) { write_seg(path, labels); }

void write_pts(const fs::path& path, const std::vector<Vec3>& points) {
  auto out = open_output(path);
  for (const Vec3& p : points) out << format_real(p[0]) << ' ' << format_real(p[1]) << ' ' << format_real(p[2]) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_seg(const fs::path& path, const std::vector<int>& labels) {
  auto out = open_output(path);
  for (int l : labels) out << l << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Vec3> read_pts(const fs::path& path) {
  auto in = open_input(path);
  std::vector<Vec3> points;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto tok = split(line);
    if (tok.empty()) continue;
    if (tok.size() < 3) malformed(path, n, "expected x y z");
    points.push_back({parse_real(tok[0], path, n), parse_real(tok[1], path, n), parse_real(tok[2], path, n)});
  }
  return points;
}

std::vector<int> read_seg(const fs::path& path) {
  auto in = open_input(path);
  std::vector<int> labels;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto tok = split(line);
    if (tok.empty()) continue;
    labels.push_back(static_cast<int>(parse_int(tok[0], path, n)));
  }
  return labels;
}

}  // namespace ipcnet::io
