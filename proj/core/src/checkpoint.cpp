#include "ipcnet/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "ipcnet/mesh_io.hpp"

namespace ipcnet {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw io::InputError(path.string() + ": truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

std::string get_string(std::istream& in, std::size_t n, const std::filesystem::path& path) {
  if (n > (std::size_t{1} << 30)) throw io::InputError(path.string() + ": implausible string length");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw io::InputError(path.string() + ": truncated checkpoint");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const model::ModelConfig& config,
                     const model::SegmentationModel& model) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string text = config.to_text();
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto& params = model.parameters();
  put<std::uint64_t>(out, params.size());
  for (const NamedTensor& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.tensor.rank()));
    for (std::size_t e : p.tensor.shape()) put<std::uint64_t>(out, e);
    for (double v : p.tensor.values()) put<double>(out, v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io::InputError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw io::InputError(path.string() + ": not an ipcnet checkpoint");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw io::InputError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  LoadedModel loaded;
  loaded.config = model::ModelConfig::from_text(get_string(in, get<std::uint64_t>(in, path), path));
  loaded.model = model::build_model(loaded.config, 0);
  auto& params = loaded.model->parameters();
  const auto count = get<std::uint64_t>(in, path);
  if (count != params.size()) {
    throw io::InputError(path.string() + ": checkpoint holds " + std::to_string(count) + " parameters, architecture has " +
                         std::to_string(params.size()));
  }
  for (NamedTensor& p : params) {
    const std::string name = get_string(in, get<std::uint32_t>(in, path), path);
    if (name != p.name) throw io::InputError(path.string() + ": expected parameter '" + p.name + "', found '" + name + "'");
    const auto rank = get<std::uint32_t>(in, path);
    ad::Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(get<std::uint64_t>(in, path));
    if (shape != p.tensor.shape()) {
      throw io::InputError(path.string() + ": parameter '" + name + "' has shape " + ad::to_string(shape) + ", expected " +
                           ad::to_string(p.tensor.shape()));
    }
    for (double& v : p.tensor.mutable_values()) v = get<double>(in, path);
  }
  return loaded;
}

}  // namespace ipcnet
