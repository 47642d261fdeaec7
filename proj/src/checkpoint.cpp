#include "vaca/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace vaca::ad {

namespace {

constexpr char kMagic[8] = {'V', 'A', 'C', 'A', 'P', 'R', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw CheckpointError("truncated checkpoint while reading " + what);
  return to_little(v);
}

}  // namespace

void save_parameters(const std::filesystem::path& file, const NamedParameters& params) {
  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, p] : params) {
    index.push_back({{"name", name}, {"shape", {p->value().rows(), p->value().cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(p->value().size());
  }
  const std::string text = index.dump();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + file.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& entry : params) {
    const Matrix& m = entry.second->value();  // row-major storage
    for (Eigen::Index k = 0; k < m.size(); ++k) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.data()[k]));
  }
  if (!out) throw CheckpointError("write failed for " + file.string());
}

void load_parameters(const std::filesystem::path& file, const NamedParameters& params) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + file.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw CheckpointError(file.string() + " is not a parameter checkpoint");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto len = get<std::uint64_t>(in, "index length");
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw CheckpointError("truncated checkpoint index");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint index: ") + e.what());
  }
  const auto data_start = in.tellg();

  std::map<std::string, nlohmann::json> by_name;
  for (const auto& e : index) by_name[e.at("name").get<std::string>()] = e;
  if (by_name.size() != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(by_name.size()) + " tensors, model expects " +
                          std::to_string(params.size()));
  }
  for (const auto& [name, p] : params) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint lacks parameter '" + name + "'");
    const auto rows = it->second.at("shape").at(0).get<Eigen::Index>();
    const auto cols = it->second.at("shape").at(1).get<Eigen::Index>();
    if (rows != p->value().rows() || cols != p->value().cols()) {
      throw CheckpointError("shape mismatch for '" + name + "'");
    }
    const auto offset = it->second.at("offset").get<std::uint64_t>();
    in.seekg(data_start + static_cast<std::streamoff>(offset * sizeof(double)));
    Matrix& m = p->value();
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = std::bit_cast<double>(get<std::uint64_t>(in, name));
    p->zero_grad();
  }
}

}  // namespace vaca::ad
