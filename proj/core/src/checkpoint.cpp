#include "ngf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace ngf {

namespace {

constexpr char kMagic[4] = {'N', 'G', 'F', '1'};

void write_record(std::ofstream& out, const std::string& name, const Shape& shape,
                  const std::vector<double>& values) {
  const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
  out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  const std::uint32_t rank = static_cast<std::uint32_t>(shape.size());
  out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
  for (std::int64_t d : shape) out.write(reinterpret_cast<const char*>(&d), sizeof(d));
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

}  // namespace

std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void save_checkpoint(const std::string& path, const ParamList& params,
                     std::int64_t step, std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  write_record(out, "__meta.step", {1}, {static_cast<double>(step)});
  write_record(out, "__meta.config_hash", {1},
               {std::bit_cast<double>(config_hash)});
  for (const auto& [name, tensor] : params)
    write_record(out, name, tensor.shape(), tensor.values());
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

CheckpointContents load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);

  CheckpointContents ckpt;
  while (true) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (in.eof()) break;
    if (!in || name_len > 4096)
      throw std::runtime_error("load_checkpoint: corrupt record in " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
    if (!in || rank > 8) throw std::runtime_error("load_checkpoint: corrupt record in " + path);
    Shape shape(rank);
    for (auto& d : shape) in.read(reinterpret_cast<char*>(&d), sizeof(d));
    const std::int64_t n = shape_numel(shape);
    if (!in || n < 0) throw std::runtime_error("load_checkpoint: corrupt record in " + path);
    std::vector<double> values(static_cast<std::size_t>(n));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated record in " + path);

    if (name == "__meta.step") {
      ckpt.step = static_cast<std::int64_t>(values.at(0));
    } else if (name == "__meta.config_hash") {
      ckpt.config_hash = std::bit_cast<std::uint64_t>(values.at(0));
    } else {
      ckpt.params.emplace_back(name, Tensor(shape, std::move(values)));
    }
  }
  return ckpt;
}

void restore_params(const CheckpointContents& ckpt, ParamList& target) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, tensor] : ckpt.params) by_name[name] = &tensor;
  for (auto& [name, tensor] : target) {
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw std::runtime_error("restore_params: checkpoint lacks tensor '" + name + "'");
    if (it->second->shape() != tensor.shape())
      throw std::runtime_error("restore_params: shape mismatch for '" + name + "': " +
                               shape_str(it->second->shape()) + " vs " +
                               shape_str(tensor.shape()));
    tensor.mutable_values() = it->second->values();
  }
}

}  // namespace ngf
