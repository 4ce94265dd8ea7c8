#include "salmask/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace salmask {

namespace {
constexpr char kMagic[8] = {'S', 'M', 'C', 'K', 'P', 'T', '0', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
std::string read_str(std::istream& is) {
  const uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  return s;
}
}  // namespace

const std::vector<Real>& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, v] : arrays)
    if (n == name) return v;
  throw std::runtime_error("checkpoint array not found: " + name);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_str(os, ckpt.arch);
  write_u64(os, ckpt.step);
  write_str(os, ckpt.meta);
  write_u32(os, static_cast<uint32_t>(ckpt.arrays.size()));
  for (const auto& [name, values] : ckpt.arrays) {
    write_str(os, name);
    write_u64(os, values.size());
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(Real)));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  const uint32_t version = read_u32(is);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.arch = read_str(is);
  c.step = read_u64(is);
  c.meta = read_str(is);
  const uint32_t count = read_u32(is);
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = read_str(is);
    const uint64_t n = read_u64(is);
    std::vector<Real> values(n);
    is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(Real)));
    c.arrays.emplace_back(std::move(name), std::move(values));
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return c;
}

}  // namespace salmask
