#include "stream4d/binary_io.hpp"
#include "stream4d/errors.hpp"
#include "stream4d/memory/streaming.hpp"

#include <istream>
#include <ostream>

namespace stream4d::memory {
namespace {

constexpr char kMagic[4] = {'D', '4', 'R', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_entry(std::ostream& out, const MemoryEntry& e) {
  binary::write_le<double>(out, e.timestamp);
  binary::write_le<std::int32_t>(out, e.sensor);
  binary::write_le<double>(out, e.accumulated_attention);
  for (Eigen::Index i = 0; i < e.key.size(); ++i) binary::write_le<double>(out, e.key(i));
  for (Eigen::Index i = 0; i < e.value.size(); ++i) binary::write_le<double>(out, e.value(i));
}

MemoryEntry read_entry(std::istream& in, int dim, const std::string& name) {
  MemoryEntry e;
  e.timestamp = binary::read_le<double>(in, name);
  e.sensor = binary::read_le<std::int32_t>(in, name);
  e.accumulated_attention = binary::read_le<double>(in, name);
  e.key.resize(dim);
  e.value.resize(dim);
  for (int i = 0; i < dim; ++i) e.key(i) = binary::read_le<double>(in, name);
  for (int i = 0; i < dim; ++i) e.value(i) = binary::read_le<double>(in, name);
  return e;
}

}  // namespace

void save_snapshot(std::ostream& out, const SensorPool& pool) {
  out.write(kMagic, 4);
  binary::write_le<std::uint32_t>(out, kVersion);
  binary::write_le<std::int32_t>(out, pool.sensor());
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(pool.dim()));
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(pool.config().working_frames));
  binary::write_le<std::uint64_t>(out, pool.config().long_term_capacity);
  binary::write_le<double>(out, pool.config().similarity_threshold);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(pool.config().gate_scope));
  binary::write_le<std::uint64_t>(out, pool.working().size());
  binary::write_le<std::uint64_t>(out, pool.long_term().size());
  for (const auto& e : pool.working()) write_entry(out, e);
  for (const auto& e : pool.long_term()) write_entry(out, e);
}

SensorPool load_snapshot(std::istream& in, const std::string& name) {
  char magic[4];
  binary::read_exact(in, magic, 4, name);
  if (std::string(magic, 4) != std::string(kMagic, 4)) {
    throw BadMagic(name + " is not a pool snapshot");
  }
  const auto version = binary::read_le<std::uint32_t>(in, name);
  if (version != kVersion) {
    throw BadMagic(name + " has unsupported snapshot version " + std::to_string(version));
  }
  const int sensor = binary::read_le<std::int32_t>(in, name);
  const int dim = static_cast<int>(binary::read_le<std::uint32_t>(in, name));
  PoolConfig config;
  config.working_frames = static_cast<int>(binary::read_le<std::uint32_t>(in, name));
  config.long_term_capacity = binary::read_le<std::uint64_t>(in, name);
  config.similarity_threshold = binary::read_le<double>(in, name);
  config.gate_scope = static_cast<GateScope>(binary::read_le<std::uint32_t>(in, name));
  const auto n_working = binary::read_le<std::uint64_t>(in, name);
  const auto n_long = binary::read_le<std::uint64_t>(in, name);
  std::vector<MemoryEntry> working;
  std::vector<MemoryEntry> long_term;
  for (std::uint64_t i = 0; i < n_working; ++i) working.push_back(read_entry(in, dim, name));
  for (std::uint64_t i = 0; i < n_long; ++i) long_term.push_back(read_entry(in, dim, name));
  return SensorPool::restore(sensor, dim, config, std::move(working), std::move(long_term));
}

}  // namespace stream4d::memory
