// SPDX-License-Identifier: Apache-2.0
#include "pointcell/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "pointcell/errors.hpp"

namespace pointcell {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

constexpr char kMagic[4] = {'P', 'T', 'C', 'K'};

template <typename T>
void put(std::ofstream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::ifstream& is, const std::filesystem::path& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw IoError("truncated checkpoint: " + path.string());
  return value;
}

std::string moment_name(const char* which, const std::string& name) {
  return std::string("adamw/") + which + "/" + name;
}

}  // namespace

void write_checkpoint_records(const std::filesystem::path& path,
                              const std::vector<CheckpointRecord>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  for (const auto& r : records) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint64_t>(os, r.shape.size());
    for (auto e : r.shape) put<std::uint64_t>(os, e);
    os.write(reinterpret_cast<const char*>(r.data.data()),
             static_cast<std::streamsize>(r.data.size() * sizeof(double)));
  }
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<CheckpointRecord> read_checkpoint_records(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw VersionError("not a PTCK checkpoint: " + path.string());
  const auto version = take<std::uint32_t>(is, path);
  if (version != kCheckpointVersion)
    throw VersionError("unsupported checkpoint version " + std::to_string(version) + " in " +
                       path.string());
  std::vector<CheckpointRecord> records;
  while (is.peek() != std::char_traits<char>::eof()) {
    CheckpointRecord r;
    const auto name_len = take<std::uint32_t>(is, path);
    r.name.resize(name_len);
    if (!is.read(r.name.data(), name_len)) throw IoError("truncated checkpoint: " + path.string());
    const auto rank = take<std::uint64_t>(is, path);
    if (rank == 0 || rank > 8) throw IoError("corrupt record rank in " + path.string());
    for (std::uint64_t i = 0; i < rank; ++i) r.shape.push_back(take<std::uint64_t>(is, path));
    r.data.resize(shape_numel(r.shape));
    if (!is.read(reinterpret_cast<char*>(r.data.data()),
                 static_cast<std::streamsize>(r.data.size() * sizeof(double))))
      throw IoError("truncated checkpoint: " + path.string());
    records.push_back(std::move(r));
  }
  return records;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const AdamWState* optimizer) {
  std::vector<CheckpointRecord> records;
  for (const auto& p : params) records.push_back({p.name, p.tensor.shape, p.tensor.data});
  if (optimizer) {
    records.push_back({"adamw/step", {1}, {static_cast<double>(optimizer->step)}});
    std::size_t i = 0;
    for (const auto& p : params) {
      records.push_back({moment_name("m", p.name), p.tensor.shape, optimizer->first_moment.at(i)});
      records.push_back({moment_name("v", p.name), p.tensor.shape, optimizer->second_moment.at(i)});
      ++i;
    }
  }
  write_checkpoint_records(path, records);
}

void load_checkpoint(const std::filesystem::path& path, ParameterStore& params,
                     AdamWState* optimizer) {
  const auto records = read_checkpoint_records(path);
  std::map<std::string, const CheckpointRecord*> by_name;
  std::size_t param_records = 0;
  for (const auto& r : records) {
    by_name[r.name] = &r;
    if (r.name.rfind("adamw/", 0) != 0) ++param_records;
  }
  if (param_records != params.size())
    throw VersionError("checkpoint " + path.string() + " holds " + std::to_string(param_records) +
                       " parameters, model expects " + std::to_string(params.size()));
  for (auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end())
      throw VersionError("checkpoint " + path.string() + " lacks parameter '" + p.name + "'");
    if (it->second->shape != p.tensor.shape)
      throw VersionError("parameter '" + p.name + "' has shape " + shape_str(it->second->shape) +
                         " in checkpoint, model expects " + shape_str(p.tensor.shape));
    p.tensor.data = it->second->data;
  }
  if (!optimizer) return;
  auto step = by_name.find("adamw/step");
  if (step == by_name.end()) return;
  optimizer->step = static_cast<std::uint64_t>(step->second->data.at(0));
  std::size_t i = 0;
  for (const auto& p : params) {
    auto m = by_name.find(moment_name("m", p.name));
    auto v = by_name.find(moment_name("v", p.name));
    if (m == by_name.end() || v == by_name.end())
      throw VersionError("checkpoint " + path.string() + " lacks optimizer moments for '" +
                         p.name + "'");
    optimizer->first_moment.at(i) = m->second->data;
    optimizer->second_moment.at(i) = v->second->data;
    ++i;
  }
}

}  // namespace pointcell
