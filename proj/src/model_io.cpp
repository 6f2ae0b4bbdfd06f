#include "ecc/model_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ecc {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int b = 0; b < 4; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
  out.write(bytes, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((v >> (8 * b)) & 0xff);
  out.write(bytes, 8);
}

void put_f64(std::ostream& out, double v) {
  static_assert(sizeof(double) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes[b]) << (8 * b);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
  return v;
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::uint8_t mode_code(ClusterMode mode) {
  switch (mode) {
    case ClusterMode::kEcc: return 0;
    case ClusterMode::kEmbeddingOnly: return 1;
    case ClusterMode::kComparisonOnly: return 2;
  }
  throw std::invalid_argument("unknown cluster mode");
}

ClusterMode mode_from_code(std::uint8_t code) {
  switch (code) {
    case 0: return ClusterMode::kEcc;
    case 1: return ClusterMode::kEmbeddingOnly;
    case 2: return ClusterMode::kComparisonOnly;
  }
  throw std::runtime_error("model file: unknown mode code");
}

}  // namespace

void save_model(const EccModel& model, const std::string& path,
                bool include_responsibilities) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kModelMagic, 8);
  put_u32(out, kModelVersion);
  const std::uint8_t flags = include_responsibilities ? 1 : 0;
  const std::uint8_t mode = mode_code(model.mode);
  out.put(static_cast<char>(mode));
  out.put(static_cast<char>(flags));
  out.put(0);
  out.put(0);
  put_u32(out, static_cast<std::uint32_t>(model.k()));
  put_u32(out, static_cast<std::uint32_t>(model.dim()));
  put_u32(out, static_cast<std::uint32_t>(model.num_models));
  put_f64(out, model.lambda);
  put_f64(out, model.temperature);
  for (const ClusterModel& cluster : model.clusters) {
    if (cluster.centroid.size() != model.dim() ||
        static_cast<int>(cluster.profile.size()) != model.num_models) {
      throw std::invalid_argument("save_model: ragged cluster shapes");
    }
    for (double v : cluster.centroid) put_f64(out, v);
    for (double v : cluster.profile) put_f64(out, v);
  }
  if (include_responsibilities) {
    put_u64(out, model.query_ids.size());
    for (size_t q = 0; q < model.query_ids.size(); ++q) {
      const std::string& id = model.query_ids[q];
      put_u32(out, static_cast<std::uint32_t>(id.size()));
      out.write(id.data(), static_cast<std::streamsize>(id.size()));
      if (model.responsibilities[q].size() != static_cast<size_t>(model.k())) {
        throw std::invalid_argument("save_model: ragged responsibility row");
      }
      for (double v : model.responsibilities[q]) put_f64(out, v);
    }
  }
  if (!out) throw std::runtime_error("write failure on " + path);
}

EccModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kModelMagic, 8) != 0) {
    throw std::runtime_error(path + ": not a model file (bad magic)");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kModelVersion) {
    throw std::runtime_error(path + ": unsupported model version " +
                             std::to_string(version));
  }
  const int mode = in.get();
  const int flags = in.get();
  in.get();
  in.get();
  EccModel model;
  model.mode = mode_from_code(static_cast<std::uint8_t>(mode));
  const std::uint32_t k = get_u32(in);
  const std::uint32_t dim = get_u32(in);
  const std::uint32_t num_models = get_u32(in);
  model.num_models = static_cast<int>(num_models);
  model.lambda = get_f64(in);
  model.temperature = get_f64(in);
  model.clusters.resize(k);
  for (ClusterModel& cluster : model.clusters) {
    cluster.centroid.resize(dim);
    for (double& v : cluster.centroid) v = get_f64(in);
    cluster.profile.resize(num_models);
    for (double& v : cluster.profile) v = get_f64(in);
  }
  if (flags & 1) {
    const std::uint64_t n = get_u64(in);
    model.query_ids.resize(n);
    model.responsibilities.assign(n, std::vector<double>(k));
    for (std::uint64_t q = 0; q < n; ++q) {
      const std::uint32_t len = get_u32(in);
      model.query_ids[q].resize(len);
      in.read(model.query_ids[q].data(), len);
      for (double& v : model.responsibilities[q]) v = get_f64(in);
    }
  }
  if (!in) throw std::runtime_error(path + ": truncated model file");
  return model;
}

}  // namespace ecc
