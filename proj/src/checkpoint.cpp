#include "tgcn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tgcn/errors.hpp"

namespace tgcn {

namespace {

constexpr char kMagic[8] = {'T', 'G', 'C', 'N', '3', 'D', 'C', 'P'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian");

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DataError(std::string("checkpoint truncated while reading ") + what);
  }
  return v;
}

}  // namespace

Checkpoint make_checkpoint(Model& model, const NormStats& stats,
                           std::uint64_t graph_fingerprint) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.n_roads = model.n_roads();
  ckpt.stats = stats;
  ckpt.graph_fingerprint = graph_fingerprint;
  for (Param* p : model.params()) {
    ckpt.manifest.emplace_back(p->name, p->value.shape());
    ckpt.payload.insert(ckpt.payload.end(), p->value.data(),
                        p->value.data() + p->value.size());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kVersion);

  put<std::int32_t>(out, ckpt.config.n_blocks);
  put<std::int32_t>(out, ckpt.config.layers_per_block);
  put<std::int32_t>(out, ckpt.config.channels);
  put<std::int32_t>(out, ckpt.config.K);
  put<std::int32_t>(out, ckpt.config.K_t);
  put<std::int32_t>(out, ckpt.config.M);
  put<std::int32_t>(out, ckpt.config.H);
  put<std::uint8_t>(out, ckpt.config.output_block == OutputBlockKind::gconv ? 0 : 1);
  put<std::uint8_t>(out, ckpt.config.basis == ChebBasis::chebyshev ? 0 : 1);
  put<std::int64_t>(out, ckpt.n_roads);

  put<std::uint8_t>(out, ckpt.stats.per_road() ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.stats.mean.size()));
  out.write(reinterpret_cast<const char*>(ckpt.stats.mean.data()),
            static_cast<std::streamsize>(ckpt.stats.mean.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(ckpt.stats.stdev.data()),
            static_cast<std::streamsize>(ckpt.stats.stdev.size() * sizeof(double)));

  put<std::uint64_t>(out, ckpt.graph_fingerprint);

  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.manifest.size()));
  for (const auto& [name, shape] : ckpt.manifest) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (const std::int64_t d : shape) put<std::int64_t>(out, d);
  }
  put<std::uint64_t>(out, ckpt.payload.size());
  out.write(reinterpret_cast<const char*>(ckpt.payload.data()),
            static_cast<std::streamsize>(ckpt.payload.size() * sizeof(double)));
  if (!out) throw DataError("write failure on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError(path + ": not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != Checkpoint::kVersion) {
    throw DataError(path + ": checkpoint format version " +
                    std::to_string(version) + " != supported " +
                    std::to_string(Checkpoint::kVersion));
  }

  Checkpoint ckpt;
  ckpt.config.n_blocks = get<std::int32_t>(in, "n_blocks");
  ckpt.config.layers_per_block = get<std::int32_t>(in, "layers_per_block");
  ckpt.config.channels = get<std::int32_t>(in, "channels");
  ckpt.config.K = get<std::int32_t>(in, "K");
  ckpt.config.K_t = get<std::int32_t>(in, "K_t");
  ckpt.config.M = get<std::int32_t>(in, "M");
  ckpt.config.H = get<std::int32_t>(in, "H");
  ckpt.config.output_block = get<std::uint8_t>(in, "output_block") == 0
                                 ? OutputBlockKind::gconv
                                 : OutputBlockKind::temporal;
  ckpt.config.basis =
      get<std::uint8_t>(in, "basis") == 0 ? ChebBasis::chebyshev : ChebBasis::power;
  ckpt.n_roads = get<std::int64_t>(in, "n_roads");

  const bool per_road = get<std::uint8_t>(in, "norm_kind") != 0;
  const auto stat_count = get<std::uint32_t>(in, "stat_count");
  if (per_road && stat_count != ckpt.n_roads) {
    throw DataError(path + ": per-road stats count mismatch");
  }
  ckpt.stats.mean.resize(stat_count);
  ckpt.stats.stdev.resize(stat_count);
  if (!in.read(reinterpret_cast<char*>(ckpt.stats.mean.data()),
               static_cast<std::streamsize>(stat_count * sizeof(double))) ||
      !in.read(reinterpret_cast<char*>(ckpt.stats.stdev.data()),
               static_cast<std::streamsize>(stat_count * sizeof(double)))) {
    throw DataError(path + ": truncated normalization stats");
  }

  ckpt.graph_fingerprint = get<std::uint64_t>(in, "fingerprint");

  const auto n_params = get<std::uint32_t>(in, "n_params");
  for (std::uint32_t p = 0; p < n_params; ++p) {
    const auto name_len = get<std::uint32_t>(in, "name_len");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError(path + ": truncated manifest");
    const auto ndim = get<std::uint32_t>(in, "ndim");
    std::vector<std::int64_t> shape;
    for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(get<std::int64_t>(in, "dim"));
    ckpt.manifest.emplace_back(std::move(name), std::move(shape));
  }
  const auto payload_len = get<std::uint64_t>(in, "payload_len");
  ckpt.payload.resize(payload_len);
  if (!in.read(reinterpret_cast<char*>(ckpt.payload.data()),
               static_cast<std::streamsize>(payload_len * sizeof(double)))) {
    throw DataError(path + ": truncated payload");
  }
  return ckpt;
}

void restore_params(Model& model, const Checkpoint& ckpt) {
  std::vector<Param*> params = model.params();
  if (params.size() != ckpt.manifest.size()) {
    throw DataError("checkpoint manifest has " + std::to_string(ckpt.manifest.size()) +
                    " parameters, model registers " + std::to_string(params.size()));
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, shape] = ckpt.manifest[i];
    if (params[i]->name != name || params[i]->value.shape() != shape) {
      throw DataError("checkpoint manifest mismatch at entry " + std::to_string(i) +
                      ": '" + name + "' vs model '" + params[i]->name + "'");
    }
    const std::size_t count = static_cast<std::size_t>(params[i]->value.size());
    if (offset + count > ckpt.payload.size()) {
      throw DataError("checkpoint payload shorter than manifest");
    }
    std::memcpy(params[i]->value.data(), ckpt.payload.data() + offset,
                count * sizeof(double));
    offset += count;
  }
  if (offset != ckpt.payload.size()) {
    throw DataError("checkpoint payload longer than manifest");
  }
}

}  // namespace tgcn
