#include <cstring>
#include <fstream>

#include "acne/json_config.hpp"
#include "acne/train.hpp"

namespace acne {

namespace {

constexpr char kMagic[8] = {'A', 'C', 'N', 'C', 'K', 'P', 'T', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated checkpoint: " + path);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

template <typename Params>
void write_tensors(std::ostream& out, Params& params) {
  std::uint32_t count = 0;
  for_each_param(params, [&](const std::string&, Tensor<float>&) { ++count; });
  write_u32(out, count);
  for_each_param(params, [&](const std::string& name, Tensor<float>& t) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) write_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      write_u32(out, bits);
    }
  });
}

template <typename Params>
void read_tensors(std::istream& in, const std::string& path, Params& params) {
  const std::uint32_t count = read_u32(in, path);
  std::size_t expected = 0;
  for_each_param(params, [&](const std::string&, Tensor<float>&) { ++expected; });
  if (count != expected)
    throw IoError("checkpoint tensor count mismatch in " + path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = read_u32(in, path);
    Shape shape(rank);
    for (auto& d : shape) d = read_u32(in, path);
    std::vector<float> data(numel(shape));
    for (auto& v : data) {
      const std::uint32_t bits = read_u32(in, path);
      std::memcpy(&v, &bits, 4);
    }
    bool placed = false;
    for_each_param(params, [&](const std::string& pname, Tensor<float>& t) {
      if (pname != name) return;
      if (t.shape() != shape)
        throw IoError("checkpoint shape mismatch for " + name + " in " + path);
      t = Tensor<float>(shape, data);
      placed = true;
    });
    if (!placed) throw IoError("unexpected tensor '" + name + "' in " + path);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainConfig& cfg,
                     const ModelBundle& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  ExperimentConfig experiment{cfg, model.net};
  const std::string blob = experiment_to_json(experiment);
  write_u32(out, static_cast<std::uint32_t>(blob.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  ModelBundle& mutable_model = const_cast<ModelBundle&>(model);
  if (model.is_irls)
    write_tensors(out, mutable_model.irls);
  else
    write_tensors(out, mutable_model.params);
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("bad checkpoint magic in " + path);
  const std::uint32_t blob_len = read_u32(in, path);
  std::string blob(blob_len, '\0');
  in.read(blob.data(), blob_len);
  if (!in) throw IoError("truncated checkpoint config in " + path);
  ExperimentConfig experiment = parse_experiment_json(blob);
  Checkpoint ckpt;
  ckpt.train = experiment.train;
  ckpt.model = init_model(experiment.network, experiment.train.preset,
                          experiment.train.seed);
  if (ckpt.model.is_irls)
    read_tensors(in, path, ckpt.model.irls);
  else
    read_tensors(in, path, ckpt.model.params);
  return ckpt;
}

}  // namespace acne
