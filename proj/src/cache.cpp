#include <cstring>
#include <fstream>

#include "acne/data.hpp"

namespace acne {

namespace {

constexpr char kMagic[7] = {'A', 'C', 'N', 'D', 'A', 'T', '1'};

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
  if (!in) throw IoError("truncated cache file: " + path);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

void write_f32(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(out, bits);
}

double read_f32(std::istream& in, const std::string& path) {
  const std::uint32_t bits = read_u32(in, path);
  float f;
  std::memcpy(&f, &bits, 4);
  return static_cast<double>(f);
}

}  // namespace

void write_cache(const std::string& path, const DatasetCache& cache) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write cache file: " + path);
  out.write(kMagic, sizeof(kMagic));
  const bool stereo = cache.task == TaskKind::stereo_synth;
  const std::size_t count = stereo ? cache.stereo.size() : cache.clouds.size();
  if (count == 0) throw IoError("write_cache: empty dataset");
  const std::size_t n = stereo ? cache.stereo[0].n : cache.clouds[0].n;
  const std::size_t d = stereo ? 4 : cache.clouds[0].d;
  write_u32(out, static_cast<std::uint32_t>(cache.task));
  write_u32(out, static_cast<std::uint32_t>(n));
  write_u32(out, static_cast<std::uint32_t>(d));
  write_u32(out, static_cast<std::uint32_t>(count));

  if (stereo) {
    for (const auto& s : cache.stereo) {
      if (s.n != n) throw IoError("write_cache: ragged stereo shard");
      for (double v : s.fstar) write_f32(out, v);
      write_f32(out, s.meta.image_size);
      write_f32(out, s.meta.focal);
      for (double v : s.meta.rotation) write_f32(out, v);
      for (double v : s.meta.translation) write_f32(out, v);
      for (double v : s.coords) write_f32(out, v);
      out.write(reinterpret_cast<const char*>(s.labels.data()),
                static_cast<std::streamsize>(s.labels.size()));
    }
  } else {
    for (const auto& s : cache.clouds) {
      if (s.n != n || s.d != d) throw IoError("write_cache: ragged shard");
      if (cache.task == TaskKind::line) {
        for (double v : s.theta) write_f32(out, v);
      } else {
        out.put(static_cast<char>(s.class_id));
      }
      for (double v : s.points) write_f32(out, v);
      out.write(reinterpret_cast<const char*>(s.labels.data()),
                static_cast<std::streamsize>(s.labels.size()));
    }
  }
  if (!out) throw IoError("failed writing cache file: " + path);
}

DatasetCache read_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cache file: " + path);
  char magic[7];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("bad cache magic in " + path);
  DatasetCache cache;
  const std::uint32_t task = read_u32(in, path);
  if (task > 2) throw IoError("unknown task id in " + path);
  cache.task = static_cast<TaskKind>(task);
  const std::size_t n = read_u32(in, path);
  const std::size_t d = read_u32(in, path);
  const std::size_t count = read_u32(in, path);

  if (cache.task == TaskKind::stereo_synth) {
    if (d != 4) throw IoError("stereo cache must have D = 4: " + path);
    cache.stereo.resize(count);
    for (auto& s : cache.stereo) {
      s.n = n;
      for (auto& v : s.fstar) v = read_f32(in, path);
      s.meta.image_size = read_f32(in, path);
      s.meta.focal = read_f32(in, path);
      for (auto& v : s.meta.rotation) v = read_f32(in, path);
      for (auto& v : s.meta.translation) v = read_f32(in, path);
      s.coords.resize(n * 4);
      for (auto& v : s.coords) v = read_f32(in, path);
      s.labels.resize(n);
      in.read(reinterpret_cast<char*>(s.labels.data()),
              static_cast<std::streamsize>(n));
      if (!in) throw IoError("truncated cache record in " + path);
    }
  } else {
    cache.clouds.resize(count);
    for (auto& s : cache.clouds) {
      s.n = n;
      s.d = d;
      if (cache.task == TaskKind::line) {
        for (auto& v : s.theta) v = read_f32(in, path);
      } else {
        s.class_id = static_cast<std::uint8_t>(in.get());
      }
      s.points.resize(n * d);
      for (auto& v : s.points) v = read_f32(in, path);
      s.labels.resize(n);
      in.read(reinterpret_cast<char*>(s.labels.data()),
              static_cast<std::streamsize>(n));
      if (!in) throw IoError("truncated cache record in " + path);
    }
  }
  return cache;
}

}  // namespace acne
