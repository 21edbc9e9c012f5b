#include "acne/idx.hpp"

#include <fstream>
#include <limits>

#include "acne/error.hpp"

namespace acne {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

IdxImages idx_read_images(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX file: " + path);
  const std::uint32_t magic = read_be32(in, path);
  if (magic != kImageMagic)
    throw IoError("bad IDX image magic in " + path + ": got " +
                  std::to_string(magic) + ", want 2051");
  IdxImages images;
  images.count = read_be32(in, path);
  images.rows = read_be32(in, path);
  images.cols = read_be32(in, path);
  if (images.rows == 0 || images.cols == 0 ||
      images.count > std::numeric_limits<std::uint32_t>::max() /
                         (images.rows * images.cols))
    throw IoError("IDX dimension overflow in " + path);
  const std::size_t total = images.count * images.rows * images.cols;
  images.pixels.resize(total);
  in.read(reinterpret_cast<char*>(images.pixels.data()),
          static_cast<std::streamsize>(total));
  if (static_cast<std::size_t>(in.gcount()) != total)
    throw IoError("truncated IDX image payload in " + path);
  return images;
}

IdxLabels idx_read_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open IDX file: " + path);
  const std::uint32_t magic = read_be32(in, path);
  if (magic != kLabelMagic)
    throw IoError("bad IDX label magic in " + path + ": got " +
                  std::to_string(magic) + ", want 2049");
  const std::uint32_t count = read_be32(in, path);
  IdxLabels labels;
  labels.labels.resize(count);
  in.read(reinterpret_cast<char*>(labels.labels.data()), count);
  if (static_cast<std::size_t>(in.gcount()) != count)
    throw IoError("truncated IDX label payload in " + path);
  return labels;
}

void idx_write_images(const std::string& path, const IdxImages& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write IDX file: " + path);
  write_be32(out, kImageMagic);
  write_be32(out, static_cast<std::uint32_t>(images.count));
  write_be32(out, static_cast<std::uint32_t>(images.rows));
  write_be32(out, static_cast<std::uint32_t>(images.cols));
  out.write(reinterpret_cast<const char*>(images.pixels.data()),
            static_cast<std::streamsize>(images.pixels.size()));
  if (!out) throw IoError("failed writing IDX payload: " + path);
}

void idx_write_labels(const std::string& path, const IdxLabels& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write IDX file: " + path);
  write_be32(out, kLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.labels.size()));
  out.write(reinterpret_cast<const char*>(labels.labels.data()),
            static_cast<std::streamsize>(labels.labels.size()));
  if (!out) throw IoError("failed writing IDX payload: " + path);
}

}  // namespace acne
