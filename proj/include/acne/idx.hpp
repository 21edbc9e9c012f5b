#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace acne {

// Decoded IDX payloads. Images are row-major uint8, `count` x `rows` x `cols`.
struct IdxImages {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;

  const std::uint8_t* image(std::size_t i) const {
    return pixels.data() + i * rows * cols;
  }
};

struct IdxLabels {
  std::vector<std::uint8_t> labels;
};

// IDX format: big-endian u32 magic (0x00000803 images, 0x00000801 labels),
// big-endian u32 dimension sizes, then raw bytes.
IdxImages idx_read_images(const std::string& path);
IdxLabels idx_read_labels(const std::string& path);

void idx_write_images(const std::string& path, const IdxImages& images);
void idx_write_labels(const std::string& path, const IdxLabels& labels);

}  // namespace acne
