#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sprmip/error.hpp"
#include "sprmip/mlp.hpp"

namespace sprmip {

// IDX layout (all header integers big-endian):
//   images: magic 0x00000803, count, rows, cols, then count*rows*cols bytes
//   labels: magic 0x00000801, count, then count bytes
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

class IdxError : public FormatError {
 public:
  enum class Kind { kIo, kBadMagic, kBadDimensions, kTruncated, kCountMismatch };
  IdxError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct IdxImages {
  int count = 0;
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> pixels;
};

// Gzip-compressed files are detected and inflated transparently.
IdxImages read_idx_images(const std::string& path);
std::vector<std::uint8_t> read_idx_labels(const std::string& path);

// Pairs an image file with a label file, scales pixels by 1/255. When
// `expect_rows/cols` are set the header must match them.
Dataset load_idx_dataset(const std::string& images_path,
                         const std::string& labels_path, int num_classes = 10,
                         std::optional<int> expect_rows = std::nullopt,
                         std::optional<int> expect_cols = std::nullopt);

// Loads `<dir>/<prefix>-images-idx3-ubyte[.gz]` and the matching labels,
// where prefix is "train" or "t10k". Requires 28x28 images.
Dataset load_mnist(const std::string& dir, const std::string& prefix = "train");

struct SyntheticSpec {
  int dims = 2;
  int classes = 2;
  int samples = 200;
  double margin = 4.0;  // distance scale between class centres (unit-variance blobs)
};

// Gaussian blobs: class c has centre margin * u_c with u_c a unit vector
// (the c-th axis when classes <= dims, otherwise a seeded random direction)
// and identity covariance. Labels cycle 0..classes-1.
Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Plain-text dataset: a "# num_classes=C" line, a "label,x0,x1,..." header,
// then one sample per line. Values use shortest round-trip formatting.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(std::string_view text);
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path);

}  // namespace sprmip
