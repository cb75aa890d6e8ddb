#include "sprmip/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include <zlib.h>

#include "sprmip/io.hpp"

namespace sprmip {

namespace {

std::vector<std::uint8_t> read_all(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw IdxError(IdxError::Kind::kIo, "cannot open " + path);
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[1 << 16];
  while (true) {
    const int n = gzread(f, buf, sizeof(buf));
    if (n < 0) {
      gzclose(f);
      throw IdxError(IdxError::Kind::kIo, "read error in " + path);
    }
    if (n == 0) break;
    bytes.insert(bytes.end(), buf, buf + n);
  }
  gzclose(f);
  return bytes;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void need(const std::vector<std::uint8_t>& b, std::size_t n, const std::string& path) {
  if (b.size() < n) {
    throw IdxError(IdxError::Kind::kTruncated,
                   path + ": truncated (" + std::to_string(b.size()) +
                       " bytes, expected " + std::to_string(n) + ")");
  }
}

std::string find_file(const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  for (const std::string& candidate : {name, name + ".gz"}) {
    const fs::path p = fs::path(dir) / candidate;
    if (fs::exists(p)) return p.string();
  }
  throw IdxError(IdxError::Kind::kIo, "missing " + name + "[.gz] in " + dir);
}

}  // namespace

IdxImages read_idx_images(const std::string& path) {
  const std::vector<std::uint8_t> b = read_all(path);
  need(b, 16, path);
  const std::uint32_t magic = be32(b, 0);
  if (magic != kIdxImageMagic) {
    throw IdxError(IdxError::Kind::kBadMagic,
                   path + ": bad image magic " + std::to_string(magic));
  }
  IdxImages img;
  img.count = static_cast<int>(be32(b, 4));
  img.rows = static_cast<int>(be32(b, 8));
  img.cols = static_cast<int>(be32(b, 12));
  if (img.count < 0 || img.rows <= 0 || img.cols <= 0) {
    throw IdxError(IdxError::Kind::kBadDimensions, path + ": invalid dimensions");
  }
  const std::size_t payload = static_cast<std::size_t>(img.count) *
                              static_cast<std::size_t>(img.rows) *
                              static_cast<std::size_t>(img.cols);
  need(b, 16 + payload, path);
  img.pixels.assign(b.begin() + 16, b.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return img;
}

std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  const std::vector<std::uint8_t> b = read_all(path);
  need(b, 8, path);
  const std::uint32_t magic = be32(b, 0);
  if (magic != kIdxLabelMagic) {
    throw IdxError(IdxError::Kind::kBadMagic,
                   path + ": bad label magic " + std::to_string(magic));
  }
  const std::size_t count = be32(b, 4);
  need(b, 8 + count, path);
  return {b.begin() + 8, b.begin() + 8 + static_cast<std::ptrdiff_t>(count)};
}

Dataset load_idx_dataset(const std::string& images_path,
                         const std::string& labels_path, int num_classes,
                         std::optional<int> expect_rows,
                         std::optional<int> expect_cols) {
  const IdxImages img = read_idx_images(images_path);
  if ((expect_rows && img.rows != *expect_rows) ||
      (expect_cols && img.cols != *expect_cols)) {
    throw IdxError(IdxError::Kind::kBadDimensions,
                   images_path + ": images are " + std::to_string(img.rows) + "x" +
                       std::to_string(img.cols) + ", expected " +
                       std::to_string(expect_rows.value_or(img.rows)) + "x" +
                       std::to_string(expect_cols.value_or(img.cols)));
  }
  const std::vector<std::uint8_t> labels = read_idx_labels(labels_path);
  if (labels.size() != static_cast<std::size_t>(img.count)) {
    throw IdxError(IdxError::Kind::kCountMismatch,
                   "label count " + std::to_string(labels.size()) +
                       " != image count " + std::to_string(img.count));
  }
  const int dim = img.rows * img.cols;
  Dataset data;
  data.num_classes = num_classes;
  data.inputs.resize(dim, img.count);
  for (int i = 0; i < img.count; ++i) {
    for (int p = 0; p < dim; ++p) {
      data.inputs(p, i) =
          img.pixels[static_cast<std::size_t>(i) * dim + p] / 255.0;
    }
  }
  data.labels.assign(labels.begin(), labels.end());
  data.validate();
  return data;
}

Dataset load_mnist(const std::string& dir, const std::string& prefix) {
  return load_idx_dataset(find_file(dir, prefix + "-images-idx3-ubyte"),
                          find_file(dir, prefix + "-labels-idx1-ubyte"), 10, 28, 28);
}

Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.dims <= 0 || spec.classes <= 0 || spec.samples <= 0) {
    throw MalformedInput("gen_synthetic: dims, classes and samples must be positive");
  }
  if (!(spec.margin >= 0.0)) throw MalformedInput("gen_synthetic: margin must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd centres = Eigen::MatrixXd::Zero(spec.dims, spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    if (spec.classes <= spec.dims) {
      centres(c, c) = 1.0;
    } else {
      for (int d = 0; d < spec.dims; ++d) centres(d, c) = normal(rng);
      centres.col(c).normalize();
    }
  }
  centres *= spec.margin;
  Dataset data;
  data.num_classes = spec.classes;
  data.inputs.resize(spec.dims, spec.samples);
  data.labels.resize(static_cast<std::size_t>(spec.samples));
  for (int i = 0; i < spec.samples; ++i) {
    const int c = i % spec.classes;
    data.labels[static_cast<std::size_t>(i)] = c;
    for (int d = 0; d < spec.dims; ++d) data.inputs(d, i) = centres(d, c) + normal(rng);
  }
  return data;
}

std::string dataset_to_csv(const Dataset& data) {
  data.validate();
  std::string out = "# num_classes=" + std::to_string(data.num_classes) + "\nlabel";
  for (int d = 0; d < data.dim(); ++d) out += ",x" + std::to_string(d);
  out += '\n';
  for (int i = 0; i < data.size(); ++i) {
    out += std::to_string(data.labels[static_cast<std::size_t>(i)]);
    for (int d = 0; d < data.dim(); ++d) {
      out += ',';
      out += format_double(data.inputs(d, i));
    }
    out += '\n';
  }
  return out;
}

Dataset dataset_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  const std::string prefix = "# num_classes=";
  if (!std::getline(in, line) || line.rfind(prefix, 0) != 0) {
    throw FormatError("dataset csv: missing '# num_classes=' line");
  }
  Dataset data;
  try {
    data.num_classes = std::stoi(line.substr(prefix.size()));
  } catch (const std::exception&) {
    throw FormatError("dataset csv: bad class count");
  }
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) {
    throw FormatError("dataset csv: missing header");
  }
  const int dims = static_cast<int>(std::count(line.begin(), line.end(), ','));
  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    int col = 0;
    while (std::getline(fields, cell, ',')) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw FormatError("dataset csv: bad number '" + cell + "' on data row " +
                          std::to_string(rows + 1));
      }
      if (col == 0) {
        data.labels.push_back(static_cast<int>(v));
      } else {
        values.push_back(v);
      }
      ++col;
    }
    if (col != dims + 1) {
      throw FormatError("dataset csv: row " + std::to_string(rows + 1) + " has " +
                        std::to_string(col) + " fields, expected " + std::to_string(dims + 1));
    }
    ++rows;
  }
  data.inputs = Eigen::Map<const Eigen::MatrixXd>(values.data(), dims, rows);
  try {
    data.validate();
  } catch (const MalformedInput& e) {
    throw FormatError(std::string("dataset csv: ") + e.what());
  }
  return data;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  write_text_file(path, dataset_to_csv(data));
}

Dataset read_dataset_csv(const std::string& path) {
  return dataset_from_csv(read_text_file(path));
}

}  // namespace sprmip
