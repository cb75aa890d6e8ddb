#include <doctest.h>

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "sprmip/data.hpp"
#include "sprmip/error.hpp"
#include "sprmip/io.hpp"
#include "sprmip/mlp.hpp"

using namespace sprmip;

namespace {

const std::string kDir = SPRMIP_TEST_DATA_DIR;

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::vector<std::uint8_t> idx_images(std::uint32_t magic, std::uint32_t count, std::uint32_t rows,
                                     std::uint32_t cols, const std::vector<std::uint8_t>& px) {
  std::vector<std::uint8_t> out;
  put_be32(out, magic);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.insert(out.end(), px.begin(), px.end());
  return out;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t count, const std::vector<std::uint8_t>& lb) {
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabelMagic);
  put_be32(out, count);
  out.insert(out.end(), lb.begin(), lb.end());
  return out;
}

std::string write_bytes(const std::string& name, const std::vector<std::uint8_t>& bytes) {
  const std::string path = kDir + "/" + name;
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return path;
}

std::string write_gz(const std::string& name, const std::vector<std::uint8_t>& bytes) {
  const std::string path = kDir + "/" + name;
  gzFile f = gzopen(path.c_str(), "wb");
  REQUIRE(f != nullptr);
  gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
  gzclose(f);
  return path;
}

IdxError::Kind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const IdxError& e) {
    return e.kind();
  }
  FAIL("expected an IDX error");
  return IdxError::Kind::kIo;
}

}  // namespace

TEST_CASE("shortest round-trip doubles") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(std::numeric_limits<double>::denorm_min()) == "5e-324");
}

TEST_CASE("model JSON round-trips bit-exactly") {
  const Mlp net = init_mlp(5, std::vector<int>{7, 3}, 4, 42);
  const nlohmann::json meta = {{"seed", 42}, {"spr", {{"lambda", 0.5}}}};
  const std::string path = kDir + "/model.json";
  save_model(path, net, meta);
  const LoadedModel back = load_model(path);
  CHECK(back.mlp == net);
  CHECK(back.training_meta == meta);
  const nlohmann::json doc = model_to_json(net, meta);
  CHECK(doc.at("format_version") == kModelFormatVersion);
  CHECK(doc.at("arch") == "1x7-1x3");
  CHECK(doc.at("layers").size() == 3);
  // Saving twice gives identical bytes.
  const std::string first = read_text_file(path);
  save_model(path, back.mlp, back.training_meta);
  CHECK(read_text_file(path) == first);
}

TEST_CASE("model JSON rejects bad documents") {
  const Mlp net = init_mlp(2, std::vector<int>{3}, 2, 1);
  nlohmann::json doc = model_to_json(net);
  nlohmann::json wrong_version = doc;
  wrong_version["format_version"] = 99;
  CHECK_THROWS_AS(model_from_json(wrong_version), FormatError);
  nlohmann::json wrong_shape = doc;
  wrong_shape["layers"][0]["rows"] = 4;
  CHECK_THROWS_AS(model_from_json(wrong_shape), FormatError);
  nlohmann::json missing = doc;
  missing.erase("layers");
  CHECK_THROWS_AS(model_from_json(missing), FormatError);
  CHECK_THROWS_AS(load_model(kDir + "/does-not-exist.json"), FormatError);
}

TEST_CASE("hand-crafted IDX fixture, plain and gzipped") {
  // Two 2x3 images.
  const std::vector<std::uint8_t> px{0, 255, 128, 1, 2, 3, 10, 20, 30, 40, 50, 254};
  const auto images = idx_images(kIdxImageMagic, 2, 2, 3, px);
  const auto labels = idx_labels(2, {7, 3});
  for (bool gz : {false, true}) {
    const std::string ip = gz ? write_gz("img.gz", images) : write_bytes("img", images);
    const std::string lp = gz ? write_gz("lbl.gz", labels) : write_bytes("lbl", labels);
    const IdxImages raw = read_idx_images(ip);
    CHECK(raw.count == 2);
    CHECK(raw.rows == 2);
    CHECK(raw.cols == 3);
    CHECK(raw.pixels == px);
    const Dataset d = load_idx_dataset(ip, lp, 10, 2, 3);
    CHECK(d.size() == 2);
    CHECK(d.dim() == 6);
    CHECK(d.labels == std::vector<int>{7, 3});
    for (int s = 0; s < 2; ++s) {
      for (int i = 0; i < 6; ++i) CHECK(d.inputs(i, s) == px[s * 6 + i] / 255.0);
    }
  }
}

TEST_CASE("IDX errors are distinct") {
  const std::vector<std::uint8_t> px(12, 0);
  const auto lbl = write_bytes("lbl2", idx_labels(2, {0, 1}));
  const auto bad_magic = write_bytes("bad_magic", idx_images(0x804, 2, 2, 3, px));
  CHECK(kind_of([&] { read_idx_images(bad_magic); }) == IdxError::Kind::kBadMagic);
  const auto truncated = write_bytes("truncated", idx_images(kIdxImageMagic, 2, 2, 3, {1, 2, 3}));
  CHECK(kind_of([&] { read_idx_images(truncated); }) == IdxError::Kind::kTruncated);
  const auto three = write_bytes("three", idx_images(kIdxImageMagic, 1, 2, 3, std::vector<std::uint8_t>(6)));
  CHECK(kind_of([&] { load_idx_dataset(three, lbl); }) == IdxError::Kind::kCountMismatch);
  const auto good = write_bytes("good", idx_images(kIdxImageMagic, 2, 2, 3, px));
  CHECK(kind_of([&] { load_idx_dataset(good, lbl, 10, 28, 28); }) == IdxError::Kind::kBadDimensions);
  CHECK(kind_of([&] { read_idx_images(kDir + "/missing"); }) == IdxError::Kind::kIo);
  const auto bad_label = write_bytes("bad_label", idx_labels(2, {0, 12}));
  CHECK_THROWS(load_idx_dataset(good, bad_label, 10));
}

TEST_CASE("MNIST directory layout") {
  const std::string dir = kDir + "/mnist";
  std::filesystem::create_directories(dir);
  std::vector<std::uint8_t> px(2 * 28 * 28);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i % 256);
  write_gz("mnist/t10k-images-idx3-ubyte.gz", idx_images(kIdxImageMagic, 2, 28, 28, px));
  write_bytes("mnist/t10k-labels-idx1-ubyte", idx_labels(2, {4, 9}));
  const Dataset d = load_mnist(dir, "t10k");
  CHECK(d.size() == 2);
  CHECK(d.dim() == 784);
  CHECK(d.num_classes == 10);
  CHECK(d.inputs(300, 1) == px[784 + 300] / 255.0);
  CHECK_THROWS_AS(load_mnist(dir, "train"), FormatError);
}

TEST_CASE("synthetic blobs") {
  SyntheticSpec spec{3, 3, 300, 50.0};
  const Dataset a = gen_synthetic(spec, 5);
  const Dataset b = gen_synthetic(spec, 5);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(gen_synthetic(spec, 6).inputs == a.inputs);
  CHECK(a.labels[4] == 1);

  // Huge margin: the nearest-centre linear rule is perfect.
  int correct = 0;
  for (int i = 0; i < a.size(); ++i) {
    Eigen::Index best = 0;
    a.inputs.col(i).maxCoeff(&best);
    correct += best == a.labels[i];
  }
  CHECK(correct == a.size());

  CHECK_THROWS_AS(gen_synthetic(SyntheticSpec{0, 2, 10, 1.0}, 1), MalformedInput);
  CHECK_THROWS_AS(gen_synthetic(SyntheticSpec{2, 2, 0, 1.0}, 1), MalformedInput);
}

TEST_CASE("zero margin leaves any classifier near chance") {
  const Dataset all = gen_synthetic(SyntheticSpec{2, 2, 4000, 0.0}, 9);
  const auto [train, test] = all.split(2000);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 32;
  const TrainResult r = sgd_train(init_mlp(2, std::vector<int>{8}, 2, 1), train, cfg);
  // 2000 Bernoulli(0.5) trials: 4.5 sigma is about 0.05.
  const double acc = accuracy(r.mlp, test);
  CHECK(acc >= 0.45);
  CHECK(acc <= 0.55);
}

TEST_CASE("dataset CSV round-trips exactly") {
  const Dataset d = gen_synthetic(SyntheticSpec{4, 3, 50, 2.0}, 3);
  const std::string path = kDir + "/blobs.csv";
  write_dataset_csv(path, d);
  const Dataset back = read_dataset_csv(path);
  CHECK(back.inputs == d.inputs);
  CHECK(back.labels == d.labels);
  CHECK(back.num_classes == 3);
  CHECK_THROWS_AS(dataset_from_csv("label,x0\n0,1\n"), FormatError);
  CHECK_THROWS_AS(dataset_from_csv("# num_classes=2\nlabel,x0\n0,1,2\n"), FormatError);
  CHECK_THROWS_AS(dataset_from_csv("# num_classes=2\nlabel,x0\n5,1\n"), FormatError);
}
