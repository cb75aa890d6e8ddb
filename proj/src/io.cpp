#include "sprmip/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "sprmip/arch.hpp"
#include "sprmip/error.hpp"

namespace sprmip {

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw InternalError("format_double: to_chars failed");
  return std::string(buf.data(), ptr);
}

nlohmann::json model_to_json(const Mlp& mlp, const nlohmann::json& training_meta) {
  nlohmann::json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["arch"] = format_arch(mlp.hidden_widths());
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& layer : mlp.layers()) {
    nlohmann::json weights = nlohmann::json::array();
    for (int r = 0; r < layer.rows(); ++r) {
      for (int c = 0; c < layer.cols(); ++c) weights.push_back(layer.weights(r, c));
    }
    nlohmann::json bias = nlohmann::json::array();
    for (int r = 0; r < layer.rows(); ++r) bias.push_back(layer.bias(r));
    layers.push_back({{"rows", layer.rows()},
                      {"cols", layer.cols()},
                      {"weights", std::move(weights)},
                      {"bias", std::move(bias)}});
  }
  doc["layers"] = std::move(layers);
  doc["training_meta"] = training_meta;
  return doc;
}

LoadedModel model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw FormatError("model: unsupported format_version " +
                        doc.at("format_version").dump());
    }
    std::vector<Layer> layers;
    for (const auto& l : doc.at("layers")) {
      const int rows = l.at("rows").get<int>();
      const int cols = l.at("cols").get<int>();
      const auto& w = l.at("weights");
      const auto& b = l.at("bias");
      if (rows <= 0 || cols <= 0 ||
          w.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) ||
          b.size() != static_cast<std::size_t>(rows)) {
        throw FormatError("model: layer shape does not match its arrays");
      }
      Layer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          layer.weights(r, c) = w[static_cast<std::size_t>(r) * cols + c].get<double>();
        }
        layer.bias(r) = b[static_cast<std::size_t>(r)].get<double>();
      }
      layers.push_back(std::move(layer));
    }
    LoadedModel out{Mlp(std::move(layers)),
                    doc.value("training_meta", nlohmann::json::object())};
    if (doc.contains("arch") &&
        doc.at("arch").get<std::string>() != format_arch(out.mlp.hidden_widths())) {
      throw FormatError("model: arch string disagrees with layer shapes");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  } catch (const MalformedInput& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

void save_model(const std::string& path, const Mlp& mlp,
                const nlohmann::json& training_meta) {
  write_text_file(path, model_to_json(mlp, training_meta).dump(1) + "\n");
}

LoadedModel load_model(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("model: " + path + ": " + e.what());
  }
  return model_from_json(doc);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw FormatError("write failed: " + path);
}

}  // namespace sprmip
