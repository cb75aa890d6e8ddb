#include "manifest.hpp"

#include <zlib.h>

#include <cstring>
#include <cstdio>

#include <Eigen/Core>

#include "sprmip/io.hpp"

namespace sprmip::cli {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::uint64_t fingerprint(const Dataset& data) {
  std::uint64_t h = kFnvOffset;
  const std::int64_t shape[3] = {data.dim(), data.size(), data.num_classes};
  mix(h, shape, sizeof shape);
  for (int label : data.labels) {
    const std::int32_t l = label;
    mix(h, &l, sizeof l);
  }
  mix(h, data.inputs.data(), static_cast<std::size_t>(data.inputs.size()) * sizeof(double));
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json version_info() {
  return {{"sprmip", SPRMIP_VERSION},
          {"model_format", kModelFormatVersion},
          {"build_type", SPRMIP_BUILD_TYPE},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"zlib", zlibVersion()},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
#if defined(__clang__)
          {"compiler", std::string("clang ") + __clang_version__},
#elif defined(__GNUC__)
          {"compiler", std::string("gcc ") + __VERSION__},
#else
          {"compiler", "unknown"},
#endif
          {"cplusplus", static_cast<long>(__cplusplus)}};
}

nlohmann::json option_values(const CLI::App& sub) {
  nlohmann::json out = nlohmann::json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "-h,--help") continue;
    const std::string key = opt->get_lnames().empty() ? name : opt->get_lnames().front();
    nlohmann::json entry;
    entry["given"] = opt->count() > 0;
    if (opt->count() > 0) {
      const auto& raw = opt->results();
      if (opt->get_type_size() == 0) {
        entry["value"] = true;
      } else if (raw.size() == 1) {
        entry["value"] = raw.front();
      } else {
        entry["value"] = raw;
      }
    } else {
      entry["value"] = opt->get_default_str();
    }
    out[key] = std::move(entry);
  }
  return out;
}

nlohmann::json RunRecord::to_json() const {
  return {{"tool", "sprmip"},
          {"command", command},
          {"argv", argv},
          {"options", options},
          {"seeds", seeds},
          {"data", data},
          {"versions", version_info()},
          {"outputs", outputs},
          {"result", result},
          {"exit_code", exit_code},
          {"error", error.empty() ? nlohmann::json(nullptr) : nlohmann::json(error)},
          {"wall_seconds", wall_seconds}};
}

}  // namespace sprmip::cli
