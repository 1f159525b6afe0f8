#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "json.hpp"
#include "tabraster/image.hpp"
#include "tabraster/rng.hpp"

namespace testing_support {

inline const nlohmann::json& oracles() {
  static const nlohmann::json j = [] {
    std::ifstream in(std::string(TABRASTER_TEST_DATA) + "/oracles.json");
    return nlohmann::json::parse(in);
  }();
  return j;
}

inline std::string data_path(const std::string& name) { return std::string(TABRASTER_TEST_DATA) + "/" + name; }

inline tabraster::ImageCanvas image_from(const nlohmann::json& pixels, int w, int h) {
  tabraster::ImageCanvas img(w, h);
  const auto v = pixels.get<std::vector<int>>();
  for (std::size_t i = 0; i < v.size(); ++i) img.pixels()[i] = static_cast<std::uint8_t>(v[i]);
  return img;
}

inline std::vector<double> random_sample(tabraster::RngStream& rng, int m) {
  std::vector<double> x(m);
  for (auto& v : x) v = rng.uniform01();
  return x;
}

// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("tabraster_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
