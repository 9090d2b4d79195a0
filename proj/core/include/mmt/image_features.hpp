#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace mmt {

inline constexpr std::size_t kDefaultImageDim = 2048;

/// Row-major n x d pooled image features, one row per caption line.
class ImageFeatureStore {
 public:
  ImageFeatureStore() = default;
  ImageFeatureStore(std::size_t count, std::size_t dim, std::vector<float> values);

  std::size_t count() const noexcept { return count_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const float> row(std::size_t i) const;
  const std::vector<float>& values() const noexcept { return values_; }

  friend bool operator==(const ImageFeatureStore&, const ImageFeatureStore&) = default;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
};

/// IMGF layout: "IMGF", u32 version (1), u32 n, u32 d, n*d little-endian f32.
ImageFeatureStore load_image_features(const std::filesystem::path& path);
void save_image_features(const std::filesystem::path& path, const ImageFeatureStore& store);

}  // namespace mmt
