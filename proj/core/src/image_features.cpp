#include "mmt/image_features.hpp"

#include <cmath>
#include <fstream>

#include "mmt/binary_io.hpp"
#include "mmt/error.hpp"

namespace mmt {

namespace {
constexpr char kMagic[4] = {'I', 'M', 'G', 'F'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

ImageFeatureStore::ImageFeatureStore(std::size_t count, std::size_t dim, std::vector<float> values)
    : count_(count), dim_(dim), values_(std::move(values)) {
  if (values_.size() != count_ * dim_) {
    throw Error(Errc::shape_mismatch, "image store of " + std::to_string(count_) + "x" + std::to_string(dim_) +
                                          " given " + std::to_string(values_.size()) + " values");
  }
}

std::span<const float> ImageFeatureStore::row(std::size_t i) const {
  if (i >= count_) throw Error(Errc::out_of_range, "image row " + std::to_string(i) + " of " + std::to_string(count_));
  return std::span<const float>(values_).subspan(i * dim_, dim_);
}

ImageFeatureStore load_image_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open image features " + path.string());
  const std::string what = path.string();
  char magic[4] = {};
  if (!in.read(magic, 4)) throw Error(Errc::truncated, what + ": missing header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(Errc::bad_magic, what + ": not an IMGF file");
  const auto version = io::read_le<std::uint32_t>(in, what);
  if (version != kVersion) throw Error(Errc::bad_version, what + ": unsupported IMGF version " + std::to_string(version));
  const auto n = io::read_le<std::uint32_t>(in, what);
  const auto d = io::read_le<std::uint32_t>(in, what);
  if (d == 0) throw Error(Errc::bad_magic, what + ": zero feature dimension");
  std::vector<float> values(static_cast<std::size_t>(n) * d);
  const auto bytes = static_cast<std::streamsize>(values.size() * sizeof(float));
  if (!in.read(reinterpret_cast<char*>(values.data()), bytes)) {
    throw Error(Errc::truncated, what + ": payload truncated, expected " + std::to_string(values.size()) + " floats");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(Errc::non_finite, what + ": non-finite value at row " + std::to_string(i / d));
    }
  }
  return ImageFeatureStore(n, d, std::move(values));
}

void save_image_features(const std::filesystem::path& path, const ImageFeatureStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io_failure, "cannot write image features " + path.string());
  out.write(kMagic, 4);
  io::write_le<std::uint32_t>(out, kVersion);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.count()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  out.write(reinterpret_cast<const char*>(store.values().data()),
            static_cast<std::streamsize>(store.values().size() * sizeof(float)));
  if (!out) throw Error(Errc::io_failure, "failed writing " + path.string());
}

}  // namespace mmt
