#include "hyperv2x/image.hpp"

#include <zlib.h>

#include <cstring>
#include <stdexcept>

#include "hyperv2x/io.hpp"

namespace hyperv2x::image {

namespace {

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t x) {
  out.push_back(static_cast<std::uint8_t>(x >> 24));
  out.push_back(static_cast<std::uint8_t>(x >> 16));
  out.push_back(static_cast<std::uint8_t>(x >> 8));
  out.push_back(static_cast<std::uint8_t>(x));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& data) {
  put_u32be(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_gray_png(const std::filesystem::path& path, std::int64_t h, std::int64_t w,
                    const std::vector<std::uint8_t>& pixels) {
  if (h <= 0 || w <= 0 || pixels.size() != static_cast<std::size_t>(h * w))
    throw std::invalid_argument("write_gray_png: bad dimensions");

  // raw scanlines, filter byte 0 per row
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(h * (w + 1)));
  for (std::int64_t r = 0; r < h; ++r) {
    raw.push_back(0);
    raw.insert(raw.end(), pixels.begin() + r * w, pixels.begin() + (r + 1) * w);
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("write_gray_png: deflate failed");
  comp.resize(comp_len);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(w));
  put_u32be(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", comp);
  put_chunk(out, "IEND", {});
  io::atomic_write(path, out);
}

std::pair<double, double> write_scaled_png(const std::filesystem::path& path, const Tensor& map2d) {
  if (map2d.rank() != 2) throw std::invalid_argument("write_scaled_png: expected rank-2 map");
  double lo = map2d.v.empty() ? 0.0 : map2d.v[0];
  double hi = lo;
  for (double x : map2d.v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double span = hi - lo;
  std::vector<std::uint8_t> px(map2d.v.size());
  for (std::size_t i = 0; i < map2d.v.size(); ++i) {
    const double t = span > 0 ? (map2d.v[i] - lo) / span : 0.0;
    px[i] = static_cast<std::uint8_t>(t * 255.0 + 0.5);
  }
  write_gray_png(path, map2d.dim(0), map2d.dim(1), px);
  return {lo, hi};
}

void write_classmap_png(const std::filesystem::path& path, const GridI& grid, int num_classes) {
  const int denom = std::max(1, num_classes - 1);
  std::vector<std::uint8_t> px(grid.v.size());
  for (std::size_t i = 0; i < grid.v.size(); ++i) {
    const int c = std::max(0, std::min<int>(grid.v[i], num_classes - 1));
    px[i] = static_cast<std::uint8_t>(255 * c / denom);
  }
  write_gray_png(path, grid.h, grid.w, px);
}

}  // namespace hyperv2x::image
