#include "agmax/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace agmax::aug {

std::size_t count_differing_pixels(const Image& a, const Image& b) {
  if (!a.same_extent(b)) {
    throw Error("count_differing_pixels: images differ in extent");
  }
  std::size_t count = 0;
  for (std::size_t y = 0; y < a.height; ++y) {
    for (std::size_t x = 0; x < a.width; ++x) {
      for (std::size_t c = 0; c < a.channels; ++c) {
        if (a.at(c, y, x) != b.at(c, y, x)) {
          ++count;
          break;
        }
      }
    }
  }
  return count;
}

namespace {

unsigned char quantize(double v) {
  const double clamped = std::clamp(v, 0.0, 1.0);
  return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

}  // namespace

void write_pnm(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3) {
    throw Error("write_pnm: expected 1 or 3 channels, got " +
                std::to_string(img.channels));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_pnm: cannot open " + path);
  out << (img.channels == 3 ? "P6" : "P5") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(img.width * img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        row[x * img.channels + c] = quantize(img.at(c, y, x));
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error("write_pnm: write failed for " + path);
}

Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_pnm: cannot open " + path);
  std::string magic;
  std::size_t width = 0, height = 0;
  int maxval = 0;
  in >> magic >> width >> height >> maxval;
  if ((magic != "P5" && magic != "P6") || maxval != 255) {
    throw Error("read_pnm: unsupported header in " + path);
  }
  in.get();  // single whitespace after header
  const std::size_t channels = magic == "P6" ? 3 : 1;
  Image img(height, width, channels);
  std::vector<unsigned char> row(width * channels);
  for (std::size_t y = 0; y < height; ++y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
    if (!in) throw Error("read_pnm: truncated pixel data in " + path);
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        img.at(c, y, x) = row[x * channels + c] / 255.0;
      }
    }
  }
  return img;
}

}  // namespace agmax::aug
