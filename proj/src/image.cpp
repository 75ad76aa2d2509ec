#include "ltnvae/image.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ltnvae {

namespace {

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in, const std::string& path) {
  while (true) {
    int c = in.peek();
    if (c == EOF) throw IoError("truncated raster header: " + path);
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    break;
  }
  int v = 0;
  in >> v;
  if (!in) throw IoError("malformed raster header: " + path);
  return v;
}

}  // namespace

ImageTensor read_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image: " + path);
  char p = 0, kind = 0;
  in.get(p).get(kind);
  if (p != 'P' || (kind != '5' && kind != '6'))
    throw IoError("unsupported raster format (want binary PGM/PPM): " + path);
  int channels = kind == '5' ? 1 : 3;
  int w = next_header_int(in, path);
  int h = next_header_int(in, path);
  int maxv = next_header_int(in, path);
  if (maxv != 255) throw IoError("only 8-bit rasters supported: " + path);
  in.get();  // single whitespace after maxval
  ImageTensor img(h, w, channels);
  std::vector<unsigned char> buf(img.size());
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw IoError("truncated raster data: " + path);
  for (std::size_t i = 0; i < buf.size(); ++i)
    img.pixels[i] = static_cast<float>(buf[i]) / 255.0f;
  return img;
}

void write_raster(const std::string& path, const ImageTensor& img) {
  if (img.channels != 1 && img.channels != 3)
    throw ShapeError("write_raster: only 1- or 3-channel images supported");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> buf(img.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    float v = img.pixels[i];
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    buf[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write: " + path);
}

}  // namespace ltnvae
