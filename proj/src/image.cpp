#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "wproj/error.hpp"
#include "wproj/io.hpp"

namespace wproj {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

File open_file(const std::string& path, const char* mode) {
  File f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return f;
}

// PGM header tokens, skipping whitespace and '#' comments.
long read_pgm_token(std::istream& in, const std::string& path) {
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  std::string token;
  while (ch != EOF && std::isdigit(ch)) {
    token.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  if (token.empty()) throw Error(ErrorCode::ImageFormat, "'" + path + "': malformed PGM header");
  return std::stol(token);
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  char magic[2] = {};
  in.read(magic, 2);
  const bool binary = magic[1] == '5';
  const long width = read_pgm_token(in, path);
  const long height = read_pgm_token(in, path);
  const long maxval = read_pgm_token(in, path);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw Error(ErrorCode::ImageFormat, "'" + path + "': bad PGM dimensions or maxval");
  }
  Image image(height, width);
  if (binary) {
    // read_pgm_token consumed the single whitespace after maxval.
    const int bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(static_cast<std::size_t>(width * height * bytes));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw Error(ErrorCode::ImageFormat, "'" + path + "': truncated PGM data");
    }
    for (long k = 0; k < width * height; ++k) {
      const long v = bytes == 1 ? raw[k] : (raw[2 * k] << 8) | raw[2 * k + 1];
      image.data()[k] = static_cast<double>(std::min(v, maxval)) / static_cast<double>(maxval);
    }
  } else {
    for (long k = 0; k < width * height; ++k) {
      long v = 0;
      if (!(in >> v) || v < 0) throw Error(ErrorCode::ImageFormat, "'" + path + "': bad PGM sample");
      image.data()[k] = static_cast<double>(std::min(v, maxval)) / static_cast<double>(maxval);
    }
  }
  return image;
}

void png_error_fn(png_structp png, png_const_charp message) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = message;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

Image read_png(const std::string& path) {
  File file = open_file(path, "rb");
  std::string error_text;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error_text, png_error_fn, png_warning_fn);
  if (!png) throw Error(ErrorCode::ImageFormat, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  // Locals touched after setjmp live in heap storage owned outside the jump.
  auto rows = std::make_unique<std::vector<png_bytep>>();
  auto pixels = std::make_unique<std::vector<unsigned char>>();
  Image image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::ImageFormat, "'" + path + "': " + error_text);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE) {
    // Rec. 709 luminance weights, applied to the stored values.
    png_set_rgb_to_gray_fixed(png, 1, 21268, 71514);
  }
  png_set_swap(png);  // 16-bit samples in host (little-endian) order
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  pixels->resize(stride * height);
  rows->resize(height);
  for (png_uint_32 r = 0; r < height; ++r) (*rows)[r] = pixels->data() + r * stride;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const double maxval = out_depth == 16 ? 65535.0 : 255.0;
  image.resize(height, width);
  for (png_uint_32 r = 0; r < height; ++r) {
    const unsigned char* row = (*rows)[r];
    for (png_uint_32 c = 0; c < width; ++c) {
      auto sample = [&](int channel) {
        const std::size_t k = static_cast<std::size_t>(c) * channels + channel;
        if (out_depth == 16) return static_cast<double>(row[2 * k] | (row[2 * k + 1] << 8));
        return static_cast<double>(row[k]);
      };
      double v = sample(0) / maxval;
      if (channels == 2) v *= sample(1) / maxval;
      image(r, c) = v;
    }
  }
  return image;
}

void write_pgm(const std::string& path, const Image& image, bool sixteen) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  const long maxval = sixteen ? 65535 : 255;
  out << "P5\n" << image.cols() << ' ' << image.rows() << '\n' << maxval << '\n';
  for (Index k = 0; k < image.size(); ++k) {
    const auto v = static_cast<long>(std::lround(std::clamp(image.data()[k], 0.0, 1.0) * maxval));
    if (sixteen) out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
  if (!out) throw Error(ErrorCode::Io, "write to '" + path + "' failed");
}

void write_png(const std::string& path, const Image& image, bool sixteen) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.cols());
  desc.height = static_cast<png_uint_32>(image.rows());
  // The simplified writer treats 16-bit gray as linear; values are written
  // as given either way.
  desc.format = sixteen ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
  int ok = 0;
  if (sixteen) {
    std::vector<png_uint_16> buf(static_cast<std::size_t>(image.size()));
    for (Index k = 0; k < image.size(); ++k) {
      buf[k] = static_cast<png_uint_16>(std::lround(std::clamp(image.data()[k], 0.0, 1.0) * 65535.0));
    }
    ok = png_image_write_to_file(&desc, path.c_str(), 0, buf.data(), 0, nullptr);
  } else {
    std::vector<png_byte> buf(static_cast<std::size_t>(image.size()));
    for (Index k = 0; k < image.size(); ++k) {
      buf[k] = static_cast<png_byte>(std::lround(std::clamp(image.data()[k], 0.0, 1.0) * 255.0));
    }
    ok = png_image_write_to_file(&desc, path.c_str(), 0, buf.data(), 0, nullptr);
  }
  if (!ok) {
    const std::string message = desc.message;
    png_image_free(&desc);
    throw Error(ErrorCode::Io, "cannot write '" + path + "': " + message);
  }
}

}  // namespace

Image read_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  unsigned char magic[8] = {};
  probe.read(reinterpret_cast<char*>(magic), 8);
  const auto got = probe.gcount();
  probe.close();
  if (got >= 2 && magic[0] == 'P' && (magic[1] == '2' || magic[1] == '5')) return read_pgm(path);
  if (got == 8 && png_sig_cmp(magic, 0, 8) == 0) return read_png(path);
  throw Error(ErrorCode::ImageFormat, "'" + path + "' is neither PGM (P2/P5) nor PNG");
}

void write_image(const std::string& path, const Image& image, ImageEncoding encoding) {
  switch (encoding) {
    case ImageEncoding::Pgm8: return write_pgm(path, image, false);
    case ImageEncoding::Pgm16: return write_pgm(path, image, true);
    case ImageEncoding::Png8: return write_png(path, image, false);
    case ImageEncoding::Png16: return write_png(path, image, true);
  }
}

Image downsample(const Image& image, int factor) {
  if (factor < 1) throw Error(ErrorCode::OutOfRange, "downsample factor must be at least 1");
  if (factor == 1) return image;
  const Index h = (image.rows() + factor - 1) / factor;
  const Index w = (image.cols() + factor - 1) / factor;
  Image out(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      const Index r0 = r * factor;
      const Index c0 = c * factor;
      const Index rh = std::min<Index>(factor, image.rows() - r0);
      const Index cw = std::min<Index>(factor, image.cols() - c0);
      out(r, c) = image.block(r0, c0, rh, cw).mean();
    }
  }
  return out;
}

DiscreteMeasure image_to_measure(const Image& image) {
  if (!image.allFinite() || (image.array() < 0.0).any()) {
    throw Error(ErrorCode::ImageFormat, "image intensities must be finite and nonnegative");
  }
  Index count = 0;
  double total = 0.0;
  for (Index k = 0; k < image.size(); ++k) {
    if (image.data()[k] > 0.0) {
      ++count;
      total += image.data()[k];
    }
  }
  if (count == 0) throw Error(ErrorCode::AllZeroImage, "image has no positive pixel");
  Matrix support(count, 2);
  Vector weights(count);
  Index k = 0;
  for (Index r = 0; r < image.rows(); ++r) {
    for (Index c = 0; c < image.cols(); ++c) {
      if (image(r, c) > 0.0) {
        support(k, 0) = static_cast<double>(r);
        support(k, 1) = static_cast<double>(c);
        weights[k] = image(r, c) / total;
        ++k;
      }
    }
  }
  return DiscreteMeasure(std::move(support), std::move(weights));
}

Image render_measure(const DiscreteMeasure& m, Index height, Index width) {
  if (m.dim() != 2) throw Error(ErrorCode::DimensionMismatch, "only 2-D measures can be rendered");
  if (height < 1 || width < 1) throw Error(ErrorCode::OutOfRange, "render grid must be nonempty");
  Image out = Image::Zero(height, width);
  for (Index i = 0; i < m.size(); ++i) {
    const auto r = std::clamp<Index>(static_cast<Index>(std::lround(m.support()(i, 0))), 0, height - 1);
    const auto c = std::clamp<Index>(static_cast<Index>(std::lround(m.support()(i, 1))), 0, width - 1);
    out(r, c) += m.weights()[i];
  }
  return out;
}

}  // namespace wproj
