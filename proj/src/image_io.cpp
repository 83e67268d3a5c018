#include "icelut/image_io.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

namespace icelut::imaging {

namespace {

constexpr unsigned char kPngSignature[8] = {0x89, 0x50, 0x4e, 0x47,
                                            0x0d, 0x0a, 0x1a, 0x0a};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) {
    raise(ErrorCode::IoFailure, "cannot open " + path);
  }
  std::fseek(f, 0, SEEK_END);
  long size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  if (size < 0) {
    std::fclose(f);
    raise(ErrorCode::IoFailure, "cannot stat " + path);
  }
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  std::size_t got = size ? std::fread(bytes.data(), 1, bytes.size(), f) : 0;
  std::fclose(f);
  if (got != bytes.size()) {
    raise(ErrorCode::IoFailure, "short read from " + path);
  }
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) {
    raise(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  }
  std::size_t put = std::fwrite(bytes.data(), 1, bytes.size(), f);
  if (put != bytes.size() || std::fclose(f) != 0) {
    std::fclose(f);
    raise(ErrorCode::IoFailure, "short write to " + path);
  }
}

// ---- PPM (P6, binary, maxval 255) ----

// Skips whitespace and '#' comments, then parses a non-negative integer.
long ppm_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
               const std::string& path) {
  for (;;) {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
    raise(ErrorCode::CorruptFile, "malformed header in " + path);
  }
  long value = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + (bytes[pos] - '0');
    if (value > 1 << 24) {
      raise(ErrorCode::CorruptFile, "header value out of range in " + path);
    }
    ++pos;
  }
  return value;
}

ImageU8 load_ppm(const std::vector<std::uint8_t>& bytes,
                 const std::string& path) {
  std::size_t pos = 2;  // past "P6"
  long w = ppm_token(bytes, pos, path);
  long h = ppm_token(bytes, pos, path);
  long maxval = ppm_token(bytes, pos, path);
  if (maxval > 255) {
    raise(ErrorCode::UnsupportedFormat,
          "16-bit PPM not supported: " + path);
  }
  if (maxval != 255) {
    raise(ErrorCode::UnsupportedFormat,
          "PPM maxval must be 255 in " + path);
  }
  if (w < 1 || h < 1) {
    raise(ErrorCode::CorruptFile, "bad dimensions in " + path);
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    raise(ErrorCode::CorruptFile, "missing pixel separator in " + path);
  }
  ++pos;  // exactly one whitespace byte before pixel data
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (bytes.size() - pos < need) {
    raise(ErrorCode::CorruptFile, "truncated pixel data in " + path);
  }
  std::vector<std::uint8_t> pixels(bytes.begin() + pos,
                                   bytes.begin() + pos + need);
  return ImageU8::from_data(static_cast<int>(w), static_cast<int>(h),
                            std::move(pixels));
}

void save_ppm(const ImageU8& img, const std::string& path) {
  std::string header = "P6\n" + std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), img.data.begin(), img.data.end());
  write_file(path, bytes);
}

// ---- PNG ----

std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

ImageU8 load_png(const std::vector<std::uint8_t>& bytes,
                 const std::string& path,
                 std::vector<std::string>* warnings) {
  std::size_t pos = 8;
  bool have_ihdr = false, have_iend = false;
  std::uint32_t w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> idat;

  while (pos + 8 <= bytes.size() && !have_iend) {
    std::uint32_t len = be32(&bytes[pos]);
    if (pos + 12 + static_cast<std::size_t>(len) > bytes.size()) {
      raise(ErrorCode::CorruptFile, "truncated chunk in " + path);
    }
    const std::uint8_t* type = &bytes[pos + 4];
    const std::uint8_t* data = &bytes[pos + 8];
    std::uint32_t want_crc = be32(data + len);
    std::uint32_t got_crc = static_cast<std::uint32_t>(
        crc32(crc32(0L, type, 4), data, len));
    if (want_crc != got_crc) {
      raise(ErrorCode::CorruptFile, "chunk crc mismatch in " + path);
    }

    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) {
        raise(ErrorCode::CorruptFile, "bad IHDR in " + path);
      }
      w = be32(data);
      h = be32(data + 4);
      bit_depth = data[8];
      color_type = data[9];
      if (data[10] != 0 || data[11] != 0) {
        raise(ErrorCode::CorruptFile, "bad IHDR method fields in " + path);
      }
      if (data[12] != 0) {
        raise(ErrorCode::UnsupportedFormat,
              "interlaced PNG not supported: " + path);
      }
      if (bit_depth == 16) {
        raise(ErrorCode::UnsupportedFormat,
              "16-bit PNG not supported: " + path);
      }
      if (bit_depth != 8 || (color_type != 2 && color_type != 6)) {
        raise(ErrorCode::UnsupportedFormat,
              "only 8-bit RGB/RGBA PNG supported: " + path);
      }
      have_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      have_iend = true;
    }
    // ancillary chunks skipped
    pos += 12 + static_cast<std::size_t>(len);
  }

  if (!have_ihdr || !have_iend || idat.empty() || w == 0 || h == 0) {
    raise(ErrorCode::CorruptFile, "incomplete PNG stream in " + path);
  }

  const int bpp = color_type == 6 ? 4 : 3;
  const std::size_t stride = static_cast<std::size_t>(w) * bpp;
  std::vector<std::uint8_t> raw((stride + 1) * h);

  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) {
    raise(ErrorCode::IoFailure, "inflate init failed");
  }
  zs.next_in = idat.data();
  zs.avail_in = static_cast<uInt>(idat.size());
  zs.next_out = raw.data();
  zs.avail_out = static_cast<uInt>(raw.size());
  int zret = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (zret != Z_STREAM_END || zs.avail_out != 0) {
    raise(ErrorCode::CorruptFile, "bad PNG pixel stream in " + path);
  }

  // reverse per-row filters in place
  std::vector<std::uint8_t> prior(stride, 0);
  ImageU8 img = ImageU8::create(static_cast<int>(w), static_cast<int>(h));
  bool alpha_seen = false;
  for (std::uint32_t y = 0; y < h; ++y) {
    std::uint8_t* row = raw.data() + (stride + 1) * y;
    const int filter = row[0];
    std::uint8_t* cur = row + 1;
    switch (filter) {
      case 0:
        break;
      case 1:
        for (std::size_t i = bpp; i < stride; ++i) cur[i] += cur[i - bpp];
        break;
      case 2:
        for (std::size_t i = 0; i < stride; ++i) cur[i] += prior[i];
        break;
      case 3:
        for (std::size_t i = 0; i < stride; ++i) {
          int left = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
          cur[i] += static_cast<std::uint8_t>((left + prior[i]) / 2);
        }
        break;
      case 4:
        for (std::size_t i = 0; i < stride; ++i) {
          int left = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
          int ul = i >= static_cast<std::size_t>(bpp) ? prior[i - bpp] : 0;
          cur[i] += static_cast<std::uint8_t>(paeth(left, prior[i], ul));
        }
        break;
      default:
        raise(ErrorCode::CorruptFile, "bad filter byte in " + path);
    }
    std::memcpy(prior.data(), cur, stride);

    std::uint8_t* dst = img.pixel(0, static_cast<int>(y));
    if (bpp == 3) {
      std::memcpy(dst, cur, stride);
    } else {
      for (std::uint32_t x = 0; x < w; ++x) {
        dst[x * 3 + 0] = cur[x * 4 + 0];
        dst[x * 3 + 1] = cur[x * 4 + 1];
        dst[x * 3 + 2] = cur[x * 4 + 2];
        if (cur[x * 4 + 3] != 255) alpha_seen = true;
      }
    }
  }
  if (bpp == 4 && warnings) {
    warnings->push_back("alpha channel dropped from " + path +
                        (alpha_seen ? " (non-opaque pixels present)" : ""));
  }
  return img;
}

void save_png(const ImageU8& img, const std::string& path) {
  const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* row = raw.data() + (stride + 1) * y;
    row[0] = 0;  // filter: none
    std::memcpy(row + 1, img.pixel(0, y), stride);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(),
                static_cast<uLong>(raw.size()), 6) != Z_OK) {
    raise(ErrorCode::IoFailure, "deflate failed for " + path);
  }
  compressed.resize(bound);

  std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
  auto chunk = [&out](const char* type, const std::vector<std::uint8_t>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size())));
    put_be32(out, crc);
  };

  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  chunk("IHDR", ihdr);
  chunk("IDAT", compressed);
  chunk("IEND", {});
  write_file(path, out);
}

}  // namespace

ImageU8 load_image(const std::string& path,
                   std::vector<std::string>* warnings) {
  std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
    return load_png(bytes, path, warnings);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    return load_ppm(bytes, path);
  }
  raise(ErrorCode::UnsupportedFormat,
        "unrecognized image format in " + path);
}

void save_image(const ImageU8& img, const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == ".png") {
    save_png(img, path);
  } else if (ext == ".ppm") {
    save_ppm(img, path);
  } else {
    raise(ErrorCode::UnsupportedFormat,
          "unsupported output extension for " + path);
  }
}

}  // namespace icelut::imaging
