#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>

#include "helpers.hpp"
#include "icelut/image_io.hpp"
#include "icelut/synth.hpp"

using namespace icelut;
using namespace icelut::imaging;
using testing::TempDir;
using testing::error_code_of;
using testing::random_image;

namespace {

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
  append_u32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<std::uint8_t> tagged(type, type + 4);
  tagged.insert(tagged.end(), data.begin(), data.end());
  out.insert(out.end(), tagged.begin(), tagged.end());
  append_u32(out, static_cast<std::uint32_t>(
                      crc32(0, tagged.data(), static_cast<uInt>(tagged.size()))));
}

// Hand-built PNG with full control over the header fields.
std::vector<std::uint8_t> craft_png(int width, int height, int bit_depth,
                                    int color_type, int interlace,
                                    const std::vector<std::uint8_t>& scanlines) {
  std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  append_u32(ihdr, static_cast<std::uint32_t>(width));
  append_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(static_cast<std::uint8_t>(bit_depth));
  ihdr.push_back(static_cast<std::uint8_t>(color_type));
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(static_cast<std::uint8_t>(interlace));
  append_chunk(png, "IHDR", ihdr);

  uLongf bound = compressBound(static_cast<uLong>(scanlines.size()));
  std::vector<std::uint8_t> idat(bound);
  REQUIRE(compress2(idat.data(), &bound, scanlines.data(),
                    static_cast<uLong>(scanlines.size()), 6) == Z_OK);
  idat.resize(bound);
  append_chunk(png, "IDAT", idat);
  append_chunk(png, "IEND", {});
  return png;
}

}  // namespace

TEST_SUITE("imaging") {

TEST_CASE("ppm writes the canonical P6 layout") {
  TempDir dir;
  auto img = ImageU8::from_data(1, 1, {183, 7, 0});
  const auto path = dir.file("one.ppm");
  save_image(img, path);
  const std::vector<std::uint8_t> expected = {'P', '6', '\n', '1', ' ', '1',
                                              '\n', '2', '5', '5', '\n',
                                              183, 7, 0};
  CHECK(read_bytes(path) == expected);
  auto back = load_image(path);
  CHECK(back.width == 1);
  CHECK(back.height == 1);
  CHECK(back.data == img.data);
}

TEST_CASE("ppm round-trips random content") {
  TempDir dir;
  auto img = random_image(11, 13, 7);
  const auto path = dir.file("noise.ppm");
  save_image(img, path);
  auto back = load_image(path);
  CHECK(back.data == img.data);
}

TEST_CASE("ppm rejects non-255 maxval and truncation") {
  TempDir dir;
  const auto odd = dir.file("odd.ppm");
  write_bytes(odd, {'P', '6', '\n', '1', ' ', '1', '\n', '6', '5', '5', '3',
                    '5', '\n', 0, 0, 0, 0, 0, 0});
  CHECK(error_code_of([&] { load_image(odd); }) ==
        ErrorCode::UnsupportedFormat);

  const auto cut = dir.file("cut.ppm");
  write_bytes(cut, {'P', '6', '\n', '2', ' ', '1', '\n', '2', '5', '5', '\n',
                    9, 9, 9});
  CHECK(error_code_of([&] { load_image(cut); }) == ErrorCode::CorruptFile);
}

TEST_CASE("bitplane split takes high and low nibbles") {
  auto img = ImageU8::from_data(1, 1, {183, 0, 255});
  auto planes = split_bitplanes(img);
  CHECK(planes.msb[0] == 11);  // 183 = 11*16 + 7
  CHECK(planes.lsb[0] == 7);
  CHECK(planes.msb[1] == 0);
  CHECK(planes.lsb[1] == 0);
  CHECK(planes.msb[2] == 15);
  CHECK(planes.lsb[2] == 15);
}

TEST_CASE("bitplane merge inverts the split") {
  auto img = random_image(5, 9, 4);
  auto round = merge_bitplanes(split_bitplanes(img));
  CHECK(round.data == img.data);
}

TEST_CASE("downsample averages with half-pixel centers") {
  auto img = ImageU8::from_data(2, 1, {0, 0, 0, 100, 100, 100});
  auto out = bilinear_downsample(img, 1, 1);
  CHECK(out.data[0] == 50);

  // Exact 2x reduction averages each 2x2 block; ties round up.
  auto src = random_image(21, 8, 6);
  auto half = bilinear_downsample(src, 4, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) {
        int sum = 0;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx)
            sum += src.pixel(2 * x + dx, 2 * y + dy)[c];
        CHECK(half.pixel(x, y)[c] == (sum + 2) / 4);
      }
    }
  }
}

TEST_CASE("downsample to the same size copies exactly") {
  auto img = random_image(3, 5, 7);
  auto out = bilinear_downsample(img, 5, 7);
  CHECK(out.data == img.data);
}

TEST_CASE("png round-trips random content") {
  TempDir dir;
  auto img = random_image(31, 17, 9);
  const auto path = dir.file("noise.png");
  save_image(img, path);
  auto back = load_image(path);
  CHECK(back.width == 17);
  CHECK(back.height == 9);
  CHECK(back.data == img.data);
}

TEST_CASE("loader dispatches on file magic, not extension") {
  TempDir dir;
  auto img = random_image(41, 3, 3);
  const auto mislabeled = dir.file("actually_ppm.png");
  {
    const auto real = dir.file("real.ppm");
    save_image(img, real);
    write_bytes(mislabeled, read_bytes(real));
  }
  auto back = load_image(mislabeled);
  CHECK(back.data == img.data);
}

TEST_CASE("png alpha is dropped with a warning") {
  TempDir dir;
  // One RGBA pixel (10, 20, 30, alpha 200), filter byte 0.
  auto png = craft_png(1, 1, 8, 6, 0, {0, 10, 20, 30, 200});
  const auto path = dir.file("rgba.png");
  write_bytes(path, png);
  std::vector<std::string> warnings;
  auto img = load_image(path, &warnings);
  CHECK(img.data == std::vector<std::uint8_t>{10, 20, 30});
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("alpha") != std::string::npos);
}

TEST_CASE("png rejects 16-bit, interlaced, and non-rgb layouts") {
  TempDir dir;
  const auto p16 = dir.file("deep.png");
  write_bytes(p16, craft_png(1, 1, 16, 2, 0, {0, 0, 1, 0, 2, 0, 3}));
  CHECK(error_code_of([&] { load_image(p16); }) ==
        ErrorCode::UnsupportedFormat);

  const auto lace = dir.file("lace.png");
  write_bytes(lace, craft_png(1, 1, 8, 2, 1, {0, 1, 2, 3}));
  CHECK(error_code_of([&] { load_image(lace); }) ==
        ErrorCode::UnsupportedFormat);

  const auto gray = dir.file("gray.png");
  write_bytes(gray, craft_png(1, 1, 8, 0, 0, {0, 77}));
  CHECK(error_code_of([&] { load_image(gray); }) ==
        ErrorCode::UnsupportedFormat);
}

TEST_CASE("png chunk crc corruption is detected") {
  TempDir dir;
  const auto path = dir.file("flip.png");
  save_image(random_image(51, 6, 6), path);
  auto bytes = read_bytes(path);
  // Flip one byte inside the IDAT payload without touching its length.
  const std::uint8_t tag[] = {'I', 'D', 'A', 'T'};
  auto it = std::search(bytes.begin(), bytes.end(), std::begin(tag),
                        std::end(tag));
  REQUIRE(it != bytes.end());
  *(it + 6) ^= 0xff;
  write_bytes(path, bytes);
  CHECK(error_code_of([&] { load_image(path); }) == ErrorCode::CorruptFile);
}

TEST_CASE("png filters decode against the direct encoding") {
  // A gradient image exercises sub/up/average/paeth predictions once
  // re-encoded by external tools; here we at least confirm our own
  // filter-0 stream and a nontrivial image survive exactly.
  TempDir dir;
  auto img = ImageU8::create(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      auto* px = img.pixel(x, y);
      px[0] = static_cast<std::uint8_t>(x * 16);
      px[1] = static_cast<std::uint8_t>(y * 16);
      px[2] = static_cast<std::uint8_t>((x + y) * 8);
    }
  const auto path = dir.file("grad.png");
  save_image(img, path);
  CHECK(load_image(path).data == img.data);

  // Explicit streams for each filter type, all encoding the same 2x2 image.
  const std::vector<std::uint8_t> pixels = {10, 20, 30, 40,  50,  60,
                                            70, 80, 90, 100, 110, 120};
  auto expect_decodes = [&](const std::vector<std::uint8_t>& scanlines) {
    auto png = craft_png(2, 2, 8, 2, 0, scanlines);
    const auto p = dir.file("filters.png");
    write_bytes(p, png);
    CHECK(load_image(p).data == pixels);
  };
  // none
  expect_decodes({0, 10, 20, 30, 40, 50, 60, 0, 70, 80, 90, 100, 110, 120});
  // sub on both rows: second pixel stored as delta to the previous one
  expect_decodes({1, 10, 20, 30, 30, 30, 30, 1, 70, 80, 90, 30, 30, 30});
  // up on the second row: stored as delta to the row above
  expect_decodes({0, 10, 20, 30, 40, 50, 60, 2, 60, 60, 60, 60, 60, 60});
  // average on the second row: predictor is floor((left + above)/2)
  expect_decodes({0, 10, 20, 30, 40, 50, 60, 3, 65, 70, 75, 45, 45, 45});
  // paeth on the second row: predictor picks nearest of left/above/diag
  expect_decodes({0, 10, 20, 30, 40, 50, 60, 4, 60, 60, 60, 30, 30, 30});
}

TEST_CASE("histograms require bins dividing 256") {
  auto img = random_image(61, 8, 8);
  CHECK(error_code_of([&] { channel_histogram(img, 7); }) ==
        ErrorCode::InvalidBins);
  auto hist = channel_histogram(img, 16);
  for (int c = 0; c < 3; ++c) {
    REQUIRE(hist[c].size() == 16);
    double total = 0.0;
    for (double v : hist[c]) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("histogram distance is zero only for equal distributions") {
  auto a = random_image(71, 12, 12);
  auto hist_a = channel_histogram(a, 16);
  CHECK(histogram_l1_distance(hist_a, hist_a) == 0.0);
  auto b = random_image(72, 12, 12);
  auto hist_b = channel_histogram(b, 16);
  CHECK(histogram_l1_distance(hist_a, hist_b) ==
        doctest::Approx(histogram_l1_distance(hist_b, hist_a)));
}

TEST_CASE("downsampling preserves the color distribution") {
  // The working image drives a global decision, so shrinking must distort
  // the histogram far less than an actual color edit does.
  auto img = synth::smooth_noise(81, 64);
  auto small = bilinear_downsample(img, 32, 32);
  auto edited = synth::apply_transform("gamma:0.4", img);
  const auto h_full = channel_histogram(img, 16);
  const auto h_small = channel_histogram(small, 16);
  const auto h_edit = channel_histogram(edited, 16);
  CHECK(histogram_l1_distance(h_full, h_small) <
        0.25 * histogram_l1_distance(h_full, h_edit));
}

TEST_CASE("byte rounding is half-up and clamped") {
  // 0.5 is the only float whose product with 255 lands exactly on a .5
  // tie; it must go up, which also rules out plain truncation.
  ImageF32 img = ImageF32::from_raw(
      2, 1, {0.5f, 0.4999f / 255.0f, 1.0f, 0.0f, 100.0f / 255.0f, 0.7f});
  auto bytes = round_to_bytes(img);
  CHECK(bytes.data[0] == 128);  // 127.5 rounds up
  CHECK(bytes.data[1] == 0);
  CHECK(bytes.data[2] == 255);
  CHECK(bytes.data[3] == 0);
  CHECK(bytes.data[4] == 100);
  CHECK(bytes.data[5] == 178);  // float(0.7)*255 = 178.4999970
}

TEST_CASE("from_raw clamps and scrubs non-finite values") {
  ImageF32 img = ImageF32::from_raw(
      1, 2, {-0.25f, 1.75f, std::numeric_limits<float>::infinity(),
             std::numeric_limits<float>::quiet_NaN(), 0.5f, -0.0f});
  CHECK(img.data[0] == 0.0f);
  CHECK(img.data[1] == 1.0f);
  CHECK(img.data[2] == 0.0f);
  CHECK(img.data[3] == 0.0f);
  CHECK(img.data[4] == 0.5f);
  CHECK(img.data[5] == 0.0f);
}

TEST_CASE("to_normalized divides by 255") {
  auto img = ImageU8::from_data(1, 1, {0, 128, 255});
  auto norm = to_normalized(img);
  CHECK(norm.data[0] == 0.0f);
  CHECK(norm.data[1] == doctest::Approx(128.0 / 255.0));
  CHECK(norm.data[2] == 1.0f);
}

}  // TEST_SUITE
