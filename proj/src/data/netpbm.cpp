#include "data/netpbm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "common/errors.hpp"

namespace lesion {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("netpbm: " + what + " at byte offset " + std::to_string(pos_));
  }

  static bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (is_space(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) fail(std::string("unexpected end of header reading ") + what);
    if (bytes_[pos_] < '0' || bytes_[pos_] > '9') fail(std::string("expected digits for ") + what);
    std::size_t value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (std::size_t{1} << 32)) fail(std::string(what) + " too large");
      ++pos_;
    }
    return value;
  }

  void expect_single_space() {
    if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) fail("expected one whitespace byte after maxval");
    ++pos_;
  }

  void expect_magic() {
    if (bytes_.size() < 2 || bytes_[0] != 'P' || (bytes_[1] != '5' && bytes_[1] != '6')) fail("bad magic, expected P5 or P6");
    pos_ = 2;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image parse_netpbm(std::span<const std::uint8_t> bytes) {
  HeaderReader reader(bytes);
  reader.expect_magic();
  const std::size_t channels = bytes[1] == '6' ? 3 : 1;
  const std::size_t width = reader.read_number("width");
  const std::size_t height = reader.read_number("height");
  const std::size_t maxval = reader.read_number("maxval");
  if (width == 0 || height == 0) reader.fail("zero image dimension");
  if (maxval != 255) reader.fail("unsupported maxval " + std::to_string(maxval) + " (only 255)");
  reader.expect_single_space();

  const std::size_t expected = width * height * channels;
  const std::size_t available = bytes.size() - reader.offset();
  if (available < expected)
    throw ParseError("netpbm: truncated payload at byte offset " + std::to_string(bytes.size()) + ", expected " +
                     std::to_string(expected) + " bytes of pixels, found " + std::to_string(available));

  Image image(height, width, channels);
  const auto* payload = bytes.data() + reader.offset();
  for (std::size_t i = 0; i < expected; ++i) image.pixels[i] = static_cast<Scalar>(payload[i]) / Scalar(255);
  return image;
}

Image read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return parse_netpbm(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_netpbm(const Image& image) {
  if (image.channels != 1 && image.channels != 3)
    throw DimensionError("netpbm output needs 1 or 3 channels, got " + std::to_string(image.channels));
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels.size());
  for (Scalar v : image.pixels) {
    const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
    out.push_back(static_cast<std::uint8_t>(std::lround(clamped * 255.0)));
  }
  return out;
}

void write_netpbm(const std::filesystem::path& path, const Image& image) {
  const auto bytes = encode_netpbm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write image '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing image '" + path.string() + "'");
}

}  // namespace lesion
