#pragma once

// Minimal PNG codec for 8-bit RGB images.
//
// The writer produces byte-stable output: IHDR, a single IDAT and IEND, no
// ancillary chunks (no time, gamma or text), every scanline filtered with the
// "Up" filter, and zlib deflate at level 6 / window 15 / memLevel 8 with the
// default strategy. Bytes are identical for identical canvases under a given
// zlib build.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tabraster/error.hpp"
#include "tabraster/image.hpp"

namespace tabraster {

namespace png_detail {

inline constexpr std::array<std::uint8_t, 8> kSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char (&type)[5],
                      const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

}  // namespace png_detail

inline std::vector<std::uint8_t> encode_png(const ImageCanvas& img) {
  using namespace png_detail;
  const std::size_t stride = static_cast<std::size_t>(img.width()) * 3;
  std::vector<std::uint8_t> filtered;
  filtered.reserve((stride + 1) * img.height());
  for (int y = 0; y < img.height(); ++y) {
    filtered.push_back(2);  // Up
    const std::uint8_t* cur = img.row(y);
    const std::uint8_t* prev = y > 0 ? img.row(y - 1) : nullptr;
    for (std::size_t i = 0; i < stride; ++i)
      filtered.push_back(static_cast<std::uint8_t>(cur[i] - (prev ? prev[i] : 0)));
  }

  z_stream zs{};
  if (deflateInit2(&zs, 6, Z_DEFLATED, 15, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw Error("zlib deflateInit2 failed");
  std::vector<std::uint8_t> compressed(deflateBound(&zs, static_cast<uLong>(filtered.size())));
  zs.next_in = filtered.data();
  zs.avail_in = static_cast<uInt>(filtered.size());
  zs.next_out = compressed.data();
  zs.avail_out = static_cast<uInt>(compressed.size());
  const int rc = deflate(&zs, Z_FINISH);
  compressed.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("zlib deflate failed");

  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(img.width()));
  put_u32(ihdr, static_cast<std::uint32_t>(img.height()));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // depth 8, RGB, deflate, adaptive filters, no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", compressed);
  put_chunk(out, "IEND", {});
  return out;
}

// Accepts 8-bit non-interlaced RGB (color type 2) only; that is what
// encode_png emits.
inline ImageCanvas decode_png(const std::vector<std::uint8_t>& bytes) {
  using namespace png_detail;
  if (bytes.size() < 8 || !std::equal(kSignature.begin(), kSignature.end(), bytes.begin()))
    throw Error("not a PNG file");
  std::size_t pos = 8;
  std::uint32_t width = 0, height = 0;
  bool have_header = false, have_end = false;
  std::vector<std::uint8_t> idat;
  while (pos + 12 <= bytes.size()) {
    const std::uint32_t len = get_u32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw Error("truncated PNG chunk");
    const std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
    const std::uint8_t* data = &bytes[pos + 8];
    const std::uint32_t crc = get_u32(data + len);
    if (crc32(0L, &bytes[pos + 4], len + 4) != crc) throw Error("PNG chunk CRC mismatch in " + type);
    if (type == "IHDR") {
      if (len != 13) throw Error("bad IHDR length");
      width = get_u32(data);
      height = get_u32(data + 4);
      if (data[8] != 8 || data[9] != 2 || data[12] != 0)
        throw Error("only 8-bit non-interlaced RGB PNG is supported");
      have_header = true;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      have_end = true;
      break;
    }
    pos += 12 + len;
  }
  if (!have_header || !have_end || width == 0 || height == 0) throw Error("incomplete PNG");

  const std::size_t stride = static_cast<std::size_t>(width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * height);
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size())
    throw Error("PNG image data is corrupt");

  ImageCanvas img(static_cast<int>(width), static_cast<int>(height));
  for (std::uint32_t y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = &raw[y * (stride + 1) + 1];
    std::uint8_t* cur = img.row(static_cast<int>(y));
    const std::uint8_t* prev = y > 0 ? img.row(static_cast<int>(y) - 1) : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= 3 ? cur[i - 3] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= 3) ? prev[i - 3] : 0;
      int pred = 0;
      switch (filter) {
        case 0: pred = 0; break;
        case 1: pred = a; break;
        case 2: pred = b; break;
        case 3: pred = (a + b) / 2; break;
        case 4: pred = paeth(a, b, c); break;
        default: throw Error("unknown PNG filter type");
      }
      cur[i] = static_cast<std::uint8_t>(src[i] + pred);
    }
  }
  return img;
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_png(const ImageCanvas& img, const std::filesystem::path& path) {
  write_file(path, encode_png(img));
}

inline ImageCanvas read_png(const std::filesystem::path& path) {
  try {
    return decode_png(read_file(path));
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace tabraster
