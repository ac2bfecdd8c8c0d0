#pragma once

// PNG codec boundary. Everything becomes 8-bit RGB at decode; alpha is
// composited over white, palette and grayscale are expanded, 16-bit samples
// are reduced to their high byte. The encoder always writes 8-bit truecolor
// with filter None on every scanline and a fixed zlib level, so structurally
// equal images produce identical bytes.
//
// Compression itself is zlib's; the chunk, filter, and interlace layers live
// here. Decode errors name the offending chunk or byte offset.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "rdr/error.hpp"
#include "rdr/image.hpp"

namespace rdr {

namespace png_detail {

inline constexpr std::uint8_t kSignature[8] = {0x89, 0x50, 0x4e, 0x47,
                                               0x0d, 0x0a, 0x1a, 0x0a};
inline constexpr int kZlibLevel = 9;

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t read_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) |
         (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) |
         static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::uint8_t* data, std::size_t len) {
  put_u32_be(out, static_cast<std::uint32_t>(len));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  if (len > 0) out.insert(out.end(), data, data + len);
  std::uint32_t crc = static_cast<std::uint32_t>(
      ::crc32(0L, out.data() + type_at, static_cast<uInt>(4 + len)));
  put_u32_be(out, crc);
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

struct Adam7Pass {
  int x0, y0, dx, dy;
};
inline constexpr Adam7Pass kAdam7[7] = {{0, 0, 8, 8}, {4, 0, 8, 8},
                                        {0, 4, 4, 8}, {2, 0, 4, 4},
                                        {0, 2, 2, 4}, {1, 0, 2, 2},
                                        {0, 1, 1, 2}};

inline int channels_for(int color_type) {
  switch (color_type) {
    case 0: return 1;  // gray
    case 2: return 3;  // rgb
    case 3: return 1;  // palette index
    case 4: return 2;  // gray + alpha
    case 6: return 4;  // rgba
    default: return 0;
  }
}

// round(x / 255) for x >= 0, half up.
inline std::uint8_t div255_round(int x) {
  return static_cast<std::uint8_t>((2 * x + 255) / 510);
}

inline std::uint8_t composite_over_white(int c, int a) {
  return div255_round(a * c + (255 - a) * 255);
}

// Expand depth-d sample to 8 bits.
inline std::uint8_t scale_sample(int v, int depth) {
  switch (depth) {
    case 1: return static_cast<std::uint8_t>(v * 255);
    case 2: return static_cast<std::uint8_t>(v * 85);
    case 4: return static_cast<std::uint8_t>(v * 17);
    default: return static_cast<std::uint8_t>(v);
  }
}

// Reverses scanline filtering in place. `raw` holds h rows of
// (1 + row_bytes) bytes each; returns the defiltered pixel bytes.
inline std::vector<std::uint8_t> unfilter(const std::uint8_t* raw, int h,
                                          std::size_t row_bytes, int bpp,
                                          const char* where) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(h) * row_bytes);
  for (int y = 0; y < h; ++y) {
    const std::uint8_t filter = raw[static_cast<std::size_t>(y) * (row_bytes + 1)];
    const std::uint8_t* src =
        raw + static_cast<std::size_t>(y) * (row_bytes + 1) + 1;
    std::uint8_t* cur = out.data() + static_cast<std::size_t>(y) * row_bytes;
    const std::uint8_t* prev =
        y > 0 ? out.data() + static_cast<std::size_t>(y - 1) * row_bytes
              : nullptr;
    switch (filter) {
      case 0:
        std::memcpy(cur, src, row_bytes);
        break;
      case 1:
        for (std::size_t x = 0; x < row_bytes; ++x) {
          const int left = x >= static_cast<std::size_t>(bpp) ? cur[x - bpp] : 0;
          cur[x] = static_cast<std::uint8_t>(src[x] + left);
        }
        break;
      case 2:
        for (std::size_t x = 0; x < row_bytes; ++x) {
          const int up = prev ? prev[x] : 0;
          cur[x] = static_cast<std::uint8_t>(src[x] + up);
        }
        break;
      case 3:
        for (std::size_t x = 0; x < row_bytes; ++x) {
          const int left = x >= static_cast<std::size_t>(bpp) ? cur[x - bpp] : 0;
          const int up = prev ? prev[x] : 0;
          cur[x] = static_cast<std::uint8_t>(src[x] + (left + up) / 2);
        }
        break;
      case 4:
        for (std::size_t x = 0; x < row_bytes; ++x) {
          const int left = x >= static_cast<std::size_t>(bpp) ? cur[x - bpp] : 0;
          const int up = prev ? prev[x] : 0;
          const int ul =
              (prev && x >= static_cast<std::size_t>(bpp)) ? prev[x - bpp] : 0;
          cur[x] = static_cast<std::uint8_t>(src[x] + paeth(left, up, ul));
        }
        break;
      default:
        throw DecodeError(std::string("PNG: unknown filter type ") +
                          std::to_string(filter) + " in " + where);
    }
  }
  return out;
}

struct Header {
  int width = 0;
  int height = 0;
  int depth = 0;
  int color_type = 0;
  bool interlaced = false;
};

struct Transparency {
  bool present = false;
  int gray_key = -1;               // color type 0
  int rgb_key[3] = {-1, -1, -1};   // color type 2
  std::vector<std::uint8_t> palette_alpha;  // color type 3
};

// Converts one defiltered sub-image (w x h at the header's native format)
// into RGB8 pixels via `emit(x, y, r, g, b)`.
template <typename Emit>
void expand_pixels(const std::vector<std::uint8_t>& data, int w, int h,
                   const Header& hdr,
                   const std::vector<std::array<std::uint8_t, 3>>& palette,
                   const Transparency& trns, Emit&& emit) {
  const int ch = channels_for(hdr.color_type);
  const std::size_t row_bytes =
      (static_cast<std::size_t>(w) * ch * hdr.depth + 7) / 8;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = data.data() + static_cast<std::size_t>(y) * row_bytes;
    for (int x = 0; x < w; ++x) {
      int s[4] = {0, 0, 0, 0};
      if (hdr.depth < 8) {
        const std::size_t bit = static_cast<std::size_t>(x) * hdr.depth;
        const int shift = 8 - hdr.depth - static_cast<int>(bit % 8);
        s[0] = (row[bit / 8] >> shift) & ((1 << hdr.depth) - 1);
      } else if (hdr.depth == 8) {
        for (int c = 0; c < ch; ++c) s[c] = row[static_cast<std::size_t>(x) * ch + c];
      } else {  // 16-bit: keep the high byte, native value for tRNS compare
        for (int c = 0; c < ch; ++c) {
          const std::uint8_t* p = row + (static_cast<std::size_t>(x) * ch + c) * 2;
          s[c] = (p[0] << 8) | p[1];
        }
      }
      const auto hi = [&](int v) {
        return hdr.depth == 16 ? static_cast<std::uint8_t>(v >> 8)
                               : scale_sample(v, hdr.depth);
      };
      std::uint8_t r = 0, g = 0, b = 0;
      switch (hdr.color_type) {
        case 0: {
          if (trns.present && s[0] == trns.gray_key) {
            r = g = b = 255;
          } else {
            r = g = b = hi(s[0]);
          }
          break;
        }
        case 2: {
          if (trns.present && s[0] == trns.rgb_key[0] &&
              s[1] == trns.rgb_key[1] && s[2] == trns.rgb_key[2]) {
            r = g = b = 255;
          } else {
            r = hi(s[0]);
            g = hi(s[1]);
            b = hi(s[2]);
          }
          break;
        }
        case 3: {
          const std::size_t idx = static_cast<std::size_t>(s[0]);
          if (idx >= palette.size()) {
            throw DecodeError("PNG: palette index " + std::to_string(idx) +
                              " out of range");
          }
          const auto& p = palette[idx];
          const int a = idx < trns.palette_alpha.size()
                            ? trns.palette_alpha[idx]
                            : 255;
          r = composite_over_white(p[0], a);
          g = composite_over_white(p[1], a);
          b = composite_over_white(p[2], a);
          break;
        }
        case 4: {
          const int a = hi(s[1]);
          const std::uint8_t v = composite_over_white(hi(s[0]), a);
          r = g = b = v;
          break;
        }
        case 6: {
          const int a = hi(s[3]);
          r = composite_over_white(hi(s[0]), a);
          g = composite_over_white(hi(s[1]), a);
          b = composite_over_white(hi(s[2]), a);
          break;
        }
        default:
          throw DecodeError("PNG: unsupported color type " +
                            std::to_string(hdr.color_type));
      }
      emit(x, y, r, g, b);
    }
  }
}

}  // namespace png_detail

// Deterministic encode: 8-bit RGB, no interlace, filter None everywhere,
// fixed zlib level. Equal Image values yield equal byte sequences.
inline std::vector<std::uint8_t> encode_png(const Image& img) {
  namespace d = png_detail;
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw ValidationError("encode_png: invalid Image");
  }

  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * 3;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.height) *
                                (row_bytes + 1));
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* dst = raw.data() + static_cast<std::size_t>(y) * (row_bytes + 1);
    *dst = 0;  // filter None
    std::memcpy(dst + 1, img.pixels.data() + static_cast<std::size_t>(y) * row_bytes,
                row_bytes);
  }

  uLongf comp_len = ::compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_len);
  if (::compress2(comp.data(), &comp_len, raw.data(),
                  static_cast<uLong>(raw.size()), d::kZlibLevel) != Z_OK) {
    throw RdrError("encode_png: deflate failed");
  }
  comp.resize(comp_len);

  std::vector<std::uint8_t> out;
  out.reserve(comp.size() + 64);
  out.insert(out.end(), std::begin(d::kSignature), std::end(d::kSignature));

  std::uint8_t ihdr[13];
  ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(img.width);
  ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(img.height);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // truecolor
  ihdr[10] = 0;  // compression
  ihdr[11] = 0;  // filter
  ihdr[12] = 0;  // no interlace
  d::append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  d::append_chunk(out, "IDAT", comp.data(), comp.size());
  d::append_chunk(out, "IEND", nullptr, 0);
  return out;
}

inline Image decode_png(std::span<const std::uint8_t> bytes) {
  namespace d = png_detail;

  if (bytes.size() < 8 || std::memcmp(bytes.data(), d::kSignature, 8) != 0) {
    throw DecodeError("PNG: bad signature at offset 0");
  }

  d::Header hdr;
  bool saw_ihdr = false, saw_iend = false;
  std::vector<std::array<std::uint8_t, 3>> palette;
  d::Transparency trns;
  std::vector<std::uint8_t> idat;

  std::size_t off = 8;
  while (off < bytes.size() && !saw_iend) {
    if (off + 8 > bytes.size()) {
      throw DecodeError("PNG: truncated chunk header at offset " +
                        std::to_string(off));
    }
    const std::uint32_t len = d::read_u32_be(bytes.data() + off);
    char type[5] = {};
    std::memcpy(type, bytes.data() + off + 4, 4);
    if (off + 12 + static_cast<std::size_t>(len) > bytes.size()) {
      throw DecodeError(std::string("PNG: truncated chunk '") + type +
                        "' at offset " + std::to_string(off));
    }
    const std::uint8_t* data = bytes.data() + off + 8;
    const std::uint32_t stored_crc = d::read_u32_be(data + len);
    const std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, bytes.data() + off + 4, static_cast<uInt>(4 + len)));
    if (crc != stored_crc) {
      throw DecodeError(std::string("PNG: CRC mismatch in chunk '") + type +
                        "' at offset " + std::to_string(off));
    }

    const std::string t(type);
    if (!saw_ihdr && t != "IHDR") {
      throw DecodeError("PNG: first chunk is '" + t + "', expected IHDR");
    }
    if (t == "IHDR") {
      if (len != 13) {
        throw DecodeError("PNG: IHDR length " + std::to_string(len));
      }
      hdr.width = static_cast<int>(d::read_u32_be(data));
      hdr.height = static_cast<int>(d::read_u32_be(data + 4));
      hdr.depth = data[8];
      hdr.color_type = data[9];
      if (hdr.width < 1 || hdr.height < 1) {
        throw DecodeError("PNG: IHDR has zero dimension");
      }
      const int ct = hdr.color_type;
      const int bd = hdr.depth;
      const bool depth_ok =
          (ct == 0 && (bd == 1 || bd == 2 || bd == 4 || bd == 8 || bd == 16)) ||
          (ct == 2 && (bd == 8 || bd == 16)) ||
          (ct == 3 && (bd == 1 || bd == 2 || bd == 4 || bd == 8)) ||
          (ct == 4 && (bd == 8 || bd == 16)) ||
          (ct == 6 && (bd == 8 || bd == 16));
      if (!depth_ok) {
        throw DecodeError("PNG: IHDR invalid depth/color combination " +
                          std::to_string(bd) + "/" + std::to_string(ct));
      }
      if (data[10] != 0 || data[11] != 0) {
        throw DecodeError("PNG: IHDR nonstandard compression/filter method");
      }
      if (data[12] > 1) {
        throw DecodeError("PNG: IHDR unknown interlace method " +
                          std::to_string(data[12]));
      }
      hdr.interlaced = data[12] == 1;
      saw_ihdr = true;
    } else if (t == "PLTE") {
      if (len == 0 || len % 3 != 0 || len > 256 * 3) {
        throw DecodeError("PNG: PLTE length " + std::to_string(len));
      }
      palette.resize(len / 3);
      for (std::size_t i = 0; i < palette.size(); ++i) {
        palette[i] = {data[3 * i], data[3 * i + 1], data[3 * i + 2]};
      }
    } else if (t == "tRNS") {
      trns.present = true;
      if (hdr.color_type == 0) {
        if (len != 2) throw DecodeError("PNG: tRNS length for grayscale");
        trns.gray_key = (data[0] << 8) | data[1];
      } else if (hdr.color_type == 2) {
        if (len != 6) throw DecodeError("PNG: tRNS length for truecolor");
        for (int c = 0; c < 3; ++c) {
          trns.rgb_key[c] = (data[2 * c] << 8) | data[2 * c + 1];
        }
      } else if (hdr.color_type == 3) {
        trns.palette_alpha.assign(data, data + len);
      } else {
        throw DecodeError("PNG: tRNS not allowed for color type " +
                          std::to_string(hdr.color_type));
      }
    } else if (t == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (t == "IEND") {
      saw_iend = true;
    } else if (!(type[0] & 0x20)) {
      throw DecodeError("PNG: unsupported critical chunk '" + t + "'");
    }
    // ancillary chunks are skipped
    off += 12 + static_cast<std::size_t>(len);
  }

  if (!saw_ihdr) throw DecodeError("PNG: missing IHDR");
  if (!saw_iend) throw DecodeError("PNG: missing IEND");
  if (idat.empty()) throw DecodeError("PNG: missing IDAT");
  if (hdr.color_type == 3 && palette.empty()) {
    throw DecodeError("PNG: color type 3 without PLTE");
  }

  const int ch = d::channels_for(hdr.color_type);
  const int bpp = std::max(1, ch * hdr.depth / 8);
  const auto row_bytes_for = [&](int w) {
    return (static_cast<std::size_t>(w) * ch * hdr.depth + 7) / 8;
  };

  // Total decompressed size across all passes.
  std::size_t raw_size = 0;
  if (hdr.interlaced) {
    for (const auto& p : d::kAdam7) {
      const int w = (hdr.width - p.x0 + p.dx - 1) / p.dx;
      const int h = (hdr.height - p.y0 + p.dy - 1) / p.dy;
      if (w <= 0 || h <= 0) continue;
      raw_size += static_cast<std::size_t>(h) * (row_bytes_for(w) + 1);
    }
  } else {
    raw_size = static_cast<std::size_t>(hdr.height) *
               (row_bytes_for(hdr.width) + 1);
  }

  std::vector<std::uint8_t> raw(raw_size);
  uLongf dest_len = static_cast<uLongf>(raw_size);
  const int zrc = ::uncompress(raw.data(), &dest_len, idat.data(),
                               static_cast<uLong>(idat.size()));
  if (zrc != Z_OK || dest_len != raw_size) {
    throw DecodeError("PNG: IDAT inflate failed (zlib rc " +
                      std::to_string(zrc) + ")");
  }

  Image img = Image::create(hdr.width, hdr.height);

  if (hdr.interlaced) {
    std::size_t pass_off = 0;
    for (const auto& p : d::kAdam7) {
      const int w = (hdr.width - p.x0 + p.dx - 1) / p.dx;
      const int h = (hdr.height - p.y0 + p.dy - 1) / p.dy;
      if (w <= 0 || h <= 0) continue;
      const std::size_t rb = row_bytes_for(w);
      auto sub = d::unfilter(raw.data() + pass_off, h, rb, bpp, "IDAT pass");
      pass_off += static_cast<std::size_t>(h) * (rb + 1);
      d::expand_pixels(sub, w, h, hdr, palette, trns,
                       [&](int x, int y, std::uint8_t r, std::uint8_t g,
                           std::uint8_t b) {
                         img.set(p.x0 + x * p.dx, p.y0 + y * p.dy, r, g, b);
                       });
    }
  } else {
    auto flat = d::unfilter(raw.data(), hdr.height, row_bytes_for(hdr.width),
                            bpp, "IDAT");
    d::expand_pixels(flat, hdr.width, hdr.height, hdr, palette, trns,
                     [&](int x, int y, std::uint8_t r, std::uint8_t g,
                         std::uint8_t b) { img.set(x, y, r, g, b); });
  }
  return img;
}

inline Image decode_png(const std::vector<std::uint8_t>& bytes) {
  return decode_png(std::span<const std::uint8_t>(bytes));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw RdrError("cannot open file: " + p.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::filesystem::path& p,
                             std::span<const std::uint8_t> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw RdrError("cannot write file: " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RdrError("short write: " + p.string());
}

inline Image load_png(const std::filesystem::path& p) {
  return decode_png(read_file_bytes(p));
}

inline void save_png(const std::filesystem::path& p, const Image& img) {
  const auto bytes = encode_png(img);
  write_file_bytes(p, bytes);
}

}  // namespace rdr
