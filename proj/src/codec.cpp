#include "pstx/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pstx::codec {

namespace {

// Fixed canonical prefix codes: the luminance DC/AC code-length tables of
// ITU-T T.81 Annex K.3, used for every channel.
constexpr std::array<std::uint8_t, 16> kDcCounts = {0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
constexpr std::array<std::uint8_t, 12> kDcSymbols = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
constexpr std::array<std::uint8_t, 16> kAcCounts = {0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 125};
constexpr std::array<std::uint8_t, 162> kAcSymbols = {
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07, 0x22, 0x71,
    0x14, 0x32, 0x81, 0x91, 0xA1, 0x08, 0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0, 0x24, 0x33, 0x62, 0x72,
    0x82, 0x09, 0x0A, 0x16, 0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28, 0x29, 0x2A, 0x34, 0x35, 0x36, 0x37,
    0x38, 0x39, 0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7A, 0x83,
    0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3,
    0xA4, 0xA5, 0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3,
    0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA, 0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA};

constexpr int kEob = 0x00;
constexpr int kZrl = 0xF0;

struct PrefixCode {
  std::array<std::uint16_t, 256> code{};
  std::array<std::uint8_t, 256> length{};
  // Canonical decoding tables per code length 1..16.
  std::array<int, 17> min_code{};
  std::array<int, 17> max_code{};
  std::array<int, 17> first_index{};
  std::vector<std::uint8_t> symbols;
};

template <size_t N>
PrefixCode build_code(const std::array<std::uint8_t, 16>& counts, const std::array<std::uint8_t, N>& symbols) {
  PrefixCode pc;
  pc.symbols.assign(symbols.begin(), symbols.end());
  int code = 0;
  int k = 0;
  for (int len = 1; len <= 16; ++len) {
    pc.first_index[len] = k;
    pc.min_code[len] = code;
    for (int i = 0; i < counts[len - 1]; ++i, ++k, ++code) {
      pc.code[symbols[k]] = static_cast<std::uint16_t>(code);
      pc.length[symbols[k]] = static_cast<std::uint8_t>(len);
    }
    pc.max_code[len] = counts[len - 1] ? code - 1 : -1;
    code <<= 1;
  }
  return pc;
}

const PrefixCode& dc_code() {
  static const PrefixCode pc = build_code(kDcCounts, kDcSymbols);
  return pc;
}

const PrefixCode& ac_code() {
  static const PrefixCode pc = build_code(kAcCounts, kAcSymbols);
  return pc;
}

class BitWriter {
 public:
  void put(std::uint32_t value, int bits) {
    for (int i = bits - 1; i >= 0; --i) {
      if (fill_ == 0) bytes_.push_back(0);
      if ((value >> i) & 1u) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> fill_);
      fill_ = (fill_ + 1) % 8;
      ++count_;
    }
  }
  void put_symbol(const PrefixCode& pc, int symbol) { put(pc.code[symbol], pc.length[symbol]); }
  std::uint32_t bit_count() const { return count_; }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
  int fill_ = 0;
  std::uint32_t count_ = 0;
};

class BitReader {
 public:
  BitReader(const std::vector<std::uint8_t>& bytes, std::size_t start, std::uint32_t bits)
      : bytes_(bytes), start_(start), bits_(bits) {}

  int bit() {
    if (pos_ >= bits_) throw CodecError("payload exhausted", offset());
    const std::size_t byte = start_ + pos_ / 8;
    const int shift = 7 - static_cast<int>(pos_ % 8);
    ++pos_;
    return (bytes_[byte] >> shift) & 1;
  }
  std::uint32_t bits(int n) {
    std::uint32_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | static_cast<std::uint32_t>(bit());
    return v;
  }
  int symbol(const PrefixCode& pc) {
    int code = 0;
    for (int len = 1; len <= 16; ++len) {
      code = (code << 1) | bit();
      if (pc.max_code[len] >= 0 && code >= pc.min_code[len] && code <= pc.max_code[len]) {
        return pc.symbols[pc.first_index[len] + code - pc.min_code[len]];
      }
    }
    throw CodecError("invalid prefix code", offset());
  }
  std::size_t offset() const { return start_ + pos_ / 8; }
  bool done() const { return pos_ == bits_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t start_;
  std::uint32_t bits_;
  std::uint32_t pos_ = 0;
};

int magnitude_category(int v) {
  int a = std::abs(v);
  int n = 0;
  while (a) {
    ++n;
    a >>= 1;
  }
  return n;
}

std::uint32_t amplitude_bits(int v, int size) {
  return v >= 0 ? static_cast<std::uint32_t>(v) : static_cast<std::uint32_t>(v + (1 << size) - 1);
}

int decode_amplitude(std::uint32_t bits, int size) {
  if (size == 0) return 0;
  return bits >> (size - 1) ? static_cast<int>(bits) : static_cast<int>(bits) - (1 << size) + 1;
}

int round_half_away(double v) { return static_cast<int>(v < 0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5)); }

void put_u16(std::vector<std::uint8_t>& out, int v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

QualityFactor::QualityFactor(int q) : q_(q) {
  if (q < 1 || q > 100) throw std::invalid_argument("quality factor must lie in [1,100], got " + std::to_string(q));
}

CodecError::CodecError(const std::string& what, std::size_t byte_offset)
    : std::runtime_error(what + " at byte " + std::to_string(byte_offset)), offset_(byte_offset) {}

const std::array<int, 64> kZigzag = {0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
                                     12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
                                     35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
                                     58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

const QuantTable kLuminanceBase = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                                   14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                                   18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                                   49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

template <typename Scalar>
Eigen::Matrix<Scalar, 8, 8, Eigen::RowMajor> dct_basis() {
  Eigen::Matrix<Scalar, 8, 8, Eigen::RowMajor> d;
  for (int u = 0; u < 8; ++u) {
    const Scalar cu = u == 0 ? std::sqrt(Scalar(1) / 8) : std::sqrt(Scalar(2) / 8);
    for (int x = 0; x < 8; ++x) {
      d(u, x) = cu * std::cos((2 * x + 1) * u * std::numbers::pi_v<Scalar> / 16);
    }
  }
  return d;
}

template Eigen::Matrix<double, 8, 8, Eigen::RowMajor> dct_basis<double>();
template Eigen::Matrix<float, 8, 8, Eigen::RowMajor> dct_basis<float>();
template Eigen::Matrix<long double, 8, 8, Eigen::RowMajor> dct_basis<long double>();

QuantTable quant_table(QualityFactor q) {
  const int qv = q.value();
  const int scale = qv < 50 ? 5000 / qv : 200 - 2 * qv;
  QuantTable t{};
  for (int i = 0; i < 64; ++i) {
    const long v = std::lround(kLuminanceBase[i] * static_cast<double>(scale) / 100.0);
    t[i] = static_cast<int>(std::clamp<long>(v, 1, 255));
  }
  return t;
}

Header parse_header(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) throw CodecError("truncated header", bytes.size());
  for (size_t i = 0; i < kMagic.size(); ++i)
    if (bytes[i] != kMagic[i]) throw CodecError("bad magic", i);
  if (bytes[4] != kVersion) throw CodecError("unsupported version", 4);
  Header h;
  h.height = (bytes[5] << 8) | bytes[6];
  h.width = (bytes[7] << 8) | bytes[8];
  h.channels = bytes[9];
  h.quality = bytes[10];
  h.payload_bits = (static_cast<std::uint32_t>(bytes[11]) << 24) | (static_cast<std::uint32_t>(bytes[12]) << 16) |
                   (static_cast<std::uint32_t>(bytes[13]) << 8) | bytes[14];
  if (h.height == 0) throw CodecError("zero height", 5);
  if (h.width == 0) throw CodecError("zero width", 7);
  if (h.channels == 0) throw CodecError("zero channels", 9);
  if (h.quality < 1 || h.quality > 100) throw CodecError("quality out of range", 10);
  return h;
}

Bitstream compress(const Image& x, QualityFactor q) {
  const int h = x.height(), w = x.width(), c = x.channels();
  if (h <= 0 || w <= 0 || c <= 0) throw CodecError("image has an empty dimension", 0);
  if (h > 0xFFFF || w > 0xFFFF || c > 0xFF) throw CodecError("image dimensions exceed header field widths", 0);
  const int hp = (h + 7) / 8 * 8, wp = (w + 7) / 8 * 8;
  const QuantTable table = quant_table(q);
  const auto& dc = dc_code();
  const auto& ac = ac_code();
  const auto levels = to_levels(x);

  BitWriter bw;
  for (int ch = 0; ch < c; ++ch) {
    const int* plane = levels.data() + static_cast<size_t>(ch) * h * w;
    int prev_dc = 0;
    for (int by = 0; by < hp; by += 8) {
      for (int bx = 0; bx < wp; bx += 8) {
        Block block;
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            const int yy = std::min(by + i, h - 1), xx = std::min(bx + j, w - 1);
            block(i, j) = plane[yy * w + xx] - 128.0;
          }
        const Block coef = dct2(block);
        std::array<int, 64> zz{};
        for (int k = 0; k < 64; ++k) zz[k] = round_half_away(coef.data()[kZigzag[k]] / table[kZigzag[k]]);

        const int diff = zz[0] - prev_dc;
        prev_dc = zz[0];
        const int dsize = magnitude_category(diff);
        bw.put_symbol(dc, dsize);
        bw.put(amplitude_bits(diff, dsize), dsize);

        int run = 0;
        for (int k = 1; k < 64; ++k) {
          if (zz[k] == 0) {
            ++run;
            continue;
          }
          while (run > 15) {
            bw.put_symbol(ac, kZrl);
            run -= 16;
          }
          const int size = magnitude_category(zz[k]);
          bw.put_symbol(ac, (run << 4) | size);
          bw.put(amplitude_bits(zz[k], size), size);
          run = 0;
        }
        if (run > 0) bw.put_symbol(ac, kEob);
      }
    }
  }

  Bitstream out;
  out.bytes.assign(kMagic.begin(), kMagic.end());
  out.bytes.push_back(kVersion);
  put_u16(out.bytes, h);
  put_u16(out.bytes, w);
  out.bytes.push_back(static_cast<std::uint8_t>(c));
  out.bytes.push_back(static_cast<std::uint8_t>(q.value()));
  const std::uint32_t bits = bw.bit_count();
  for (int s = 24; s >= 0; s -= 8) out.bytes.push_back(static_cast<std::uint8_t>(bits >> s));
  out.bytes.insert(out.bytes.end(), bw.bytes().begin(), bw.bytes().end());
  return out;
}

Image decompress(const Bitstream& b) {
  const Header hd = parse_header(b.bytes);
  const std::size_t payload_bytes = (static_cast<std::size_t>(hd.payload_bits) + 7) / 8;
  const std::size_t available = b.bytes.size() - kHeaderBytes;
  if (available < payload_bytes) throw CodecError("truncated payload", b.bytes.size());
  if (available > payload_bytes) throw CodecError("trailing bytes after payload", kHeaderBytes + payload_bytes);
  const int h = hd.height, w = hd.width, c = hd.channels;
  const int hp = (h + 7) / 8 * 8, wp = (w + 7) / 8 * 8;
  // Every block costs at least 2 (DC) + 4 (EOB) bits; reject headers that
  // claim more blocks than the payload could possibly hold.
  const std::uint64_t blocks = static_cast<std::uint64_t>(hp / 8) * (wp / 8) * c;
  if (blocks * 2 > hd.payload_bits) throw CodecError("header dimensions inconsistent with payload size", 5);
  if (hd.payload_bits % 8) {
    const std::uint8_t last = b.bytes.back();
    const std::uint8_t pad_mask = static_cast<std::uint8_t>((1u << (8 - hd.payload_bits % 8)) - 1);
    if (last & pad_mask) throw CodecError("non-zero padding bits", b.bytes.size() - 1);
  }

  const QuantTable table = quant_table(QualityFactor(hd.quality));
  const auto& dc = dc_code();
  const auto& ac = ac_code();
  BitReader br(b.bytes, kHeaderBytes, hd.payload_bits);
  std::vector<int> levels(static_cast<size_t>(h) * w * c);

  for (int ch = 0; ch < c; ++ch) {
    int prev_dc = 0;
    for (int by = 0; by < hp; by += 8) {
      for (int bx = 0; bx < wp; bx += 8) {
        std::array<int, 64> zz{};
        const int dsize = br.symbol(dc);
        prev_dc += decode_amplitude(br.bits(dsize), dsize);
        zz[0] = prev_dc;
        int k = 1;
        while (k < 64) {
          const int sym = br.symbol(ac);
          if (sym == kEob) break;
          const int run = sym >> 4, size = sym & 15;
          if (sym == kZrl) {
            k += 16;
            if (k >= 64) throw CodecError("zero run past end of block", br.offset());
            continue;
          }
          k += run;
          if (k >= 64) throw CodecError("coefficient index past end of block", br.offset());
          zz[k++] = decode_amplitude(br.bits(size), size);
        }
        Block coef;
        for (int i = 0; i < 64; ++i) coef.data()[kZigzag[i]] = static_cast<double>(zz[i]) * table[kZigzag[i]];
        const Block pix = idct2(coef);
        for (int i = 0; i < 8; ++i) {
          const int yy = by + i;
          if (yy >= h) break;
          for (int j = 0; j < 8; ++j) {
            const int xx = bx + j;
            if (xx >= w) break;
            const long v = std::lround(pix(i, j) + 128.0);
            levels[(static_cast<size_t>(ch) * h + yy) * w + xx] = static_cast<int>(std::clamp<long>(v, 0, 255));
          }
        }
      }
    }
  }
  if (!br.done()) throw CodecError("trailing bits after final block", br.offset());
  return from_levels(levels, h, w, c);
}

}  // namespace pstx::codec
