/*
 * Copyright 2026 The CollabEdit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "collabedit/wire.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace collabedit {
namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'E', 'D', 'P'};

class Writer {
 public:
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(const std::uint8_t* p, std::size_t n) { out_.insert(out_.end(), p, p + n); }
  void row_major(const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
  }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  Matrix row_major(std::uint32_t rows, std::uint32_t cols, const char* what) {
    const auto n = static_cast<std::uint64_t>(rows) * cols;
    if (n > remaining() / 8) {
      throw DecodeError(DecodeErrorKind::kTruncated,
                        std::string("decode_packet: truncated ") + what + " block");
    }
    Matrix m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = f64();
    }
    return m;
  }

 private:
  std::uint64_t get(int n) {
    if (remaining() < static_cast<std::size_t>(n)) {
      throw DecodeError(DecodeErrorKind::kTruncated, "decode_packet: unexpected end of packet");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(
        std::min<std::size_t>(bytes.size() - offset, std::numeric_limits<uInt>::max()));
    crc = crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t checked_u32(Eigen::Index v, const char* what) {
  if (v < 0 || static_cast<std::uint64_t>(v) > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument(std::string("encode_packet: ") + what + " does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string_view decode_error_name(DecodeErrorKind kind) {
  switch (kind) {
    case DecodeErrorKind::kTruncated: return "truncated";
    case DecodeErrorKind::kCrcMismatch: return "crc_mismatch";
    case DecodeErrorKind::kBadMagic: return "bad_magic";
    case DecodeErrorKind::kUnsupportedVersion: return "unsupported_version";
    case DecodeErrorKind::kTrailingBytes: return "trailing_bytes";
  }
  return "unknown";
}

std::vector<std::uint8_t> encode_packet(const EditPacket& packet) {
  if (packet.entries.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw InvalidArgument("encode_packet: too many layers");
  }
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u16(kWireVersion);
  w.u32(packet.client_id);
  w.u32(packet.round);
  w.u16(static_cast<std::uint16_t>(packet.entries.size()));
  for (const auto& e : packet.entries) {
    if (e.gram.rows() != e.gram.cols() || e.delta.cols() != e.gram.rows()) {
      throw DimensionMismatch("encode_packet: layer " + std::to_string(e.layer_id) + " has delta " +
                              shape_string(e.delta.rows(), e.delta.cols()) + " and gram " +
                              shape_string(e.gram.rows(), e.gram.cols()));
    }
    w.u16(e.layer_id);
    w.u32(checked_u32(e.delta.rows(), "d_val"));
    w.u32(checked_u32(e.delta.cols(), "d_key"));
    w.row_major(e.delta);
    w.row_major(e.gram);
  }
  const std::uint32_t crc = crc_of(w.data());
  w.u32(crc);
  return std::move(w.data());
}

EditPacket decode_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kWireHeaderBytes + kWireCrcBytes) {
    throw DecodeError(DecodeErrorKind::kTruncated,
                      "decode_packet: " + std::to_string(bytes.size()) +
                          " bytes is shorter than the fixed header");
  }
  const auto body = bytes.first(bytes.size() - kWireCrcBytes);
  Reader tail(bytes.last(kWireCrcBytes));
  const std::uint32_t stored = tail.u32();
  const std::uint32_t actual = crc_of(body);
  if (stored != actual) {
    throw DecodeError(DecodeErrorKind::kCrcMismatch, "decode_packet: CRC-32 mismatch");
  }
  if (std::memcmp(body.data(), kMagic, sizeof kMagic) != 0) {
    throw DecodeError(DecodeErrorKind::kBadMagic, "decode_packet: missing CEDP magic");
  }

  Reader r(body.subspan(sizeof kMagic));
  const std::uint16_t version = r.u16();
  if (version != kWireVersion) {
    throw DecodeError(DecodeErrorKind::kUnsupportedVersion,
                      "decode_packet: unsupported format version " + std::to_string(version));
  }
  EditPacket packet;
  packet.client_id = r.u32();
  packet.round = r.u32();
  const std::uint16_t n_layers = r.u16();
  packet.entries.reserve(n_layers);
  for (std::uint16_t i = 0; i < n_layers; ++i) {
    PacketEntry e;
    e.layer_id = r.u16();
    const std::uint32_t d_val = r.u32();
    const std::uint32_t d_key = r.u32();
    e.delta = r.row_major(d_val, d_key, "delta");
    e.gram = r.row_major(d_key, d_key, "gram");
    packet.entries.push_back(std::move(e));
  }
  if (r.remaining() != 0) {
    throw DecodeError(DecodeErrorKind::kTrailingBytes,
                      "decode_packet: " + std::to_string(r.remaining()) + " unexpected trailing bytes");
  }
  return packet;
}

void write_packet_file(const std::filesystem::path& path, const EditPacket& packet) {
  const auto bytes = encode_packet(packet);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

EditPacket read_packet_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_packet(bytes);
}

}  // namespace collabedit
