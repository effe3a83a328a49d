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

#ifndef COLLABEDIT_WIRE_H_
#define COLLABEDIT_WIRE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "collabedit/collab.h"
#include "collabedit/errors.h"

namespace collabedit {

// CEDP packet layout, all integers little-endian:
//   "CEDP" | u16 version | u32 client_id | u32 round | u16 n_layers
//   n_layers x ( u16 layer_id | u32 d_val | u32 d_key
//                | f64[d_val*d_key] delta, row-major
//                | f64[d_key*d_key] gram, row-major )
//   u32 CRC-32 of every preceding byte
inline constexpr std::uint16_t kWireVersion = 1;
inline constexpr std::size_t kWireHeaderBytes = 16;
inline constexpr std::size_t kWireCrcBytes = 4;

enum class DecodeErrorKind {
  kTruncated,
  kCrcMismatch,
  kBadMagic,
  kUnsupportedVersion,
  kTrailingBytes,
};

std::string_view decode_error_name(DecodeErrorKind kind);

class DecodeError : public InvalidArgument {
 public:
  DecodeError(DecodeErrorKind kind, const std::string& what)
      : InvalidArgument(what), kind_(kind) {}
  DecodeErrorKind kind() const noexcept { return kind_; }

 private:
  DecodeErrorKind kind_;
};

std::vector<std::uint8_t> encode_packet(const EditPacket& packet);

// The checksum is verified before any field is interpreted.
EditPacket decode_packet(std::span<const std::uint8_t> bytes);

void write_packet_file(const std::filesystem::path& path, const EditPacket& packet);
EditPacket read_packet_file(const std::filesystem::path& path);

}  // namespace collabedit

#endif  // COLLABEDIT_WIRE_H_
