#pragma once

// Glove wire format. One frame is 35 bytes:
//
//   [0]      sync 0xA5
//   [1]      seq (wraps at 256)
//   [2..9]   timestamp_us, uint64 little-endian
//   [10..33] 12 channels, uint16 little-endian, top 6 bits zero
//   [34]     CRC-8 (poly 0x07, init 0x00) over bytes [1..33]

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "presstrain/error.hpp"

namespace presstrain {

inline constexpr std::size_t kChannelCount = 12;
inline constexpr std::size_t kFrameSize = 35;
inline constexpr std::uint8_t kSyncByte = 0xA5;
inline constexpr std::uint16_t kMaxChannelValue = 1023;

struct RawFrame {
  std::uint8_t seq = 0;
  std::uint64_t timestamp_us = 0;
  std::array<std::uint16_t, kChannelCount> channels{};

  bool operator==(const RawFrame&) const = default;
};

namespace detail {

constexpr std::array<std::uint8_t, 256> make_crc8_table() {
  std::array<std::uint8_t, 256> table{};
  for (int i = 0; i < 256; ++i) {
    auto crc = static_cast<std::uint8_t>(i);
    for (int b = 0; b < 8; ++b)
      crc = static_cast<std::uint8_t>((crc & 0x80) ? (crc << 1) ^ 0x07 : crc << 1);
    table[static_cast<std::size_t>(i)] = crc;
  }
  return table;
}

inline constexpr auto kCrc8Table = make_crc8_table();

}  // namespace detail

constexpr std::uint8_t crc8(std::span<const std::uint8_t> bytes) {
  std::uint8_t crc = 0;
  for (auto b : bytes) crc = detail::kCrc8Table[crc ^ b];
  return crc;
}

using FrameBytes = std::array<std::uint8_t, kFrameSize>;

inline FrameBytes encode_frame(const RawFrame& frame) {
  FrameBytes out{};
  out[0] = kSyncByte;
  out[1] = frame.seq;
  for (int i = 0; i < 8; ++i)
    out[2 + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(frame.timestamp_us >> (8 * i));
  for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
    const auto v = frame.channels[ch];
    if (v > kMaxChannelValue)
      throw Error(ErrorCode::InvalidInput,
                  "channel " + std::to_string(ch) + " value " + std::to_string(v) + " exceeds 1023");
    out[10 + 2 * ch] = static_cast<std::uint8_t>(v & 0xFF);
    out[11 + 2 * ch] = static_cast<std::uint8_t>(v >> 8);
  }
  out[34] = crc8(std::span<const std::uint8_t>(out).subspan(1, 33));
  return out;
}

enum class FrameErrorKind { BadSync, BadCrc, ShortFrame, BadChannel };

inline std::string_view to_string(FrameErrorKind k) {
  switch (k) {
    case FrameErrorKind::BadSync: return "BadSync";
    case FrameErrorKind::BadCrc: return "BadCrc";
    case FrameErrorKind::ShortFrame: return "ShortFrame";
    case FrameErrorKind::BadChannel: return "BadChannel";
  }
  return "?";
}

struct FrameError {
  FrameErrorKind kind;
  std::uint64_t offset;  // absolute byte offset in the stream

  bool operator==(const FrameError&) const = default;
};

/// Incremental parser. Feed arbitrary chunks; complete frames come out,
/// a partial frame is held until more bytes arrive.
class StreamDecoder {
 public:
  struct Batch {
    std::vector<RawFrame> frames;
    std::vector<FrameError> errors;
  };

  Batch push(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    Batch out;
    std::size_t pos = 0;
    const std::size_t n = buffer_.size();
    while (pos < n) {
      if (buffer_[pos] != kSyncByte) {
        if (!in_garbage_ && !suppress_sync_error_)
          out.errors.push_back({FrameErrorKind::BadSync, base_ + pos});
        in_garbage_ = true;
        ++pos;
        continue;
      }
      in_garbage_ = false;
      if (n - pos < kFrameSize) break;

      const std::span<const std::uint8_t> candidate(buffer_.data() + pos, kFrameSize);
      if (crc8(candidate.subspan(1, 33)) != candidate[34]) {
        out.errors.push_back({FrameErrorKind::BadCrc, base_ + pos});
        suppress_sync_error_ = true;
        ++pos;
        continue;
      }
      RawFrame frame;
      bool channels_ok = true;
      frame.seq = candidate[1];
      for (int i = 0; i < 8; ++i)
        frame.timestamp_us |= static_cast<std::uint64_t>(candidate[2 + static_cast<std::size_t>(i)]) << (8 * i);
      for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
        const auto v = static_cast<std::uint16_t>(candidate[10 + 2 * ch] | (candidate[11 + 2 * ch] << 8));
        if (v > kMaxChannelValue) channels_ok = false;
        frame.channels[ch] = v;
      }
      if (!channels_ok) {
        out.errors.push_back({FrameErrorKind::BadChannel, base_ + pos});
        suppress_sync_error_ = true;
        ++pos;
        continue;
      }
      out.frames.push_back(frame);
      suppress_sync_error_ = false;
      pos += kFrameSize;
    }
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
    base_ += pos;
    return out;
  }

  /// End of stream: a pending partial frame becomes a ShortFrame error.
  std::vector<FrameError> finish() {
    std::vector<FrameError> errors;
    if (!buffer_.empty()) errors.push_back({FrameErrorKind::ShortFrame, base_});
    base_ += buffer_.size();
    buffer_.clear();
    in_garbage_ = false;
    suppress_sync_error_ = false;
    return errors;
  }

  std::span<const std::uint8_t> pending() const { return buffer_; }
  std::uint64_t consumed() const { return base_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::uint64_t base_ = 0;
  bool in_garbage_ = false;
  bool suppress_sync_error_ = false;
};

struct DecodeResult {
  std::vector<RawFrame> frames;
  std::vector<std::uint8_t> remainder;
  std::vector<FrameError> errors;
  std::size_t consumed = 0;
};

/// One-shot decode of a buffer; `consumed + remainder.size() == buffer.size()`.
inline DecodeResult decode_stream(std::span<const std::uint8_t> buffer) {
  StreamDecoder dec;
  auto batch = dec.push(buffer);
  DecodeResult r;
  r.frames = std::move(batch.frames);
  r.errors = std::move(batch.errors);
  r.remainder.assign(dec.pending().begin(), dec.pending().end());
  r.consumed = static_cast<std::size_t>(dec.consumed());
  return r;
}

// Newline-delimited JSON debug form.

inline nlohmann::json to_json(const RawFrame& f) {
  return {{"seq", f.seq}, {"timestamp_us", f.timestamp_us}, {"channels", f.channels}};
}

inline std::string to_json_line(const RawFrame& f) { return to_json(f).dump(); }

inline RawFrame frame_from_json(const nlohmann::json& j) {
  try {
    RawFrame f;
    const auto seq = j.at("seq").get<int>();
    if (seq < 0 || seq > 255) throw Error(ErrorCode::InvalidData, "seq out of range");
    f.seq = static_cast<std::uint8_t>(seq);
    f.timestamp_us = j.at("timestamp_us").get<std::uint64_t>();
    const auto& ch = j.at("channels");
    if (!ch.is_array() || ch.size() != kChannelCount)
      throw Error(ErrorCode::InvalidData, "expected 12 channels");
    for (std::size_t i = 0; i < kChannelCount; ++i) {
      const auto v = ch[i].get<int>();
      if (v < 0 || v > kMaxChannelValue) throw Error(ErrorCode::InvalidData, "channel out of range");
      f.channels[i] = static_cast<std::uint16_t>(v);
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidData, e.what());
  }
}

inline RawFrame frame_from_json_line(std::string_view line) {
  try {
    return frame_from_json(nlohmann::json::parse(line));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidData, e.what());
  }
}

}  // namespace presstrain
