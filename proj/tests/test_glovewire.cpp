#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "generators.hpp"
#include "presstrain/glovewire.hpp"

using namespace presstrain;

namespace {

// Bitwise CRC-8, polynomial 0x07, init 0, no reflection.
std::uint8_t crc8_bitwise(const std::uint8_t* p, std::size_t n) {
  std::uint8_t crc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    crc ^= p[i];
    for (int b = 0; b < 8; ++b) crc = static_cast<std::uint8_t>((crc & 0x80) ? (crc << 1) ^ 0x07 : crc << 1);
  }
  return crc;
}

std::vector<std::uint8_t> concat(std::initializer_list<FrameBytes> frames) {
  std::vector<std::uint8_t> out;
  for (const auto& f : frames) out.insert(out.end(), f.begin(), f.end());
  return out;
}

}  // namespace

TEST_CASE("crc8 matches the bitwise definition", "[wire]") {
  const std::uint8_t check[] = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
  CHECK(crc8(check) == 0xF4);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto b = gen::bytes(rng, rng() % 64);
    REQUIRE(crc8(b) == crc8_bitwise(b.data(), b.size()));
  }
}

TEST_CASE("zero frame layout", "[wire]") {
  const auto bytes = encode_frame(RawFrame{});
  REQUIRE(bytes.size() == 35);
  CHECK(bytes[0] == 0xA5);
  for (std::size_t i = 1; i < 34; ++i) CHECK(bytes[i] == 0);
  CHECK(bytes[34] == crc8_bitwise(bytes.data() + 1, 33));
}

TEST_CASE("field layout is little-endian", "[wire]") {
  RawFrame f;
  f.seq = 0x7F;
  f.timestamp_us = 0x0102030405060708ULL;
  for (std::size_t i = 0; i < kChannelCount; ++i) f.channels[i] = static_cast<std::uint16_t>(1023 - 80 * i);
  const auto b = encode_frame(f);
  CHECK(b[1] == 0x7F);
  for (int i = 0; i < 8; ++i) CHECK(b[2 + static_cast<std::size_t>(i)] == 8 - i);
  for (std::size_t ch = 0; ch < kChannelCount; ++ch) {
    CHECK(b[10 + 2 * ch] == (f.channels[ch] & 0xFF));
    CHECK(b[11 + 2 * ch] == (f.channels[ch] >> 8));
    CHECK((b[11 + 2 * ch] & 0xFC) == 0);
  }
  CHECK(b[34] == crc8_bitwise(b.data() + 1, 33));
}

TEST_CASE("out-of-range channel is rejected before encoding", "[wire]") {
  RawFrame f;
  f.channels[3] = 1024;
  CHECK_THROWS_AS(encode_frame(f), Error);
  f.channels[3] = 1023;
  CHECK_NOTHROW(encode_frame(f));
}

TEST_CASE("two concatenated frames decode with no remainder", "[wire]") {
  std::mt19937_64 rng(2);
  const auto a = gen::frame(rng), b = gen::frame(rng);
  const auto bytes = concat({encode_frame(a), encode_frame(b)});
  const auto r = decode_stream(bytes);
  REQUIRE(r.frames.size() == 2);
  CHECK(r.frames[0] == a);
  CHECK(r.frames[1] == b);
  CHECK(r.remainder.empty());
  CHECK(r.errors.empty());
  CHECK(r.consumed == 70);
}

TEST_CASE("one flipped payload bit gives one BadCrc and no frame", "[wire]") {
  std::mt19937_64 rng(3);
  auto bytes = encode_frame(gen::frame(rng));
  bytes[17] ^= 0x10;
  const auto r = decode_stream(bytes);
  CHECK(r.frames.empty());
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].kind == FrameErrorKind::BadCrc);
  CHECK(r.errors[0].offset == 0);
}

TEST_CASE("garbage prefix then a valid frame resynchronises", "[wire]") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto bytes = gen::bytes(rng, 10);
    for (auto& b : bytes)
      if (b == kSyncByte) b = 0;
    const auto f = gen::frame(rng);
    const auto enc = encode_frame(f);
    bytes.insert(bytes.end(), enc.begin(), enc.end());
    const auto r = decode_stream(bytes);
    REQUIRE(r.frames.size() == 1);
    CHECK(r.frames[0] == f);
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].kind == FrameErrorKind::BadSync);
    CHECK(r.errors[0].offset == 0);
  }
}

TEST_CASE("garbage containing sync bytes still recovers the frame", "[wire]") {
  std::mt19937_64 rng(5);
  int recovered = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto bytes = gen::bytes(rng, 10);
    bytes[rng() % 10] = kSyncByte;
    const auto f = gen::frame(rng);
    const auto enc = encode_frame(f);
    bytes.insert(bytes.end(), enc.begin(), enc.end());
    const auto r = decode_stream(bytes);
    recovered += std::count(r.frames.begin(), r.frames.end(), f) == 1;
  }
  CHECK(recovered == 500);
}

TEST_CASE("partial frame stays pending until completed", "[wire]") {
  std::mt19937_64 rng(6);
  const auto f = gen::frame(rng);
  const auto enc = encode_frame(f);
  StreamDecoder dec;
  auto first = dec.push(std::span<const std::uint8_t>(enc).first(20));
  CHECK(first.frames.empty());
  CHECK(first.errors.empty());
  CHECK(dec.pending().size() == 20);
  CHECK(dec.consumed() == 0);
  auto second = dec.push(std::span<const std::uint8_t>(enc).subspan(20));
  REQUIRE(second.frames.size() == 1);
  CHECK(second.frames[0] == f);
  CHECK(dec.pending().empty());
  CHECK(dec.consumed() == 35);
}

TEST_CASE("finish reports a truncated frame", "[wire]") {
  std::mt19937_64 rng(7);
  const auto enc = encode_frame(gen::frame(rng));
  StreamDecoder dec;
  dec.push(std::span<const std::uint8_t>(enc).first(30));
  const auto errors = dec.finish();
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].kind == FrameErrorKind::ShortFrame);
  CHECK(dec.consumed() == 30);
  CHECK(dec.finish().empty());
}

TEST_CASE("valid crc with an out-of-range channel is BadChannel", "[wire]") {
  RawFrame f;
  auto b = encode_frame(f);
  b[11] = 0x04;  // channel 0 = 1024
  b[34] = crc8_bitwise(b.data() + 1, 33);
  const auto r = decode_stream(b);
  CHECK(r.frames.empty());
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].kind == FrameErrorKind::BadChannel);
}

TEST_CASE("round trip of 10^4 random frames", "[wire][property]") {
  std::mt19937_64 rng(8);
  std::vector<RawFrame> frames;
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 10000; ++i) {
    frames.push_back(gen::frame(rng));
    const auto enc = encode_frame(frames.back());
    stream.insert(stream.end(), enc.begin(), enc.end());
    const auto one = decode_stream(enc);
    REQUIRE(one.frames.size() == 1);
    REQUIRE(one.frames[0] == frames.back());
  }
  // Same stream fed in random-sized chunks.
  StreamDecoder dec;
  std::vector<RawFrame> out;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t len = std::min<std::size_t>(1 + rng() % 100, stream.size() - pos);
    auto batch = dec.push(std::span<const std::uint8_t>(stream).subspan(pos, len));
    REQUIRE(batch.errors.empty());
    out.insert(out.end(), batch.frames.begin(), batch.frames.end());
    pos += len;
  }
  CHECK(out == frames);
}

TEST_CASE("every single-bit corruption is detected", "[wire][property]") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto f = gen::frame(rng);
    const auto enc = encode_frame(f);
    for (std::size_t bit = 0; bit < 35 * 8; ++bit) {
      auto bad = enc;
      bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
      const auto r = decode_stream(bad);
      INFO("frame " << i << " bit " << bit);
      REQUIRE(r.frames.empty());
      const bool flagged = !r.errors.empty() || !r.remainder.empty();
      REQUIRE(flagged);
    }
  }
}

TEST_CASE("fuzz: arbitrary bytes terminate and account for every byte", "[wire][property]") {
  std::mt19937_64 rng(10);
  const auto bytes = gen::bytes(rng, 1 << 20);
  const auto r = decode_stream(bytes);
  CHECK(r.consumed + r.remainder.size() == bytes.size());
  CHECK(r.remainder.size() < kFrameSize);
  for (const auto& e : r.errors) CHECK(e.offset < bytes.size());

  StreamDecoder dec;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t len = std::min<std::size_t>(1 + rng() % 4096, bytes.size() - pos);
    dec.push(std::span<const std::uint8_t>(bytes).subspan(pos, len));
    pos += len;
  }
  CHECK(dec.consumed() + dec.pending().size() == bytes.size());
}

TEST_CASE("sequence numbers wrap mod 256", "[wire]") {
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 300; ++i) {
    RawFrame f;
    f.seq = static_cast<std::uint8_t>(i);
    const auto enc = encode_frame(f);
    stream.insert(stream.end(), enc.begin(), enc.end());
  }
  const auto r = decode_stream(stream);
  REQUIRE(r.frames.size() == 300);
  for (std::size_t i = 1; i < r.frames.size(); ++i)
    CHECK(static_cast<std::uint8_t>(r.frames[i].seq - r.frames[i - 1].seq) == 1);
}

TEST_CASE("json debug lines round trip", "[wire]") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const auto f = gen::frame(rng);
    CHECK(frame_from_json_line(to_json_line(f)) == f);
  }
  CHECK_THROWS_AS(frame_from_json_line("{\"seq\":1}"), Error);
  CHECK_THROWS_AS(frame_from_json_line("not json"), Error);
  CHECK_THROWS_AS(frame_from_json_line(R"({"seq":1,"timestamp_us":0,"channels":[0,0,0,0,0,0,0,0,0,0,0,1024]})"),
                  Error);
}
