#include "rsed/audio.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rsed {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw std::runtime_error("not a RIFF/WAVE file: " + path);
  }

  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  bool have_fmt = false;

  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const unsigned char* hdr = buf.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_len > buf.size()) chunk_len = static_cast<uint32_t>(buf.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0 && chunk_len >= 16) {
      format = read_u16(buf.data() + body);
      channels = read_u16(buf.data() + body + 2);
      rate = read_u32(buf.data() + body + 4);
      bits = read_u16(buf.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_off == 0) throw std::runtime_error("malformed WAV file: " + path);
  if (channels != 1) {
    throw std::runtime_error("expected mono audio, got " + std::to_string(channels) +
                             " channels: " + path);
  }

  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  const unsigned char* d = buf.data() + data_off;

  if (format == 1 && bits == 16) {
    size_t n = data_len / 2;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t v = static_cast<int16_t>(d[2 * i] | d[2 * i + 1] << 8);
      w.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == 1 && bits == 24) {
    size_t n = data_len / 3;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int32_t v = d[3 * i] | d[3 * i + 1] << 8 | d[3 * i + 2] << 16;
      if (v & 0x800000) v |= ~0xFFFFFF;  // sign extend
      w.samples[i] = static_cast<float>(v) / 8388608.0f;
    }
  } else if (format == 3 && bits == 32) {
    size_t n = data_len / 4;
    w.samples.resize(n);
    std::memcpy(w.samples.data(), d, n * 4);
  } else {
    throw std::runtime_error("unsupported WAV encoding (format " + std::to_string(format) +
                             ", " + std::to_string(bits) + " bit): " + path);
  }
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write WAV file: " + path);

  auto put_u32 = [&](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u16 = [&](uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<char*>(b), 2);
  };

  uint32_t data_len = static_cast<uint32_t>(w.samples.size() * 4);
  out.write("RIFF", 4);
  put_u32(36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(3);  // IEEE float
  put_u16(1);  // mono
  put_u32(static_cast<uint32_t>(w.sample_rate));
  put_u32(static_cast<uint32_t>(w.sample_rate) * 4);
  put_u16(4);
  put_u16(32);
  out.write("data", 4);
  put_u32(data_len);
  out.write(reinterpret_cast<const char*>(w.samples.data()), data_len);
  if (!out) throw std::runtime_error("short write: " + path);
}

}  // namespace rsed
