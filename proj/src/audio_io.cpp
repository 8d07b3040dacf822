// Copyright 2026 The faultear Authors
// SPDX-License-Identifier: Apache-2.0

#include "faultear/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "faultear/errors.hpp"

namespace faultear {
namespace {

constexpr double kPcmScale = 32768.0;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoFailure, "read failed for " + path);

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(Errc::NotWav, path + " is not a RIFF/WAVE file");
  }

  // Walk the chunk list, skipping anything other than fmt and data.
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data = nullptr;
  std::uint32_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t chunk_len = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_len > bytes.size()) {
      throw Error(Errc::TruncatedFile, path + ": chunk extends past end of file");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw Error(Errc::TruncatedFile, path + ": fmt chunk too short");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      sample_rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt || data == nullptr) {
    throw Error(Errc::TruncatedFile, path + ": missing fmt or data chunk");
  }
  if (format != 1) throw Error(Errc::UnsupportedFormat, path + ": not PCM");
  if (bits != 16) throw Error(Errc::UnsupportedFormat, path + ": not 16-bit");
  if (channels != 1) throw Error(Errc::UnsupportedFormat, path + ": not mono");
  if (sample_rate == 0) throw Error(Errc::UnsupportedFormat, path + ": zero sample rate");
  if (data_len % 2 != 0) throw Error(Errc::TruncatedFile, path + ": odd data chunk size");

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(sample_rate);
  clip.source_id = std::filesystem::path(path).stem().string();
  clip.samples.resize(data_len / 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) {
    const std::int16_t word =
        static_cast<std::int16_t>(read_u16(data + 2 * i));
    clip.samples[i] = static_cast<double>(word) / kPcmScale;
  }
  return clip;
}

void write_wav(const AudioClip& clip, const std::string& path) {
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32(out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * 2);  // byte rate
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits per sample
  out.append("data");
  put_u32(out, data_len);
  for (double s : clip.samples) {
    double scaled = std::round(s * kPcmScale);
    scaled = std::clamp(scaled, -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoFailure, "cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error(Errc::IoFailure, "write failed for " + path);
}

std::vector<Frame> frame_signal(const AudioClip& clip, std::size_t frame_len,
                                std::size_t hop) {
  std::vector<Frame> frames;
  if (frame_len == 0 || hop == 0) {
    throw Error(Errc::BadRange, "frame_len and hop must be positive");
  }
  if (clip.samples.size() < frame_len) return frames;
  const std::size_t count = (clip.samples.size() - frame_len) / hop + 1;
  frames.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Frame frame;
    frame.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(i * hop),
                         clip.samples.begin() + static_cast<std::ptrdiff_t>(i * hop + frame_len));
    frame.frame_index = i;
    frame.source_id = clip.source_id;
    frame.label = clip.label.value_or(FaultLabel::Normal);
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace faultear
