/*
 * Copyright 2026 The dialseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "dialseg/imageio.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace dialseg {

namespace {

uint8_t to_byte(float v) {
  float scaled = std::round(v * 255.0f);
  if (scaled < 0.0f) scaled = 0.0f;
  if (scaled > 255.0f) scaled = 255.0f;
  return static_cast<uint8_t>(scaled);
}

Image<float> from_rgb_bytes(const std::vector<uint8_t>& buf, int h, int w) {
  Image<float> img(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      size_t o = (static_cast<size_t>(y) * w + x) * 3;
      img.at(0, y, x) = buf[o] / 255.0f;
      img.at(1, y, x) = buf[o + 1] / 255.0f;
      img.at(2, y, x) = buf[o + 2] / 255.0f;
    }
  return img;
}

bool has_png_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char magic[8] = {};
  in.read(reinterpret_cast<char*>(magic), 8);
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  return in.gcount() == 8 && std::memcmp(magic, png_sig, 8) == 0;
}

std::vector<uint8_t> read_png_buffer(const std::string& path, uint32_t format, int channels,
                                     int* h, int* w) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    throw DataError("cannot read PNG " + path + ": " + png.message);
  png.format = format;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw DataError("cannot decode PNG " + path + ": " + msg);
  }
  *h = static_cast<int>(png.height);
  *w = static_cast<int>(png.width);
  if (buf.size() != static_cast<size_t>(*h) * static_cast<size_t>(*w) * channels)
    throw DataError("unexpected PNG layout in " + path);
  return buf;
}

Image<float> read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path);
  std::string magic;
  in >> magic;
  if (magic != "P6") throw DataError("unsupported image format in " + path);
  auto next_token = [&in, &path]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw DataError("truncated PPM header in " + path);
  };
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  if (w <= 0 || h <= 0 || maxval != 255) throw DataError("unsupported PPM header in " + path);
  in.get();  // single whitespace after maxval
  std::vector<uint8_t> buf(static_cast<size_t>(h) * w * 3);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw DataError("truncated PPM payload in " + path);
  return from_rgb_bytes(buf, h, w);
}

void atomic_rename(const std::string& tmp, const std::string& path) {
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot move temp file onto " + path + ": " + ec.message());
  }
}

}  // namespace

Image<float> read_image(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("image file not found: " + path);
  if (has_png_magic(path)) {
    int h = 0, w = 0;
    auto buf = read_png_buffer(path, PNG_FORMAT_RGB, 3, &h, &w);
    return from_rgb_bytes(buf, h, w);
  }
  return read_ppm(path);
}

LabelMap read_label(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("label file not found: " + path);
  if (!has_png_magic(path)) throw DataError("labels must be single-channel PNG: " + path);
  int h = 0, w = 0;
  auto buf = read_png_buffer(path, PNG_FORMAT_GRAY, 1, &h, &w);
  LabelMap lm(h, w);
  std::copy(buf.begin(), buf.end(), lm.ids.begin());
  lm.validate();
  return lm;
}

void write_ppm(const std::string& path, const Image<float>& img) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    out << "P6\n" << img.width() << " " << img.height() << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        row[static_cast<size_t>(x) * 3] = to_byte(img.at(0, y, x));
        row[static_cast<size_t>(x) * 3 + 1] = to_byte(img.at(1, y, x));
        row[static_cast<size_t>(x) * 3 + 2] = to_byte(img.at(2, y, x));
      }
      out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw DataError("failed writing " + tmp);
  }
  atomic_rename(tmp, path);
}

void write_label_png(const std::string& path, const LabelMap& labels) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(labels.width);
  png.height = static_cast<png_uint_32>(labels.height);
  png.format = PNG_FORMAT_GRAY;
  std::string tmp = path + ".tmp";
  if (!png_image_write_to_file(&png, tmp.c_str(), 0, labels.ids.data(), 0, nullptr))
    throw DataError("cannot write PNG " + tmp + ": " + png.message);
  atomic_rename(tmp, path);
}

}  // namespace dialseg
