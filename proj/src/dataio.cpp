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

#include "dialseg/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dialseg/imageio.hpp"

namespace fs = std::filesystem;

namespace dialseg {

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

namespace {

std::string resolve(const std::string& root, const std::string& rel) {
  if (rel.empty() || rel.front() == '/') return rel;
  return (fs::path(root) / rel).string();
}

}  // namespace

DatasetManifest load_manifest(const std::string& path, DatasetRole role) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path);
  DatasetManifest m;
  m.root = fs::path(path).parent_path().string();
  m.split = fs::path(path).stem().string();
  m.role = role;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3)
      throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                      ": expected 3 tab-separated fields");
    ManifestEntry e;
    e.image_path = resolve(m.root, fields[0]);
    e.label_path = fields[1] == "-" ? "" : resolve(m.root, fields[1]);
    e.pair_key = fields[2] == "-" ? "" : fields[2];
    if (role == DatasetRole::Source && e.label_path.empty())
      throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                      ": source entries need a label path");
    if (!e.label_path.empty() && !fs::exists(e.label_path))
      throw DataError("manifest " + path + " line " + std::to_string(lineno) +
                      ": label file missing: " + e.label_path);
    if ((role == DatasetRole::TargetDay || role == DatasetRole::TargetNight) && e.pair_key.empty())
      throw ConfigError("manifest " + path + " line " + std::to_string(lineno) +
                        ": target entries need a day/night pair key");
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw DataError("manifest " + path + " is empty");
  return m;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    for (const auto& e : entries) {
      out << e.image_path << '\t' << (e.label_path.empty() ? "-" : e.label_path) << '\t'
          << (e.pair_key.empty() ? "-" : e.pair_key) << '\n';
    }
    if (!out) throw DataError("failed writing " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move temp manifest onto " + path);
}

Sample load_sample(const ManifestEntry& entry) {
  Sample s;
  s.image = read_image(entry.image_path);
  if (!entry.label_path.empty()) {
    LabelMap lm = read_label(entry.label_path);
    if (lm.height != s.image.height() || lm.width != s.image.width())
      throw DataError("label/image size mismatch for " + entry.image_path);
    s.labels = std::move(lm);
  }
  return s;
}

LabelMap remap_cityscapes_ids(const LabelMap& raw) {
  static const std::array<std::pair<uint8_t, uint8_t>, 19> mapping{{{7, 0},
                                                                    {8, 1},
                                                                    {11, 2},
                                                                    {12, 3},
                                                                    {13, 4},
                                                                    {17, 5},
                                                                    {19, 6},
                                                                    {20, 7},
                                                                    {21, 8},
                                                                    {22, 9},
                                                                    {23, 10},
                                                                    {24, 11},
                                                                    {25, 12},
                                                                    {26, 13},
                                                                    {27, 14},
                                                                    {28, 15},
                                                                    {31, 16},
                                                                    {32, 17},
                                                                    {33, 18}}};
  std::array<uint8_t, 256> table;
  table.fill(kIgnoreLabel);
  for (auto [from, to] : mapping) table[from] = to;
  LabelMap out(raw.height, raw.width);
  for (size_t i = 0; i < raw.ids.size(); ++i) out.ids[i] = table[raw.ids[i]];
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------

namespace {

struct Scene {
  Image<float> day;
  LabelMap labels;
};

const std::array<std::array<float, 3>, kNumCategories>& category_base_colors() {
  // Distinct, roughly scene-plausible colors in [0,1].
  static const std::array<std::array<float, 3>, kNumCategories> colors{{
      {0.38f, 0.35f, 0.42f},  // road
      {0.85f, 0.45f, 0.75f},  // sidewalk
      {0.45f, 0.45f, 0.42f},  // building
      {0.55f, 0.50f, 0.65f},  // wall
      {0.70f, 0.62f, 0.58f},  // fence
      {0.60f, 0.60f, 0.60f},  // pole
      {0.95f, 0.70f, 0.20f},  // traffic light
      {0.90f, 0.88f, 0.15f},  // traffic sign
      {0.25f, 0.60f, 0.20f},  // vegetation
      {0.58f, 0.90f, 0.55f},  // terrain
      {0.50f, 0.70f, 0.95f},  // sky
      {0.88f, 0.20f, 0.30f},  // person
      {0.98f, 0.40f, 0.15f},  // rider
      {0.15f, 0.18f, 0.75f},  // car
      {0.20f, 0.15f, 0.40f},  // truck
      {0.10f, 0.40f, 0.55f},  // bus
      {0.05f, 0.50f, 0.45f},  // train
      {0.45f, 0.10f, 0.85f},  // motorcycle
      {0.70f, 0.15f, 0.15f},  // bicycle
  }};
  return colors;
}

void paint_rect(Scene& s, int y0, int x0, int y1, int x1, uint8_t cat,
                const std::array<float, 3>& color) {
  int h = s.labels.height, w = s.labels.width;
  y0 = std::clamp(y0, 0, h);
  y1 = std::clamp(y1, 0, h);
  x0 = std::clamp(x0, 0, w);
  x1 = std::clamp(x1, 0, w);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      s.labels.at(y, x) = cat;
      for (int c = 0; c < 3; ++c) s.day.at(c, y, x) = color[static_cast<size_t>(c)];
    }
}

void paint_ellipse(Scene& s, double cy, double cx, double ry, double rx, uint8_t cat,
                   const std::array<float, 3>& color) {
  int h = s.labels.height, w = s.labels.width;
  int y0 = std::clamp(static_cast<int>(cy - ry) - 1, 0, h);
  int y1 = std::clamp(static_cast<int>(cy + ry) + 2, 0, h);
  int x0 = std::clamp(static_cast<int>(cx - rx) - 1, 0, w);
  int x1 = std::clamp(static_cast<int>(cx + rx) + 2, 0, w);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      double dy = (y - cy) / ry, dx = (x - cx) / rx;
      if (dy * dy + dx * dx <= 1.0) {
        s.labels.at(y, x) = cat;
        for (int c = 0; c < 3; ++c) s.day.at(c, y, x) = color[static_cast<size_t>(c)];
      }
    }
}

std::array<float, 3> jitter_color(const std::array<float, 3>& base, Rng& rng) {
  std::array<float, 3> c;
  for (int i = 0; i < 3; ++i)
    c[static_cast<size_t>(i)] = std::clamp(
        base[static_cast<size_t>(i)] + static_cast<float>(uniform(rng, -0.05, 0.05)), 0.0f, 1.0f);
  return c;
}

Scene render_scene(int size, int sample_index, Rng& rng) {
  Scene s;
  s.day = Image<float>(size, size);
  s.labels = LabelMap(size, size, 0);
  const auto& colors = category_base_colors();

  int horizon = static_cast<int>(size * uniform(rng, 0.35, 0.48));
  int road_top = static_cast<int>(size * uniform(rng, 0.64, 0.74));
  int sidewalk_top = road_top - static_cast<int>(size * uniform(rng, 0.06, 0.12));

  // Sky with a vertical gradient.
  auto sky = jitter_color(colors[10], rng);
  for (int y = 0; y < horizon; ++y) {
    float t = 0.25f * (1.0f - static_cast<float>(y) / std::max(1, horizon));
    for (int x = 0; x < size; ++x) {
      s.labels.at(y, x) = 10;
      s.day.at(0, y, x) = std::clamp(sky[0] + t, 0.0f, 1.0f);
      s.day.at(1, y, x) = std::clamp(sky[1] + t, 0.0f, 1.0f);
      s.day.at(2, y, x) = std::clamp(sky[2] + t, 0.0f, 1.0f);
    }
  }
  paint_rect(s, horizon, 0, sidewalk_top, size, 9, jitter_color(colors[9], rng));    // terrain
  paint_rect(s, sidewalk_top, 0, road_top, size, 1, jitter_color(colors[1], rng));   // sidewalk
  paint_rect(s, road_top, 0, size, size, 0, jitter_color(colors[0], rng));           // road

  // Buildings rising above the horizon.
  int n_buildings = uniform_int(rng, 2, 4);
  for (int i = 0; i < n_buildings; ++i) {
    int bw = uniform_int(rng, size / 8, size / 3);
    int bx = uniform_int(rng, 0, size - bw);
    int bh = uniform_int(rng, size / 6, horizon);
    paint_rect(s, horizon - bh, bx, horizon + 2, bx + bw, 2, jitter_color(colors[2], rng));
  }

  // Wall and fence strips on the terrain band.
  int wall_w = uniform_int(rng, size / 6, size / 3);
  int wall_x = uniform_int(rng, 0, size - wall_w);
  paint_rect(s, horizon + 1, wall_x, std::min(sidewalk_top, horizon + 1 + size / 16), wall_x + wall_w,
             3, jitter_color(colors[3], rng));
  int fence_w = uniform_int(rng, size / 6, size / 3);
  int fence_x = uniform_int(rng, 0, size - fence_w);
  paint_rect(s, sidewalk_top - size / 24 - 1, fence_x, sidewalk_top, fence_x + fence_w, 4,
             jitter_color(colors[4], rng));

  // Vegetation blobs near the horizon.
  int n_veg = uniform_int(rng, 1, 3);
  for (int i = 0; i < n_veg; ++i)
    paint_ellipse(s, horizon - uniform(rng, 0.0, size / 10.0), uniform(rng, 0.0, size),
                  uniform(rng, size / 16.0, size / 8.0), uniform(rng, size / 12.0, size / 6.0), 8,
                  jitter_color(colors[8], rng));

  // Small objects, cycled so every category appears across the dataset.
  static const std::array<uint8_t, 11> object_cats{5, 6, 7, 11, 12, 13, 14, 15, 16, 17, 18};
  int n_objects = uniform_int(rng, 4, 7);
  for (int i = 0; i < n_objects; ++i) {
    uint8_t cat = object_cats[static_cast<size_t>((sample_index * 4 + i) % object_cats.size())];
    auto color = jitter_color(colors[cat], rng);
    int oy = uniform_int(rng, horizon, size - size / 8);
    int ox = uniform_int(rng, 0, size - size / 8);
    if (cat == 5) {  // pole: thin vertical bar
      paint_rect(s, oy - size / 6, ox, oy + size / 12, ox + std::max(1, size / 48), cat, color);
    } else if (cat == 6 || cat == 7) {  // light/sign: small blob on a pole top
      paint_ellipse(s, oy - size / 8, ox, size / 28.0 + 1, size / 24.0 + 1, cat, color);
    } else if (cat == 11 || cat == 12) {  // person/rider: small upright ellipse
      paint_ellipse(s, oy, ox, size / 14.0 + 1, size / 30.0 + 1, cat, color);
    } else {  // vehicles/bikes: wide boxes
      int ow = uniform_int(rng, size / 10, size / 5);
      int oh = std::max(2, ow / 2);
      paint_rect(s, oy, ox, oy + oh, ox + ow, cat, color);
    }
  }

  // Global brightness variation between scenes, then mild per-pixel texture.
  float day_gain = static_cast<float>(uniform(rng, 0.8, 1.1));
  for (size_t i = 0; i < s.day.chw.size(); ++i)
    s.day.chw[i] = std::clamp(
        s.day.chw[i] * day_gain + static_cast<float>(normal(rng, 0.0, 0.01)), 0.0f, 1.0f);
  return s;
}

Image<float> render_night(const Image<float>& day, Rng& rng) {
  double ev = uniform(rng, -3.8, -2.4);
  double gamma = uniform(rng, 2.0, 3.0);
  float gain = static_cast<float>(std::exp2(ev));
  Image<float> night(day.height(), day.width());
  for (size_t i = 0; i < day.chw.size(); ++i)
    night.chw[i] = gain * std::pow(day.chw[i], static_cast<float>(gamma));

  // Additive highlight blobs (street lights, headlights) with a warm tint.
  int n_blobs = uniform_int(rng, 1, 3);
  for (int b = 0; b < n_blobs; ++b) {
    double cy = uniform(rng, 0.0, day.height());
    double cx = uniform(rng, 0.0, day.width());
    double sigma = uniform(rng, 2.0, 6.0);
    double amp = uniform(rng, 0.15, 0.4);
    int y0 = std::max(0, static_cast<int>(cy - 3 * sigma));
    int y1 = std::min(day.height(), static_cast<int>(cy + 3 * sigma) + 1);
    int x0 = std::max(0, static_cast<int>(cx - 3 * sigma));
    int x1 = std::min(day.width(), static_cast<int>(cx + 3 * sigma) + 1);
    const float tint[3] = {1.0f, 0.9f, 0.7f};
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        float v = static_cast<float>(amp * std::exp(-0.5 * d2 / (sigma * sigma)));
        for (int c = 0; c < 3; ++c) night.at(c, y, x) += v * tint[c];
      }
  }
  for (size_t i = 0; i < night.chw.size(); ++i)
    night.chw[i] = std::clamp(
        night.chw[i] + static_cast<float>(normal(rng, 0.0, 0.02)), 0.0f, 1.0f);
  return night;
}

std::string zero_pad(int v, int width) {
  std::string s = std::to_string(v);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

}  // namespace

SynthPaths synth_dataset(int n, uint64_t seed, const std::string& dir, int size) {
  if (n < 1) throw InvalidArgument("synth_dataset: n must be >= 1");
  fs::create_directories(fs::path(dir) / "images");
  fs::create_directories(fs::path(dir) / "labels");

  Rng rng(seed);
  std::vector<ManifestEntry> source, tday, tnight, eday, enight, emixed;
  for (int i = 0; i < n; ++i) {
    Scene scene = render_scene(size, i, rng);
    Image<float> night = render_night(scene.day, rng);
    std::string idx = zero_pad(i, 4);
    std::string day_rel = "images/day_" + idx + ".ppm";
    std::string night_rel = "images/night_" + idx + ".ppm";
    std::string label_rel = "labels/lab_" + idx + ".png";
    write_ppm((fs::path(dir) / day_rel).string(), scene.day);
    write_ppm((fs::path(dir) / night_rel).string(), night);
    write_label_png((fs::path(dir) / label_rel).string(), scene.labels);
    std::string key = "pair" + idx;
    source.push_back({day_rel, label_rel, ""});
    tday.push_back({day_rel, "", key});
    tnight.push_back({night_rel, "", key});
    eday.push_back({day_rel, label_rel, key});
    enight.push_back({night_rel, label_rel, key});
    emixed.push_back(i % 2 == 0 ? ManifestEntry{day_rel, label_rel, key}
                                : ManifestEntry{night_rel, label_rel, key});
  }

  SynthPaths p;
  p.dir = dir;
  p.source = (fs::path(dir) / "source.tsv").string();
  p.target_day = (fs::path(dir) / "target_day.tsv").string();
  p.target_night = (fs::path(dir) / "target_night.tsv").string();
  p.eval_day = (fs::path(dir) / "eval_day.tsv").string();
  p.eval_night = (fs::path(dir) / "eval_night.tsv").string();
  p.eval_mixed = (fs::path(dir) / "eval_mixed.tsv").string();
  save_manifest(p.source, source);
  save_manifest(p.target_day, tday);
  save_manifest(p.target_night, tnight);
  save_manifest(p.eval_day, eday);
  save_manifest(p.eval_night, enight);
  save_manifest(p.eval_mixed, emixed);
  return p;
}

// ---------------------------------------------------------------------------
// mIoU
// ---------------------------------------------------------------------------

MiouResult compute_miou(std::span<const LabelMap> preds, std::span<const LabelMap> gts) {
  if (preds.empty() || preds.size() != gts.size())
    throw InvalidArgument("compute_miou: empty or mismatched inputs");
  std::array<size_t, kNumCategories> tp{}, fp{}, fn{};
  for (size_t i = 0; i < preds.size(); ++i) {
    const LabelMap& p = preds[i];
    const LabelMap& g = gts[i];
    if (p.height != g.height || p.width != g.width)
      throw InvalidArgument("compute_miou: prediction/GT size mismatch");
    for (size_t j = 0; j < p.ids.size(); ++j) {
      uint8_t gv = g.ids[j];
      if (gv == kIgnoreLabel) continue;
      uint8_t pv = p.ids[j];
      if (pv == gv) {
        tp[gv]++;
      } else {
        fn[gv]++;
        if (pv < kNumCategories) fp[pv]++;
      }
    }
  }
  MiouResult r;
  double acc = 0;
  int present = 0;
  for (int m = 0; m < kNumCategories; ++m) {
    size_t denom = tp[size_t(m)] + fp[size_t(m)] + fn[size_t(m)];
    r.present[size_t(m)] = denom > 0;
    r.iou[size_t(m)] = denom > 0 ? static_cast<double>(tp[size_t(m)]) / static_cast<double>(denom) : 0.0;
    if (denom > 0) {
      acc += r.iou[size_t(m)];
      present++;
    }
  }
  r.mean = present > 0 ? acc / present : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put_raw(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct Reader {
  const char* p;
  size_t n;
  size_t off = 0;
  void need(size_t k, const char* what) const {
    if (off + k > n)
      throw DataError("checkpoint truncated at offset " + std::to_string(off) + " reading " +
                      what);
  }
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, p + off, sizeof(T));
    off += sizeof(T);
    return v;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const ParamList<float>& params) {
  std::string buf;
  buf.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_raw(buf, kCheckpointVersion);
  put_raw(buf, static_cast<uint32_t>(params.size()));
  for (const auto& p : params) {
    put_raw(buf, static_cast<uint32_t>(p.name.size()));
    buf.append(p.name);
    const auto& t = p.var.value();
    put_raw(buf, static_cast<uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) put_raw(buf, static_cast<uint32_t>(t.dim(i)));
    buf.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
  }
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError("failed writing " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move temp checkpoint onto " + path);
}

CheckpointData read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{buf.data(), buf.size()};
  r.need(sizeof(kCheckpointMagic), "magic");
  if (std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw DataError("not a checkpoint file (bad magic): " + path);
  r.off = sizeof(kCheckpointMagic);
  uint32_t version = r.get<uint32_t>("version");
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  uint32_t count = r.get<uint32_t>("record count");
  CheckpointData data;
  data.records.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    CheckpointRecord rec;
    uint32_t name_len = r.get<uint32_t>("name length");
    r.need(name_len, "name");
    rec.name.assign(r.p + r.off, name_len);
    r.off += name_len;
    uint32_t rank = r.get<uint32_t>("rank");
    if (rank == 0 || rank > 8) throw DataError("checkpoint record has bad rank");
    size_t total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      uint32_t dim = r.get<uint32_t>("dim");
      if (dim == 0) throw DataError("checkpoint record has zero extent");
      rec.shape.push_back(static_cast<int>(dim));
      total *= dim;
    }
    r.need(total * sizeof(float), "tensor data");
    rec.data.resize(total);
    std::memcpy(rec.data.data(), r.p + r.off, total * sizeof(float));
    r.off += total * sizeof(float);
    data.records.push_back(std::move(rec));
  }
  if (r.off != buf.size()) throw DataError("checkpoint has trailing bytes");
  return data;
}

void load_checkpoint(const std::string& path, ParamList<float>& params) {
  CheckpointData data = read_checkpoint(path);
  // Validate everything before touching the model.
  std::vector<const CheckpointRecord*> matched;
  matched.reserve(params.size());
  for (const auto& p : params) {
    const CheckpointRecord* rec = data.find(p.name);
    if (!rec) throw DataError("checkpoint missing tensor: " + p.name);
    if (rec->shape != p.var.value().shape())
      throw DataError("checkpoint shape mismatch for " + p.name);
    matched.push_back(rec);
  }
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor<float>& t = params[i].var.value_mut();
    std::copy(matched[i]->data.begin(), matched[i]->data.end(), t.data());
  }
}

// ---------------------------------------------------------------------------
// Palette
// ---------------------------------------------------------------------------

const std::array<Rgb8, kNumCategories>& category_palette() {
  static const std::array<Rgb8, kNumCategories> palette{{{128, 64, 128},
                                                         {244, 35, 232},
                                                         {70, 70, 70},
                                                         {102, 102, 156},
                                                         {190, 153, 153},
                                                         {153, 153, 153},
                                                         {250, 170, 30},
                                                         {220, 220, 0},
                                                         {107, 142, 35},
                                                         {152, 251, 152},
                                                         {70, 130, 180},
                                                         {220, 20, 60},
                                                         {255, 0, 0},
                                                         {0, 0, 142},
                                                         {0, 0, 70},
                                                         {0, 60, 100},
                                                         {0, 80, 100},
                                                         {0, 0, 230},
                                                         {119, 11, 32}}};
  return palette;
}

const std::array<const char*, kNumCategories>& category_names() {
  static const std::array<const char*, kNumCategories> names{
      "road",       "sidewalk", "building", "wall",   "fence",  "pole",       "traffic_light",
      "traffic_sign", "vegetation", "terrain", "sky",  "person", "rider",      "car",
      "truck",      "bus",      "train",    "motorcycle", "bicycle"};
  return names;
}

Image<float> make_overlay(const Image<float>& base, const LabelMap& pred, float alpha) {
  if (base.height() != pred.height || base.width() != pred.width)
    throw InvalidArgument("make_overlay: size mismatch");
  const auto& palette = category_palette();
  Image<float> out(base.height(), base.width());
  for (int y = 0; y < base.height(); ++y)
    for (int x = 0; x < base.width(); ++x) {
      uint8_t c = pred.at(y, x);
      float pr = 0, pg = 0, pb = 0;
      if (c < kNumCategories) {
        pr = palette[c].r / 255.0f;
        pg = palette[c].g / 255.0f;
        pb = palette[c].b / 255.0f;
      }
      out.at(0, y, x) = (1 - alpha) * base.at(0, y, x) + alpha * pr;
      out.at(1, y, x) = (1 - alpha) * base.at(1, y, x) + alpha * pg;
      out.at(2, y, x) = (1 - alpha) * base.at(2, y, x) + alpha * pb;
    }
  return out;
}

}  // namespace dialseg
