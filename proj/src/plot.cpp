// Copyright (c) 2026 The ctxtts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ctxtts/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ctxtts/common.hpp"

namespace ctxtts {

void write_bmp(const std::string& path, int width, int height,
               const std::vector<Rgb>& pixels) {
  if (static_cast<size_t>(width) * height != pixels.size())
    throw InvalidInput("write_bmp: pixel buffer size mismatch");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  const int row_bytes = (width * 3 + 3) / 4 * 4;
  const uint32_t data_size = row_bytes * height;
  const uint32_t file_size = 54 + data_size;
  uint8_t header[54] = {0};
  header[0] = 'B';
  header[1] = 'M';
  auto put32 = [&](int off, uint32_t v) {
    header[off] = v & 0xff;
    header[off + 1] = (v >> 8) & 0xff;
    header[off + 2] = (v >> 16) & 0xff;
    header[off + 3] = (v >> 24) & 0xff;
  };
  put32(2, file_size);
  put32(10, 54);
  put32(14, 40);
  put32(18, static_cast<uint32_t>(width));
  put32(22, static_cast<uint32_t>(height));
  header[26] = 1;
  header[28] = 24;
  put32(34, data_size);
  os.write(reinterpret_cast<const char*>(header), 54);
  std::vector<uint8_t> row(row_bytes, 0);
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x) {
      const Rgb& p = pixels[static_cast<size_t>(y) * width + x];
      row[x * 3] = p.b;
      row[x * 3 + 1] = p.g;
      row[x * 3 + 2] = p.r;
    }
    os.write(reinterpret_cast<const char*>(row.data()), row_bytes);
  }
}

namespace {

void draw_line(std::vector<Rgb>& px, int width, int height, int x0, int y0,
               int x1, int y1, Rgb color) {
  int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    if (x0 >= 0 && x0 < width && y0 >= 0 && y0 < height)
      px[static_cast<size_t>(y0) * width + x0] = color;
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

void plot_pitch_contours(const std::vector<std::vector<double>>& curves,
                         const std::string& image_path, int width,
                         int height) {
  if (curves.empty()) throw InvalidInput("plot: no curves");
  const Rgb palette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                         {214, 39, 40},  {148, 103, 189}, {140, 86, 75}};
  std::vector<Rgb> px(static_cast<size_t>(width) * height, {255, 255, 255});

  double vmin = 1e300, vmax = -1e300;
  size_t max_len = 0;
  for (const auto& c : curves) {
    max_len = std::max(max_len, c.size());
    for (double v : c) {
      if (v <= 0) continue;
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  }
  if (max_len < 2 || vmin > vmax) {
    vmin = 0;
    vmax = 1;
  }
  double pad = 0.05 * (vmax - vmin + 1e-9);
  vmin -= pad;
  vmax += pad;
  const int ml = 40, mr = 10, mt = 10, mb = 25;  // margins
  const int pw = width - ml - mr, ph = height - mt - mb;

  // Light grid.
  for (int gy = 0; gy <= 4; ++gy) {
    int y = mt + ph * gy / 4;
    draw_line(px, width, height, ml, y, ml + pw, y, {220, 220, 220});
  }
  for (int gx = 0; gx <= 8; ++gx) {
    int x = ml + pw * gx / 8;
    draw_line(px, width, height, x, mt, x, mt + ph, {220, 220, 220});
  }
  // Axes.
  draw_line(px, width, height, ml, mt, ml, mt + ph, {0, 0, 0});
  draw_line(px, width, height, ml, mt + ph, ml + pw, mt + ph, {0, 0, 0});

  auto x_of = [&](size_t frame) {
    return ml + static_cast<int>(pw * static_cast<double>(frame) /
                                 std::max<size_t>(1, max_len - 1));
  };
  auto y_of = [&](double v) {
    return mt + static_cast<int>((1.0 - (v - vmin) / (vmax - vmin)) * ph);
  };

  for (size_t c = 0; c < curves.size(); ++c) {
    Rgb color = palette[c % 6];
    bool pen_down = false;
    int lx = 0, ly = 0;
    for (size_t f = 0; f < curves[c].size(); ++f) {
      double v = curves[c][f];
      if (v <= 0) {  // unvoiced gap
        pen_down = false;
        continue;
      }
      int x = x_of(f), y = y_of(v);
      if (pen_down) draw_line(px, width, height, lx, ly, x, y, color);
      lx = x;
      ly = y;
      pen_down = true;
    }
  }
  write_bmp(image_path, width, height, px);
}

void write_contour_data(const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& curves,
                        const std::string& path) {
  if (labels.size() != curves.size())
    throw InvalidInput("contour data: label/curve count mismatch");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << "frame";
  for (const std::string& l : labels) os << "," << l;
  os << "\n";
  size_t max_len = 0;
  for (const auto& c : curves) max_len = std::max(max_len, c.size());
  for (size_t f = 0; f < max_len; ++f) {
    os << f;
    for (const auto& c : curves) {
      os << ",";
      if (f < c.size()) os << c[f];
    }
    os << "\n";
  }
}

}  // namespace ctxtts
