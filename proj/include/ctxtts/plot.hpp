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

#ifndef CTXTTS_PLOT_HPP_
#define CTXTTS_PLOT_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace ctxtts {

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
};

// 24-bit uncompressed BMP.
void write_bmp(const std::string& path, int width, int height,
               const std::vector<Rgb>& pixels);

// Overlaid pitch contours (Hz per frame; zeros are unvoiced gaps and are not
// drawn). One polyline per curve in a distinct color on a white background
// with a light grid.
void plot_pitch_contours(const std::vector<std::vector<double>>& curves,
                         const std::string& image_path, int width = 800,
                         int height = 400);

// Raw contour data: CSV with a header row of labels, one row per frame of
// the longest contour, empty cells past a curve's end.
void write_contour_data(const std::vector<std::string>& labels,
                        const std::vector<std::vector<double>>& curves,
                        const std::string& path);

}  // namespace ctxtts

#endif  // CTXTTS_PLOT_HPP_
