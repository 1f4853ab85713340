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

#pragma once

#include <string>

#include "dialseg/image.hpp"

namespace dialseg {

// 8-bit image codecs. Images are PNG or PPM (P6) RGB; labels are
// single-channel 8-bit PNG. Values map to [0,1] by /255 on read and are
// rounded back on write, so an identity pass is byte-exact. All writes go
// through a temp file plus rename.

Image<float> read_image(const std::string& path);
LabelMap read_label(const std::string& path);

void write_ppm(const std::string& path, const Image<float>& img);
void write_label_png(const std::string& path, const LabelMap& labels);

}  // namespace dialseg
