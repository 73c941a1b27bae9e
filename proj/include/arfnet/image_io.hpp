// Copyright 2026 The ARFNet Authors. All Rights Reserved.
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

#pragma once

#include <filesystem>

#include "arfnet/tensor.hpp"

namespace arfnet::image_io {

/// Reads a PNG or binary PPM (P6) file as a (3, H, W) tensor in [0, 1].
/// Grayscale and alpha inputs are converted to RGB. Throws IoError naming
/// the file on any failure.
Tensor read_image(const std::filesystem::path& path);

/// Writes a (3, H, W) tensor, clamped to [0, 1], as 8-bit RGB. The format
/// follows the extension (.png or .ppm).
void write_image(const std::filesystem::path& path, const Tensor& image);

bool is_supported_image(const std::filesystem::path& path);

}  // namespace arfnet::image_io
