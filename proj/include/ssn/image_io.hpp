// Copyright 2026 The ScribbleSeg Authors. All Rights Reserved.
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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ssn/tensor.hpp"

// Binary PGM ("P5", grayscale) and PPM ("P6", RGB) with maxval 255.
// Images load as [C,H,W] floats in [0,1]; masks store class indices as
// raw PGM pixel values.
namespace ssn::image_io {

std::vector<std::uint8_t> encode_image(const Tensor& image);  // C = 1 -> P5, C = 3 -> P6
Tensor decode_image(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_mask(const LabelMap& mask);
LabelMap decode_mask(std::span<const std::uint8_t> bytes);

Tensor read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Tensor& image);
LabelMap read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const LabelMap& mask);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ssn::image_io
