#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sketchedit/tensor.hpp"

namespace sketchedit {

/// v8 = round((v + 1) / 2 * 255), clamped to [0, 255].
std::uint8_t to_u8(float v);
/// Exact inverse on the 8-bit grid: v = v8 * 2 / 255 - 1.
float from_u8(std::uint8_t v8);

/// Round trip through 8-bit storage.
Image quantize(const Image& x);

/// 8-bit RGB PNG. Output bytes are a deterministic function of the pixels.
std::vector<std::uint8_t> encode_png(const Image& rgb);
/// 8-bit grayscale PNG: 0 = editable, 255 = keep.
std::vector<std::uint8_t> encode_mask_png(const Mask& m);

/// Any PNG converted to RGB in [-1, 1].
Image decode_png(std::span<const std::uint8_t> bytes);
/// Any PNG converted to gray and thresholded at 128 (>= 128 keeps).
Mask decode_mask_png(std::span<const std::uint8_t> bytes);

Image read_image(const std::filesystem::path& path);
Mask read_mask(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& rgb);
void write_mask(const std::filesystem::path& path, const Mask& m);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace sketchedit
