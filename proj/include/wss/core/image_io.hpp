#pragma once

#include <filesystem>

#include "wss/core/types.hpp"

namespace wss {

/// Decodes any format OpenCV understands into RGB. Throws std::runtime_error when unreadable.
RgbImage read_image(const std::filesystem::path& path);
/// Writes PNG (or whatever the extension selects).
void write_image(const std::filesystem::path& path, const RgbImage& image);

/// Single-channel 8-bit indexed raster; pixel value is the class index.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

ImageRecord load_record(const std::filesystem::path& path, ImageSource source);

/// FNV-1a 64-bit digest of a file's bytes, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);
std::string text_digest(std::string_view bytes);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace wss
