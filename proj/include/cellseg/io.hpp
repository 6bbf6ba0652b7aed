#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cellseg/raster.hpp"

namespace cellseg {

/// Loads an 8- or 16-bit single-channel PNG or TIFF. Stored integers are
/// widened to double and never rescaled.
GrayImage read_gray_image(const std::filesystem::path& path);

/// Writes an integral-valued image as 8- or 16-bit gray PNG.
void write_gray_image(const std::filesystem::path& path, const GrayImage& image, int bit_depth = 16);

/// Float32 array container (NPY v1.0 layout, little-endian '<f4').
/// Shape on disk is (channels, height, width); a 2-D file reads as one channel.
FloatArray read_array(const std::filesystem::path& path);
void write_array(const std::filesystem::path& path, const FloatArray& planes);

/// Label maps: `.png` uses 16-bit gray PNG, `.npy` uses the array container
/// with int32 payload. Reading a `.npy` also accepts integral float32 data.
InstanceMap read_label_map(const std::filesystem::path& path);
void write_label_map(const std::filesystem::path& path, const InstanceMap& labels);

SemanticMap read_semantic_map(const std::filesystem::path& path);
void write_semantic_map(const std::filesystem::path& path, const SemanticMap& classes);

/// Writes `bytes` to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

namespace npy {

/// Raw view of an NPY file: dtype descriptor, C-order shape and payload.
struct RawArray {
  std::string descr;
  std::vector<std::size_t> shape;
  std::vector<char> payload;

  std::size_t element_count() const;
};

RawArray read(const std::filesystem::path& path);
RawArray parse(const std::string& bytes);
std::string serialize(const RawArray& array);

}  // namespace npy

}  // namespace cellseg
