#include "cellseg/io.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace cellseg {

static_assert(std::endian::native == std::endian::little,
              "array container I/O assumes a little-endian host");

namespace fs = std::filesystem;

namespace {

std::string lower_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

bool is_tiff(const fs::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".tif" || ext == ".tiff";
}

bool is_npy(const fs::path& path) { return lower_extension(path) == ".npy"; }

void require_exists(const fs::path& path) {
  if (!fs::exists(path)) throw FileNotFoundError(path.string());
}

fs::path temp_sibling(const fs::path& path) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  const auto tag = std::to_string(rd()) + "-" + std::to_string(counter++);
  return path.parent_path() / ("." + path.filename().string() + ".tmp-" + tag);
}

/// Runs `write(temp)` and renames the temp file over `path` on success.
template <typename Fn>
void commit_atomic(const fs::path& path, Fn&& write) {
  if (path.has_parent_path() && !path.parent_path().empty()) {
    fs::create_directories(path.parent_path());
  }
  const fs::path temp = temp_sibling(path);
  try {
    write(temp);
    fs::rename(temp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(temp, ec);
    throw;
  }
}

// ---------------------------------------------------------------- PNG

struct PngGray {
  int bit_depth = 0;
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint16_t> data;
};

PngGray read_png_gray(const fs::path& path) {
  require_exists(path);
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (fp == nullptr) throw IoError("cannot open " + path.string());

  unsigned char signature[8];
  if (std::fread(signature, 1, 8, fp) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    std::fclose(fp);
    throw FormatError(path.string() + ": not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    std::fclose(fp);
    throw IoError("libpng initialisation failed");
  }

  PngGray out;
  std::vector<png_bytep> row_pointers;
  std::vector<unsigned char> buffer;
  // 0 = ok, 1 = libpng error, 2 = not single channel, 3 = bad depth
  volatile int status = 0;

  if (setjmp(png_jmpbuf(png))) {
    status = status == 0 ? 1 : status;
  } else {
    png_init_io(png, fp);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color_type != PNG_COLOR_TYPE_GRAY) {
      status = 2;
    } else if (depth != 8 && depth != 16) {
      status = 3;
      out.bit_depth = depth;
    } else {
      out.bit_depth = depth;
      out.rows = png_get_image_height(png, info);
      out.cols = png_get_image_width(png, info);
      const std::size_t stride = static_cast<std::size_t>(out.cols) * (depth / 8);
      buffer.resize(stride * static_cast<std::size_t>(out.rows));
      row_pointers.resize(static_cast<std::size_t>(out.rows));
      for (Index r = 0; r < out.rows; ++r) row_pointers[r] = buffer.data() + r * stride;
      png_read_image(png, row_pointers.data());
      png_read_end(png, nullptr);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  switch (status) {
    case 1: throw FormatError(path.string() + ": corrupt PNG");
    case 2: throw FormatError(path.string() + ": expected single channel gray image");
    case 3:
      throw FormatError(path.string() + ": unsupported bit depth " + std::to_string(out.bit_depth) +
                        " (expected 8 or 16)");
    default: break;
  }

  out.data.resize(static_cast<std::size_t>(out.rows * out.cols));
  if (out.bit_depth == 8) {
    std::copy(buffer.begin(), buffer.end(), out.data.begin());
  } else {
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      out.data[i] = static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  }
  return out;
}

void write_png_gray(const fs::path& path, Index rows, Index cols, int bit_depth,
                    const std::vector<std::uint16_t>& data) {
  commit_atomic(path, [&](const fs::path& temp) {
    std::FILE* fp = std::fopen(temp.c_str(), "wb");
    if (fp == nullptr) throw IoError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (info == nullptr) {
      png_destroy_write_struct(&png, nullptr);
      std::fclose(fp);
      throw IoError("libpng initialisation failed");
    }
    const std::size_t stride = static_cast<std::size_t>(cols) * (bit_depth / 8);
    std::vector<unsigned char> buffer(stride * static_cast<std::size_t>(rows));
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (bit_depth == 8) {
        buffer[i] = static_cast<unsigned char>(data[i]);
      } else {
        buffer[2 * i] = static_cast<unsigned char>(data[i] >> 8);
        buffer[2 * i + 1] = static_cast<unsigned char>(data[i] & 0xFF);
      }
    }
    std::vector<png_bytep> row_pointers(static_cast<std::size_t>(rows));
    for (Index r = 0; r < rows; ++r) row_pointers[r] = buffer.data() + r * stride;

    volatile bool failed = false;
    if (setjmp(png_jmpbuf(png))) {
      failed = true;
    } else {
      png_init_io(png, fp);
      png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows),
                   bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                   PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
      png_write_info(png, info);
      png_write_image(png, row_pointers.data());
      png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    if (failed) throw IoError("failed writing PNG " + path.string());
  });
}

// ---------------------------------------------------------------- TIFF

struct TiffHandle {
  TIFF* tif = nullptr;
  ~TiffHandle() {
    if (tif != nullptr) TIFFClose(tif);
  }
};

void silence_libtiff() {
  static const bool once = [] {
    TIFFSetWarningHandler(nullptr);
    TIFFSetErrorHandler(nullptr);
    return true;
  }();
  (void)once;
}

PngGray read_tiff_gray(const fs::path& path) {
  require_exists(path);
  silence_libtiff();
  TiffHandle h;
  h.tif = TIFFOpen(path.c_str(), "r");
  if (h.tif == nullptr) throw FormatError(path.string() + ": not a readable TIFF file");

  std::uint32_t width = 0, height = 0;
  std::uint16_t spp = 1, bps = 1, format = SAMPLEFORMAT_UINT;
  TIFFGetField(h.tif, TIFFTAG_IMAGEWIDTH, &width);
  TIFFGetField(h.tif, TIFFTAG_IMAGELENGTH, &height);
  TIFFGetFieldDefaulted(h.tif, TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(h.tif, TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(h.tif, TIFFTAG_SAMPLEFORMAT, &format);
  if (spp != 1) throw FormatError(path.string() + ": expected single channel gray image");
  if ((bps != 8 && bps != 16) || format != SAMPLEFORMAT_UINT) {
    throw FormatError(path.string() + ": unsupported bit depth " + std::to_string(bps) +
                      " (expected unsigned 8 or 16)");
  }
  if (TIFFIsTiled(h.tif)) throw FormatError(path.string() + ": tiled TIFF is not supported");

  PngGray out;
  out.bit_depth = bps;
  out.rows = height;
  out.cols = width;
  out.data.resize(static_cast<std::size_t>(width) * height);
  std::vector<unsigned char> line(static_cast<std::size_t>(TIFFScanlineSize(h.tif)));
  for (std::uint32_t r = 0; r < height; ++r) {
    if (TIFFReadScanline(h.tif, line.data(), r, 0) < 0) {
      throw FormatError(path.string() + ": truncated TIFF scanline " + std::to_string(r));
    }
    for (std::uint32_t c = 0; c < width; ++c) {
      std::uint16_t v;
      if (bps == 8) {
        v = line[c];
      } else {
        std::memcpy(&v, line.data() + 2 * c, 2);
      }
      out.data[static_cast<std::size_t>(r) * width + c] = v;
    }
  }
  return out;
}

void write_tiff_gray(const fs::path& path, Index rows, Index cols, int bit_depth,
                     const std::vector<std::uint16_t>& data) {
  silence_libtiff();
  commit_atomic(path, [&](const fs::path& temp) {
    TiffHandle h;
    h.tif = TIFFOpen(temp.c_str(), "w");
    if (h.tif == nullptr) throw IoError("cannot write " + path.string());
    TIFFSetField(h.tif, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(cols));
    TIFFSetField(h.tif, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(rows));
    TIFFSetField(h.tif, TIFFTAG_SAMPLESPERPIXEL, 1);
    TIFFSetField(h.tif, TIFFTAG_BITSPERSAMPLE, bit_depth);
    TIFFSetField(h.tif, TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_UINT);
    TIFFSetField(h.tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
    TIFFSetField(h.tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(h.tif, TIFFTAG_COMPRESSION, COMPRESSION_NONE);
    TIFFSetField(h.tif, TIFFTAG_ROWSPERSTRIP, static_cast<std::uint32_t>(rows));
    std::vector<unsigned char> line(static_cast<std::size_t>(cols) * (bit_depth / 8));
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        const std::uint16_t v = data[static_cast<std::size_t>(r * cols + c)];
        if (bit_depth == 8) {
          line[c] = static_cast<unsigned char>(v);
        } else {
          std::memcpy(line.data() + 2 * c, &v, 2);
        }
      }
      if (TIFFWriteScanline(h.tif, line.data(), static_cast<std::uint32_t>(r), 0) < 0) {
        throw IoError("failed writing TIFF " + path.string());
      }
    }
    TIFFClose(h.tif);
    h.tif = nullptr;
  });
}

PngGray read_integer_raster(const fs::path& path) {
  return is_tiff(path) ? read_tiff_gray(path) : read_png_gray(path);
}

void write_integer_raster(const fs::path& path, Index rows, Index cols, int bit_depth,
                          const std::vector<std::uint16_t>& data) {
  if (is_tiff(path)) {
    write_tiff_gray(path, rows, cols, bit_depth, data);
  } else {
    write_png_gray(path, rows, cols, bit_depth, data);
  }
}

// ---------------------------------------------------------------- NPY helpers

template <typename T>
std::vector<char> to_payload(const T* data, std::size_t count) {
  std::vector<char> out(count * sizeof(T));
  std::memcpy(out.data(), data, out.size());
  return out;
}

InstanceMap label_map_from_npy(const fs::path& path) {
  const npy::RawArray raw = npy::read(path);
  std::vector<std::size_t> shape = raw.shape;
  if (shape.size() == 3 && shape[0] == 1) shape.erase(shape.begin());
  if (shape.size() != 2) throw FormatError(path.string() + ": label array must be 2-D");
  InstanceMap out(static_cast<Index>(shape[0]), static_cast<Index>(shape[1]));
  const std::size_t n = raw.element_count();
  if (raw.descr == "<i4") {
    std::memcpy(out.data(), raw.payload.data(), n * sizeof(std::int32_t));
  } else if (raw.descr == "<f4") {
    std::vector<float> values(n);
    std::memcpy(values.data(), raw.payload.data(), n * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) {
      if (!(values[i] == std::floor(values[i])) || values[i] > 2147483647.0f) {
        throw FormatError(path.string() + ": float label array holds non-integral values");
      }
      out.data()[i] = static_cast<Label>(values[i]);
    }
  } else {
    throw FormatError(path.string() + ": expected int32 or float32 label array, got '" +
                      raw.descr + "'");
  }
  return out;
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  commit_atomic(path, [&](const fs::path& temp) {
    std::ofstream out(temp, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw IoError("failed writing " + path.string());
  });
}

GrayImage read_gray_image(const fs::path& path) {
  if (is_npy(path)) {
    const FloatArray a = read_array(path);
    if (a.channels() != 1) throw FormatError(path.string() + ": expected single channel gray image");
    GrayImage x = a[0].cast<double>();
    validate_gray(x);
    return x;
  }
  const PngGray raw = read_integer_raster(path);
  GrayImage x(raw.rows, raw.cols);
  for (std::size_t i = 0; i < raw.data.size(); ++i) x.data()[i] = raw.data[i];
  return x;
}

void write_gray_image(const fs::path& path, const GrayImage& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ValidationError("bit depth must be 8 or 16");
  if (is_npy(path)) {
    validate_gray(image);
    write_array(path, FloatArray({image.cast<float>()}));
    return;
  }
  const double max_value = bit_depth == 8 ? 255.0 : 65535.0;
  std::vector<std::uint16_t> data(static_cast<std::size_t>(image.size()));
  for (Index i = 0; i < image.size(); ++i) {
    const double v = image.data()[i];
    if (!(v >= 0.0 && v <= max_value) || v != std::floor(v)) {
      throw ValidationError("image value " + std::to_string(v) + " not representable in " +
                            std::to_string(bit_depth) + "-bit integer file");
    }
    data[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(v);
  }
  write_integer_raster(path, image.rows(), image.cols(), bit_depth, data);
}

FloatArray read_array(const fs::path& path) {
  const npy::RawArray raw = npy::read(path);
  if (raw.descr != "<f4") {
    throw FormatError(path.string() + ": expected float32 ('<f4') array, got '" + raw.descr + "'");
  }
  Index channels, rows, cols;
  if (raw.shape.size() == 3) {
    channels = static_cast<Index>(raw.shape[0]);
    rows = static_cast<Index>(raw.shape[1]);
    cols = static_cast<Index>(raw.shape[2]);
  } else if (raw.shape.size() == 2) {
    channels = 1;
    rows = static_cast<Index>(raw.shape[0]);
    cols = static_cast<Index>(raw.shape[1]);
  } else {
    throw FormatError(path.string() + ": expected (channels, height, width) shape");
  }
  FloatArray out(channels, rows, cols);
  const std::size_t plane_bytes = static_cast<std::size_t>(rows * cols) * sizeof(float);
  for (Index c = 0; c < channels; ++c) {
    std::memcpy(out[c].data(), raw.payload.data() + static_cast<std::size_t>(c) * plane_bytes,
                plane_bytes);
  }
  return out;
}

void write_array(const fs::path& path, const FloatArray& planes) {
  for (Index c = 0; c < planes.channels(); ++c) {
    if (!all_finite(planes[c])) throw ValidationError("array has non-finite values");
  }
  npy::RawArray raw;
  raw.descr = "<f4";
  raw.shape = {static_cast<std::size_t>(planes.channels()), static_cast<std::size_t>(planes.rows()),
               static_cast<std::size_t>(planes.cols())};
  raw.payload.reserve(static_cast<std::size_t>(planes.size()) * sizeof(float));
  for (Index c = 0; c < planes.channels(); ++c) {
    const auto bytes = to_payload(planes[c].data(), static_cast<std::size_t>(planes[c].size()));
    raw.payload.insert(raw.payload.end(), bytes.begin(), bytes.end());
  }
  write_file_atomic(path, npy::serialize(raw));
}

InstanceMap read_label_map(const fs::path& path) {
  if (is_npy(path)) {
    InstanceMap g = label_map_from_npy(path);
    validate_instance_map(g);
    return g;
  }
  const PngGray raw = read_integer_raster(path);
  InstanceMap g(raw.rows, raw.cols);
  for (std::size_t i = 0; i < raw.data.size(); ++i) g.data()[i] = raw.data[i];
  return g;
}

void write_label_map(const fs::path& path, const InstanceMap& labels) {
  validate_instance_map(labels);
  if (is_npy(path)) {
    npy::RawArray raw;
    raw.descr = "<i4";
    raw.shape = {static_cast<std::size_t>(labels.rows()), static_cast<std::size_t>(labels.cols())};
    raw.payload = to_payload(labels.data(), static_cast<std::size_t>(labels.size()));
    write_file_atomic(path, npy::serialize(raw));
    return;
  }
  if (labels.size() > 0 && labels.maxCoeff() > 65535) {
    throw ValidationError("label " + std::to_string(labels.maxCoeff()) +
                          " exceeds 16-bit range; use the .npy backend");
  }
  std::vector<std::uint16_t> data(labels.data(), labels.data() + labels.size());
  write_integer_raster(path, labels.rows(), labels.cols(), 16, data);
}

SemanticMap read_semantic_map(const fs::path& path) {
  const InstanceMap raw = read_label_map(path);
  if ((raw > kTouching).any()) {
    throw ValidationError(path.string() + ": semantic map has class ids outside {0,1,2}");
  }
  return raw.cast<std::uint8_t>();
}

void write_semantic_map(const fs::path& path, const SemanticMap& classes) {
  validate_semantic_map(classes);
  if (is_npy(path)) {
    write_label_map(path, classes.cast<Label>());
    return;
  }
  std::vector<std::uint16_t> data(classes.data(), classes.data() + classes.size());
  write_integer_raster(path, classes.rows(), classes.cols(), 8, data);
}

}  // namespace cellseg
