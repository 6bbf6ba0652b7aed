#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cellseg/io.hpp"

namespace cellseg::npy {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLength = 6;

std::size_t dtype_size(const std::string& descr) {
  if (descr.size() < 3) throw FormatError("unsupported dtype '" + descr + "'");
  const std::string width = descr.substr(2);
  return static_cast<std::size_t>(std::stoul(width));
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\n");
  const auto last = s.find_last_not_of(" \t\n");
  if (first == std::string::npos) return {};
  return s.substr(first, last - first + 1);
}

/// Value text following `'key':` in the header dictionary.
std::string dict_value(const std::string& header, const std::string& key) {
  const std::string needle = "'" + key + "'";
  const auto at = header.find(needle);
  if (at == std::string::npos) throw FormatError("malformed header: missing '" + key + "'");
  const auto colon = header.find(':', at + needle.size());
  if (colon == std::string::npos) throw FormatError("malformed header: missing ':' after " + key);
  std::size_t begin = colon + 1;
  while (begin < header.size() && header[begin] == ' ') ++begin;
  if (begin >= header.size()) throw FormatError("malformed header: empty value for " + key);
  std::size_t end;
  if (header[begin] == '(') {
    end = header.find(')', begin);
    if (end == std::string::npos) throw FormatError("malformed header: unterminated shape");
    ++end;
  } else if (header[begin] == '\'') {
    end = header.find('\'', begin + 1);
    if (end == std::string::npos) throw FormatError("malformed header: unterminated string");
    ++end;
  } else {
    end = header.find_first_of(",}", begin);
    if (end == std::string::npos) throw FormatError("malformed header: unterminated value");
  }
  return trim(header.substr(begin, end - begin));
}

std::vector<std::size_t> parse_shape(const std::string& text) {
  if (text.size() < 2 || text.front() != '(' || text.back() != ')') {
    throw FormatError("malformed header: bad shape " + text);
  }
  std::vector<std::size_t> shape;
  std::stringstream ss(text.substr(1, text.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    if (!std::all_of(item.begin(), item.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw FormatError("malformed header: bad shape entry '" + item + "'");
    }
    shape.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return shape;
}

}  // namespace

std::size_t RawArray::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

RawArray parse(const std::string& bytes) {
  if (bytes.size() < kMagicLength + 4 || std::memcmp(bytes.data(), kMagic, kMagicLength) != 0) {
    throw FormatError("malformed header: missing NPY magic");
  }
  const auto major = static_cast<unsigned char>(bytes[6]);
  std::size_t header_len = 0;
  std::size_t offset = 0;
  const auto byte = [&](std::size_t i) { return static_cast<std::size_t>(static_cast<unsigned char>(bytes[i])); };
  if (major == 1) {
    header_len = byte(8) | (byte(9) << 8);
    offset = 10;
  } else if (major == 2 || major == 3) {
    if (bytes.size() < 12) throw FormatError("malformed header: truncated preamble");
    header_len = byte(8) | (byte(9) << 8) | (byte(10) << 16) | (byte(11) << 24);
    offset = 12;
  } else {
    throw FormatError("malformed header: unsupported NPY version " + std::to_string(major));
  }
  if (bytes.size() < offset + header_len) throw FormatError("malformed header: truncated header");
  const std::string header = bytes.substr(offset, header_len);

  RawArray out;
  const std::string descr = dict_value(header, "descr");
  if (descr.size() < 2) throw FormatError("malformed header: bad descr");
  out.descr = descr.substr(1, descr.size() - 2);
  if (dict_value(header, "fortran_order") != "False") {
    throw FormatError("unsupported layout: fortran_order must be False");
  }
  out.shape = parse_shape(dict_value(header, "shape"));

  const std::size_t need = out.element_count() * dtype_size(out.descr);
  const std::size_t have = bytes.size() - offset - header_len;
  if (have < need) {
    throw FormatError("truncated payload: expected " + std::to_string(need) + " bytes, found " +
                      std::to_string(have));
  }
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset + header_len),
                     bytes.begin() + static_cast<std::ptrdiff_t>(offset + header_len + need));
  return out;
}

RawArray read(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FileNotFoundError(path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string serialize(const RawArray& array) {
  std::string dict = "{'descr': '" + array.descr + "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < array.shape.size(); ++i) {
    dict += std::to_string(array.shape[i]);
    if (array.shape.size() == 1 || i + 1 < array.shape.size()) dict += ",";
    if (i + 1 < array.shape.size()) dict += " ";
  }
  dict += "), }";
  // Preamble + header is padded with spaces to a multiple of 64, newline-terminated.
  const std::size_t unpadded = kMagicLength + 4 + dict.size() + 1;
  const std::size_t padding = (64 - unpadded % 64) % 64;
  dict.append(padding, ' ');
  dict.push_back('\n');
  if (dict.size() > 0xFFFF) throw FormatError("header too long for NPY v1.0");

  std::string out(kMagic, kMagicLength);
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(dict.size() & 0xFF));
  out.push_back(static_cast<char>((dict.size() >> 8) & 0xFF));
  out += dict;
  out.append(array.payload.begin(), array.payload.end());
  return out;
}

}  // namespace cellseg::npy
