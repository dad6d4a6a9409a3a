#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "cpm/errors.hpp"
#include "cpm/grid.hpp"
#include "cpm/image.hpp"
#include "cpm/planner.hpp"
#include "cpm/spectralize.hpp"

namespace cpm {

using nlohmann::json;

/// Sidecar header of a raw raster file.
struct RasterHeader {
  Index height = 0;
  Index width = 0;
  Index bands = 0;
  std::string dtype = "f64le";
  std::string layout = "band-major-colmajor";
};

namespace detail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw validation_error("malformed JSON in " + path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot write " + path);
  out << text;
}

// doubles are stored little-endian on disk
inline void to_little_endian(double* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t b = 0; b < 4; ++b) std::swap(bytes[8 * i + b], bytes[8 * i + 7 - b]);
  }
}

}  // namespace detail

inline RasterHeader parse_raster_header(const json& j, const std::string& where) {
  RasterHeader h;
  try {
    h.height = j.at("height").get<Index>();
    h.width = j.at("width").get<Index>();
    h.bands = j.at("bands").get<Index>();
    h.dtype = j.at("dtype").get<std::string>();
    h.layout = j.at("layout").get<std::string>();
  } catch (const json::exception& e) {
    throw validation_error("bad raster header " + where + ": " + e.what());
  }
  if (h.height < 1 || h.width < 1 || h.bands < 1)
    throw validation_error("raster header " + where + " has non-positive dimensions");
  if (h.dtype != "f64le") throw validation_error("unsupported dtype '" + h.dtype + "'");
  if (h.layout != "band-major-colmajor")
    throw validation_error("unsupported layout '" + h.layout + "'");
  return h;
}

/// Loads a raster stored as a JSON header plus a raw little-endian payload of
/// 8 * height * width * bands bytes: band b's column-major pixels start at
/// byte offset 8 * b * n_pixels.
inline MultispectralImage load_raster(const std::string& header_path,
                                      const std::string& raw_path) {
  const RasterHeader h = parse_raster_header(detail::parse_json_file(header_path), header_path);
  const GridDims dims{h.height, h.width};
  const std::size_t expect = static_cast<std::size_t>(8) *
                             static_cast<std::size_t>(dims.n_pixels()) *
                             static_cast<std::size_t>(h.bands);
  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw validation_error("cannot open " + raw_path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != expect)
    throw validation_error("raster payload " + raw_path + " has " +
                           std::to_string(bytes.size()) + " bytes, expected " +
                           std::to_string(expect));
  Eigen::MatrixXd data(dims.n_pixels(), h.bands);
  std::memcpy(data.data(), bytes.data(), expect);
  detail::to_little_endian(data.data(), static_cast<std::size_t>(data.size()));
  if (!data.allFinite())
    throw validation_error("raster " + raw_path + " contains non-finite values");
  return {dims, std::move(data)};
}

inline void save_raster(const std::string& header_path, const std::string& raw_path,
                        const MultispectralImage& X) {
  json j = {{"height", X.dims.n_rows},
            {"width", X.dims.n_cols},
            {"bands", X.n_bands()},
            {"dtype", "f64le"},
            {"layout", "band-major-colmajor"}};
  detail::write_text_file(header_path, j.dump(2) + "\n");
  Eigen::MatrixXd data = X.data;
  detail::to_little_endian(data.data(), static_cast<std::size_t>(data.size()));
  std::ofstream out(raw_path, std::ios::binary);
  if (!out) throw validation_error("cannot write " + raw_path);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(8 * data.size()));
}

/// Pattern file: a JSON array of [dr, dc] pairs. Raw shapes are normalized;
/// the translation that was applied is returned alongside.
inline NormalizedPattern load_pattern(const std::string& path) {
  const json j = detail::parse_json_file(path);
  if (!j.is_array() || j.empty())
    throw validation_error("pattern file " + path + " must be a nonempty array of [dr,dc] pairs");
  std::vector<PixelShift> offsets;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
      throw validation_error("pattern file " + path + " must contain [dr,dc] integer pairs");
    offsets.push_back({e[0].get<std::int64_t>(), e[1].get<std::int64_t>()});
  }
  try {
    return normalize_pattern(std::move(offsets));
  } catch (const validation_error& e) {
    throw validation_error("pattern file " + path + ": " + e.what());
  }
}

inline void save_pattern(const std::string& path, const Pattern& P) {
  json j = json::array();
  for (const auto& p : P.offsets()) j.push_back({p.dr, p.dc});
  detail::write_text_file(path, j.dump() + "\n");
}

/// Signature files: a JSON array of numbers, or an array of such arrays for
/// per-offset signatures.
inline std::vector<SpectralSignature> load_signatures(const std::string& path) {
  const json j = detail::parse_json_file(path);
  if (!j.is_array() || j.empty())
    throw validation_error("signature file " + path + " must be a nonempty array");
  auto parse_one = [&](const json& arr) {
    SpectralSignature s(static_cast<Index>(arr.size()));
    Index i = 0;
    for (const auto& v : arr) {
      if (!v.is_number()) throw validation_error("signature file " + path + " must be numeric");
      s[i++] = v.get<double>();
    }
    if (!s.allFinite()) throw validation_error("signature in " + path + " is not finite");
    return s;
  };
  std::vector<SpectralSignature> sigs;
  if (j[0].is_array()) {
    for (const auto& arr : j) {
      if (!arr.is_array() || arr.empty())
        throw validation_error("signature file " + path + " has an empty entry");
      sigs.push_back(parse_one(arr));
    }
  } else {
    sigs.push_back(parse_one(j));
  }
  return sigs;
}

inline SpectralSignature load_signature(const std::string& path) {
  const auto sigs = load_signatures(path);
  if (sigs.size() != 1)
    throw validation_error("expected a single signature in " + path);
  return sigs[0];
}

inline void save_signatures(const std::string& path, const std::vector<SpectralSignature>& sigs) {
  auto dump_one = [](const SpectralSignature& s) {
    json a = json::array();
    for (Index i = 0; i < s.size(); ++i) a.push_back(s[i]);
    return a;
  };
  json j;
  if (sigs.size() == 1) {
    j = dump_one(sigs[0]);
  } else {
    j = json::array();
    for (const auto& s : sigs) j.push_back(dump_one(s));
  }
  detail::write_text_file(path, j.dump() + "\n");
}

inline json plan_to_json(const MeasurementPlan& plan) {
  auto set_to_json = [](const ShiftSet& s) {
    json a = json::array();
    for (const auto& e : s.elements()) a.push_back({e.dr, e.dc});
    return a;
  };
  return {{"E", set_to_json(plan.E)},
          {"EP", set_to_json(plan.EP)},
          {"alpha", plan.alpha},
          {"seed", plan.seed},
          {"h", plan.h}};
}

inline void save_plan(const std::string& path, const MeasurementPlan& plan) {
  detail::write_text_file(path, plan_to_json(plan).dump(2) + "\n");
}

/// Binary PGM (P5) masks: 0 is negative, 255 positive; pixels row-major.
inline void save_mask_pgm(const std::string& path, const Mask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot write " + path);
  out << "P5\n" << mask.dims.n_cols << " " << mask.dims.n_rows << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(mask.dims.n_cols));
  for (Index r = 0; r < mask.dims.n_rows; ++r) {
    for (Index c = 0; c < mask.dims.n_cols; ++c)
      row[static_cast<std::size_t>(c)] =
          mask.values[static_cast<std::size_t>(vecc_index(r, c, mask.dims))] ? 255 : 0;
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

inline Mask load_mask_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open " + path);
  auto next_token = [&]() -> std::string {
    std::string tok;
    while (in) {
      const int ch = in.peek();
      if (ch == '#') {  // comment to end of line
        std::string line;
        std::getline(in, line);
        continue;
      }
      if (std::isspace(ch)) {
        in.get();
        continue;
      }
      break;
    }
    in >> tok;
    return tok;
  };
  if (next_token() != "P5") throw validation_error(path + " is not a binary PGM (P5) file");
  Index width = 0, height = 0, maxval = 0;
  try {
    width = std::stoll(next_token());
    height = std::stoll(next_token());
    maxval = std::stoll(next_token());
  } catch (const std::exception&) {
    throw validation_error(path + " has a malformed PGM header");
  }
  if (width < 1 || height < 1 || maxval < 1 || maxval > 255)
    throw validation_error(path + " has an unsupported PGM header");
  in.get();  // single whitespace after maxval
  std::vector<char> bytes(static_cast<std::size_t>(width * height));
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw validation_error(path + " is truncated");
  const GridDims dims{height, width};
  Mask mask(dims);
  for (Index r = 0; r < height; ++r)
    for (Index c = 0; c < width; ++c) {
      const auto v = static_cast<unsigned char>(bytes[static_cast<std::size_t>(r * width + c)]);
      mask.values[static_cast<std::size_t>(vecc_index(r, c, dims))] = 2 * v > maxval ? 1 : 0;
    }
  return mask;
}

/// One CSV with a header row; cells are written as-is.
inline void save_csv(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < header.size(); ++i) ss << (i ? "," : "") << header[i];
  ss << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) ss << (i ? "," : "") << row[i];
    ss << "\n";
  }
  detail::write_text_file(path, ss.str());
}

}  // namespace cpm
