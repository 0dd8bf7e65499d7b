#pragma once

// File formats: the BAF1 binary raster (ASCII header + little-endian
// binary64 payload, channel-interleaved, row-major), the plain-text
// parameter document, and CSV emission at 17 significant digits.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bgadj/errors.hpp"
#include "bgadj/mixture.hpp"

namespace bgadj {

struct BafRaster {
  int nx = 0;
  int ny = 0;
  int channels = 0;
  std::vector<double> data;  // (y * nx + x) * channels + c

  std::size_t pixels() const { return static_cast<std::size_t>(nx) * ny; }
};

namespace detail {

inline void put_le64(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

inline double get_le64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_baf(const std::string& path, const BafRaster& r) {
  if (r.nx <= 0 || r.ny <= 0 || r.channels <= 0 ||
      r.data.size() != r.pixels() * r.channels)
    throw std::invalid_argument("write_baf: inconsistent raster");
  for (double v : r.data)
    if (!std::isfinite(v)) throw std::invalid_argument("write_baf: non-finite value");
  std::string out = "BAF1 " + std::to_string(r.nx) + " " + std::to_string(r.ny) + " " +
                    std::to_string(r.channels) + "\n";
  out.reserve(out.size() + r.data.size() * 8);
  for (double v : r.data) detail::put_le64(out, v);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataFormatError("write_baf: cannot open " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataFormatError("write_baf: write failed for " + path);
}

inline BafRaster read_baf(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataFormatError("read_baf: cannot open " + path);
  std::string header;
  std::getline(f, header);
  BafRaster r;
  char tag[8] = {0};
  if (std::sscanf(header.c_str(), "%4s %d %d %d", tag, &r.nx, &r.ny, &r.channels) != 4 ||
      std::string(tag) != "BAF1" || r.nx <= 0 || r.ny <= 0 || r.channels <= 0)
    throw DataFormatError("read_baf: malformed BAF1 header in " + path);
  const std::size_t count = r.pixels() * r.channels;
  std::vector<unsigned char> raw(count * 8);
  f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(f.gcount()) != raw.size())
    throw DataFormatError("read_baf: truncated payload in " + path);
  if (f.get() != std::char_traits<char>::eof())
    throw DataFormatError("read_baf: trailing bytes in " + path);
  r.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    r.data[i] = detail::get_le64(&raw[i * 8]);
    if (!std::isfinite(r.data[i]))
      throw DataFormatError("read_baf: non-finite value in " + path);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Parameter document: plain-text key/value lines.
//
//   K 3
//   p 2
//   gamma 0.94 0.01 0.05     (or: pi ...)
//   mu 1 4.91 6.68
//   sigma 1
//   1.23 1.63
//   1.63 2.21
//   ...
//
// Writing is canonical, so write -> read -> write round-trips
// byte-identically.

struct ParsedParams {
  std::size_t K = 0;
  std::size_t p = 0;
  WeightKind kind = WeightKind::global;
  Vec weights;
  std::vector<GaussianComponent> components;

  MixtureModel to_model(std::shared_ptr<const TemplateStack> templates = nullptr) const {
    if (kind == WeightKind::spatial) {
      if (!templates)
        throw std::invalid_argument("ParsedParams: spatial parameters need templates");
      return make_spatial_model(components, weights, std::move(templates));
    }
    return make_global_model(components, weights);
  }
};

inline std::string params_to_string(const MixtureModel& model) {
  model.validate();
  std::string out;
  out += "K " + std::to_string(model.K()) + "\n";
  out += "p " + std::to_string(model.p()) + "\n";
  out += (model.kind == WeightKind::spatial ? "gamma" : "pi");
  for (double w : model.weights) out += " " + detail::fmt17(w);
  out += "\n";
  for (std::size_t k = 0; k < model.K(); ++k) {
    out += "mu " + std::to_string(k + 1);
    for (double v : model.components[k].mean) out += " " + detail::fmt17(v);
    out += "\n";
  }
  for (std::size_t k = 0; k < model.K(); ++k) {
    out += "sigma " + std::to_string(k + 1) + "\n";
    const Mat& s = model.components[k].cov.mat();
    for (std::size_t r = 0; r < model.p(); ++r) {
      for (std::size_t c = 0; c < model.p(); ++c)
        out += (c ? " " : "") + detail::fmt17(s(r, c));
      out += "\n";
    }
  }
  return out;
}

inline void write_params(const std::string& path, const MixtureModel& model) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataFormatError("write_params: cannot open " + path);
  const std::string s = params_to_string(model);
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!f) throw DataFormatError("write_params: write failed for " + path);
}

inline ParsedParams parse_params(std::istream& in, const std::string& origin) {
  const auto fail = [&](const std::string& why) -> void {
    throw DataFormatError("parse_params: " + why + " in " + origin);
  };
  ParsedParams out;
  std::string line;
  std::size_t K = 0, p = 0;
  bool have_weights = false;
  std::vector<Vec> mus;
  std::vector<Mat> sigmas;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "K") {
      if (!(ls >> K) || K == 0) fail("bad K line");
      mus.assign(K, {});
      sigmas.assign(K, {});
    } else if (key == "p") {
      if (!(ls >> p) || p == 0) fail("bad p line");
    } else if (key == "gamma" || key == "pi") {
      if (K == 0) fail("weights before K");
      out.kind = key == "gamma" ? WeightKind::spatial : WeightKind::global;
      out.weights.resize(K);
      for (std::size_t k = 0; k < K; ++k)
        if (!(ls >> out.weights[k])) fail("weight count mismatch");
      have_weights = true;
    } else if (key == "mu") {
      std::size_t k;
      if (K == 0 || p == 0 || !(ls >> k) || k < 1 || k > K) fail("bad mu line");
      mus[k - 1].resize(p);
      for (std::size_t d = 0; d < p; ++d)
        if (!(ls >> mus[k - 1][d])) fail("mu value count mismatch");
    } else if (key == "sigma") {
      std::size_t k;
      if (K == 0 || p == 0 || !(ls >> k) || k < 1 || k > K) fail("bad sigma line");
      Mat s(p, p);
      for (std::size_t r = 0; r < p; ++r) {
        if (!std::getline(in, line)) fail("truncated sigma block");
        std::istringstream rs(line);
        for (std::size_t c = 0; c < p; ++c)
          if (!(rs >> s(r, c))) fail("sigma row value count mismatch");
      }
      sigmas[k - 1] = s;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (K == 0 || p == 0 || !have_weights) fail("missing K, p or weights");
  out.K = K;
  out.p = p;
  for (std::size_t k = 0; k < K; ++k) {
    if (mus[k].size() != p) fail("missing mu for component " + std::to_string(k + 1));
    if (sigmas[k].rows() != p) fail("missing sigma for component " + std::to_string(k + 1));
    try {
      out.components.emplace_back(mus[k], SpdMatrix(sigmas[k]));
    } catch (const std::exception& e) {
      fail(std::string("invalid component: ") + e.what());
    }
  }
  return out;
}

inline ParsedParams read_params(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataFormatError("read_params: cannot open " + path);
  return parse_params(f, path);
}

// ---------------------------------------------------------------------------
// CSV output.

inline void write_csv(const std::string& path, const std::string& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataFormatError("write_csv: cannot open " + path);
  f << header << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      f << (i ? "," : "") << detail::fmt17(row[i]);
    f << "\n";
  }
  if (!f) throw DataFormatError("write_csv: write failed for " + path);
}

}  // namespace bgadj
