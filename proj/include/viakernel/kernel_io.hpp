#pragma once

// On-disk kernel format.
//
//   <stem>.hdr   plain-text "key = value" lines listing every grid and meta
//                field; numbers use 17 significant digits so reading back
//                is lossless.
//   <stem>.mask  packed membership bits in row-major cell order (last
//                dimension fastest); cell c is bit (c % 8) of byte c / 8,
//                least significant bit first; padding bits are zero.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "viakernel/viability.hpp"

namespace viakernel {

inline constexpr const char* kKernelFormat = "viakernel-grid-1";

namespace detail {

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

inline std::string join_bools(const std::vector<bool>& v, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += (i < v.size() && v[i]) ? '1' : '0';
  }
  return s;
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::istringstream is(s);
  std::vector<T> out;
  std::string tok;
  while (is >> tok) {
    if constexpr (std::is_same_v<T, double>)
      out.push_back(std::stod(tok));
    else
      out.push_back(static_cast<T>(std::stoull(tok)));
  }
  return out;
}

}  // namespace detail

inline std::vector<std::uint8_t> pack_mask(const std::vector<std::uint8_t>& mask) {
  std::vector<std::uint8_t> bytes((mask.size() + 7) / 8, 0);
  for (std::size_t c = 0; c < mask.size(); ++c)
    if (mask[c]) bytes[c / 8] |= static_cast<std::uint8_t>(1u << (c % 8));
  return bytes;
}

inline std::vector<std::uint8_t> unpack_mask(const std::vector<std::uint8_t>& bytes,
                                             std::size_t cells) {
  if (bytes.size() != (cells + 7) / 8)
    throw std::runtime_error("kernel mask file has " + std::to_string(bytes.size()) +
                             " bytes, expected " + std::to_string((cells + 7) / 8));
  std::vector<std::uint8_t> mask(cells);
  for (std::size_t c = 0; c < cells; ++c) mask[c] = (bytes[c / 8] >> (c % 8)) & 1u;
  return mask;
}

inline void write_kernel_header(std::ostream& os, const KernelGrid& k,
                                const std::string& mask_file) {
  const auto& g = k.grid;
  os << "format = " << kKernelFormat << "\n"
     << "dims = " << g.dim() << "\n"
     << "window_lo = " << detail::join(g.window.lo) << "\n"
     << "window_hi = " << detail::join(g.window.hi) << "\n"
     << "shape = " << detail::join(g.shape) << "\n"
     << "absorbing_lo = " << detail::join_bools(g.absorbing_lo, g.dim()) << "\n"
     << "absorbing_hi = " << detail::join_bools(g.absorbing_hi, g.dim()) << "\n"
     << "dt = " << detail::join(std::vector<double>{k.meta.dt}) << "\n"
     << "substeps = " << k.meta.substeps << "\n"
     << "max_iter = " << k.meta.max_iter << "\n"
     << "iterations = " << k.meta.iterations << "\n"
     << "converged = " << (k.meta.converged ? 1 : 0) << "\n"
     << "dilation_radius = " << detail::join(std::vector<double>{k.meta.dilation_radius}) << "\n"
     << "control_dims = " << (k.meta.controls.empty() ? 0 : k.meta.controls.front().size())
     << "\n"
     << "controls = ";
  for (std::size_t i = 0; i < k.meta.controls.size(); ++i)
    os << (i ? " | " : "") << detail::join(k.meta.controls[i]);
  os << "\n"
     << "member_history = " << detail::join(k.meta.member_history) << "\n"
     << "total_cells = " << g.cell_count() << "\n"
     << "member_cells = " << k.member_count() << "\n"
     << "mask_file = " << mask_file << "\n";
}

/// Writes <dir>/<stem>.hdr and <dir>/<stem>.mask; returns the header path.
inline std::filesystem::path write_kernel(const KernelGrid& k, const std::filesystem::path& dir,
                                          const std::string& stem = "kernel") {
  std::filesystem::create_directories(dir);
  const auto hdr = dir / (stem + ".hdr");
  const auto msk = dir / (stem + ".mask");
  {
    std::ofstream os(hdr);
    if (!os) throw std::runtime_error("cannot write " + hdr.string());
    write_kernel_header(os, k, msk.filename().string());
  }
  std::ofstream os(msk, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + msk.string());
  const auto bytes = pack_mask(k.mask);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  return hdr;
}

inline KernelGrid read_kernel(const std::filesystem::path& header_path) {
  std::ifstream is(header_path);
  if (!is) throw std::runtime_error("cannot open kernel header " + header_path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) {
      if (!line.empty() && line.back() == '=') {
        kv[line.substr(0, line.find(' '))] = "";
        continue;
      }
      throw std::runtime_error("malformed kernel header line: " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("kernel header lacks '" + key + "'");
    return it->second;
  };
  if (get("format") != kKernelFormat)
    throw std::runtime_error("unsupported kernel format '" + get("format") + "'");

  KernelGrid k;
  k.grid.window.lo = detail::parse_list<double>(get("window_lo"));
  k.grid.window.hi = detail::parse_list<double>(get("window_hi"));
  k.grid.shape = detail::parse_list<std::size_t>(get("shape"));
  for (auto b : detail::parse_list<int>(get("absorbing_lo"))) k.grid.absorbing_lo.push_back(b != 0);
  for (auto b : detail::parse_list<int>(get("absorbing_hi"))) k.grid.absorbing_hi.push_back(b != 0);
  k.grid.validate();
  if (std::stoull(get("dims")) != k.grid.dim())
    throw std::runtime_error("kernel header: dims disagrees with shape");
  k.meta.dt = std::stod(get("dt"));
  k.meta.substeps = std::stoull(get("substeps"));
  k.meta.max_iter = std::stoull(get("max_iter"));
  k.meta.iterations = std::stoull(get("iterations"));
  k.meta.converged = std::stoi(get("converged")) != 0;
  k.meta.dilation_radius = std::stod(get("dilation_radius"));
  const auto control_dims = std::stoull(get("control_dims"));
  {
    std::istringstream cs(get("controls"));
    std::string part;
    while (std::getline(cs, part, '|')) {
      auto u = detail::parse_list<double>(part);
      if (u.empty()) continue;
      require_dim(u.size(), control_dims, "kernel header control");
      k.meta.controls.push_back(std::move(u));
    }
  }
  k.meta.member_history = detail::parse_list<std::size_t>(get("member_history"));

  const auto mask_path = header_path.parent_path() / get("mask_file");
  std::ifstream ms(mask_path, std::ios::binary);
  if (!ms) throw std::runtime_error("cannot open kernel mask " + mask_path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(ms)),
                                  std::istreambuf_iterator<char>());
  k.mask = unpack_mask(bytes, k.grid.cell_count());
  if (k.member_count() != std::stoull(get("member_cells")))
    throw std::runtime_error("kernel mask disagrees with member_cells in header");
  return k;
}

inline void write_member_centers_csv(std::ostream& os, const KernelGrid& k) {
  for (std::size_t j = 0; j < k.grid.dim(); ++j) os << (j ? "," : "") << "x" << (j + 1);
  os << "\n";
  const auto old = os.precision(17);
  for (std::size_t c = 0; c < k.mask.size(); ++c) {
    if (!k.mask[c]) continue;
    const Vec x = k.grid.center(c);
    for (std::size_t j = 0; j < x.size(); ++j) os << (j ? "," : "") << x[j];
    os << "\n";
  }
  os.precision(old);
}

/// 0/1 matrix over axes (a, b) with every other axis held at `fixed[j]`;
/// row i is index i along a, column j is index j along b.
inline void write_slice_csv(std::ostream& os, const KernelGrid& k, std::size_t a, std::size_t b,
                            const std::vector<std::size_t>& fixed) {
  const auto& g = k.grid;
  if (a >= g.dim() || b >= g.dim() || a == b)
    throw std::invalid_argument("write_slice_csv: bad slice axes");
  require_dim(fixed.size(), g.dim(), "write_slice_csv fixed index");
  auto idx = fixed;
  for (std::size_t i = 0; i < g.shape[a]; ++i) {
    idx[a] = i;
    for (std::size_t j = 0; j < g.shape[b]; ++j) {
      idx[b] = j;
      os << (j ? "," : "") << static_cast<int>(k.mask[g.ravel(idx)]);
    }
    os << "\n";
  }
}

/// Coordinate-wise median index of the member cells (grid middle if empty);
/// used as the default slice position.
inline std::vector<std::size_t> median_member_index(const KernelGrid& k) {
  const auto& g = k.grid;
  std::vector<std::vector<std::size_t>> per_axis(g.dim());
  for (std::size_t c = 0; c < k.mask.size(); ++c) {
    if (!k.mask[c]) continue;
    const auto idx = g.unravel(c);
    for (std::size_t j = 0; j < g.dim(); ++j) per_axis[j].push_back(idx[j]);
  }
  std::vector<std::size_t> out(g.dim());
  for (std::size_t j = 0; j < g.dim(); ++j) {
    auto& v = per_axis[j];
    if (v.empty()) {
      out[j] = g.shape[j] / 2;
    } else {
      std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
      out[j] = v[v.size() / 2];
    }
  }
  return out;
}

struct SliceFile {
  std::string file;
  std::size_t axis_a = 0;
  std::size_t axis_b = 0;
};

/// Writes one CSV slice per axis pair through the median member index.
inline std::vector<SliceFile> write_all_slices(const KernelGrid& k,
                                               const std::filesystem::path& dir,
                                               const std::string& stem) {
  std::vector<SliceFile> out;
  const auto fixed = median_member_index(k);
  for (std::size_t a = 0; a < k.grid.dim(); ++a) {
    for (std::size_t b = a + 1; b < k.grid.dim(); ++b) {
      SliceFile s{stem + "_slice_x" + std::to_string(a + 1) + "_x" + std::to_string(b + 1) + ".csv",
                  a, b};
      std::ofstream os(dir / s.file);
      if (!os) throw std::runtime_error("cannot write slice " + s.file);
      write_slice_csv(os, k, a, b, fixed);
      out.push_back(s);
    }
  }
  return out;
}

/// Matplotlib script rendering the given slices with their physical extents.
inline void write_plot_script(std::ostream& os, const KernelGrid& k,
                              const std::vector<SliceFile>& slices,
                              const std::vector<std::string>& axis_names = {}) {
  auto name = [&](std::size_t j) {
    return j < axis_names.size() ? axis_names[j] : "x" + std::to_string(j + 1);
  };
  os << "#!/usr/bin/env python3\n"
        "# Generated by viakernel: renders 2-D kernel slices.\n"
        "import pathlib\n"
        "import numpy as np\n"
        "import matplotlib\n"
        "matplotlib.use('Agg')\n"
        "import matplotlib.pyplot as plt\n\n"
        "HERE = pathlib.Path(__file__).resolve().parent\n"
        "SLICES = [\n";
  os.precision(17);
  for (const auto& s : slices) {
    os << "    ('" << s.file << "', '" << name(s.axis_a) << "', '" << name(s.axis_b) << "', ("
       << k.grid.window.lo[s.axis_b] << ", " << k.grid.window.hi[s.axis_b] << ", "
       << k.grid.window.lo[s.axis_a] << ", " << k.grid.window.hi[s.axis_a] << ")),\n";
  }
  os << "]\n\n"
        "for fname, row_axis, col_axis, extent in SLICES:\n"
        "    data = np.loadtxt(HERE / fname, delimiter=',', ndmin=2)\n"
        "    fig, ax = plt.subplots(figsize=(4, 4))\n"
        "    ax.imshow(data, origin='lower', extent=extent, aspect='auto', cmap='Greens',\n"
        "              vmin=0, vmax=1, interpolation='nearest')\n"
        "    ax.set_xlabel(col_axis)\n"
        "    ax.set_ylabel(row_axis)\n"
        "    fig.tight_layout()\n"
        "    fig.savefig(HERE / fname.replace('.csv', '.png'), dpi=120)\n"
        "    plt.close(fig)\n";
}

}  // namespace viakernel
