#pragma once

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scq/codes.hpp"
#include "scq/linalg.hpp"
#include "scq/model.hpp"
#include "scq/scale.hpp"

namespace scq {

namespace detail {

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::InvalidInput, "cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) fail(ErrorCode::InvalidInput, "read error on " + path);
  return bytes;
}

/// Every writer goes through a sibling temp file plus a rename, so a reader
/// can never observe a half-written target.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::InvalidInput, "cannot open " + tmp + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) fail(ErrorCode::InvalidInput, "write error on " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    fail(ErrorCode::InvalidInput, "cannot move " + tmp + " into place: " + ec.message());
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline std::uint32_t get_u32(const std::string& bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + b])) << (8 * b);
  return v;
}

/// %a prints the exact binary value, so text round-trips are lossless and a
/// reprint of a parsed file is byte-identical.
inline std::string hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

/// Splits on '\n', strips a '\r' left by CRLF files, and drops the empty
/// tail a final newline would produce. Interior blank lines survive so the
/// parsers can point at them.
inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    const std::size_t stop = end == std::string::npos ? text.size() : end;
    std::string line = text.substr(start, stop - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return lines;
}

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(sep, start);
    out.push_back(line.substr(start, end == std::string::npos ? std::string::npos
                                                              : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

inline std::vector<std::string> whitespace_tokens(const std::string& line) {
  std::istringstream in(line);
  return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

inline double parse_double(const std::string& tok, const std::string& where) {
  const std::string t = trimmed(tok);
  const char* s = t.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    fail(ErrorCode::FormatError, where + ": '" + tok + "' is not a number");
  return v;
}

inline long parse_long(const std::string& tok, const std::string& where) {
  const std::string t = trimmed(tok);
  const char* s = t.c_str();
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || errno == ERANGE)
    fail(ErrorCode::FormatError, where + ": '" + tok + "' is not an integer");
  return v;
}

inline Matrix parse_csv_features(const std::string& text, const std::string& path) {
  const auto lines = split_lines(text);
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path + ": line " + std::to_string(i + 1);
    if (trimmed(lines[i]).empty()) fail(ErrorCode::FormatError, where + " is empty");
    const auto fields = split_fields(lines[i], ',');
    if (rows.empty())
      width = fields.size();
    else if (fields.size() != width)
      fail(ErrorCode::FormatError, where + " has " + std::to_string(fields.size()) +
                                       " fields, expected " + std::to_string(width));
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t j = 0; j < fields.size(); ++j)
      row.push_back(
          parse_double(fields[j], where + ", field " + std::to_string(j + 1)));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::InvalidInput, path + ": no feature rows");
  Matrix X(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      X(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return X;
}

}  // namespace detail

/**
 * Feature container: magic "SCQF", u32 little-endian n and d, then n*d
 * 32-bit little-endian floats row-major. Values are stored at float
 * precision; rereading a written file reproduces the float-rounded matrix.
 */
inline void write_features(const std::string& path, const Matrix& X) {
  constexpr auto cap = std::numeric_limits<std::uint32_t>::max();
  if (static_cast<std::uint64_t>(X.rows()) > cap ||
      static_cast<std::uint64_t>(X.cols()) > cap)
    fail(ErrorCode::InvalidInput, "matrix too large for the feature container");
  std::string out("SCQF");
  out.reserve(12 + 4 * static_cast<std::size_t>(X.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(X.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(X.cols()));
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j) {
      const float f = static_cast<float>(X(i, j));
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      detail::put_u32(out, bits);
    }
  detail::write_file_atomic(path, out);
}

/// Reads the binary container above; anything without its magic is parsed as
/// headerless CSV, one sample per line.
inline Matrix read_features(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "SCQF") != 0)
    return detail::parse_csv_features(bytes, path);
  if (bytes.size() < 12)
    fail(ErrorCode::FormatError, path + ": truncated header, 12 bytes needed but file ends at byte " +
                                     std::to_string(bytes.size()));
  const std::uint32_t n = detail::get_u32(bytes, 4);
  const std::uint32_t d = detail::get_u32(bytes, 8);
  const std::uint64_t cells = static_cast<std::uint64_t>(n) * d;
  if (n != 0 && cells / n != d)
    fail(ErrorCode::FormatError, path + ": header dimensions overflow");
  const std::uint64_t expected = 12 + 4 * cells;
  if (bytes.size() != expected)
    fail(ErrorCode::FormatError, path + ": expected " + std::to_string(expected) +
                                     " bytes for " + std::to_string(n) + "x" +
                                     std::to_string(d) + ", file has " +
                                     std::to_string(bytes.size()));
  Matrix X(static_cast<Index>(n), static_cast<Index>(d));
  std::size_t at = 12;
  for (Index i = 0; i < X.rows(); ++i)
    for (Index j = 0; j < X.cols(); ++j, at += 4) {
      const std::uint32_t bits = detail::get_u32(bytes, at);
      float f;
      std::memcpy(&f, &bits, 4);
      X(i, j) = f;
    }
  return X;
}

/// One decimal integer per line.
inline void write_labels(const std::string& path, const std::vector<int>& labels) {
  if (labels.empty()) fail(ErrorCode::InvalidInput, "refusing to write an empty label file");
  std::string out;
  for (int l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  detail::write_file_atomic(path, out);
}

inline std::vector<int> read_labels(const std::string& path) {
  const auto lines = detail::split_lines(detail::read_file_bytes(path));
  std::vector<int> labels;
  labels.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string where = path + ": line " + std::to_string(i + 1);
    if (detail::trimmed(lines[i]).empty()) fail(ErrorCode::FormatError, where + " is empty");
    const long v = detail::parse_long(lines[i], where);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
      fail(ErrorCode::FormatError, where + ": label out of range");
    labels.push_back(static_cast<int>(v));
  }
  if (labels.empty()) fail(ErrorCode::InvalidInput, path + ": label file has no entries");
  return labels;
}

/**
 * Code container: magic "SCQB", u32 little-endian n and L, then n rows of
 * ceil(L/8) bytes in the packed layout of BinaryCodes (bit j of a row is
 * (B_ij+1)/2, LSB first, zero tail). An empty database (n = 0) is legal.
 */
inline void write_codes(const std::string& path, const BinaryCodes& B) {
  constexpr auto cap = std::numeric_limits<std::uint32_t>::max();
  if (static_cast<std::uint64_t>(B.n()) > cap || static_cast<std::uint64_t>(B.L()) > cap)
    fail(ErrorCode::InvalidInput, "codes too large for the container");
  std::string out("SCQB");
  detail::put_u32(out, static_cast<std::uint32_t>(B.n()));
  detail::put_u32(out, static_cast<std::uint32_t>(B.L()));
  out.append(reinterpret_cast<const char*>(B.packed.data()), B.packed.size());
  detail::write_file_atomic(path, out);
}

inline BinaryCodes read_codes(const std::string& path) {
  const std::string bytes = detail::read_file_bytes(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "SCQB") != 0)
    fail(ErrorCode::FormatError, path + ": not a code file (magic mismatch at byte 0)");
  if (bytes.size() < 12)
    fail(ErrorCode::FormatError, path + ": truncated header, 12 bytes needed but file ends at byte " +
                                     std::to_string(bytes.size()));
  const std::uint32_t n = detail::get_u32(bytes, 4);
  const std::uint32_t L = detail::get_u32(bytes, 8);
  const std::uint64_t stride = (static_cast<std::uint64_t>(L) + 7) / 8;
  const std::uint64_t cells = n * stride;
  if (n != 0 && cells / n != stride)
    fail(ErrorCode::FormatError, path + ": header dimensions overflow");
  const std::uint64_t expected = 12 + cells;
  if (bytes.size() != expected)
    fail(ErrorCode::FormatError, path + ": expected " + std::to_string(expected) +
                                     " bytes for n=" + std::to_string(n) + " L=" +
                                     std::to_string(L) + ", file has " +
                                     std::to_string(bytes.size()));
  std::vector<std::uint8_t> payload(bytes.begin() + 12, bytes.end());
  // from_packed rejects nonzero padding bits with a FormatError of its own.
  return BinaryCodes::from_packed(static_cast<Index>(n), static_cast<Index>(L),
                                  std::move(payload));
}

namespace detail {

inline void append_matrix(std::string& out, const Matrix& M) {
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) {
      out += hex_double(M(i, j));
      out += (j + 1 < M.cols()) ? ' ' : '\n';
    }
}

}  // namespace detail

/**
 * Model container: a line-oriented key-value document, "scqmodel 1" first.
 * All reals are hex-floats, so a load followed by a save is byte-identical
 * to the original file and no numeric field moves in transit.
 */
inline void save_model(const std::string& path, const HashModel& m) {
  validate_model(m);
  if (m.format_version != 1)
    fail(ErrorCode::UnsupportedVersion,
         "this build writes model format 1, not " + std::to_string(m.format_version));
  std::string out = "scqmodel 1\n";
  out += std::string("method ") + method_name(m.method) + "\n";
  out += "bits " + std::to_string(m.L) + "\n";
  out += "d_in " + std::to_string(m.d_in) + "\n";
  out += "scale " + detail::hex_double(m.scale) + "\n";
  out += "mean " + std::to_string(m.mean.size()) + "\n";
  detail::append_matrix(out, m.mean.transpose());
  if (m.pca) {
    out += "pca " + std::to_string(m.pca->rows()) + " " + std::to_string(m.pca->cols()) + "\n";
    detail::append_matrix(out, *m.pca);
  } else {
    out += "pca none\n";
  }
  out += "projection " + std::to_string(m.V.data.rows()) + " " +
         std::to_string(m.V.data.cols()) + "\n";
  detail::append_matrix(out, m.V.data);
  out += "hyper_bits " + std::to_string(m.hyper.L) + "\n";
  out += "hyper_max_iter " + std::to_string(m.hyper.max_iter) + "\n";
  out += "hyper_eps " + detail::hex_double(m.hyper.eps) + "\n";
  out += "hyper_eps_b " + detail::hex_double(m.hyper.eps_b) + "\n";
  out += "hyper_eps_u " + detail::hex_double(m.hyper.eps_u) + "\n";
  out += "hyper_mu " + detail::hex_double(m.hyper.mu) + "\n";
  out += "hyper_scale_override " +
         (m.hyper.scale_override ? detail::hex_double(*m.hyper.scale_override)
                                 : std::string("none")) +
         "\n";
  out += "hyper_seed " + std::to_string(m.hyper.seed) + "\n";
  detail::write_file_atomic(path, out);
}

inline HashModel load_model(const std::string& path) {
  const auto lines = detail::split_lines(detail::read_file_bytes(path));
  std::size_t at = 0;
  const auto next_line = [&]() -> const std::string& {
    if (at >= lines.size())
      fail(ErrorCode::FormatError,
           path + ": unexpected end of file at line " + std::to_string(at + 1));
    return lines[at++];
  };
  const auto values_of = [&](const char* key) {
    auto toks = detail::whitespace_tokens(next_line());
    if (toks.empty() || toks.front() != key)
      fail(ErrorCode::FormatError,
           path + ": line " + std::to_string(at) + ": expected '" + key + "'");
    toks.erase(toks.begin());
    return toks;
  };
  const auto one_value = [&](const char* key) {
    const auto toks = values_of(key);
    if (toks.size() != 1)
      fail(ErrorCode::FormatError, path + ": line " + std::to_string(at) + ": '" +
                                       key + "' takes exactly one value");
    return toks.front();
  };
  const auto read_block = [&](Index rows, Index cols, const char* what) {
    if (rows < 1 || cols < 1 || rows > (1 << 24) || cols > (1 << 24) ||
        rows * cols > (Index{1} << 30))
      fail(ErrorCode::FormatError,
           path + ": implausible " + what + " dimensions " + std::to_string(rows) +
               "x" + std::to_string(cols));
    Matrix M(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      const auto toks = detail::whitespace_tokens(next_line());
      const std::string where = path + ": line " + std::to_string(at);
      if (static_cast<Index>(toks.size()) != cols)
        fail(ErrorCode::FormatError, where + " has " + std::to_string(toks.size()) +
                                         " values, expected " + std::to_string(cols));
      for (Index c = 0; c < cols; ++c)
        M(r, c) = detail::parse_double(toks[static_cast<std::size_t>(c)], where);
    }
    return M;
  };

  const auto head = detail::whitespace_tokens(next_line());
  if (head.size() != 2 || head[0] != "scqmodel")
    fail(ErrorCode::FormatError, path + ": not a model file");
  if (head[1] != "1")
    fail(ErrorCode::UnsupportedVersion,
         path + ": model format version " + head[1] + ", this build reads version 1");

  HashModel m;
  const std::string method = one_value("method");
  if (method == "one")
    m.method = Method::OnE;
  else if (method == "oge")
    m.method = Method::OgE;
  else if (method == "itq")
    m.method = Method::ITQ;
  else
    fail(ErrorCode::FormatError, path + ": unknown method '" + method + "'");
  const auto where = [&] { return path + ": line " + std::to_string(at); };
  m.L = detail::parse_long(one_value("bits"), where());
  m.d_in = detail::parse_long(one_value("d_in"), where());
  m.scale = detail::parse_double(one_value("scale"), where());
  const Index mean_len = detail::parse_long(one_value("mean"), where());
  m.mean = read_block(1, mean_len, "mean").transpose();
  const auto pca = values_of("pca");
  if (pca.size() == 1 && pca.front() == "none") {
    m.pca.reset();
  } else if (pca.size() == 2) {
    const Index r = detail::parse_long(pca[0], where());
    const Index c = detail::parse_long(pca[1], where());
    m.pca = read_block(r, c, "reduction");
  } else {
    fail(ErrorCode::FormatError, where() + ": 'pca' takes 'none' or two dimensions");
  }
  const auto proj = values_of("projection");
  if (proj.size() != 2)
    fail(ErrorCode::FormatError, where() + ": 'projection' takes two dimensions");
  m.V.data = read_block(detail::parse_long(proj[0], where()),
                        detail::parse_long(proj[1], where()), "projection");
  m.V.kind = projection_kind_of(m.method);
  m.hyper.L = detail::parse_long(one_value("hyper_bits"), where());
  m.hyper.max_iter =
      static_cast<int>(detail::parse_long(one_value("hyper_max_iter"), where()));
  m.hyper.eps = detail::parse_double(one_value("hyper_eps"), where());
  m.hyper.eps_b = detail::parse_double(one_value("hyper_eps_b"), where());
  m.hyper.eps_u = detail::parse_double(one_value("hyper_eps_u"), where());
  m.hyper.mu = detail::parse_double(one_value("hyper_mu"), where());
  const std::string over = one_value("hyper_scale_override");
  if (over == "none")
    m.hyper.scale_override.reset();
  else
    m.hyper.scale_override = detail::parse_double(over, where());
  const long seed = detail::parse_long(one_value("hyper_seed"), where());
  if (seed < 0 || seed > static_cast<long>(std::numeric_limits<std::uint32_t>::max()))
    fail(ErrorCode::FormatError, where() + ": seed out of range");
  m.hyper.seed = static_cast<std::uint32_t>(seed);
  if (at != lines.size())
    fail(ErrorCode::FormatError, path + ": trailing content at line " + std::to_string(at + 1));
  m.format_version = 1;
  validate_model(m);
  return m;
}

/// Scale sweep results as CSV. Error messages keep the row parseable: commas
/// become semicolons and newlines become spaces.
inline void write_sweep_table(const std::string& path, const std::vector<SweepRow>& rows) {
  const auto g17 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string out = "s,per_bit_loss,retained_fraction,mean_gap,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (char& c : err) {
      if (c == ',') c = ';';
      if (c == '\n' || c == '\r') c = ' ';
    }
    out += g17(r.s) + "," + g17(r.per_bit_loss) + "," + g17(r.retained_fraction) + "," +
           g17(r.mean_gap) + "," + err + "\n";
  }
  detail::write_file_atomic(path, out);
}

}  // namespace scq
