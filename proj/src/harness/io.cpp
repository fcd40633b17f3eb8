#include "swift/harness/io.hpp"

#include "swift/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace swift::harness {

namespace {

[[noreturn]] void format_error(const std::string& source, std::size_t line, const std::string& msg) {
  fail(ErrorKind::Format, source + ":" + std::to_string(line) + ": " + msg);
}

bool skip_line(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

template <typename T>
bool parse_token(const std::string& tok, T& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string> split(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> toks;
  for (std::string t; ss >> t;) toks.push_back(t);
  return toks;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double x) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) fail(ErrorKind::Format, "cannot format number");
  return {buf.data(), ptr};
}

SparseTensor read_tensor(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  Shape shape;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    auto toks = split(line);
    if (toks.empty() || toks[0] != "shape") format_error(source, lineno, "expected 'shape' header");
    for (std::size_t k = 1; k < toks.size(); ++k) {
      Index e = 0;
      if (!parse_token(toks[k], e) || e <= 0)
        format_error(source, lineno, "bad extent '" + toks[k] + "'");
      shape.push_back(e);
    }
    if (shape.size() < 2) format_error(source, lineno, "tensor order must be at least 2");
    break;
  }
  if (shape.empty()) format_error(source, lineno, "missing 'shape' header");

  const std::size_t order = shape.size();
  std::vector<Entry> entries;
  std::vector<std::size_t> entry_lines;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    auto toks = split(line);
    if (toks.size() != order + 1)
      format_error(source, lineno,
                   "expected " + std::to_string(order) + " indices and a value, got " +
                       std::to_string(toks.size()) + " fields");
    Entry e;
    e.index.resize(order);
    for (std::size_t k = 0; k < order; ++k) {
      if (!parse_token(toks[k], e.index[k])) format_error(source, lineno, "bad index '" + toks[k] + "'");
      if (e.index[k] < 0 || e.index[k] >= shape[k])
        format_error(source, lineno, "index " + toks[k] + " out of range for mode " +
                                         std::to_string(k) + " (extent " +
                                         std::to_string(shape[k]) + ")");
    }
    if (!parse_token(toks[order], e.value) || !std::isfinite(e.value))
      format_error(source, lineno, "bad value '" + toks[order] + "'");
    if (e.value < 0.0) format_error(source, lineno, "negative value " + toks[order]);
    entries.push_back(std::move(e));
    entry_lines.push_back(lineno);
  }

  // report duplicates against their line numbers before handing off
  std::vector<std::pair<Index, std::size_t>> keys;
  keys.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Index lin = 0, stride = 1;
    for (std::size_t k = 0; k < order; ++k) {
      lin += entries[i].index[k] * stride;
      stride *= shape[k];
    }
    keys.emplace_back(lin, i);
  }
  std::sort(keys.begin(), keys.end());
  for (std::size_t i = 1; i < keys.size(); ++i)
    if (keys[i].first == keys[i - 1].first) {
      const std::size_t a = std::min(keys[i].second, keys[i - 1].second);
      const std::size_t b = std::max(keys[i].second, keys[i - 1].second);
      format_error(source, entry_lines[b],
                   "duplicate coordinate (first seen on line " + std::to_string(entry_lines[a]) +
                       ")");
    }
  return SparseTensor(std::move(shape), std::move(entries));
}

void write_tensor(std::ostream& out, const SparseTensor& tensor) {
  out << "shape";
  for (Index e : tensor.shape()) out << ' ' << e;
  out << '\n';
  for (Index e = 0; e < tensor.nnz(); ++e) {
    for (Index i : tensor.index(e)) out << i << ' ';
    out << format_double(tensor.value(e)) << '\n';
  }
}

SparseTensor load_tensor(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_tensor(in, path.string());
}

void save_tensor(const std::filesystem::path& path, const SparseTensor& tensor) {
  auto out = open_out(path);
  write_tensor(out, tensor);
}

Matrix read_matrix(std::istream& in, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    std::vector<double> row;
    for (const auto& tok : split(line)) {
      double v = 0.0;
      if (!parse_token(tok, v) || !std::isfinite(v))
        format_error(source, lineno, "bad number '" + tok + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      format_error(source, lineno, "ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::Format, source + ": empty matrix");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Matrix load_matrix(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_matrix(in, path.string());
}

void save_matrix(const std::filesystem::path& path, const Matrix& m) {
  auto out = open_out(path);
  write_matrix(out, m);
}

void save_trace(const std::filesystem::path& path, const FitTrace& trace) {
  auto out = open_out(path);
  out << "iteration,total,transport,entropy,reconstruction_kl,data_kl\n";
  for (const auto& r : trace.records) {
    const auto& o = r.objective;
    out << r.iteration << ',' << format_double(o.total) << ',' << format_double(o.transport) << ','
        << format_double(o.entropy) << ',' << format_double(o.reconstruction_kl) << ','
        << format_double(o.data_kl) << '\n';
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

}  // namespace swift::harness
