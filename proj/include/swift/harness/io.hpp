#pragma once

#include "swift/solver.hpp"
#include "swift/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace swift::harness {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

/// COO text format: "shape I_0 ... I_{N-1}" then one "i_0 ... i_{N-1} value"
/// line per nonzero, 0-based. Blank lines and '#' comments are ignored.
SparseTensor read_tensor(std::istream& in, const std::string& source = "<stream>");
void write_tensor(std::ostream& out, const SparseTensor& tensor);
SparseTensor load_tensor(const std::filesystem::path& path);
void save_tensor(const std::filesystem::path& path, const SparseTensor& tensor);

/// Dense matrix text: one whitespace-separated row per line.
Matrix read_matrix(std::istream& in, const std::string& source = "<stream>");
void write_matrix(std::ostream& out, const Matrix& m);
Matrix load_matrix(const std::filesystem::path& path);
void save_matrix(const std::filesystem::path& path, const Matrix& m);

/// One CSV row per outer iteration with the objective parts. Timings are
/// left out so that reruns produce identical files.
void save_trace(const std::filesystem::path& path, const FitTrace& trace);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace swift::harness
