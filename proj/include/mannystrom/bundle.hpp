#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mannystrom/csv.hpp"
#include "mannystrom/errors.hpp"
#include "mannystrom/matrix_functions.hpp"
#include "mannystrom/pga.hpp"

namespace mannystrom {
namespace io {

/// Whitespace-delimited collection of square matrices: a header line
/// "N n [labels]" followed by N blocks, each an optional integer label line
/// plus n rows of n numbers printed at 17 significant digits.
struct MatrixBundle {
  Index n = 0;
  std::vector<Matrix> blocks;
  std::vector<int> labels;  // empty, or one per block
};

namespace detail {

struct LineReader {
  std::istream& in;
  std::string origin;
  int lineno = 0;

  /// Next non-blank line, or false at end of input.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in, line)) {
      ++lineno;
      std::istringstream ls(line);
      tokens.clear();
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(origin + ":" + std::to_string(lineno) + ": " + msg);
  }

  double number(const std::string& tok) const {
    const char* begin = tok.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
      fail("non-numeric token '" + tok + "'");
    return v;
  }

  long integer(const std::string& tok) const {
    const char* begin = tok.c_str();
    char* end = nullptr;
    long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0')
      fail("expected an integer label, got '" + tok + "'");
    return v;
  }
};

}  // namespace detail

inline MatrixBundle read_matrix_bundle(std::istream& in,
                                       const std::string& origin) {
  detail::LineReader reader{in, origin};
  std::vector<std::string> tokens;
  if (!reader.next(tokens)) {
    reader.lineno = 1;
    reader.fail("missing header line 'N n [labels]'");
  }
  bool labeled = false;
  if (tokens.size() == 3 && tokens.back() == "labels") {
    labeled = true;
    tokens.pop_back();
  }
  if (tokens.size() != 2)
    reader.fail("malformed header, expected 'N n [labels]'");
  long count = reader.integer(tokens[0]);
  long n = reader.integer(tokens[1]);
  if (count < 0 || n < 0 || (count > 0 && n == 0))
    reader.fail("header sizes must be nonnegative (and n > 0 when N > 0)");

  MatrixBundle bundle;
  bundle.n = n;
  for (long b = 0; b < count; ++b) {
    if (labeled) {
      if (!reader.next(tokens))
        reader.fail("unexpected end of file (block " + std::to_string(b + 1) +
                    " of " + std::to_string(count) + ")");
      if (tokens.size() != 1)
        reader.fail("expected a single integer label");
      bundle.labels.push_back(static_cast<int>(reader.integer(tokens[0])));
    }
    Matrix m(n, n);
    int block_line = reader.lineno + 1;
    for (long r = 0; r < n; ++r) {
      if (!reader.next(tokens))
        reader.fail("unexpected end of file (block " + std::to_string(b + 1) +
                    " of " + std::to_string(count) + ")");
      if (static_cast<long>(tokens.size()) != n)
        reader.fail("expected " + std::to_string(n) + " numbers, got " +
                    std::to_string(tokens.size()));
      for (long c = 0; c < n; ++c) m(r, c) = reader.number(tokens[c]);
    }
    double scale = matfun::max_abs(m);
    if (matfun::max_abs(m - m.transpose()) > 1e-9 * std::max(1.0, scale))
      throw ParseError(origin + ":" + std::to_string(block_line) + ": block " +
                       std::to_string(b + 1) +
                       " is not symmetric within 1e-9");
    bundle.blocks.push_back(std::move(m));
  }
  if (reader.next(tokens))
    reader.fail("trailing content after " + std::to_string(count) +
                " blocks");
  return bundle;
}

inline MatrixBundle read_matrix_bundle_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("bundle: cannot open '" + path + "'");
  return read_matrix_bundle(in, path);
}

inline void write_matrix_bundle(std::ostream& out, const MatrixBundle& bundle) {
  bool labeled = !bundle.labels.empty();
  if (labeled && bundle.labels.size() != bundle.blocks.size())
    throw InvalidInput("bundle: label count does not match block count");
  out << bundle.blocks.size() << ' ' << bundle.n
      << (labeled ? " labels" : "") << '\n';
  for (std::size_t b = 0; b < bundle.blocks.size(); ++b) {
    const Matrix& m = bundle.blocks[b];
    if (m.rows() != bundle.n || m.cols() != bundle.n)
      throw InvalidInput("bundle: block size does not match header");
    if (labeled) out << bundle.labels[b] << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
      for (Index c = 0; c < m.cols(); ++c)
        out << (c ? " " : "") << format_double(m(r, c));
      out << '\n';
    }
  }
}

inline void write_matrix_bundle_file(const std::string& path,
                                     const MatrixBundle& bundle) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("bundle: cannot open '" + path + "' for write");
  write_matrix_bundle(out, bundle);
}

/// Ingest a bundle as an SPD dataset.  Blocks are symmetrized exactly and
/// must be positive definite; failures carry the offending block index.
inline pga::PgaDataset bundle_to_dataset(const MatrixBundle& bundle) {
  pga::PgaDataset data;
  for (std::size_t b = 0; b < bundle.blocks.size(); ++b) {
    try {
      data.samples.emplace_back(matfun::symmetrize(bundle.blocks[b]));
    } catch (const InvalidInput&) {
      throw InvalidInput("bundle: block " + std::to_string(b + 1) +
                         " is not positive definite");
    }
  }
  data.labels = bundle.labels;
  return data;
}

inline pga::PgaDataset parse_matrix_bundle(const std::string& path) {
  return bundle_to_dataset(read_matrix_bundle_file(path));
}

inline MatrixBundle dataset_to_bundle(const pga::PgaDataset& data) {
  MatrixBundle bundle;
  bundle.n = data.n();
  for (const auto& s : data.samples) bundle.blocks.push_back(s.mat());
  bundle.labels = data.labels;
  return bundle;
}

}  // namespace io
}  // namespace mannystrom
