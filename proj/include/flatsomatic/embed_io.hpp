#pragma once

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "flatsomatic/data_io.hpp"
#include "flatsomatic/errors.hpp"
#include "flatsomatic/linalg.hpp"

namespace flatsomatic {

/// Shortest 17-significant-digit form; round-trips every finite double.
inline std::string format_double17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct EmbeddingsTable {
  std::vector<std::string> sample_ids;
  Matrix values;
};

inline void write_embeddings_tsv(std::ostream& os, std::span<const std::string> sample_ids,
                                 const Matrix& z) {
  if (sample_ids.size() != z.rows())
    throw shape_error("write_embeddings_tsv: id/row count mismatch");
  os << "sample_id";
  for (std::size_t j = 0; j < z.cols(); ++j) os << "\tz" << j;
  os << '\n';
  for (std::size_t i = 0; i < z.rows(); ++i) {
    os << sample_ids[i];
    for (std::size_t j = 0; j < z.cols(); ++j) os << '\t' << format_double17(z(i, j));
    os << '\n';
  }
}

inline EmbeddingsTable read_embeddings_tsv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw parse_error("embeddings file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = detail::split_tabs(line);
  if (header.empty() || header[0] != "sample_id")
    throw parse_error("embeddings header must start with sample_id");
  const std::size_t dim = header.size() - 1;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[j + 1] != "z" + std::to_string(j))
      throw parse_error("embeddings header column " + std::to_string(j + 1) +
                        ": expected z" + std::to_string(j));
  if (dim == 0) throw parse_error("embeddings file has no value columns");

  EmbeddingsTable table;
  std::vector<double> flat;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_tabs(line);
    if (fields.size() != dim + 1)
      throw parse_error("line " + std::to_string(lineno) + ": expected " +
                        std::to_string(dim + 1) + " columns, found " +
                        std::to_string(fields.size()));
    table.sample_ids.emplace_back(fields[0]);
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0.0;
      const auto sv = fields[j + 1];
      auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
      if (ec != std::errc() || ptr != sv.data() + sv.size())
        throw parse_error("line " + std::to_string(lineno) + ": bad number \"" +
                          std::string(sv) + "\"");
      flat.push_back(v);
    }
  }
  table.values = Matrix(table.sample_ids.size(), dim);
  std::copy(flat.begin(), flat.end(), table.values.values().begin());
  return table;
}

}  // namespace flatsomatic
