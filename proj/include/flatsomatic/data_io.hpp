#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "flatsomatic/data.hpp"
#include "flatsomatic/io_util.hpp"

namespace flatsomatic {

// ---------------------------------------------------------------------------
// Mutation TSV
//
// Tab-separated, UTF-8, one header line; required columns sample_id,
// chromosome, position; optional vaf; extra columns ignored; lines starting
// with '#' skipped. Line numbers in diagnostics are 1-based physical lines.

struct ParseStats {
  std::size_t records = 0;
  std::size_t duplicate_pairs = 0;  // (sample, key) pairs collapsed
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string t(s);
  for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return t;
}

inline bool skip_line(std::string_view line) {
  return line.empty() || line[0] == '#';
}

}  // namespace detail

inline SomaticProfileSet parse_mutation_file(std::istream& in, ParseStats* stats = nullptr) {
  std::string line;
  std::size_t line_no = 0;

  // header
  int col_sample = -1, col_chrom = -1, col_pos = -1, col_vaf = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line = line.substr(3);
    if (detail::skip_line(line)) continue;
    auto cols = detail::split_tabs(line);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      std::string name = detail::lower(cols[c]);
      if (name == "sample_id") col_sample = static_cast<int>(c);
      else if (name == "chromosome") col_chrom = static_cast<int>(c);
      else if (name == "position") col_pos = static_cast<int>(c);
      else if (name == "vaf") col_vaf = static_cast<int>(c);
    }
    if (col_sample < 0 || col_chrom < 0 || col_pos < 0)
      throw parse_error("mutation TSV header must contain sample_id, chromosome, position");
    break;
  }
  if (col_sample < 0) throw parse_error("mutation TSV has no header line");

  // data; keep first-appearance sample order
  std::vector<std::string> order;
  std::map<std::string, std::set<std::string>> key_sets;
  ParseStats local;
  const std::size_t min_cols =
      static_cast<std::size_t>(std::max({col_sample, col_chrom, col_pos})) + 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::skip_line(line)) continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() < min_cols)
      throw parse_error("line " + std::to_string(line_no) + ": expected at least " +
                        std::to_string(min_cols) + " columns, got " + std::to_string(cols.size()));
    MutationRecord rec;
    rec.sample_id = std::string(cols[col_sample]);
    if (rec.sample_id.empty())
      throw parse_error("line " + std::to_string(line_no) + ": empty sample_id");
    auto chrom = normalize_chromosome(cols[col_chrom]);
    if (!chrom)
      throw parse_error("line " + std::to_string(line_no) + ": unknown chromosome \"" +
                        std::string(cols[col_chrom]) + "\"");
    rec.chromosome = *chrom;
    {
      std::string_view sv = cols[col_pos];
      auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), rec.position);
      if (ec != std::errc{} || p != sv.data() + sv.size())
        throw parse_error("line " + std::to_string(line_no) + ": non-integer position \"" +
                          std::string(sv) + "\"");
    }
    if (col_vaf >= 0 && static_cast<std::size_t>(col_vaf) < cols.size() && !cols[col_vaf].empty()) {
      std::string v(cols[col_vaf]);
      char* end = nullptr;
      double vaf = std::strtod(v.c_str(), &end);
      if (end != v.c_str() + v.size() || !(vaf >= 0.0 && vaf <= 1.0))
        throw parse_error("line " + std::to_string(line_no) + ": vaf outside [0,1]: \"" + v + "\"");
      rec.vaf = vaf;
    }
    ++local.records;
    auto [it, inserted] = key_sets.try_emplace(rec.sample_id);
    if (inserted) order.push_back(rec.sample_id);
    if (!it->second.insert(make_key(rec)).second) ++local.duplicate_pairs;
  }

  SomaticProfileSet out;
  for (const auto& id : order) {
    auto& ks = key_sets[id];
    out.samples.push_back({id, std::vector<std::string>(ks.begin(), ks.end())});
  }
  if (stats) *stats = local;
  return out;
}

/// Serializes profiles back to the mutation TSV format (keys split into
/// chromosome/position). Re-parsing yields an identical key-set structure.
inline void write_mutation_tsv(std::ostream& os, const SomaticProfileSet& profiles) {
  os << "sample_id\tchromosome\tposition\n";
  for (const auto& s : profiles.samples) {
    for (const auto& key : s.keys) {
      auto [chrom, pos] = parse_key(key);
      os << s.id << '\t' << chrom << '\t' << pos << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Labels TSV (header: sample_id, label)

inline std::map<std::string, std::string> parse_labels_tsv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  int col_sample = -1, col_label = -1;
  std::map<std::string, std::string> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::skip_line(line)) continue;
    auto cols = detail::split_tabs(line);
    if (col_sample < 0) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        std::string name = detail::lower(cols[c]);
        if (name == "sample_id") col_sample = static_cast<int>(c);
        else if (name == "label") col_label = static_cast<int>(c);
      }
      if (col_sample < 0 || col_label < 0)
        throw parse_error("labels TSV header must contain sample_id, label");
      continue;
    }
    std::size_t need = static_cast<std::size_t>(std::max(col_sample, col_label)) + 1;
    if (cols.size() < need)
      throw parse_error("line " + std::to_string(line_no) + ": too few columns in labels TSV");
    labels[std::string(cols[col_sample])] = std::string(cols[col_label]);
  }
  if (col_sample < 0) throw parse_error("labels TSV has no header line");
  return labels;
}

inline void write_labels_tsv(std::ostream& os, const std::map<std::string, std::string>& labels) {
  os << "sample_id\tlabel\n";
  for (const auto& [id, label] : labels) os << id << '\t' << label << '\n';
}

// ---------------------------------------------------------------------------
// FSMX: occurrence-matrix binary format
//
// magic "FSMX", u16 version, u64 n, u64 m, u64 nnz, row_ptr (n+1 x u64),
// col_idx (nnz x u32), then m length-prefixed vocabulary strings and n
// length-prefixed sample ids; all little-endian.

constexpr std::uint16_t kFsmxVersion = 1;

inline void write_fsmx(std::ostream& os, const OccurrenceMatrix& m) {
  os.write("FSMX", 4);
  write_u16(os, kFsmxVersion);
  write_u64(os, m.n_samples());
  write_u64(os, m.n_features());
  write_u64(os, m.nnz());
  for (std::uint64_t v : m.row_ptr) write_u64(os, v);
  for (std::uint32_t v : m.col_idx) write_u32(os, v);
  for (const auto& s : m.vocabulary) write_lp_string(os, s);
  for (const auto& s : m.sample_ids) write_lp_string(os, s);
}

inline OccurrenceMatrix read_fsmx(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string_view(magic, 4) != "FSMX") throw parse_error("not an FSMX file");
  try {
    std::uint16_t version = read_u16(is);
    if (version != kFsmxVersion)
      throw parse_error("unsupported FSMX version " + std::to_string(version));
    OccurrenceMatrix m;
    std::uint64_t n = read_u64(is), cols = read_u64(is), nnz = read_u64(is);
    m.row_ptr.resize(n + 1);
    for (auto& v : m.row_ptr) v = read_u64(is);
    m.col_idx.resize(nnz);
    for (auto& v : m.col_idx) v = read_u32(is);
    m.vocabulary.resize(cols);
    for (auto& s : m.vocabulary) s = read_lp_string(is);
    m.sample_ids.resize(n);
    for (auto& s : m.sample_ids) s = read_lp_string(is);
    m.validate();
    return m;
  } catch (const io_error& e) {
    throw parse_error(std::string("truncated matrix file: ") + e.what());
  }
}

}  // namespace flatsomatic
