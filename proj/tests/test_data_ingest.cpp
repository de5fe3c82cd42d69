#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "flatsomatic/data.hpp"
#include "flatsomatic/data_io.hpp"
#include "flatsomatic/io_util.hpp"
#include "flatsomatic/synth.hpp"

using namespace flatsomatic;

namespace {

SomaticProfileSet parse_str(const std::string& text, ParseStats* stats = nullptr) {
  std::istringstream is(text);
  return parse_mutation_file(is, stats);
}

}  // namespace

TEST_CASE("chromosome normalization accepts 1-22, X, Y, MT in any casing") {
  REQUIRE(normalize_chromosome("chr17") == "17");
  REQUIRE(normalize_chromosome("17") == "17");
  REQUIRE(normalize_chromosome("x") == "X");
  REQUIRE(normalize_chromosome("CHRY") == "Y");
  REQUIRE(normalize_chromosome("mt") == "MT");
  REQUIRE_FALSE(normalize_chromosome("chr23").has_value());
  REQUIRE_FALSE(normalize_chromosome("0").has_value());
  REQUIRE_FALSE(normalize_chromosome("").has_value());
}

TEST_CASE("mutation TSV parser handles the basic happy path") {
  ParseStats stats;
  auto profiles = parse_str(
      "sample_id\tchromosome\tposition\n"
      "s1\t17\t7579472\n"
      "s1\tchr3\t178936091\n"
      "s2\tX\t66765160\n",
      &stats);
  REQUIRE(profiles.size() == 2);
  REQUIRE(profiles.samples[0].id == "s1");
  REQUIRE(profiles.samples[0].keys ==
          std::vector<std::string>{"17:7579472", "3:178936091"});
  REQUIRE(profiles.samples[1].keys == std::vector<std::string>{"X:66765160"});
  REQUIRE(stats.records == 3);
  REQUIRE(stats.duplicate_pairs == 0);
}

TEST_CASE("parser tolerates column reordering, extras, comments, CRLF, BOM") {
  auto profiles = parse_str(
      "\xEF\xBB\xBFgene\tPosition\tSAMPLE_ID\tChromosome\tvaf\r\n"
      "# a comment line\r\n"
      "TP53\t7579472\ts1\tchr17\t0.41\r\n"
      "\r\n"
      "KRAS\t25398284\ts2\t12\t\r\n");
  REQUIRE(profiles.size() == 2);
  REQUIRE(profiles.samples[0].keys == std::vector<std::string>{"17:7579472"});
  REQUIRE(profiles.samples[1].keys == std::vector<std::string>{"12:25398284"});
}

TEST_CASE("duplicate sample/mutation pairs collapse to one occurrence") {
  ParseStats stats;
  auto profiles = parse_str(
      "sample_id\tchromosome\tposition\n"
      "s1\t1\t100\n"
      "s1\tchr1\t100\n"
      "s1\t1\t100\n",
      &stats);
  REQUIRE(profiles.samples[0].keys == std::vector<std::string>{"1:100"});
  REQUIRE(stats.records == 3);
  REQUIRE(stats.duplicate_pairs == 2);
}

TEST_CASE("parser keeps first-appearance sample order and sorts keys per sample") {
  auto profiles = parse_str(
      "sample_id\tchromosome\tposition\n"
      "zeta\t2\t5\n"
      "alpha\t1\t9\n"
      "zeta\t1\t3\n");
  REQUIRE(profiles.samples[0].id == "zeta");
  REQUIRE(profiles.samples[1].id == "alpha");
  REQUIRE(std::is_sorted(profiles.samples[0].keys.begin(), profiles.samples[0].keys.end()));
}

TEST_CASE("parser diagnostics carry 1-based line numbers") {
  const std::string header = "sample_id\tchromosome\tposition\n";
  REQUIRE_THROWS_WITH(parse_str(header + "s1\t99\t5\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
  REQUIRE_THROWS_WITH(parse_str(header + "s1\t1\t5\ns2\t1\tfive\n"),
                      Catch::Matchers::ContainsSubstring("line 3"));
}

TEST_CASE("parser rejects malformed input") {
  REQUIRE_THROWS_AS(parse_str("sample_id\tchromosome\n s1\t1\n"), parse_error);
  REQUIRE_THROWS_AS(parse_str(""), parse_error);
  REQUIRE_THROWS_AS(parse_str("sample_id\tchromosome\tposition\n\t1\t5\n"), parse_error);
  REQUIRE_THROWS_AS(parse_str("sample_id\tchromosome\tposition\ns1\t1\n"), parse_error);
  REQUIRE_THROWS_AS(
      parse_str("sample_id\tchromosome\tposition\tvaf\ns1\t1\t5\t1.5\n"), parse_error);
  REQUIRE_THROWS_AS(
      parse_str("sample_id\tchromosome\tposition\tvaf\ns1\t1\t5\t-0.1\n"), parse_error);
  REQUIRE_THROWS_AS(parse_str("sample_id\tchromosome\tposition\ns1\t1\t-5\n"), parse_error);
}

TEST_CASE("mutation TSV round-trips through the writer") {
  auto original = parse_str(
      "sample_id\tchromosome\tposition\n"
      "s1\t17\t7579472\n"
      "s1\t3\t178936091\n"
      "s2\tX\t66765160\n");
  std::ostringstream os;
  write_mutation_tsv(os, original);
  auto reparsed = parse_str(os.str());
  REQUIRE(reparsed.size() == original.size());
  for (std::size_t i = 0; i < original.size(); ++i) {
    REQUIRE(reparsed.samples[i].id == original.samples[i].id);
    REQUIRE(reparsed.samples[i].keys == original.samples[i].keys);
  }
}

TEST_CASE("vocabulary filters by document frequency and counts removals") {
  auto profiles = parse_str(
      "sample_id\tchromosome\tposition\n"
      "s1\t1\t10\n"
      "s2\t1\t10\n"
      "s3\t1\t10\n"
      "s1\t2\t20\n"
      "s2\t2\t20\n"
      "s1\t3\t30\n");
  Vocabulary v2 = build_vocabulary(profiles, 2);
  REQUIRE(v2.keys == std::vector<std::string>{"1:10", "2:20"});
  REQUIRE(v2.doc_freq == std::vector<std::uint64_t>{3, 2});
  REQUIRE(v2.removed == 1);

  Vocabulary v1 = build_vocabulary(profiles, 1);
  REQUIRE(v1.keys.size() == 3);
  REQUIRE(v1.removed == 0);

  REQUIRE_THROWS_AS(build_vocabulary(profiles, 10), empty_vocabulary_error);
  REQUIRE_THROWS_AS(build_vocabulary(SomaticProfileSet{}, 1), argument_error);
  REQUIRE_THROWS_AS(build_vocabulary(profiles, 0), argument_error);
}

TEST_CASE("occurrence matrix has CSR structure with sorted rows") {
  auto profiles = parse_str(
      "sample_id\tchromosome\tposition\n"
      "s1\t1\t10\n"
      "s1\t2\t20\n"
      "s2\t2\t20\n"
      "s3\t1\t10\n"
      "s3\t3\t30\n");
  Vocabulary vocab = build_vocabulary(profiles, 1);
  OccurrenceMatrix m = build_matrix(profiles, vocab);
  REQUIRE(m.n_samples() == 3);
  REQUIRE(m.n_features() == 3);
  REQUIRE(m.nnz() == 5);
  REQUIRE(m.row_ptr == std::vector<std::uint64_t>{0, 2, 3, 5});
  m.validate();

  Matrix dense = m.to_dense();
  Matrix expected = Matrix::from_rows({{1, 1, 0}, {0, 1, 0}, {1, 0, 1}});
  REQUIRE(dense == expected);

  std::vector<std::size_t> rows{2, 0};
  Matrix gathered = m.gather_dense(rows);
  REQUIRE(gathered == Matrix::from_rows({{1, 0, 1}, {1, 1, 0}}));

  REQUIRE(m.column_popcounts() == std::vector<std::uint64_t>{2, 2, 1});
}

TEST_CASE("matrix construction drops mutations filtered from the vocabulary") {
  auto profiles = parse_str(
      "sample_id\tchromosome\tposition\n"
      "s1\t1\t10\n"
      "s1\t9\t99\n"
      "s2\t1\t10\n");
  Vocabulary vocab = build_vocabulary(profiles, 2);
  OccurrenceMatrix m = build_matrix(profiles, vocab);
  REQUIRE(m.n_features() == 1);
  REQUIRE(m.to_dense() == Matrix::from_rows({{1}, {1}}));
}

TEST_CASE("FSMX serialization round-trips and is byte-stable") {
  auto profiles = parse_str(
      "sample_id\tchromosome\tposition\n"
      "s1\t1\t10\n"
      "s1\t2\t20\n"
      "s2\t2\t20\n");
  OccurrenceMatrix m = build_matrix(profiles, build_vocabulary(profiles, 1));

  std::ostringstream os1(std::ios::binary);
  write_fsmx(os1, m);
  std::istringstream is(os1.str(), std::ios::binary);
  OccurrenceMatrix back = read_fsmx(is);
  REQUIRE(back.row_ptr == m.row_ptr);
  REQUIRE(back.col_idx == m.col_idx);
  REQUIRE(back.vocabulary == m.vocabulary);
  REQUIRE(back.sample_ids == m.sample_ids);

  std::ostringstream os2(std::ios::binary);
  write_fsmx(os2, back);
  REQUIRE(os1.str() == os2.str());
}

TEST_CASE("FSMX reader rejects corrupt input") {
  std::istringstream bad_magic("NOTX", std::ios::binary);
  REQUIRE_THROWS_AS(read_fsmx(bad_magic), parse_error);

  auto profiles = parse_str("sample_id\tchromosome\tposition\ns1\t1\t10\n");
  OccurrenceMatrix m = build_matrix(profiles, build_vocabulary(profiles, 1));
  std::ostringstream os(std::ios::binary);
  write_fsmx(os, m);
  std::string bytes = os.str();

  std::string wrong_version = bytes;
  wrong_version[4] = 77;
  std::istringstream isv(wrong_version, std::ios::binary);
  REQUIRE_THROWS_AS(read_fsmx(isv), parse_error);

  std::istringstream trunc(bytes.substr(0, bytes.size() / 2), std::ios::binary);
  REQUIRE_THROWS_AS(read_fsmx(trunc), parse_error);
}

TEST_CASE("labels TSV parses and round-trips") {
  std::istringstream is(
      "# cohort labels\n"
      "extra\tsample_id\tlabel\r\n"
      "x\ts2\tlum\n"
      "y\ts1\tbasal\n");
  auto labels = parse_labels_tsv(is);
  REQUIRE(labels.size() == 2);
  REQUIRE(labels.at("s1") == "basal");
  REQUIRE(labels.at("s2") == "lum");

  std::ostringstream os;
  write_labels_tsv(os, labels);
  std::istringstream is2(os.str());
  REQUIRE(parse_labels_tsv(is2) == labels);

  std::istringstream bad("sample_id\tnotlabel\ns1\tx\n");
  REQUIRE_THROWS_AS(parse_labels_tsv(bad), parse_error);
  std::istringstream empty("");
  REQUIRE_THROWS_AS(parse_labels_tsv(empty), parse_error);
}

TEST_CASE("k-fold split partitions indices with balanced sizes") {
  KFoldPlan plan = kfold_split(11, 3, 42);
  REQUIRE(plan.folds.size() == 3);
  REQUIRE(plan.folds[0].size() == 4);
  REQUIRE(plan.folds[1].size() == 4);
  REQUIRE(plan.folds[2].size() == 3);

  std::set<std::size_t> seen;
  for (const auto& fold : plan.folds)
    for (std::size_t i : fold) REQUIRE(seen.insert(i).second);
  REQUIRE(seen.size() == 11);
  REQUIRE(*seen.rbegin() == 10);
}

TEST_CASE("k-fold split is seed-deterministic") {
  KFoldPlan a = kfold_split(20, 4, 7);
  KFoldPlan b = kfold_split(20, 4, 7);
  KFoldPlan c = kfold_split(20, 4, 8);
  REQUIRE(a.folds == b.folds);
  REQUIRE(a.folds != c.folds);
  REQUIRE_THROWS_AS(kfold_split(5, 1, 0), argument_error);
  REQUIRE_THROWS_AS(kfold_split(5, 6, 0), argument_error);
}

TEST_CASE("fold complement is the ascending rest of the indices") {
  KFoldPlan plan = kfold_split(10, 5, 3);
  for (std::size_t f = 0; f < 5; ++f) {
    auto rest = fold_complement(plan, f, 10);
    REQUIRE(rest.size() == 10 - plan.folds[f].size());
    REQUIRE(std::is_sorted(rest.begin(), rest.end()));
    std::set<std::size_t> all(rest.begin(), rest.end());
    for (std::size_t i : plan.folds[f]) REQUIRE(all.insert(i).second);
    REQUIRE(all.size() == 10);
  }
}

TEST_CASE("synthetic generator plants recoverable cluster structure") {
  SynthParams p;
  p.n_samples = 60;
  p.n_features = 200;
  p.n_clusters = 4;
  p.signature_size = 50;
  p.p_in = 0.9;
  p.p_out = 0.01;
  p.seed = 5;
  SomaticProfileSet set = synth_generate(p);
  REQUIRE(set.size() == 60);
  REQUIRE(set.labels.size() == 60);
  REQUIRE(set.samples[0].id == "S00");

  std::set<std::string> label_values;
  for (const auto& [id, label] : set.labels) {
    REQUIRE(id.rfind("S", 0) == 0);
    REQUIRE(label.rfind("cluster_", 0) == 0);
    label_values.insert(label);
  }
  REQUIRE(label_values.size() == 4);

  // Samples of one cluster concentrate on that cluster's feature block.
  for (const auto& s : set.samples) {
    std::size_t c = std::stoul(set.labels.at(s.id).substr(8));
    std::size_t in_block = 0;
    for (const auto& key : s.keys) {
      auto [chrom, pos] = parse_key(key);
      if (pos >= c * 50 && pos < (c + 1) * 50) ++in_block;
    }
    REQUIRE(in_block > s.keys.size() / 2);
  }
}

TEST_CASE("synthetic generator is deterministic in the seed") {
  SynthParams p;
  p.n_samples = 20;
  p.n_features = 100;
  p.n_clusters = 2;
  p.signature_size = 30;
  p.seed = 9;
  SomaticProfileSet a = synth_generate(p);
  SomaticProfileSet b = synth_generate(p);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.samples[i].id == b.samples[i].id);
    REQUIRE(a.samples[i].keys == b.samples[i].keys);
  }
  p.seed = 10;
  SomaticProfileSet c = synth_generate(p);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    any_diff = any_diff || a.samples[i].keys != c.samples[i].keys;
  REQUIRE(any_diff);
}

TEST_CASE("synthetic generator validates parameters") {
  SynthParams p;
  p.n_samples = 10;
  p.n_features = 100;
  p.n_clusters = 2;
  p.signature_size = 30;

  SynthParams bad = p;
  bad.p_in = 1.5;
  REQUIRE_THROWS_AS(synth_generate(bad), argument_error);
  bad = p;
  bad.p_out = 0.5;  // above p_in = 0.3
  REQUIRE_THROWS_AS(synth_generate(bad), argument_error);
  bad = p;
  bad.signature_size = 51;
  REQUIRE_THROWS_AS(synth_generate(bad), argument_error);
  bad = p;
  bad.n_clusters = 0;
  REQUIRE_THROWS_AS(synth_generate(bad), argument_error);

  // equal rates are allowed: the null model has no cluster signal
  SynthParams null_model = p;
  null_model.p_out = null_model.p_in;
  REQUIRE_NOTHROW(synth_generate(null_model));

  // generated keys survive the TSV round trip
  SomaticProfileSet set = synth_generate(p);
  std::ostringstream os;
  write_mutation_tsv(os, set);
  std::istringstream is(os.str());
  auto back = parse_mutation_file(is);
  bool found_nonempty = false;
  for (std::size_t i = 0, j = 0; i < set.size(); ++i) {
    if (set.samples[i].keys.empty()) continue;  // writer drops empty samples
    REQUIRE(back.samples[j].id == set.samples[i].id);
    REQUIRE(back.samples[j].keys == set.samples[i].keys);
    found_nonempty = true;
    ++j;
  }
  REQUIRE(found_nonempty);
}

TEST_CASE("little-endian primitives round-trip") {
  std::ostringstream os(std::ios::binary);
  write_u16(os, 0xBEEF);
  write_u32(os, 0xDEADBEEF);
  write_u64(os, 0x0123456789ABCDEFULL);
  write_f64(os, -0.1);
  write_lp_string(os, "hello\tworld");
  std::string bytes = os.str();
  REQUIRE(static_cast<unsigned char>(bytes[0]) == 0xEF);  // low byte first
  REQUIRE(static_cast<unsigned char>(bytes[1]) == 0xBE);

  std::istringstream is(bytes, std::ios::binary);
  REQUIRE(read_u16(is) == 0xBEEF);
  REQUIRE(read_u32(is) == 0xDEADBEEF);
  REQUIRE(read_u64(is) == 0x0123456789ABCDEFULL);
  REQUIRE(read_f64(is) == -0.1);
  REQUIRE(read_lp_string(is) == "hello\tworld");

  std::istringstream empty("", std::ios::binary);
  REQUIRE_THROWS_AS(read_u32(empty), io_error);
}

TEST_CASE("fnv1a64 matches reference values") {
  REQUIRE(fnv1a64(std::span<const char>{}) == 0xCBF29CE484222325ULL);
  const char a[] = {'a'};
  REQUIRE(fnv1a64(std::span<const char>(a, 1)) == 0xAF63DC4C8601EC8CULL);
  const char foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
  REQUIRE(fnv1a64(std::span<const char>(foobar, 6)) == 0x85944171F73967E8ULL);
  REQUIRE(fnv1a64_hex(std::span<const char>(a, 1)) == "af63dc4c8601ec8c");
}

TEST_CASE("atomic_write replaces the target and cleans up on failure") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "flatsomatic_test_io";
  fs::create_directories(dir);
  fs::path target = dir / "out.txt";

  atomic_write(target, [](std::ostream& os) { os << "first"; });
  REQUIRE(read_file_bytes(target) == "first");
  atomic_write(target, [](std::ostream& os) { os << "second"; });
  REQUIRE(read_file_bytes(target) == "second");

  REQUIRE_THROWS_AS(atomic_write(target,
                                 [](std::ostream&) { throw io_error("boom"); }),
                    io_error);
  REQUIRE(read_file_bytes(target) == "second");
  REQUIRE_FALSE(fs::exists(target.string() + ".tmp"));

  REQUIRE(digest_file(target) == fnv1a64_hex(std::span<const char>("second", 6)));
  fs::remove_all(dir);
}
