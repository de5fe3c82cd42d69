#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "flatsomatic/data_io.hpp"
#include "flatsomatic/embed_io.hpp"
#include "flatsomatic/io_util.hpp"

namespace fs = std::filesystem;
using namespace flatsomatic;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string cli_binary() {
  const char* bin = std::getenv("FLATSOMATIC_BIN");
  REQUIRE(bin != nullptr);
  return bin;
}

/// Runs the CLI inside dir with the given argument string, capturing both
/// streams; relative paths in args resolve against dir.
CliResult run_cli(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / ".stdout", err = dir / ".stderr";
  const std::string cmd = "cd \"" + dir.string() + "\" && \"" + cli_binary() + "\" " + args +
                          " > \"" + out.string() + "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file_bytes(out);
  r.err = read_file_bytes(err);
  return r;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

/// Temp workspace seeded with a small synthetic dataset and its matrix.
struct Workspace {
  fs::path dir;

  explicit Workspace(const std::string& name) {
    dir = fs::temp_directory_path() / ("flatsomatic_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  fs::path operator/(const std::string& leaf) const { return dir / leaf; }

  CliResult run(const std::string& args) const { return run_cli(dir, args); }

  void seed_dataset(std::size_t clusters = 3) {
    CliResult synth = run("synth --out mutations.tsv --labels-out labels.tsv --samples 60"
                          " --features 50 --clusters " +
                          std::to_string(clusters) +
                          " --signature-size 12 --p-in 0.9 --p-out 0.05 --seed 7");
    REQUIRE(synth.exit_code == 0);
    CliResult build = run("build-matrix --input mutations.tsv --out data.fsmx --min-freq 1");
    REQUIRE(build.exit_code == 0);
  }

  void train_small(const std::string& extra = "") {
    CliResult train = run("train --matrix data.fsmx --out model.fsom --latent 4 --epochs 3"
                          " --enc1 16 --enc2 8 --batch-size 16 --warmup-epochs 2"
                          " --beta-max 0.1 --seed 5 " +
                          extra);
    REQUIRE(train.exit_code == 0);
  }
};

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  REQUIRE(is.good());
  return nlohmann::json::parse(is);
}

}  // namespace

TEST_CASE("cli pipeline runs end to end") {
  Workspace ws("pipeline");

  CliResult synth = ws.run("synth --out mutations.tsv --labels-out labels.tsv --samples 60"
                           " --features 50 --clusters 3 --signature-size 12 --p-in 0.9"
                           " --p-out 0.05 --seed 7");
  REQUIRE(synth.exit_code == 0);
  REQUIRE(contains(synth.out, "samples\t60"));
  REQUIRE(contains(synth.out, "clusters\t3"));
  REQUIRE(fs::exists(ws / "mutations.tsv.manifest.json"));

  CliResult build = ws.run("build-matrix --input mutations.tsv --out data.fsmx --min-freq 1");
  REQUIRE(build.exit_code == 0);
  REQUIRE(contains(build.out, "samples\t60"));
  REQUIRE(contains(build.out, "features\t"));
  REQUIRE(contains(build.out, "nnz\t"));
  REQUIRE(contains(build.out, "removed\t"));
  REQUIRE(fs::exists(ws / "data.fsmx.manifest.json"));

  CliResult train = ws.run("train --matrix data.fsmx --out model.fsom --history history.jsonl"
                           " --latent 4 --epochs 3 --enc1 16 --enc2 8 --batch-size 16"
                           " --warmup-epochs 2 --beta-max 0.1 --seed 5 --holdout-fraction 0.2");
  REQUIRE(train.exit_code == 0);
  REQUIRE(contains(train.out, "val_f1\t"));
  REQUIRE(contains(train.out, "val_cosine\t"));
  REQUIRE(fs::exists(ws / "model.fsom"));
  REQUIRE(fs::exists(ws / "history.jsonl"));

  nlohmann::json manifest = read_json_file(ws / "model.fsom.manifest.json");
  REQUIRE(manifest["command"] == "train");
  REQUIRE(manifest["config"]["latent_dim"] == 4);
  REQUIRE(manifest["config"]["holdout_fraction"] == 0.2);
  REQUIRE(manifest["inputs"][0]["path"] == "data.fsmx");

  CliResult embed = ws.run("embed --matrix data.fsmx --model model.fsom --out emb.tsv");
  REQUIRE(embed.exit_code == 0);
  {
    std::ifstream is(ws / "emb.tsv");
    std::string header;
    std::getline(is, header);
    REQUIRE(header == "sample_id\tz0\tz1\tz2\tz3");
  }
  {
    std::ifstream is(ws / "emb.tsv");
    EmbeddingsTable table = read_embeddings_tsv(is);
    REQUIRE(table.values.rows() == 60);
    REQUIRE(table.values.cols() == 4);
  }

  CliResult recon = ws.run("eval-recon --matrix data.fsmx --model model.fsom --out recon.json");
  REQUIRE(recon.exit_code == 0);
  REQUIRE(contains(recon.out, "f1\t"));
  REQUIRE(contains(recon.out, "cosine\t"));
  nlohmann::json recon_json = read_json_file(ws / "recon.json");
  REQUIRE(recon_json["f1"].get<double>() >= 0.0);
  REQUIRE(recon_json["f1"].get<double>() <= 1.0);
  REQUIRE(recon_json["dim"] == 4);

  CliResult proj = ws.run("pca --matrix data.fsmx --out pca.tsv --dims 4");
  REQUIRE(proj.exit_code == 0);
  REQUIRE(contains(proj.out, "explained_ratio_0\t"));
  REQUIRE(contains(proj.out, "explained_ratio_3\t"));

  CliResult cluster = ws.run("cluster --embeddings emb.tsv --labels labels.tsv --out nmi.json"
                             " --k 3 --restarts 4 --seed 3");
  REQUIRE(cluster.exit_code == 0);
  REQUIRE(contains(cluster.out, "nmi\t"));
  nlohmann::json nmi_json = read_json_file(ws / "nmi.json");
  REQUIRE(nmi_json["nmi"].get<double>() >= 0.0);
  REQUIRE(nmi_json["nmi"].get<double>() <= 1.0);
  REQUIRE(nmi_json["k"] == 3);

  CliResult compare = ws.run("cluster --embeddings emb.tsv --compare pca.tsv --labels labels.tsv"
                             " --out compare.json --k 3 --restarts 4 --seed 3");
  REQUIRE(compare.exit_code == 0);
  REQUIRE(contains(compare.out, "nmi_vae\t"));
  REQUIRE(contains(compare.out, "nmi_pca\t"));
  nlohmann::json cmp_json = read_json_file(ws / "compare.json");
  REQUIRE(cmp_json.contains("nmi_vae"));
  REQUIRE(cmp_json.contains("nmi_pca"));

  // binary labels from the planted clusters: parity of the cluster index
  {
    std::ifstream is(ws / "labels.tsv");
    auto labels = parse_labels_tsv(is);
    std::map<std::string, std::string> binary;
    for (const auto& [id, label] : labels) {
      const int c = std::stoi(label.substr(label.rfind('_') + 1));
      binary[id] = c % 2 == 0 ? "0" : "1";
    }
    atomic_write(ws / "binary.tsv", [&](std::ostream& os) { write_labels_tsv(os, binary); });
  }
  CliResult clf = ws.run("classify --features emb.tsv --labels binary.tsv --out clf.json"
                         " --folds 3 --iters 80");
  REQUIRE(clf.exit_code == 0);
  REQUIRE(contains(clf.out, "f1\t"));
  REQUIRE(contains(clf.out, "precision\t"));
  REQUIRE(contains(clf.out, "recall\t"));
  nlohmann::json clf_json = read_json_file(ws / "clf.json");
  REQUIRE(clf_json["per_fold"].size() == 3);
}

TEST_CASE("cli rerun reproduces outputs byte for byte") {
  Workspace ws("rerun");
  ws.seed_dataset();

  CliResult second = ws.run("build-matrix --input mutations.tsv --out data2.fsmx --min-freq 1");
  REQUIRE(second.exit_code == 0);
  REQUIRE(read_file_bytes(ws / "data.fsmx") == read_file_bytes(ws / "data2.fsmx"));

  ws.train_small("--history h1.jsonl");
  CliResult retrain = ws.run("train --matrix data.fsmx --out model2.fsom --history h2.jsonl"
                             " --latent 4 --epochs 3 --enc1 16 --enc2 8 --batch-size 16"
                             " --warmup-epochs 2 --beta-max 0.1 --seed 5");
  REQUIRE(retrain.exit_code == 0);
  REQUIRE(read_file_bytes(ws / "model.fsom") == read_file_bytes(ws / "model2.fsom"));
  REQUIRE(read_file_bytes(ws / "h1.jsonl") == read_file_bytes(ws / "h2.jsonl"));

  CliResult e1 = ws.run("embed --matrix data.fsmx --model model.fsom --out e1.tsv");
  CliResult e2 = ws.run("embed --matrix data.fsmx --model model2.fsom --out e2.tsv");
  REQUIRE(e1.exit_code == 0);
  REQUIRE(e2.exit_code == 0);
  REQUIRE(read_file_bytes(ws / "e1.tsv") == read_file_bytes(ws / "e2.tsv"));

  CliResult other_seed = ws.run("train --matrix data.fsmx --out model3.fsom --latent 4 --epochs 3"
                                " --enc1 16 --enc2 8 --batch-size 16 --warmup-epochs 2"
                                " --beta-max 0.1 --seed 6");
  REQUIRE(other_seed.exit_code == 0);
  REQUIRE(read_file_bytes(ws / "model.fsom") != read_file_bytes(ws / "model3.fsom"));
}

TEST_CASE("cli reports missing and corrupt inputs with exit code 2") {
  Workspace ws("io_errors");

  CliResult missing = ws.run("build-matrix --input nope.tsv --out x.fsmx");
  REQUIRE(missing.exit_code == 2);
  REQUIRE(contains(missing.err, "cannot open"));
  REQUIRE(contains(missing.err, "nope.tsv"));

  atomic_write(ws / "garbage.fsmx", [](std::ostream& os) { os << "not a matrix"; });
  CliResult corrupt = ws.run("train --matrix garbage.fsmx --out m.fsom");
  REQUIRE(corrupt.exit_code == 2);
  REQUIRE(contains(corrupt.err, "garbage.fsmx"));

  ws.seed_dataset();
  ws.train_small();
  CliResult labels = ws.run("classify --features data.fsmx --labels labels.tsv --out c.json");
  REQUIRE(labels.exit_code == 2);  // an FSMX file is not an embeddings TSV
}

TEST_CASE("cli empty vocabulary exits with code 3") {
  Workspace ws("empty_vocab");
  ws.seed_dataset();
  CliResult r = ws.run("build-matrix --input mutations.tsv --out e.fsmx --min-freq 10000");
  REQUIRE(r.exit_code == 3);
  REQUIRE(contains(r.err, "vocabulary"));
}

TEST_CASE("cli configuration problems exit with code 4") {
  Workspace ws("config_errors");
  ws.seed_dataset();

  CliResult batch = ws.run("train --matrix data.fsmx --out m.fsom --batch-size 1");
  REQUIRE(batch.exit_code == 4);
  REQUIRE(contains(batch.err, "batch_size must be >= 2"));

  CliResult holdout = ws.run("train --matrix data.fsmx --out m.fsom --holdout-fraction 1.5");
  REQUIRE(holdout.exit_code == 4);
  REQUIRE(contains(holdout.err, "holdout_fraction"));

  CliResult loss = ws.run("train --matrix data.fsmx --out m.fsom --loss hinge");
  REQUIRE(loss.exit_code == 4);
  REQUIRE(contains(loss.err, "unknown loss kind"));

  atomic_write(ws / "bad.json", [](std::ostream& os) { os << "{\"min_freq\": \"lots\"}"; });
  CliResult bad_cfg = ws.run("build-matrix --input mutations.tsv --out m.fsmx --config bad.json");
  REQUIRE(bad_cfg.exit_code == 4);
  REQUIRE(contains(bad_cfg.err, "bad config value"));
}

TEST_CASE("cli shape and argument problems exit with code 5") {
  Workspace ws("shape_errors");
  ws.seed_dataset();
  ws.train_small();
  CliResult embed = ws.run("embed --matrix data.fsmx --model model.fsom --out emb.tsv");
  REQUIRE(embed.exit_code == 0);

  CliResult too_many = ws.run("cluster --embeddings emb.tsv --labels labels.tsv --out n.json"
                              " --k 500");
  REQUIRE(too_many.exit_code == 5);

  CliResult both = ws.run("classify --features emb.tsv --matrix data.fsmx --labels labels.tsv"
                          " --out c.json");
  REQUIRE(both.exit_code == 5);
  REQUIRE(contains(both.err, "exactly one"));

  // a model trained against a different vocabulary no longer matches
  CliResult rebuild = ws.run("build-matrix --input mutations.tsv --out small.fsmx --min-freq 10");
  REQUIRE(rebuild.exit_code == 0);
  CliResult mismatch = ws.run("embed --matrix small.fsmx --model model.fsom --out bad.tsv");
  REQUIRE(mismatch.exit_code == 5);
  REQUIRE(contains(mismatch.err, "the model expects"));

  atomic_write(ws / "short.tsv", [](std::ostream& os) {
    os << "sample_id\tlabel\n";
    os << "only_one\tcluster_0\n";
  });
  CliResult unlabeled = ws.run("cluster --embeddings emb.tsv --labels short.tsv --out n.json --k 3");
  REQUIRE(unlabeled.exit_code == 5);
  REQUIRE(contains(unlabeled.err, "no label for sample"));
}

TEST_CASE("cli rejects non-binary labels for classification") {
  Workspace ws("binary_labels");
  ws.seed_dataset();
  ws.train_small();
  CliResult embed = ws.run("embed --matrix data.fsmx --model model.fsom --out emb.tsv");
  REQUIRE(embed.exit_code == 0);

  CliResult r = ws.run("classify --features emb.tsv --labels labels.tsv --out c.json");
  REQUIRE(r.exit_code == 2);
  REQUIRE(contains(r.err, "must be 0 or 1"));
}

TEST_CASE("cli flags override config file values") {
  Workspace ws("precedence");
  ws.seed_dataset();

  atomic_write(ws / "pipeline.json", [](std::ostream& os) { os << "{\"min_freq\": 10000}"; });
  CliResult from_config = ws.run("build-matrix --input mutations.tsv --out a.fsmx"
                                 " --config pipeline.json");
  REQUIRE(from_config.exit_code == 3);
  CliResult overridden = ws.run("build-matrix --input mutations.tsv --out b.fsmx"
                                " --config pipeline.json --min-freq 1");
  REQUIRE(overridden.exit_code == 0);

  atomic_write(ws / "vae.json", [](std::ostream& os) {
    os << "{\"latent_dim\": 3, \"encoder_units\": [16, 8], \"epochs\": 2,"
          " \"batch_size\": 16, \"beta_max\": 0.1, \"warmup_epochs\": 1}";
  });
  CliResult train = ws.run("train --matrix data.fsmx --out m.fsom --config vae.json --latent 5");
  REQUIRE(train.exit_code == 0);
  nlohmann::json manifest = read_json_file(ws / "m.fsom.manifest.json");
  REQUIRE(manifest["config"]["latent_dim"] == 5);
  REQUIRE(manifest["config"]["epochs"] == 2);
}

TEST_CASE("cli help and usage behave like a standard tool") {
  Workspace ws("usage");
  CliResult help = ws.run("--help");
  REQUIRE(help.exit_code == 0);
  REQUIRE(contains(help.out, "synth"));
  REQUIRE(contains(help.out, "build-matrix"));
  REQUIRE(contains(help.out, "classify"));

  CliResult bare = ws.run("");
  REQUIRE(bare.exit_code != 0);

  CliResult unknown = ws.run("frobnicate");
  REQUIRE(unknown.exit_code != 0);

  CliResult incomplete = ws.run("build-matrix --input x.tsv");
  REQUIRE(incomplete.exit_code != 0);
  REQUIRE(contains(incomplete.err, "--out"));
}
