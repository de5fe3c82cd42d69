// flatsomatic command-line front end: deterministic batch pipelines over the
// library operations, one subcommand per core op, a provenance manifest next
// to every output.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flatsomatic/flatsomatic.hpp"

namespace fs = std::filesystem;
using namespace flatsomatic;

namespace {

constexpr std::uint64_t kHoldoutStream = 0x484F4C44;  // "HOLD"

std::ifstream open_input(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream is(path, mode);
  if (!is) throw io_error("cannot open " + path.string());
  return is;
}

nlohmann::ordered_json load_json(const fs::path& path) {
  auto is = open_input(path);
  try {
    return nlohmann::ordered_json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

OccurrenceMatrix load_matrix(const fs::path& path) {
  auto is = open_input(path, std::ios::binary);
  try {
    return read_fsmx(is);
  } catch (const parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

VaeModel load_model(const fs::path& path) {
  auto is = open_input(path, std::ios::binary);
  try {
    return read_fsom(is);
  } catch (const parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

EmbeddingsTable load_embeddings(const fs::path& path) {
  auto is = open_input(path);
  try {
    return read_embeddings_tsv(is);
  } catch (const parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

std::map<std::string, std::string> load_labels(const fs::path& path) {
  auto is = open_input(path);
  try {
    return parse_labels_tsv(is);
  } catch (const parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
}

std::vector<std::string> align_labels(std::span<const std::string> sample_ids,
                                      const std::map<std::string, std::string>& labels) {
  std::vector<std::string> out;
  out.reserve(sample_ids.size());
  for (const auto& id : sample_ids) {
    auto it = labels.find(id);
    if (it == labels.end()) throw argument_error("no label for sample \"" + id + "\"");
    out.push_back(it->second);
  }
  return out;
}

void print_metric(const char* name, double v) {
  std::printf("%s\t%.6f\n", name, v);
}

// Settings shared through the optional --config JSON; flags always win.
struct PipelineDefaults {
  std::size_t min_freq = 5;
  std::size_t folds = 5;
  std::size_t kmeans_k = 32;
  std::size_t kmeans_restarts = 10;
  std::size_t kmeans_max_iters = 100;
  std::uint64_t seed = 42;
};

PipelineDefaults pipeline_from_json(const nlohmann::ordered_json& j) {
  PipelineDefaults p;
  try {
    if (j.contains("min_freq")) p.min_freq = j.at("min_freq").get<std::size_t>();
    if (j.contains("folds")) p.folds = j.at("folds").get<std::size_t>();
    if (j.contains("kmeans_k")) p.kmeans_k = j.at("kmeans_k").get<std::size_t>();
    if (j.contains("kmeans_restarts")) p.kmeans_restarts = j.at("kmeans_restarts").get<std::size_t>();
    if (j.contains("kmeans_max_iters")) p.kmeans_max_iters = j.at("kmeans_max_iters").get<std::size_t>();
    if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad config value: ") + e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  fs::path out, labels_out;
  SynthParams params;
};

void run_synth(const SynthArgs& a) {
  RunManifest manifest;
  manifest.command = "synth";
  manifest.started_at = utc_timestamp_now();
  SomaticProfileSet profiles = synth_generate(a.params);
  atomic_write(a.out, [&](std::ostream& os) { write_mutation_tsv(os, profiles); });
  atomic_write(a.labels_out, [&](std::ostream& os) { write_labels_tsv(os, profiles.labels); });
  manifest.config = {{"n_samples", a.params.n_samples},
                     {"n_features", a.params.n_features},
                     {"n_clusters", a.params.n_clusters},
                     {"p_in", a.params.p_in},
                     {"p_out", a.params.p_out},
                     {"signature_size", a.params.signature_size},
                     {"seed", a.params.seed}};
  manifest.outputs = {a.out.string(), a.labels_out.string()};
  manifest.finalize(a.out);
  std::printf("samples\t%zu\nfeatures\t%zu\nclusters\t%zu\n", a.params.n_samples,
              a.params.n_features, a.params.n_clusters);
}

// ---------------------------------------------------------------------------
// build-matrix

struct BuildMatrixArgs {
  fs::path input, out, config_path;
  std::optional<std::size_t> min_freq;
};

void run_build_matrix(const BuildMatrixArgs& a) {
  PipelineDefaults defaults;
  if (!a.config_path.empty()) defaults = pipeline_from_json(load_json(a.config_path));
  const std::size_t min_freq = a.min_freq.value_or(defaults.min_freq);

  RunManifest manifest;
  manifest.command = "build-matrix";
  manifest.started_at = utc_timestamp_now();
  manifest.add_input(a.input);
  if (!a.config_path.empty()) manifest.add_input(a.config_path);

  auto is = open_input(a.input);
  SomaticProfileSet profiles;
  try {
    profiles = parse_mutation_file(is);
  } catch (const parse_error& e) {
    throw parse_error(a.input.string() + ": " + e.what());
  }
  Vocabulary vocab = build_vocabulary(profiles, min_freq);
  OccurrenceMatrix matrix = build_matrix(profiles, vocab);
  atomic_write(a.out, [&](std::ostream& os) { write_fsmx(os, matrix); });

  manifest.config = {{"min_freq", min_freq}};
  manifest.outputs = {a.out.string()};
  manifest.finalize(a.out);
  std::printf("samples\t%zu\nfeatures\t%zu\nnnz\t%zu\nremoved\t%zu\n", matrix.n_samples(),
              matrix.n_features(), static_cast<std::size_t>(matrix.nnz()), vocab.removed);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  fs::path matrix, out, history, config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> latent, epochs, batch_size, warmup;
  std::optional<std::size_t> enc1, enc2, dec1, dec2;
  std::optional<double> beta_max, dropout, l1, lr, holdout_fraction;
  std::optional<std::string> loss;
};

void run_train(const TrainArgs& a) {
  VaeConfig cfg;
  double holdout = 0.0;
  if (!a.config_path.empty()) {
    auto j = load_json(a.config_path);
    cfg = config_from_json(j);
    if (j.contains("holdout_fraction")) holdout = j.at("holdout_fraction").get<double>();
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.latent) cfg.latent_dim = *a.latent;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.warmup) cfg.warmup_epochs = *a.warmup;
  if (a.enc1 || a.enc2) {
    if (a.enc1) cfg.encoder_units[0] = *a.enc1;
    if (a.enc2) cfg.encoder_units[1] = *a.enc2;
    if (!a.dec1 && !a.dec2) cfg.decoder_units = {cfg.encoder_units[1], cfg.encoder_units[0]};
  }
  if (a.dec1) cfg.decoder_units[0] = *a.dec1;
  if (a.dec2) cfg.decoder_units[1] = *a.dec2;
  if (a.beta_max) cfg.beta_max = *a.beta_max;
  if (a.dropout) cfg.dropout_rate = *a.dropout;
  if (a.l1) cfg.l1_coeff = *a.l1;
  if (a.lr) cfg.optimizer.lr = *a.lr;
  if (a.loss) cfg.loss_kind = loss_kind_from_string(*a.loss);
  if (a.holdout_fraction) holdout = *a.holdout_fraction;
  if (holdout < 0.0 || holdout >= 1.0)
    throw config_error("invalid configuration:\n  - holdout_fraction must be in [0, 1)");

  RunManifest manifest;
  manifest.command = "train";
  manifest.started_at = utc_timestamp_now();
  manifest.add_input(a.matrix);
  if (!a.config_path.empty()) manifest.add_input(a.config_path);

  OccurrenceMatrix matrix = load_matrix(a.matrix);
  if (cfg.input_dim == 0) cfg.input_dim = matrix.n_features();
  cfg.validate();

  std::vector<std::size_t> val_rows;
  if (holdout > 0.0) {
    const std::size_t count =
        static_cast<std::size_t>(holdout * static_cast<double>(matrix.n_samples()));
    if (count > 0) {
      std::vector<std::size_t> idx(matrix.n_samples());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      RandomStream rng(cfg.seed, kHoldoutStream);
      rng.shuffle(idx);
      val_rows.assign(idx.begin(), idx.begin() + count);
      std::sort(val_rows.begin(), val_rows.end());
    }
  }

  TrainResult result = train(matrix, cfg, val_rows);
  atomic_write(a.out, [&](std::ostream& os) { write_fsom(os, result.model); });
  if (!a.history.empty())
    atomic_write(a.history, [&](std::ostream& os) { write_history(os, result.history); });

  manifest.config = config_to_json(result.model.config);
  manifest.config["holdout_fraction"] = holdout;
  manifest.outputs = {a.out.string()};
  if (!a.history.empty()) manifest.outputs.push_back(a.history.string());
  manifest.finalize(a.out);

  if (!val_rows.empty() && !result.history.records.empty()) {
    const auto& last = result.history.records.back();
    if (last.val_f1) print_metric("val_f1", *last.val_f1);
    if (last.val_cosine) print_metric("val_cosine", *last.val_cosine);
  }
}

// ---------------------------------------------------------------------------
// embed / eval-recon

struct EmbedArgs {
  fs::path matrix, model, out;
};

void check_model_matrix(const VaeModel& model, const OccurrenceMatrix& matrix) {
  if (matrix.n_features() != model.config.input_dim)
    throw shape_error("matrix has " + std::to_string(matrix.n_features()) +
                      " features but the model expects " +
                      std::to_string(model.config.input_dim));
}

void run_embed(const EmbedArgs& a) {
  RunManifest manifest;
  manifest.command = "embed";
  manifest.started_at = utc_timestamp_now();
  manifest.add_input(a.model);
  manifest.add_input(a.matrix);

  VaeModel model = load_model(a.model);
  OccurrenceMatrix matrix = load_matrix(a.matrix);
  check_model_matrix(model, matrix);
  Matrix z = embed(model, matrix);
  atomic_write(a.out, [&](std::ostream& os) { write_embeddings_tsv(os, matrix.sample_ids, z); });

  manifest.config = {{"latent_dim", model.config.latent_dim}};
  manifest.outputs = {a.out.string()};
  manifest.finalize(a.out);
}

struct EvalReconArgs {
  fs::path matrix, model, out;
  double threshold = 0.5;
};

void run_eval_recon(const EvalReconArgs& a) {
  RunManifest manifest;
  manifest.command = "eval-recon";
  manifest.started_at = utc_timestamp_now();
  manifest.add_input(a.model);
  manifest.add_input(a.matrix);

  VaeModel model = load_model(a.model);
  OccurrenceMatrix matrix = load_matrix(a.matrix);
  check_model_matrix(model, matrix);
  std::vector<std::size_t> rows(matrix.n_samples());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  ReconEval ev = evaluate_reconstruction(model, matrix, rows, a.threshold);

  MetricsReport report;
  report.f1 = ev.f1;
  report.precision = ev.precision;
  report.recall = ev.recall;
  report.cosine = ev.cosine;
  report.dim = model.config.latent_dim;
  atomic_write(a.out, [&](std::ostream& os) { os << report.to_json().dump(2) << '\n'; });

  manifest.config = {{"threshold", a.threshold}};
  manifest.outputs = {a.out.string()};
  manifest.finalize(a.out);
  print_metric("f1", ev.f1);
  print_metric("precision", ev.precision);
  print_metric("recall", ev.recall);
  print_metric("cosine", ev.cosine);
}

// ---------------------------------------------------------------------------
// pca

struct PcaArgs {
  fs::path matrix, out;
  std::size_t dims = 2;
};

void run_pca(const PcaArgs& a) {
  RunManifest manifest;
  manifest.command = "pca";
  manifest.started_at = utc_timestamp_now();
  manifest.add_input(a.matrix);

  OccurrenceMatrix matrix = load_matrix(a.matrix);
  PcaResult result = pca(matrix.to_dense(), a.dims);
  atomic_write(a.out, [&](std::ostream& os) {
    write_embeddings_tsv(os, matrix.sample_ids, result.projection);
  });

  manifest.config = {{"dims", a.dims}};
  manifest.outputs = {a.out.string()};
  manifest.finalize(a.out);
  for (std::size_t j = 0; j < result.explained_ratios.size(); ++j)
    std::printf("explained_ratio_%zu\t%.6f\n", j, result.explained_ratios[j]);
}

// ---------------------------------------------------------------------------
// cluster

struct ClusterArgs {
  fs::path embeddings, compare, labels, out, config_path;
  std::optional<std::size_t> k, restarts, max_iters;
  std::optional<std::uint64_t> seed;
};

void run_cluster(const ClusterArgs& a) {
  PipelineDefaults defaults;
  if (!a.config_path.empty()) defaults = pipeline_from_json(load_json(a.config_path));
  const std::size_t k = a.k.value_or(defaults.kmeans_k);
  const std::size_t restarts = a.restarts.value_or(defaults.kmeans_restarts);
  const std::size_t max_iters = a.max_iters.value_or(defaults.kmeans_max_iters);
  const std::uint64_t seed = a.seed.value_or(defaults.seed);

  RunManifest manifest;
  manifest.command = "cluster";
  manifest.started_at = utc_timestamp_now();
  manifest.add_input(a.embeddings);
  if (!a.compare.empty()) manifest.add_input(a.compare);
  manifest.add_input(a.labels);
  if (!a.config_path.empty()) manifest.add_input(a.config_path);

  EmbeddingsTable table = load_embeddings(a.embeddings);
  auto labels = align_labels(table.sample_ids, load_labels(a.labels));
  std::vector<std::size_t> truth = label_indices(labels);

  MetricsReport report;
  if (!a.compare.empty()) {
    EmbeddingsTable other = load_embeddings(a.compare);
    if (other.sample_ids != table.sample_ids)
      throw argument_error("sample ids in --compare disagree with --embeddings");
    report = cluster_compare(table.values, other.values, truth, k, seed, restarts, max_iters);
  } else {
    Clustering clustering = kmeans(table.values, k, restarts, max_iters, seed);
    report.nmi = nmi(clustering.assignments, truth);
    report.seed = seed;
    report.k = k;
    report.dim = table.values.cols();
  }
  atomic_write(a.out, [&](std::ostream& os) { os << report.to_json().dump(2) << '\n'; });

  manifest.config = {{"k", k}, {"restarts", restarts}, {"max_iters", max_iters}, {"seed", seed}};
  manifest.outputs = {a.out.string()};
  manifest.finalize(a.out);
  if (report.nmi) print_metric("nmi", *report.nmi);
  if (report.nmi_vae) print_metric("nmi_vae", *report.nmi_vae);
  if (report.nmi_pca) print_metric("nmi_pca", *report.nmi_pca);
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyArgs {
  fs::path features, matrix, labels, out, config_path;
  std::optional<std::size_t> folds, iters;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda, lr_scale;
};

void run_classify(const ClassifyArgs& a) {
  if (a.features.empty() == a.matrix.empty())
    throw argument_error("provide exactly one of --features or --matrix");
  PipelineDefaults defaults;
  if (!a.config_path.empty()) defaults = pipeline_from_json(load_json(a.config_path));
  const std::size_t folds = a.folds.value_or(defaults.folds);
  const std::uint64_t seed = a.seed.value_or(defaults.seed);
  ClassifyConfig cfg;
  if (a.iters) cfg.iters = *a.iters;
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.lr_scale) cfg.lr_scale = *a.lr_scale;

  RunManifest manifest;
  manifest.command = "classify";
  manifest.started_at = utc_timestamp_now();
  manifest.add_input(a.features.empty() ? a.matrix : a.features);
  manifest.add_input(a.labels);
  if (!a.config_path.empty()) manifest.add_input(a.config_path);

  std::vector<std::string> ids;
  Matrix features;
  if (!a.features.empty()) {
    EmbeddingsTable table = load_embeddings(a.features);
    ids = std::move(table.sample_ids);
    features = std::move(table.values);
  } else {
    OccurrenceMatrix matrix = load_matrix(a.matrix);
    ids = matrix.sample_ids;
    features = matrix.to_dense();
  }
  auto label_strings = align_labels(ids, load_labels(a.labels));
  std::vector<double> y;
  y.reserve(label_strings.size());
  for (std::size_t i = 0; i < label_strings.size(); ++i) {
    const auto& s = label_strings[i];
    if (s == "0")
      y.push_back(0.0);
    else if (s == "1")
      y.push_back(1.0);
    else
      throw parse_error("label for sample \"" + ids[i] + "\" must be 0 or 1, got \"" + s + "\"");
  }

  MetricsReport report = classify(features, y, folds, seed, cfg);
  atomic_write(a.out, [&](std::ostream& os) { os << report.to_json().dump(2) << '\n'; });

  manifest.config = {{"folds", folds},
                     {"seed", seed},
                     {"iters", cfg.iters},
                     {"lambda", cfg.lambda},
                     {"lr_scale", cfg.lr_scale}};
  manifest.outputs = {a.out.string()};
  manifest.finalize(a.out);
  print_metric("f1", *report.f1);
  print_metric("precision", *report.precision);
  print_metric("recall", *report.recall);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VAE compression and evaluation of sparse binary somatic-mutation profiles"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted-cluster synthetic dataset");
  synth_cmd->add_option("--out", synth_args.out, "mutation TSV output path")->required();
  synth_cmd->add_option("--labels-out", synth_args.labels_out, "labels TSV output path")->required();
  synth_cmd->add_option("--samples", synth_args.params.n_samples, "number of samples");
  synth_cmd->add_option("--features", synth_args.params.n_features, "number of features");
  synth_cmd->add_option("--clusters", synth_args.params.n_clusters, "number of planted clusters");
  synth_cmd->add_option("--p-in", synth_args.params.p_in, "in-signature occurrence probability");
  synth_cmd->add_option("--p-out", synth_args.params.p_out, "background occurrence probability");
  synth_cmd->add_option("--signature-size", synth_args.params.signature_size,
                        "features per cluster signature");
  synth_cmd->add_option("--seed", synth_args.params.seed, "generator seed");
  synth_cmd->callback([&] { run_synth(synth_args); });

  BuildMatrixArgs bm_args;
  auto* bm_cmd = app.add_subcommand("build-matrix", "mutation TSV -> binary occurrence matrix");
  bm_cmd->add_option("--input", bm_args.input, "mutation TSV path")->required();
  bm_cmd->add_option("--out", bm_args.out, "FSMX output path")->required();
  bm_cmd->add_option("--min-freq", bm_args.min_freq, "minimum mutation frequency kept");
  bm_cmd->add_option("--config", bm_args.config_path, "pipeline config JSON");
  bm_cmd->callback([&] { run_build_matrix(bm_args); });

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the VAE on an occurrence matrix");
  train_cmd->add_option("--matrix", train_args.matrix, "FSMX input path")->required();
  train_cmd->add_option("--out", train_args.out, "FSOM checkpoint output path")->required();
  train_cmd->add_option("--history", train_args.history, "JSON-lines history output path");
  train_cmd->add_option("--config", train_args.config_path, "VaeConfig JSON");
  train_cmd->add_option("--seed", train_args.seed, "training seed");
  train_cmd->add_option("--latent", train_args.latent, "latent dimensionality");
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
  train_cmd->add_option("--batch-size", train_args.batch_size, "minibatch size");
  train_cmd->add_option("--loss", train_args.loss, "reconstruction loss: bce or soft_f1");
  train_cmd->add_option("--beta-max", train_args.beta_max, "KL weight after warm-up");
  train_cmd->add_option("--warmup-epochs", train_args.warmup, "KL warm-up length");
  train_cmd->add_option("--dropout", train_args.dropout, "dropout rate");
  train_cmd->add_option("--l1", train_args.l1, "L1 coefficient on affine weights");
  train_cmd->add_option("--lr", train_args.lr, "RMSprop learning rate");
  train_cmd->add_option("--enc1", train_args.enc1, "first encoder width");
  train_cmd->add_option("--enc2", train_args.enc2, "second encoder width");
  train_cmd->add_option("--dec1", train_args.dec1, "first decoder width");
  train_cmd->add_option("--dec2", train_args.dec2, "second decoder width");
  train_cmd->add_option("--holdout-fraction", train_args.holdout_fraction,
                        "fraction of rows held out for per-epoch validation");
  train_cmd->callback([&] { run_train(train_args); });

  EmbedArgs embed_args;
  auto* embed_cmd = app.add_subcommand("embed", "write posterior-mean embeddings as TSV");
  embed_cmd->add_option("--matrix", embed_args.matrix, "FSMX input path")->required();
  embed_cmd->add_option("--model", embed_args.model, "FSOM checkpoint path")->required();
  embed_cmd->add_option("--out", embed_args.out, "embeddings TSV output path")->required();
  embed_cmd->callback([&] { run_embed(embed_args); });

  EvalReconArgs er_args;
  auto* er_cmd = app.add_subcommand("eval-recon", "reconstruction metrics of a checkpoint");
  er_cmd->add_option("--matrix", er_args.matrix, "FSMX input path")->required();
  er_cmd->add_option("--model", er_args.model, "FSOM checkpoint path")->required();
  er_cmd->add_option("--out", er_args.out, "metrics JSON output path")->required();
  er_cmd->add_option("--threshold", er_args.threshold, "binarization threshold");
  er_cmd->callback([&] { run_eval_recon(er_args); });

  PcaArgs pca_args;
  auto* pca_cmd = app.add_subcommand("pca", "PCA projection of an occurrence matrix");
  pca_cmd->add_option("--matrix", pca_args.matrix, "FSMX input path")->required();
  pca_cmd->add_option("--out", pca_args.out, "projection TSV output path")->required();
  pca_cmd->add_option("--dims", pca_args.dims, "number of components");
  pca_cmd->callback([&] { run_pca(pca_args); });

  ClusterArgs cluster_args;
  auto* cluster_cmd = app.add_subcommand("cluster", "k-means + NMI against reference labels");
  cluster_cmd->add_option("--embeddings", cluster_args.embeddings,
                          "embeddings or PCA projection TSV")->required();
  cluster_cmd->add_option("--compare", cluster_args.compare,
                          "second representation TSV for side-by-side NMI");
  cluster_cmd->add_option("--labels", cluster_args.labels, "labels TSV path")->required();
  cluster_cmd->add_option("--out", cluster_args.out, "metrics JSON output path")->required();
  cluster_cmd->add_option("--k", cluster_args.k, "number of clusters");
  cluster_cmd->add_option("--restarts", cluster_args.restarts, "k-means restarts");
  cluster_cmd->add_option("--max-iters", cluster_args.max_iters, "Lloyd iteration cap");
  cluster_cmd->add_option("--seed", cluster_args.seed, "clustering seed");
  cluster_cmd->add_option("--config", cluster_args.config_path, "pipeline config JSON");
  cluster_cmd->callback([&] { run_cluster(cluster_args); });

  ClassifyArgs classify_args;
  auto* classify_cmd = app.add_subcommand("classify", "cross-validated linear classification");
  classify_cmd->add_option("--features", classify_args.features, "embeddings TSV as features");
  classify_cmd->add_option("--matrix", classify_args.matrix, "FSMX raw rows as features");
  classify_cmd->add_option("--labels", classify_args.labels, "binary labels TSV")->required();
  classify_cmd->add_option("--out", classify_args.out, "metrics JSON output path")->required();
  classify_cmd->add_option("--folds", classify_args.folds, "cross-validation folds");
  classify_cmd->add_option("--seed", classify_args.seed, "fold-split seed");
  classify_cmd->add_option("--iters", classify_args.iters, "gradient descent iterations");
  classify_cmd->add_option("--lambda", classify_args.lambda, "L2 regularization weight");
  classify_cmd->add_option("--lr-scale", classify_args.lr_scale, "step size scale");
  classify_cmd->add_option("--config", classify_args.config_path, "pipeline config JSON");
  classify_cmd->callback([&] { run_classify(classify_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
