#pragma once

#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "flatsomatic/io_util.hpp"
#include "flatsomatic/vae.hpp"

namespace flatsomatic {

inline nlohmann::ordered_json config_to_json(const VaeConfig& c) {
  nlohmann::ordered_json j;
  j["input_dim"] = c.input_dim;
  j["encoder_units"] = {c.encoder_units[0], c.encoder_units[1]};
  j["latent_dim"] = c.latent_dim;
  j["decoder_units"] = {c.decoder_units[0], c.decoder_units[1]};
  j["dropout_rate"] = c.dropout_rate;
  j["l1_coeff"] = c.l1_coeff;
  j["leaky_alpha"] = c.leaky_alpha;
  j["loss"] = to_string(c.loss_kind);
  j["beta_max"] = c.beta_max;
  j["warmup_epochs"] = c.warmup_epochs;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["optimizer"] = {{"lr", c.optimizer.lr}, {"rho", c.optimizer.rho}, {"eps", c.optimizer.eps}};
  j["bn_momentum"] = c.bn_momentum;
  j["bn_eps"] = c.bn_eps;
  j["seed"] = c.seed;
  return j;
}

/// Fills a default config from JSON; absent keys keep their defaults,
/// malformed values surface as config errors.
inline VaeConfig config_from_json(const nlohmann::ordered_json& j) {
  VaeConfig c;
  try {
    auto get = [&](const char* key, auto& dst) {
      if (j.contains(key)) dst = j.at(key).template get<std::decay_t<decltype(dst)>>();
    };
    get("input_dim", c.input_dim);
    if (j.contains("encoder_units")) {
      auto u = j.at("encoder_units").get<std::vector<std::size_t>>();
      if (u.size() != 2) throw config_error("encoder_units must list exactly 2 widths");
      c.encoder_units = {u[0], u[1]};
      if (!j.contains("decoder_units")) c.decoder_units = {u[1], u[0]};
    }
    get("latent_dim", c.latent_dim);
    if (j.contains("decoder_units")) {
      auto u = j.at("decoder_units").get<std::vector<std::size_t>>();
      if (u.size() != 2) throw config_error("decoder_units must list exactly 2 widths");
      c.decoder_units = {u[0], u[1]};
    }
    get("dropout_rate", c.dropout_rate);
    get("l1_coeff", c.l1_coeff);
    get("leaky_alpha", c.leaky_alpha);
    if (j.contains("loss")) c.loss_kind = loss_kind_from_string(j.at("loss").get<std::string>());
    get("beta_max", c.beta_max);
    get("warmup_epochs", c.warmup_epochs);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      if (o.contains("lr")) c.optimizer.lr = o.at("lr").get<double>();
      if (o.contains("rho")) c.optimizer.rho = o.at("rho").get<double>();
      if (o.contains("eps")) c.optimizer.eps = o.at("eps").get<double>();
    }
    get("bn_momentum", c.bn_momentum);
    get("bn_eps", c.bn_eps);
    get("seed", c.seed);
  } catch (const config_error&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad config value: ") + e.what());
  }
  return c;
}

constexpr std::uint16_t kFsomVersion = 1;

/// Checkpoint: magic "FSOM", u16 version, length-prefixed config JSON, then
/// every parameter array (running statistics included) in canonical order as
/// little-endian f64.
inline void write_fsom(std::ostream& os, const VaeModel& model) {
  os.write("FSOM", 4);
  write_u16(os, kFsomVersion);
  write_lp_string(os, config_to_json(model.config).dump());
  visit_arrays(model, /*include_running_stats=*/true,
               [&](const char*, std::span<const double> arr) {
                 for (double v : arr) write_f64(os, v);
               });
  if (!os) throw io_error("checkpoint write failed");
}

inline VaeModel read_fsom(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::string_view(magic, 4) != "FSOM")
    throw parse_error("not a FSOM checkpoint (bad magic)");
  try {
    const std::uint16_t version = read_u16(is);
    if (version != kFsomVersion)
      throw parse_error("unsupported FSOM version " + std::to_string(version));
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(read_lp_string(is));
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(std::string("bad checkpoint config JSON: ") + e.what());
    }
    VaeConfig cfg = config_from_json(j);
    cfg.validate();
    VaeModel model = VaeModel::build(cfg);
    visit_arrays(model, /*include_running_stats=*/true, [&](const char*, std::span<double> arr) {
      for (double& v : arr) v = read_f64(is);
    });
    if (!is) throw parse_error("checkpoint truncated");
    is.peek();
    if (!is.eof()) throw parse_error("trailing bytes after checkpoint payload");
    return model;
  } catch (const io_error& e) {
    throw parse_error(std::string("truncated checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Train history (JSON lines, one record per epoch)

inline void write_history(std::ostream& os, const TrainHistory& h) {
  for (const auto& r : h.records) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["beta"] = r.beta;
    j["train_recon"] = r.train_recon;
    j["train_kl"] = r.train_kl;
    if (r.val_f1) j["val_f1"] = *r.val_f1;
    if (r.val_cosine) j["val_cosine"] = *r.val_cosine;
    os << j.dump() << '\n';
  }
}

inline TrainHistory read_history(std::istream& is) {
  TrainHistory h;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    EpochRecord r;
    try {
      nlohmann::ordered_json j = nlohmann::ordered_json::parse(line);
      r.epoch = j.at("epoch").get<std::size_t>();
      r.beta = j.at("beta").get<double>();
      r.train_recon = j.at("train_recon").get<double>();
      r.train_kl = j.at("train_kl").get<double>();
      if (j.contains("val_f1")) r.val_f1 = j.at("val_f1").get<double>();
      if (j.contains("val_cosine")) r.val_cosine = j.at("val_cosine").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw parse_error("history line " + std::to_string(lineno) + ": " + e.what());
    }
    h.records.push_back(r);
  }
  return h;
}

}  // namespace flatsomatic
