#ifndef MMC_TRAIN_HPP
#define MMC_TRAIN_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmc/adam.hpp"
#include "mmc/checkpoint.hpp"
#include "mmc/config.hpp"
#include "mmc/dataset.hpp"
#include "mmc/embedder.hpp"
#include "mmc/geometry.hpp"
#include "mmc/hash.hpp"
#include "mmc/image.hpp"
#include "mmc/model.hpp"
#include "mmc/prompt.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// Full run configuration. Round-trips losslessly through KVConfig; the
/// MMC_SEED environment variable overrides the configured seed at load time.
struct TrainConfig {
  std::string optimizer_name = "adam";
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  int epochs = 200;
  int batch_size = 8;
  std::uint64_t seed = 0;
  int checkpoint_every = 10;
  std::string out_dir = "runs/default";

  FusionConfig fusion;

  std::string embedder_backend = "stub";  // stub | external
  std::string embedder_endpoint;
  std::uint64_t embedder_seed = 0;

  std::string dataset_root;
  std::string dataset_categories;  // comma-separated; empty = training set
  std::string corpus_path;         // optional JSONL of descriptions
  double eval_tau = 0.001;

  /// Optimizer settings from the upstream experiment write-up; the desk
  /// defaults above are what this repository actually runs.
  static TrainConfig reference_defaults() {
    TrainConfig c;
    c.lr = 0.00209;
    c.epochs = 400;
    c.batch_size = 560;
    return c;
  }

  void validate() const {
    if (optimizer_name != "adam") throw ConfigError("optimizer.name: only adam is supported");
    if (!(lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
    if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
    if (checkpoint_every < 1) throw ConfigError("train.checkpoint_every must be at least 1");
    if (!(eval_tau > 0.0)) throw ConfigError("eval.tau must be positive");
    fusion.validate();
  }

  static TrainConfig from_config(const KVConfig& cfg, bool apply_env_seed = true) {
    TrainConfig c;
    c.optimizer_name = cfg.get_string("optimizer.name", c.optimizer_name);
    c.lr = cfg.get_real("optimizer.lr", c.lr);
    c.beta1 = cfg.get_real("optimizer.beta1", c.beta1);
    c.beta2 = cfg.get_real("optimizer.beta2", c.beta2);
    c.eps = cfg.get_real("optimizer.eps", c.eps);
    c.epochs = static_cast<int>(cfg.get_int("train.epochs", c.epochs));
    c.batch_size = static_cast<int>(cfg.get_int("train.batch_size", c.batch_size));
    c.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 0));
    c.checkpoint_every =
        static_cast<int>(cfg.get_int("train.checkpoint_every", c.checkpoint_every));
    c.out_dir = cfg.get_string("train.out_dir", c.out_dir);
    c.fusion = FusionConfig::from_config(cfg);
    c.embedder_backend = cfg.get_string("embedder.backend", c.embedder_backend);
    c.embedder_endpoint = cfg.get_string("embedder.endpoint", c.embedder_endpoint);
    c.embedder_seed = static_cast<std::uint64_t>(cfg.get_int("embedder.seed", 0));
    c.dataset_root = cfg.get_string("dataset.root", c.dataset_root);
    c.dataset_categories = cfg.get_string("dataset.categories", c.dataset_categories);
    c.corpus_path = cfg.get_string("dataset.corpus", c.corpus_path);
    c.eval_tau = cfg.get_real("eval.tau", c.eval_tau);
    if (apply_env_seed) {
      if (const char* env = std::getenv("MMC_SEED"))
        c.seed = static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
    }
    c.validate();
    return c;
  }

  KVConfig to_config() const {
    KVConfig cfg;
    cfg.set("optimizer.name", optimizer_name);
    cfg.set_real("optimizer.lr", lr);
    cfg.set_real("optimizer.beta1", beta1);
    cfg.set_real("optimizer.beta2", beta2);
    cfg.set_real("optimizer.eps", eps);
    cfg.set_int("train.epochs", epochs);
    cfg.set_int("train.batch_size", batch_size);
    cfg.set_int("train.seed", static_cast<long long>(seed));
    cfg.set_int("train.checkpoint_every", checkpoint_every);
    cfg.set("train.out_dir", out_dir);
    fusion.to_config(cfg);
    cfg.set("embedder.backend", embedder_backend);
    cfg.set("embedder.endpoint", embedder_endpoint);
    cfg.set_int("embedder.seed", static_cast<long long>(embedder_seed));
    cfg.set("dataset.root", dataset_root);
    cfg.set("dataset.categories", dataset_categories);
    cfg.set("dataset.corpus", corpus_path);
    cfg.set_real("eval.tau", eval_tau);
    return cfg;
  }

  AdamHyper adam_hyper() const { return {lr, beta1, beta2, eps}; }

  std::vector<std::string> categories() const {
    if (dataset_categories.empty()) return train_categories();
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : dataset_categories + ",") {
      if (ch == ',') {
        std::size_t a = cur.find_first_not_of(" \t");
        std::size_t b = cur.find_last_not_of(" \t");
        if (a != std::string::npos) {
          std::string name = canonical_category(cur.substr(a, b - a + 1));
          if (!ComponentTaxonomy::default_taxonomy().has(name))
            throw TaxonomyError("unknown dataset category: " + name);
          out.push_back(std::move(name));
        }
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    return out;
  }
};

/// Append-only JSONL run record. Every record is deterministic for a fixed
/// config+seed; wall-clock timing goes to a separate sidecar so ledgers from
/// identical runs compare byte-equal.
class RunLedger {
 public:
  explicit RunLedger(std::string path) : path_(std::move(path)) {}

  const std::string& path() const { return path_; }

  void append(const nlohmann::json& record) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("ledger: cannot open " + path_);
    out << record.dump() << "\n";
    out.flush();
  }

  static std::vector<nlohmann::json> read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("ledger: cannot open " + path);
    std::vector<nlohmann::json> out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      out.push_back(nlohmann::json::parse(line));
    }
    return out;
  }

 private:
  std::string path_;
};

/// Checks the ledger's checkpoint references: each file must exist next to
/// the ledger and hash to the recorded value.
inline void verify_ledger(const std::string& ledger_path) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(ledger_path).parent_path();
  for (const auto& rec : RunLedger::read(ledger_path)) {
    if (rec.value("event", "") != "checkpoint") continue;
    const fs::path ckpt = dir / rec.at("path").get<std::string>();
    if (!fs::exists(ckpt)) throw IoError("ledger: missing checkpoint " + ckpt.string());
    const std::uint64_t h = file_hash(ckpt.string());
    if (h != rec.at("hash").get<std::uint64_t>())
      throw IoError("ledger: checkpoint hash mismatch for " + ckpt.string());
  }
}

namespace detail {

inline std::string epoch_checkpoint_name(int epoch) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "ckpt_epoch_%04d.mmck", epoch);
  return buf;
}

}  // namespace detail

/// Single-process training loop: per-epoch seeded shuffling, batch-mean
/// Chamfer loss, Adam updates, periodic checkpoints, JSONL ledger. All
/// randomness is derived statelessly from (seed, epoch, model_id), so a
/// resumed run continues bit-for-bit like the uninterrupted one.
template <typename Scalar = float>
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<TripleRecord> records, EmbedderBackend& embedder)
      : cfg_(std::move(cfg)),
        records_(std::move(records)),
        embedder_(embedder),
        model_(cfg_.fusion, cfg_.seed),
        adam_(model_.params(), cfg_.adam_hyper()) {
    cfg_.validate();
    if (records_.empty()) throw EmptyInput("trainer: no training records");
    inputs_.reserve(records_.size());
    prompts_.reserve(records_.size());
    for (const auto& rec : records_) {
      const PointMatrix<double> in = resample(rec.partial, Index{cfg_.fusion.input_points},
                                              ResampleMethod::kFarthestPoint,
                                              mix_u64(cfg_.seed, fnv1a(rec.model_id)));
      inputs_.push_back(in.template cast<Scalar>());
      const bool rich = cfg_.fusion.use_rich_text && rec.text.has_value();
      prompts_.push_back(build_prompt(
          rec.category, rich ? std::optional<std::string>(*rec.text) : std::nullopt));
    }
  }

  CompletionModel<Scalar>& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  int start_epoch() const { return start_epoch_; }

  /// Restores weights, optimizer moments, and step count; training resumes
  /// at the epoch after the checkpoint's.
  void resume_from(const std::string& ckpt_path) {
    const CheckpointData data = load_checkpoint(ckpt_path);
    const KVConfig mine = cfg_.to_config();
    for (const auto& [key, value] : mine.entries()) {
      if (key.rfind("fusion.", 0) != 0) continue;
      if (data.config.get_string(key, "") != value)
        throw ConfigError("resume: checkpoint fusion config differs at " + key);
    }
    auto params = model_.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      load_array(data, params[i].name, *params[i].value);
      load_array(data, "adam.m." + params[i].name, adam_.moment1(i));
      load_array(data, "adam.v." + params[i].name, adam_.moment2(i));
    }
    const auto epoch_it = data.state.find("epoch");
    const auto step_it = data.state.find("step");
    if (epoch_it == data.state.end() || step_it == data.state.end())
      throw IoError("resume: checkpoint lacks epoch/step state");
    start_epoch_ = std::stoi(epoch_it->second) + 1;
    adam_.set_t(std::stoll(step_it->second));
  }

  /// Runs epochs [start, epochs]; returns the final checkpoint path.
  std::string train() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.out_dir);
    RunLedger ledger((fs::path(cfg_.out_dir) / "ledger.jsonl").string());
    std::ofstream timing((fs::path(cfg_.out_dir) / "timing.log").string(),
                         std::ios::binary | std::ios::app);

    if (start_epoch_ == 1) {
      ledger.append({{"event", "config"},
                     {"hash", fnv1a(cfg_.to_config().serialize())},
                     {"records", records_.size()}});
    }

    std::string last_ckpt;
    for (int epoch = start_epoch_; epoch <= cfg_.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      const EpochResult res = run_epoch(epoch);
      const auto t1 = std::chrono::steady_clock::now();
      ledger.append({{"event", "epoch"},
                     {"epoch", epoch},
                     {"mean_loss", res.mean_loss},
                     {"batches", res.batches},
                     {"samples", res.samples}});
      if (timing)
        timing << "epoch " << epoch << " "
               << std::chrono::duration<double>(t1 - t0).count() << "s\n";
      if (epoch % cfg_.checkpoint_every == 0 || epoch == cfg_.epochs) {
        last_ckpt = write_checkpoint(epoch);
        ledger.append({{"event", "checkpoint"},
                       {"epoch", epoch},
                       {"path", fs::path(last_ckpt).filename().string()},
                       {"hash", file_hash(last_ckpt)}});
      }
    }
    return last_ckpt;
  }

  struct EpochResult {
    double mean_loss = 0.0;
    int batches = 0;
    int samples = 0;
  };

  /// One pass over the data in the epoch's seeded order. Loss is the batch
  /// mean of the symmetric Chamfer distance; the epoch mean weights every
  /// sample equally.
  EpochResult run_epoch(int epoch) {
    std::vector<std::size_t> order(records_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_u64(cfg_.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded_u64(rng, i));
      std::swap(order[i - 1], order[j]);
    }

    EpochResult res;
    double loss_sum = 0.0;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg_.batch_size)) {
      const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg_.batch_size));
      const int batch_n = static_cast<int>(end - at);
      model_.zero_grads();
      for (std::size_t k = at; k < end; ++k) {
        const std::size_t idx = order[k];
        const double loss = step_sample(idx, epoch, batch_n, res.batches);
        loss_sum += loss;
        ++res.samples;
      }
      adam_.step();
      ++res.batches;
    }
    res.mean_loss = res.samples > 0 ? loss_sum / static_cast<double>(res.samples) : 0.0;
    return res;
  }

  std::string write_checkpoint(int epoch) {
    namespace fs = std::filesystem;
    CheckpointData data;
    data.config = cfg_.to_config();
    data.state["epoch"] = std::to_string(epoch);
    data.state["step"] = std::to_string(adam_.t());
    auto params = model_.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      data.arrays.push_back(to_array(params[i].name, *params[i].value));
      data.arrays.push_back(to_array("adam.m." + params[i].name, adam_.moment1(i)));
      data.arrays.push_back(to_array("adam.v." + params[i].name, adam_.moment2(i)));
    }
    const std::string path =
        (fs::path(cfg_.out_dir) / detail::epoch_checkpoint_name(epoch)).string();
    save_checkpoint(path, data);
    return path;
  }

  /// Vision/text globals for one record; embeddings are memoized, which
  /// matters when the backend is a remote service.
  const GlobalFeature* vision_global(std::size_t idx, int view) {
    if (!cfg_.fusion.use_visual_global) return nullptr;
    const std::string key = records_[idx].model_id + "#" + std::to_string(view);
    auto it = vis_cache_.find(key);
    if (it == vis_cache_.end()) {
      const RenderedImage img = load_render(records_[idx].renders[static_cast<std::size_t>(view)],
                                            view);
      it = vis_cache_.emplace(key, embed_image_global(img, embedder_)).first;
    }
    return &it->second;
  }

  const GlobalFeature* text_global(std::size_t idx) {
    if (!cfg_.fusion.use_text_global) return nullptr;
    const TextPrompt& prompt = prompts_[idx];
    auto it = txt_cache_.find(prompt.rendered);
    if (it == txt_cache_.end())
      it = txt_cache_.emplace(prompt.rendered, embed_text_global(prompt, embedder_)).first;
    return &it->second;
  }

 private:
  static NamedArray to_array(const std::string& name, const Matrix<Scalar>& m) {
    NamedArray a;
    a.name = name;
    a.rows = m.rows();
    a.cols = m.cols();
    a.data.reserve(static_cast<std::size_t>(m.size()));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) a.data.push_back(static_cast<float>(m(r, c)));
    return a;
  }

  static void load_array(const CheckpointData& data, const std::string& name, Matrix<Scalar>& m) {
    const NamedArray* a = data.find(name);
    if (!a) throw IoError("checkpoint: missing array " + name);
    if (a->rows != m.rows() || a->cols != m.cols())
      throw IoError("checkpoint: shape mismatch for " + name);
    std::size_t at = 0;
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<Scalar>(a->data[at++]);
  }

  double step_sample(std::size_t idx, int epoch, int batch_n, int batch_id) {
    const TripleRecord& rec = records_[idx];
    const int view = pick_view(rec.model_id, cfg_.seed, static_cast<std::uint64_t>(epoch), false);
    const RenderedImage img = load_render(rec.renders[static_cast<std::size_t>(view)], view);

    const GlobalFeature* g_vis = vision_global(idx, view);
    const GlobalFeature* g_txt = text_global(idx);

    const PointMatrix<Scalar> pred = model_.forward(inputs_[idx], img, g_vis, g_txt);
    if (!pred.allFinite())
      throw TrainingAborted(abort_report(rec.model_id, epoch, batch_id));
    const PointMatrix<double> pred_d = pred.template cast<double>();
    const ChamferResult chamfer = chamfer_with_gradient(pred_d, records_[idx].gt);
    if (!std::isfinite(chamfer.value))
      throw TrainingAborted(abort_report(rec.model_id, epoch, batch_id));

    const PointMatrix<Scalar> d_pred =
        (chamfer.grad_pred / static_cast<double>(batch_n)).template cast<Scalar>();
    model_.backward(d_pred);
    return chamfer.value;
  }

  std::string abort_report(const std::string& model_id, int epoch, int batch_id) {
    std::string msg = "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                      std::to_string(batch_id) + ", sample " + model_id + "\nweight norms:\n";
    for (const auto& p : model_.params()) {
      char line[128];
      std::snprintf(line, sizeof(line), "  %-24s %.6g\n", p.name.c_str(),
                    static_cast<double>(p.value->norm()));
      msg += line;
    }
    return msg;
  }

  TrainConfig cfg_;
  std::vector<TripleRecord> records_;
  EmbedderBackend& embedder_;
  CompletionModel<Scalar> model_;
  Adam<Scalar> adam_;
  std::vector<PointMatrix<Scalar>> inputs_;  // FPS-resampled partials, fixed per run
  std::vector<TextPrompt> prompts_;
  std::map<std::string, GlobalFeature> vis_cache_;
  std::map<std::string, GlobalFeature> txt_cache_;
  int start_epoch_ = 1;
};

}  // namespace mmc

#endif  // MMC_TRAIN_HPP
