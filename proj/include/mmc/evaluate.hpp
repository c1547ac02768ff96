#ifndef MMC_EVALUATE_HPP
#define MMC_EVALUATE_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mmc/corpus.hpp"
#include "mmc/dataset.hpp"
#include "mmc/embedder.hpp"
#include "mmc/geometry.hpp"
#include "mmc/metrics.hpp"
#include "mmc/model.hpp"
#include "mmc/train.hpp"
#include "mmc/types.hpp"

namespace mmc {

/// Improvement conventions used by the ablation tables: distances improve
/// downward, scores improve upward. Both are percentages of the baseline.
inline double cd_improvement_pct(double base_cd, double row_cd) {
  if (base_cd == 0.0) throw InvalidArgument("cd improvement: baseline must be nonzero");
  return 100.0 * (base_cd - row_cd) / base_cd;
}

inline double fscore_improvement_pct(double base_f, double row_f) {
  if (base_f == 0.0) throw InvalidArgument("fscore improvement: baseline must be nonzero");
  return 100.0 * (row_f - base_f) / base_f;
}

using PredictFn = std::function<PointMatrix<double>(const TripleRecord&)>;

/// Scores a prediction callback over records. Both prediction and ground
/// truth go through the ground truth's unit-box transform before scoring, so
/// reported numbers are comparable across differently scaled shapes.
inline MetricReport evaluate_records(const PredictFn& predict,
                                     const std::vector<TripleRecord>& records, double tau) {
  if (records.empty()) throw EmptyInput("evaluate: no records");
  MetricAccumulator acc;
  for (const auto& rec : records) {
    const PointMatrix<double> pred = predict(rec);
    const UnitTransform<double> t = unit_transform(rec.gt);
    const PointMatrix<double> gt_n = t.apply(rec.gt);
    const PointMatrix<double> pred_n = t.apply(pred);
    acc.add(rec.category, chamfer_distance(pred_n, gt_n), fscore(pred_n, gt_n, tau));
  }
  return acc.finalize();
}

/// Inference wrapper around a trained model: resamples the partial input the
/// same way training did, picks view 0, and supplies whichever global
/// features the config enables.
template <typename Scalar = float>
class CompletionRunner {
 public:
  CompletionRunner(TrainConfig cfg, EmbedderBackend& embedder)
      : cfg_(std::move(cfg)), embedder_(embedder), model_(cfg_.fusion, cfg_.seed) {}

  TrainConfig& config() { return cfg_; }
  const TrainConfig& config() const { return cfg_; }
  CompletionModel<Scalar>& model() { return model_; }

  void load_arrays(const CheckpointData& data) {
    for (auto& p : model_.params()) {
      const NamedArray* a = data.find(p.name);
      if (!a) throw IoError("checkpoint: missing array " + p.name);
      if (a->rows != p.value->rows() || a->cols != p.value->cols())
        throw IoError("checkpoint: shape mismatch for " + p.name);
      std::size_t at = 0;
      for (Index r = 0; r < p.value->rows(); ++r)
        for (Index c = 0; c < p.value->cols(); ++c)
          (*p.value)(r, c) = static_cast<Scalar>(a->data[at++]);
    }
  }

  /// Completion from raw pieces; `rich` participates only when the config
  /// uses rich text.
  PointMatrix<double> complete_cloud(const PointMatrix<double>& partial,
                                     const RenderedImage& image, const std::string& category,
                                     const std::optional<std::string>& rich,
                                     const std::optional<std::string>& explicit_prompt =
                                         std::nullopt) {
    const PointMatrix<double> input =
        resample(partial, Index{cfg_.fusion.input_points}, ResampleMethod::kFarthestPoint,
                 mix_u64(cfg_.seed, fnv1a(category)));
    GlobalFeature vis_store, txt_store;
    const GlobalFeature* g_vis = nullptr;
    const GlobalFeature* g_txt = nullptr;
    if (cfg_.fusion.use_visual_global) {
      vis_store = embed_image_global(image, embedder_);
      g_vis = &vis_store;
    }
    if (cfg_.fusion.use_text_global) {
      TextPrompt prompt;
      if (explicit_prompt && !explicit_prompt->empty()) {
        prompt = prompt_from_text(*explicit_prompt);
      } else {
        const bool use_rich = cfg_.fusion.use_rich_text && rich.has_value();
        prompt = build_prompt(category,
                              use_rich ? std::optional<std::string>(*rich) : std::nullopt);
      }
      txt_store = embed_text_global(prompt, embedder_);
      g_txt = &txt_store;
    }
    const PointMatrix<Scalar> pred =
        model_.forward(input.template cast<Scalar>(), image, g_vis, g_txt);
    return pred.template cast<double>();
  }

  /// Dataset-record completion under the evaluation policy (fixed view 0,
  /// training-style input resampling keyed by model id).
  PointMatrix<double> complete_record(const TripleRecord& rec) {
    const RenderedImage image = load_render(rec.renders[0], 0);
    const PointMatrix<double> input =
        resample(rec.partial, Index{cfg_.fusion.input_points}, ResampleMethod::kFarthestPoint,
                 mix_u64(cfg_.seed, fnv1a(rec.model_id)));
    GlobalFeature vis_store, txt_store;
    const GlobalFeature* g_vis = nullptr;
    const GlobalFeature* g_txt = nullptr;
    if (cfg_.fusion.use_visual_global) {
      vis_store = embed_image_global(image, embedder_);
      g_vis = &vis_store;
    }
    if (cfg_.fusion.use_text_global) {
      const bool use_rich = cfg_.fusion.use_rich_text && rec.text.has_value();
      const TextPrompt prompt = build_prompt(
          rec.category, use_rich ? std::optional<std::string>(*rec.text) : std::nullopt);
      txt_store = embed_text_global(prompt, embedder_);
      g_txt = &txt_store;
    }
    const PointMatrix<Scalar> pred =
        model_.forward(input.template cast<Scalar>(), image, g_vis, g_txt);
    return pred.template cast<double>();
  }

 private:
  TrainConfig cfg_;
  EmbedderBackend& embedder_;
  CompletionModel<Scalar> model_;
};

/// Rebuilds a runner from a checkpoint; the environment seed override is
/// deliberately not applied so evaluation reflects the checkpoint as saved.
template <typename Scalar = float>
CompletionRunner<Scalar> runner_from_checkpoint(const std::string& ckpt_path,
                                                EmbedderBackend& embedder) {
  const CheckpointData data = load_checkpoint(ckpt_path);
  const TrainConfig cfg = TrainConfig::from_config(data.config, /*apply_env_seed=*/false);
  CompletionRunner<Scalar> runner(cfg, embedder);
  runner.load_arrays(data);
  return runner;
}

/// Evaluates a checkpoint over the given records.
template <typename Scalar = float>
MetricReport evaluate_checkpoint(const std::string& ckpt_path,
                                 const std::vector<TripleRecord>& records,
                                 EmbedderBackend& embedder, double tau) {
  CompletionRunner<Scalar> runner = runner_from_checkpoint<Scalar>(ckpt_path, embedder);
  return evaluate_records(
      [&runner](const TripleRecord& rec) { return runner.complete_record(rec); }, records, tau);
}

/// One ablation row: which global features and fusion stages are active.
struct AblationRow {
  std::string name;
  bool visual = false;
  bool text = false;
  bool stage1 = false;
  bool stage2 = false;
  bool rich = false;

  TrainConfig apply(TrainConfig base) const {
    base.fusion.use_visual_global = visual;
    base.fusion.use_text_global = text;
    base.fusion.fuse_stage1 = stage1;
    base.fusion.fuse_stage2 = stage2;
    base.fusion.use_rich_text = rich;
    namespace fs = std::filesystem;
    base.out_dir = (fs::path(base.out_dir) / name).string();
    return base;
  }
};

/// The study grid: no globals, each modality alone, then both with either or
/// both injection stages, and finally rich text on top.
inline std::vector<AblationRow> ablation_grid() {
  return {
      {"baseline", false, false, true, true, false},
      {"visual", true, false, true, true, false},
      {"text", false, true, true, true, false},
      {"both_stage1", true, true, true, false, false},
      {"both_stage2", true, true, false, true, false},
      {"both_stages", true, true, true, true, false},
      {"final_rich", true, true, true, true, true},
  };
}

struct AblationResult {
  std::string name;
  MetricReport report;
  std::int64_t parameter_count = 0;
};

/// Trains every grid row from the shared seed and scores it on `eval_records`.
/// Rows differ only in fusion flags, so differences isolate the fused
/// features.
template <typename Scalar = float>
std::vector<AblationResult> run_ablation(const TrainConfig& base,
                                         const std::vector<TripleRecord>& train_records,
                                         const std::vector<TripleRecord>& eval_records,
                                         EmbedderBackend& embedder) {
  std::vector<AblationResult> results;
  for (const AblationRow& row : ablation_grid()) {
    const TrainConfig cfg = row.apply(base);
    Trainer<Scalar> trainer(cfg, train_records, embedder);
    AblationResult res;
    res.name = row.name;
    res.parameter_count = trainer.model().parameter_count();
    const std::string ckpt = trainer.train();
    res.report = evaluate_checkpoint<Scalar>(ckpt, eval_records, embedder, cfg.eval_tau);
    results.push_back(std::move(res));
  }
  return results;
}

/// Summary CSV: every row against the named baseline row.
inline std::string ablation_to_csv(const std::vector<AblationResult>& results,
                                   const std::string& baseline_name = "baseline") {
  const AblationResult* base = nullptr;
  for (const auto& r : results)
    if (r.name == baseline_name) base = &r;
  if (!base) throw InvalidArgument("ablation csv: baseline row missing");

  std::string out = "row,params,mean_cd_e3,cd_improv_pct,fscore,f_improv_pct\n";
  char buf[256];
  for (const auto& r : results) {
    const double cd_imp = cd_improvement_pct(base->report.mean.mean_cd_e3, r.report.mean.mean_cd_e3);
    const double f_imp = base->report.mean.fscore == 0.0
                             ? 0.0
                             : fscore_improvement_pct(base->report.mean.fscore, r.report.mean.fscore);
    std::snprintf(buf, sizeof(buf), "%s,%lld,%.9g,%.2f,%.9g,%.2f\n", r.name.c_str(),
                  static_cast<long long>(r.parameter_count), r.report.mean.mean_cd_e3, cd_imp,
                  r.report.mean.fscore, f_imp);
    out += buf;
  }
  return out;
}

/// Orthographic XY scatter of a cloud as a binary PPM; depth (z) maps to
/// brightness. Good enough for eyeballing a completion.
inline void write_scatter_ppm(const std::string& path, const PointMatrix<double>& cloud,
                              int size = 256) {
  validate_cloud(cloud);
  if (size < 16) throw InvalidArgument("scatter plot: size too small");
  const UnitTransform<double> t = unit_transform(cloud);
  const PointMatrix<double> n = t.apply(cloud);
  std::vector<unsigned char> pix(static_cast<std::size_t>(size) * size * 3, 0);
  for (Index i = 0; i < n.rows(); ++i) {
    const int px = std::clamp(static_cast<int>(std::lround((n(i, 0) + 1.0) * 0.5 * (size - 1))),
                              0, size - 1);
    const int py = std::clamp(
        static_cast<int>(std::lround((1.0 - (n(i, 1) + 1.0) * 0.5) * (size - 1))), 0, size - 1);
    const double depth01 = std::clamp((n(i, 2) + 1.0) * 0.5, 0.0, 1.0);
    const auto v = static_cast<unsigned char>(64 + 191 * (1.0 - depth01));
    const std::size_t at = (static_cast<std::size_t>(py) * size + px) * 3;
    pix[at] = std::max(pix[at], v);
    pix[at + 1] = std::max(pix[at + 1], static_cast<unsigned char>(v / 2));
    pix[at + 2] = std::max(pix[at + 2], static_cast<unsigned char>(255 - v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("scatter plot: cannot write " + path);
  out << "P6\n" << size << " " << size << "\n255\n";
  out.write(reinterpret_cast<const char*>(pix.data()), static_cast<std::streamsize>(pix.size()));
}

}  // namespace mmc

#endif  // MMC_EVALUATE_HPP
