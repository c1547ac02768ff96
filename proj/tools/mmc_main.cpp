// Command line entry point: train, eval, ablate, complete, synth-gen, and
// corpus build around the completion library.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mmc/backends_http.hpp"
#include "mmc/corpus.hpp"
#include "mmc/dataset.hpp"
#include "mmc/evaluate.hpp"
#include "mmc/metrics.hpp"
#include "mmc/synth.hpp"
#include "mmc/train.hpp"

#include <CLI11.hpp>

namespace {

std::unique_ptr<mmc::EmbedderBackend> make_embedder(const mmc::TrainConfig& cfg) {
  if (cfg.embedder_backend == "stub")
    return std::make_unique<mmc::StubEmbedder>(cfg.embedder_seed);
  if (cfg.embedder_backend == "external") {
    if (cfg.embedder_endpoint.empty())
      throw mmc::ConfigError("embedder.endpoint required for the external backend");
    mmc::HttpBackendOptions opt;
    opt.endpoint = cfg.embedder_endpoint;
    return std::make_unique<mmc::ExternalEmbedder>(opt);
  }
  throw mmc::ConfigError("unknown embedder.backend: " + cfg.embedder_backend);
}

std::map<std::string, std::string> load_corpus_or_empty(const std::string& path) {
  if (path.empty()) return {};
  return mmc::load_corpus_index(path);
}

std::vector<std::string> split_categories(const std::string& split) {
  if (split.empty() || split == "train") return mmc::train_categories();
  if (split == "heldout") return mmc::default_heldout_eval();
  if (split == "all") {
    auto cats = mmc::train_categories();
    for (const auto& c : mmc::heldout_categories()) cats.push_back(c);
    return cats;
  }
  std::vector<std::string> out;
  std::string cur;
  for (const char ch : split + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(mmc::canonical_category(cur));
      cur.clear();
    } else if (ch != ' ') {
      cur.push_back(ch);
    }
  }
  if (out.empty()) throw mmc::InvalidArgument("empty split spec");
  return out;
}

int cmd_train(const std::string& config_path, const std::string& resume_ckpt) {
  const mmc::KVConfig kv = mmc::KVConfig::parse_file(config_path);
  const mmc::TrainConfig cfg = mmc::TrainConfig::from_config(kv);
  if (cfg.dataset_root.empty()) throw mmc::ConfigError("dataset.root is required to train");

  const auto corpus = load_corpus_or_empty(cfg.corpus_path);
  mmc::LoadStats stats;
  auto records = mmc::load_triples(cfg.dataset_root, cfg.categories(), mmc::SplitSpec::defaults(),
                                   cfg.corpus_path.empty() ? nullptr : &corpus, &stats);
  for (const auto& line : stats.log) std::cerr << line << "\n";
  std::cout << "records: " << records.size() << " (skipped " << stats.skipped << ")\n";

  auto embedder = make_embedder(cfg);
  mmc::Trainer<float> trainer(cfg, std::move(records), *embedder);
  if (!resume_ckpt.empty()) trainer.resume_from(resume_ckpt);
  const std::string ckpt = trainer.train();
  std::cout << "final checkpoint: " << ckpt << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& split, const std::string& out_csv,
             const std::string& root_override, const std::string& corpus_override, double tau) {
  const mmc::CheckpointData data = mmc::load_checkpoint(ckpt);
  mmc::TrainConfig cfg = mmc::TrainConfig::from_config(data.config, false);
  if (!root_override.empty()) cfg.dataset_root = root_override;
  if (!corpus_override.empty()) cfg.corpus_path = corpus_override;
  if (cfg.dataset_root.empty()) throw mmc::ConfigError("dataset root unknown; pass --root");
  if (tau > 0.0) cfg.eval_tau = tau;

  const auto corpus = load_corpus_or_empty(cfg.corpus_path);
  mmc::LoadStats stats;
  const auto records =
      mmc::load_triples(cfg.dataset_root, split_categories(split), mmc::SplitSpec::defaults(),
                        cfg.corpus_path.empty() ? nullptr : &corpus, &stats);
  for (const auto& line : stats.log) std::cerr << line << "\n";

  auto embedder = make_embedder(cfg);
  const mmc::MetricReport report =
      mmc::evaluate_checkpoint<float>(ckpt, records, *embedder, cfg.eval_tau);
  mmc::write_csv(out_csv, report);
  std::cout << mmc::to_csv(report);
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir) {
  const mmc::KVConfig kv = mmc::KVConfig::parse_file(config_path);
  mmc::TrainConfig cfg = mmc::TrainConfig::from_config(kv);
  if (cfg.dataset_root.empty()) throw mmc::ConfigError("dataset.root is required to ablate");
  cfg.out_dir = out_dir;

  const auto corpus = load_corpus_or_empty(cfg.corpus_path);
  mmc::LoadStats stats;
  auto records = mmc::load_triples(cfg.dataset_root, cfg.categories(), mmc::SplitSpec::defaults(),
                                   cfg.corpus_path.empty() ? nullptr : &corpus, &stats);
  for (const auto& line : stats.log) std::cerr << line << "\n";

  auto embedder = make_embedder(cfg);
  const auto results = mmc::run_ablation<float>(cfg, records, records, *embedder);
  const std::string csv = mmc::ablation_to_csv(results);
  const std::string csv_path = (std::filesystem::path(out_dir) / "summary.csv").string();
  std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
  if (!out) throw mmc::IoError("cannot write " + csv_path);
  out << csv;
  std::cout << csv;
  return 0;
}

int cmd_complete(const std::string& ckpt, const std::string& partial_path,
                 const std::string& image_path, const std::string& prompt,
                 const std::string& category, const std::string& out_path,
                 const std::string& plot_path) {
  const mmc::CheckpointData data = mmc::load_checkpoint(ckpt);
  const mmc::TrainConfig cfg = mmc::TrainConfig::from_config(data.config, false);

  // Inputs are validated before any output file is touched.
  const mmc::PointMatrix<double> partial = mmc::read_xyz<double>(partial_path);
  const mmc::RenderedImage image = mmc::load_render(image_path, 0);

  std::optional<std::string> explicit_prompt;
  if (!prompt.empty()) explicit_prompt = prompt;
  if (cfg.fusion.use_text_global && !explicit_prompt && category.empty())
    throw mmc::InvalidArgument(
        "the model uses text; pass --prompt or --category for the template fallback");

  auto embedder = make_embedder(cfg);
  mmc::CompletionRunner<float> runner(cfg, *embedder);
  runner.load_arrays(data);
  const mmc::PointMatrix<double> completed = runner.complete_cloud(
      partial, image, category.empty() ? std::string("object") : category, std::nullopt,
      explicit_prompt);
  mmc::write_xyz(out_path, completed);
  std::cout << "wrote " << completed.rows() << " points to " << out_path << "\n";
  if (!plot_path.empty()) {
    mmc::write_scatter_ppm(plot_path, completed);
    std::cout << "wrote plot to " << plot_path << "\n";
  }
  return 0;
}

int cmd_synth_gen(const std::string& out_root, int n_models, const std::string& categories,
                  std::uint64_t seed) {
  std::vector<std::string> cats;
  if (categories == "all" || categories.empty()) {
    cats = mmc::train_categories();
    for (const auto& c : mmc::heldout_categories()) cats.push_back(c);
  } else {
    cats = split_categories(categories);
  }
  const mmc::SynthStats stats = mmc::synth_generate(out_root, n_models, cats, seed);
  std::cout << "generated " << stats.models << " models (" << stats.files << " files) under "
            << out_root << "\n";
  return 0;
}

int cmd_corpus_build(const std::string& root, const std::string& out, const std::string& backend,
                     const std::string& replay_path, const std::string& endpoint,
                     std::uint64_t seed, bool resume) {
  std::unique_ptr<mmc::TextBackend> text;
  if (backend == "stub") {
    text = std::make_unique<mmc::StubTextBackend>(seed);
  } else if (backend == "replay") {
    if (replay_path.empty()) throw mmc::ConfigError("--replay FILE required for replay backend");
    text = std::make_unique<mmc::ReplayTextBackend>(replay_path);
  } else if (backend == "external") {
    if (endpoint.empty()) throw mmc::ConfigError("--endpoint URL required for external backend");
    mmc::HttpBackendOptions opt;
    opt.endpoint = endpoint;
    text = std::make_unique<mmc::ExternalTextBackend>(opt);
  } else {
    throw mmc::ConfigError("unknown corpus backend: " + backend);
  }
  const mmc::ComponentTaxonomy taxonomy = mmc::ComponentTaxonomy::default_taxonomy();
  const mmc::CorpusBuildStats stats = mmc::build_corpus(root, out, taxonomy, *text, seed, resume);
  for (const auto& line : stats.log) std::cerr << line << "\n";
  std::cout << "corpus: " << stats.written << " written, " << stats.reused << " reused, "
            << stats.skipped_no_renders + stats.skipped_backend << " skipped -> " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"text and image guided point cloud completion"};
  app.require_subcommand(1);

  std::string config_path, resume_ckpt;
  auto* train = app.add_subcommand("train", "train a completion model");
  train->add_option("--config", config_path, "key=value config file")->required();
  train->add_option("--resume", resume_ckpt, "checkpoint to resume from");

  std::string eval_ckpt, eval_split = "train", eval_out = "metrics.csv";
  std::string eval_root, eval_corpus;
  double eval_tau = 0.0;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--split", eval_split, "train | heldout | all | category list");
  eval->add_option("--out", eval_out, "output CSV path");
  eval->add_option("--root", eval_root, "dataset root override");
  eval->add_option("--corpus", eval_corpus, "corpus JSONL override");
  eval->add_option("--tau", eval_tau, "F-Score threshold override");

  std::string ablate_config, ablate_out = "ablation";
  auto* ablate = app.add_subcommand("ablate", "run the fusion ablation grid");
  ablate->add_option("--config", ablate_config, "key=value config file")->required();
  ablate->add_option("--out", ablate_out, "output directory")->required();

  std::string c_ckpt, c_partial, c_image, c_prompt, c_category, c_out = "completed.xyz", c_plot;
  auto* complete = app.add_subcommand("complete", "complete one partial cloud");
  complete->add_option("--ckpt", c_ckpt, "checkpoint file")->required();
  complete->add_option("--partial", c_partial, "partial cloud XYZ file")->required();
  complete->add_option("--image", c_image, "render image file")->required();
  complete->add_option("--prompt", c_prompt, "text prompt");
  complete->add_option("--category", c_category, "category for the template prompt fallback");
  complete->add_option("--out", c_out, "output XYZ path");
  complete->add_option("--plot", c_plot, "optional scatter plot PPM path");

  std::string sg_out = "synthetic", sg_categories = "all";
  int sg_models = 4;
  std::uint64_t sg_seed = 0;
  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic dataset");
  synth->add_option("--out", sg_out, "output dataset root");
  synth->add_option("--models", sg_models, "models per category");
  synth->add_option("--categories", sg_categories, "category list or 'all'");
  synth->add_option("--seed", sg_seed, "generator seed");

  auto* corpus = app.add_subcommand("corpus", "corpus tooling");
  corpus->require_subcommand(1);
  std::string cb_root, cb_out = "corpus.jsonl", cb_backend = "stub", cb_replay, cb_endpoint;
  std::uint64_t cb_seed = 0;
  bool cb_resume = false;
  auto* corpus_build = corpus->add_subcommand("build", "build descriptions for a dataset");
  corpus_build->add_option("--root", cb_root, "dataset root")->required();
  corpus_build->add_option("--out", cb_out, "output JSONL path");
  corpus_build->add_option("--backend", cb_backend, "stub | replay | external");
  corpus_build->add_option("--replay", cb_replay, "replay transcript JSONL");
  corpus_build->add_option("--endpoint", cb_endpoint, "external backend endpoint");
  corpus_build->add_option("--seed", cb_seed, "view and stub seed");
  corpus_build->add_flag("--resume", cb_resume, "reuse entries already in the output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config_path, resume_ckpt);
    if (*eval) return cmd_eval(eval_ckpt, eval_split, eval_out, eval_root, eval_corpus, eval_tau);
    if (*ablate) return cmd_ablate(ablate_config, ablate_out);
    if (*complete)
      return cmd_complete(c_ckpt, c_partial, c_image, c_prompt, c_category, c_out, c_plot);
    if (*synth) return cmd_synth_gen(sg_out, sg_models, sg_categories, sg_seed);
    if (*corpus_build)
      return cmd_corpus_build(cb_root, cb_out, cb_backend, cb_replay, cb_endpoint, cb_seed,
                              cb_resume);
  } catch (const mmc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
