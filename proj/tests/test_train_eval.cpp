#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mmc/evaluate.hpp"
#include "mmc/synth.hpp"
#include "mmc/train.hpp"
#include "test_support.hpp"

using namespace mmc;
namespace fs = std::filesystem;

namespace {

FusionConfig toy_fusion() {
  FusionConfig f;
  f.channels = 8;
  f.tokens = 4;
  f.attention_heads = 2;
  f.output_points = 16;
  f.input_points = 8;
  f.knn = 4;
  f.fuse_hidden = 16;
  f.point_hidden = 8;
  return f;
}

TrainConfig toy_train_config(const std::string& out_dir) {
  TrainConfig cfg;
  cfg.fusion = toy_fusion();
  cfg.epochs = 5;
  cfg.batch_size = 4;
  cfg.checkpoint_every = 2;
  cfg.seed = 11;
  cfg.out_dir = out_dir;
  return cfg;
}

std::vector<TripleRecord> toy_records(const std::string& root, int models) {
  synth_generate(root, models, {"chair"}, 21);
  return load_triples(root, {"chair"}, SplitSpec::defaults(), nullptr);
}

/// In-memory records for metric-only tests; no files involved.
std::vector<TripleRecord> fake_records() {
  std::vector<TripleRecord> records;
  int i = 0;
  for (const std::string& category : {"chair", "chair", "table"}) {
    TripleRecord rec;
    rec.model_id = category + "_" + std::to_string(i);
    rec.category = category;
    rec.gt = mmc_test::random_cloud(40 + i, 64);
    rec.partial = rec.gt.topRows(32);
    rec.renders.assign(24, "unused.img");
    records.push_back(std::move(rec));
    ++i;
  }
  return records;
}

}  // namespace

TEST_SUITE("train configuration") {

TEST_CASE("the reference optimizer settings are preserved") {
  const TrainConfig ref = TrainConfig::reference_defaults();
  CHECK(ref.lr == 0.00209);
  CHECK(ref.epochs == 400);
  CHECK(ref.batch_size == 560);
  CHECK(ref.beta1 == 0.9);
  CHECK(ref.beta2 == 0.999);
  CHECK(ref.eps == 1e-8);
  CHECK(ref.optimizer_name == "adam");
}

TEST_CASE("configs round-trip losslessly through key=value text") {
  TrainConfig cfg;
  cfg.lr = 0.00209;
  cfg.epochs = 42;
  cfg.batch_size = 7;
  cfg.seed = 913;
  cfg.checkpoint_every = 3;
  cfg.out_dir = "runs/x";
  cfg.fusion = toy_fusion();
  cfg.fusion.use_rich_text = true;
  cfg.dataset_root = "/data";
  cfg.dataset_categories = "chair,table";
  cfg.corpus_path = "corpus.jsonl";
  cfg.eval_tau = 0.5;

  KVConfig kv;
  kv.parse_string(cfg.to_config().serialize(), "round-trip");
  const TrainConfig back = TrainConfig::from_config(kv, /*apply_env_seed=*/false);
  CHECK(back.lr == cfg.lr);
  CHECK(back.epochs == cfg.epochs);
  CHECK(back.batch_size == cfg.batch_size);
  CHECK(back.seed == cfg.seed);
  CHECK(back.checkpoint_every == cfg.checkpoint_every);
  CHECK(back.out_dir == cfg.out_dir);
  CHECK(back.fusion.channels == cfg.fusion.channels);
  CHECK(back.fusion.use_rich_text == cfg.fusion.use_rich_text);
  CHECK(back.dataset_categories == cfg.dataset_categories);
  CHECK(back.eval_tau == cfg.eval_tau);
  CHECK(back.to_config().serialize() == cfg.to_config().serialize());
}

TEST_CASE("the environment seed wins only when asked to") {
  KVConfig kv;
  kv.set_int("train.seed", 5);
  setenv("MMC_SEED", "77", 1);
  CHECK(TrainConfig::from_config(kv).seed == 77);
  CHECK(TrainConfig::from_config(kv, /*apply_env_seed=*/false).seed == 5);
  unsetenv("MMC_SEED");
  CHECK(TrainConfig::from_config(kv).seed == 5);
}

TEST_CASE("invalid settings are rejected") {
  TrainConfig cfg;
  cfg.optimizer_name = "sgd";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig();
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = TrainConfig();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("category lists parse with aliases and defaults") {
  TrainConfig cfg;
  CHECK(cfg.categories() == train_categories());
  cfg.dataset_categories = "chair, zeppelin";
  CHECK_THROWS_AS(cfg.categories(), TaxonomyError);
  cfg.dataset_categories = "chair, phone ,table";
  const std::vector<std::string> want = {"chair", "cellphone", "table"};
  CHECK(cfg.categories() == want);
}

}  // TEST_SUITE

TEST_SUITE("training loop") {

TEST_CASE("a short run writes ledger events and verifiable checkpoints") {
  mmc_test::TempDir dir("train_short");
  const auto records = toy_records(dir.sub("data"), 6);
  REQUIRE(records.size() == 6);
  const TrainConfig cfg = toy_train_config(dir.sub("run"));

  StubEmbedder embedder(0);
  Trainer<float> trainer(cfg, records, embedder);
  const std::string final_ckpt = trainer.train();
  CHECK(fs::path(final_ckpt).filename().string() == "ckpt_epoch_0005.mmck");
  CHECK(fs::exists(final_ckpt));

  const std::string ledger_path = dir.sub("run/ledger.jsonl");
  const auto events = RunLedger::read(ledger_path);
  REQUIRE(events.size() == 9);  // config + 5 epochs + checkpoints at 2, 4, 5
  CHECK(events[0].at("event") == "config");
  CHECK(events[0].at("records") == 6);

  int epoch_events = 0, ckpt_events = 0;
  double last_loss = 0.0;
  for (const auto& e : events) {
    if (e.at("event") == "epoch") {
      ++epoch_events;
      CHECK(e.at("samples") == 6);
      CHECK(e.at("batches") == 2);  // batch size 4 over 6 samples
      last_loss = e.at("mean_loss").get<double>();
      CHECK(std::isfinite(last_loss));
      CHECK(last_loss > 0.0);
    } else if (e.at("event") == "checkpoint") {
      ++ckpt_events;
    }
  }
  CHECK(epoch_events == 5);
  CHECK(ckpt_events == 3);

  verify_ledger(ledger_path);

  // tampering with a checkpoint must break verification
  {
    std::fstream f(final_ckpt, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  CHECK_THROWS_AS(verify_ledger(ledger_path), IoError);
}

TEST_CASE("two identical runs produce identical ledgers and checkpoints") {
  mmc_test::TempDir dir("train_det");
  const auto records = toy_records(dir.sub("data"), 5);
  const TrainConfig cfg = toy_train_config(dir.sub("run"));

  auto run_once = [&]() {
    StubEmbedder embedder(0);
    Trainer<float> trainer(cfg, records, embedder);
    trainer.train();
    std::map<std::string, std::string> bytes;
    for (const auto& e : fs::directory_iterator(dir.sub("run"))) {
      const std::string name = e.path().filename().string();
      if (name == "timing.log") continue;  // wall clock, intentionally excluded
      bytes[name] = mmc_test::read_file(e.path().string());
    }
    fs::remove_all(dir.sub("run"));
    return bytes;
  };

  const auto first = run_once();
  const auto second = run_once();
  REQUIRE(first.size() == second.size());
  REQUIRE(first.count("ledger.jsonl") == 1);
  REQUIRE(first.count("ckpt_epoch_0005.mmck") == 1);
  for (const auto& [name, data] : first) {
    INFO("artifact ", name);
    CHECK(data == second.at(name));
  }
}

TEST_CASE("a resumed run continues bit-for-bit") {
  mmc_test::TempDir dir("train_resume");
  const auto records = toy_records(dir.sub("data"), 5);
  TrainConfig cfg = toy_train_config(dir.sub("run"));
  cfg.epochs = 6;

  StubEmbedder embedder(0);

  // uninterrupted reference run
  std::string full_final;
  {
    Trainer<float> trainer(cfg, records, embedder);
    full_final = trainer.train();
  }
  const std::string full_bytes = mmc_test::read_file(full_final);
  std::map<int, double> full_losses;
  for (const auto& e : RunLedger::read(dir.sub("run/ledger.jsonl")))
    if (e.at("event") == "epoch")
      full_losses[e.at("epoch").get<int>()] = e.at("mean_loss").get<double>();
  fs::remove_all(dir.sub("run"));

  // interrupted run: stops after epoch 2's checkpoint
  TrainConfig short_cfg = cfg;
  short_cfg.epochs = 2;
  {
    Trainer<float> trainer(short_cfg, records, embedder);
    trainer.train();
  }

  // resume with the full-length config from the epoch-2 checkpoint
  Trainer<float> resumed(cfg, records, embedder);
  resumed.resume_from(dir.sub("run/ckpt_epoch_0002.mmck"));
  CHECK(resumed.start_epoch() == 3);
  const std::string resumed_final = resumed.train();

  CHECK(fs::path(resumed_final).filename().string() == "ckpt_epoch_0006.mmck");
  CHECK(mmc_test::read_file(resumed_final) == full_bytes);

  std::map<int, double> resumed_losses;
  for (const auto& e : RunLedger::read(dir.sub("run/ledger.jsonl")))
    if (e.at("event") == "epoch")
      resumed_losses[e.at("epoch").get<int>()] = e.at("mean_loss").get<double>();
  for (int epoch = 3; epoch <= 6; ++epoch) {
    INFO("epoch ", epoch);
    CHECK(resumed_losses.at(epoch) == full_losses.at(epoch));
  }
}

TEST_CASE("resume rejects a checkpoint from a different architecture") {
  mmc_test::TempDir dir("train_resume_bad");
  const auto records = toy_records(dir.sub("data"), 4);
  TrainConfig cfg = toy_train_config(dir.sub("run"));
  cfg.epochs = 2;

  StubEmbedder embedder(0);
  {
    Trainer<float> trainer(cfg, records, embedder);
    trainer.train();
  }

  TrainConfig other = cfg;
  other.fusion.fuse_stage2 = false;
  Trainer<float> mismatched(other, records, embedder);
  CHECK_THROWS_AS(mismatched.resume_from(dir.sub("run/ckpt_epoch_0002.mmck")), ConfigError);
}

TEST_CASE("a non-finite forward pass aborts with a weight report") {
  mmc_test::TempDir dir("train_abort");
  const auto records = toy_records(dir.sub("data"), 4);
  const TrainConfig cfg = toy_train_config(dir.sub("run"));

  StubEmbedder embedder(0);
  Trainer<float> trainer(cfg, records, embedder);
  // poison the decoder so only the final prediction goes non-finite
  trainer.model().params().back().value->setConstant(
      std::numeric_limits<float>::quiet_NaN());

  try {
    trainer.train();
    FAIL("training with poisoned weights must abort");
  } catch (const TrainingAborted& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
    CHECK(msg.find("weight norms") != std::string::npos);
    CHECK(msg.find("decoder") != std::string::npos);  // parameter table lists names
  }
}

TEST_CASE("an empty record set is rejected") {
  StubEmbedder embedder(0);
  const TrainConfig cfg = toy_train_config("unused");
  CHECK_THROWS_AS(Trainer<float>(cfg, {}, embedder), EmptyInput);
}

}  // TEST_SUITE

TEST_SUITE("evaluation") {

TEST_CASE("an echo-of-ground-truth predictor scores perfectly") {
  const auto records = fake_records();
  const MetricReport report = evaluate_records(
      [](const TripleRecord& rec) { return rec.gt; }, records, 0.001);
  CHECK(report.normalization == "gt-unit");
  CHECK(report.mean.mean_cd_e3 == 0.0);
  CHECK(report.mean.fscore == 1.0);
  CHECK(report.mean.n == 3);
  CHECK(report.per_category.at("chair").n == 2);
  CHECK(report.per_category.at("table").n == 1);
}

TEST_CASE("a single-point predictor matches the closed-form distance") {
  const auto records = fake_records();
  // predict the gt bounding-box center: it lands at the origin in gt-unit coords
  const MetricReport report = evaluate_records(
      [](const TripleRecord& rec) {
        PointMatrix<double> p(1, 3);
        p.row(0) = unit_transform(rec.gt).center;
        return p;
      },
      records, 0.001);

  std::map<std::string, std::pair<double, int>> want;  // category -> (cd sum, n)
  for (const auto& rec : records) {
    const PointMatrix<double> gt_n = normalize_unit(rec.gt);
    const double mean_sq = gt_n.rowwise().squaredNorm().mean();
    const double min_sq = gt_n.rowwise().squaredNorm().minCoeff();
    auto& slot = want[rec.category];
    slot.first += 1e3 * (mean_sq + min_sq);
    slot.second += 1;
  }
  for (const auto& [category, slot] : want) {
    INFO("category ", category);
    CHECK(report.per_category.at(category).mean_cd_e3 ==
          doctest::Approx(slot.first / slot.second).epsilon(1e-12));
  }
  CHECK(report.mean.fscore == 0.0);  // tau far below any gt spacing
}

TEST_CASE("a generous tolerance saturates the f-score") {
  const auto records = fake_records();
  const MetricReport report = evaluate_records(
      [](const TripleRecord& rec) {
        PointMatrix<double> p(1, 3);
        p.row(0) = unit_transform(rec.gt).center;
        return p;
      },
      records, 10.0);
  CHECK(report.mean.fscore == 1.0);
}

TEST_CASE("improvement percentages reproduce the published study tables") {
  struct CdRow {
    double cd, improv;
  };
  const double cd_base = 1.443;
  const CdRow cd_rows[] = {{1.206, 16.42}, {1.251, 13.31}, {1.190, 17.53},
                           {1.188, 17.67}, {1.181, 18.16}, {1.159, 19.68}};
  for (const auto& row : cd_rows) {
    INFO("cd row ", row.cd);
    CHECK(std::abs(cd_improvement_pct(cd_base, row.cd) - row.improv) < 0.02);
  }

  const double f_base = 0.796;
  const CdRow f_rows[] = {{0.835, 4.90}, {0.823, 3.39}, {0.831, 4.40},
                          {0.836, 5.03}, {0.838, 5.28}, {0.842, 5.78}};
  for (const auto& row : f_rows) {
    INFO("fscore row ", row.cd);
    CHECK(std::abs(fscore_improvement_pct(f_base, row.cd) - row.improv) < 0.02);
  }

  CHECK_THROWS_AS(cd_improvement_pct(0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(fscore_improvement_pct(0.0, 1.0), InvalidArgument);
}

TEST_CASE("checkpoint evaluation is reproducible and side-effect free") {
  mmc_test::TempDir dir("eval_ckpt");
  const auto records = toy_records(dir.sub("data"), 4);
  TrainConfig cfg = toy_train_config(dir.sub("run"));
  cfg.epochs = 2;

  StubEmbedder embedder(0);
  std::string ckpt;
  {
    Trainer<float> trainer(cfg, records, embedder);
    ckpt = trainer.train();
  }
  const std::uint64_t hash_before = file_hash(ckpt);

  const MetricReport a = evaluate_checkpoint<float>(ckpt, records, embedder, 0.05);
  const MetricReport b = evaluate_checkpoint<float>(ckpt, records, embedder, 0.05);
  CHECK(to_csv(a) == to_csv(b));
  CHECK(a.mean.n == 4);
  CHECK(std::isfinite(a.mean.mean_cd_e3));
  CHECK(file_hash(ckpt) == hash_before);

  // the saved seed governs evaluation; the environment override must not
  setenv("MMC_SEED", "9999", 1);
  const CompletionRunner<float> runner = runner_from_checkpoint<float>(ckpt, embedder);
  unsetenv("MMC_SEED");
  CHECK(runner.config().seed == cfg.seed);
}

TEST_CASE("completion accepts raw pieces and explicit prompt overrides") {
  mmc_test::TempDir dir("eval_complete");
  const auto records = toy_records(dir.sub("data"), 2);
  TrainConfig cfg = toy_train_config(dir.sub("run"));
  cfg.epochs = 1;

  StubEmbedder embedder(0);
  std::string ckpt;
  {
    Trainer<float> trainer(cfg, records, embedder);
    ckpt = trainer.train();
  }
  CompletionRunner<float> runner = runner_from_checkpoint<float>(ckpt, embedder);

  const RenderedImage img = load_render(records[0].renders[0], 0);
  const PointMatrix<double> a =
      runner.complete_cloud(records[0].partial, img, "chair", std::nullopt);
  CHECK(a.rows() == cfg.fusion.output_points);
  CHECK(a.allFinite());

  const PointMatrix<double> b =
      runner.complete_cloud(records[0].partial, img, "chair", std::nullopt, "a wooden chair");
  CHECK(a != b);  // the explicit prompt reaches the text global

  const PointMatrix<double> c =
      runner.complete_cloud(records[0].partial, img, "chair", std::nullopt, "a wooden chair");
  CHECK(b == c);
}

}  // TEST_SUITE

TEST_SUITE("ablation study") {

TEST_CASE("the grid covers the published study rows") {
  const auto grid = ablation_grid();
  REQUIRE(grid.size() == 7);
  CHECK(grid[0].name == "baseline");
  CHECK_FALSE(grid[0].visual);
  CHECK_FALSE(grid[0].text);
  CHECK(grid[1].name == "visual");
  CHECK(grid[1].visual);
  CHECK_FALSE(grid[1].text);
  CHECK(grid[2].name == "text");
  CHECK(grid[2].text);
  CHECK(grid[3].name == "both_stage1");
  CHECK(grid[3].stage1);
  CHECK_FALSE(grid[3].stage2);
  CHECK(grid[4].name == "both_stage2");
  CHECK_FALSE(grid[4].stage1);
  CHECK(grid[4].stage2);
  CHECK(grid[5].name == "both_stages");
  CHECK(grid[5].stage1);
  CHECK(grid[5].stage2);
  CHECK(grid[6].name == "final_rich");
  CHECK(grid[6].rich);

  TrainConfig base = toy_train_config("runs/ablate");
  const TrainConfig applied = grid[6].apply(base);
  CHECK(applied.fusion.use_rich_text);
  CHECK(applied.out_dir == (fs::path("runs/ablate") / "final_rich").string());
}

TEST_CASE("the summary table reports improvements against the baseline") {
  std::vector<AblationResult> results(2);
  results[0].name = "baseline";
  results[0].parameter_count = 1000;
  results[0].report.mean.mean_cd_e3 = 2.0;
  results[0].report.mean.fscore = 0.5;
  results[1].name = "both_stages";
  results[1].parameter_count = 1500;
  results[1].report.mean.mean_cd_e3 = 1.0;
  results[1].report.mean.fscore = 0.75;

  const std::string csv = ablation_to_csv(results);
  CHECK(csv.find("row,params,mean_cd_e3,cd_improv_pct,fscore,f_improv_pct\n") == 0);
  CHECK(csv.find("baseline,1000,2,0.00,0.5,0.00\n") != std::string::npos);
  CHECK(csv.find("both_stages,1500,1,50.00,0.75,50.00\n") != std::string::npos);

  results[0].name = "not_baseline";
  CHECK_THROWS_AS(ablation_to_csv(results), InvalidArgument);
}

TEST_CASE("scatter plots serialize as valid binary PPM") {
  mmc_test::TempDir dir("scatter");
  const auto cloud = mmc_test::random_cloud(5, 200);
  write_scatter_ppm(dir.sub("cloud.ppm"), cloud, 64);
  const std::string data = mmc_test::read_file(dir.sub("cloud.ppm"));
  const std::string header = "P6\n64 64\n255\n";
  REQUIRE(data.size() == header.size() + 64 * 64 * 3);
  CHECK(data.compare(0, header.size(), header) == 0);
  bool lit = false;
  for (std::size_t i = header.size(); i < data.size(); ++i)
    if (data[i] != '\0') lit = true;
  CHECK(lit);

  CHECK_THROWS_AS(write_scatter_ppm(dir.sub("bad.ppm"), cloud, 4), InvalidArgument);
}

}  // TEST_SUITE
