#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "mmc/dataset.hpp"
#include "mmc/image.hpp"
#include "mmc/synth.hpp"
#include "mmc/taxonomy.hpp"
#include "mmc/xyz.hpp"
#include "test_support.hpp"

using namespace mmc;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(bool(in));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

/// True when `partial` is a subsequence of `gt`'s rows (original order).
bool is_row_subsequence(const PointMatrix<double>& partial, const PointMatrix<double>& gt) {
  Index j = 0;
  for (Index i = 0; i < gt.rows() && j < partial.rows(); ++i)
    if (partial(j, 0) == gt(i, 0) && partial(j, 1) == gt(i, 1) && partial(j, 2) == gt(i, 2)) ++j;
  return j == partial.rows();
}

/// Writes a minimal loadable model: gt.xyz (2048 points) + partial.xyz.
void write_fake_model(const fs::path& dir, std::uint64_t seed) {
  fs::create_directories(dir);
  const auto gt = mmc_test::random_cloud(seed, 2048);
  write_xyz((dir / "gt.xyz").string(), gt);
  const PointMatrix<double> partial = gt.topRows(1200);
  write_xyz((dir / "partial.xyz").string(), partial);
}

}  // namespace

TEST_SUITE("synthetic dataset generator") {

TEST_CASE("two runs with the same arguments are byte-identical") {
  mmc_test::TempDir dir("synth_det");
  const SynthStats a = synth_generate(dir.sub("a"), 4, {"chair"}, 3);
  const SynthStats b = synth_generate(dir.sub("b"), 4, {"chair"}, 3);
  CHECK(a.models == 4);
  CHECK(a.files == 4 * 26);  // gt + partial + 24 renders per model
  CHECK(b.models == 4);
  CHECK(mmc_test::tree_hash(dir.sub("a")) == mmc_test::tree_hash(dir.sub("b")));

  const SynthStats c = synth_generate(dir.sub("c"), 4, {"chair"}, 4);
  CHECK(mmc_test::tree_hash(dir.sub("a")) != mmc_test::tree_hash(dir.sub("c")));
}

TEST_CASE("generated models satisfy the dataset invariants") {
  mmc_test::TempDir dir("synth_inv");
  synth_generate(dir.str(), 3, {"chair", "lamp"}, 11);

  for (const std::string& category : {std::string("chair"), std::string("lamp")}) {
    for (int m = 0; m < 3; ++m) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%04d", category.c_str(), m);
      const fs::path model_dir = fs::path(dir.str()) / category / id;

      const auto gt = read_xyz<double>((model_dir / "gt.xyz").string());
      REQUIRE(gt.rows() == 2048);
      const double max_abs = gt.cwiseAbs().maxCoeff();
      CHECK(max_abs <= 1.0 + 1e-9);  // unit-normalized at generation
      CHECK(max_abs >= 0.999);

      const auto partial = read_xyz<double>((model_dir / "partial.xyz").string());
      CHECK(partial.rows() >= 1024);
      CHECK(partial.rows() <= 1536);
      CHECK(is_row_subsequence(partial, gt));

      for (int v = 0; v < kViewCount; ++v) {
        char name[32];
        std::snprintf(name, sizeof(name), "render_%02d.img", v);
        const RenderedImage img = load_render((model_dir / name).string(), v);
        CHECK(img.channels[0].maxCoeff() > 0.25f);  // something was splatted
        CHECK(img.channels[0].minCoeff() >= 0.0f);
        CHECK(img.channels[0].maxCoeff() <= 1.0f);
      }
    }
  }
}

TEST_CASE("split files list every generated model id") {
  mmc_test::TempDir dir("synth_splits");
  synth_generate(dir.str(), 5, {"chair", "table"}, 2);

  const auto all = read_lines(dir.sub("splits/all.txt"));
  CHECK(all.size() == 10);
  const auto chairs = read_lines(dir.sub("splits/chair.txt"));
  REQUIRE(chairs.size() == 5);
  CHECK(chairs[0] == "chair_0000");
  CHECK(chairs[4] == "chair_0004");
  for (const auto& id : chairs)
    CHECK(fs::is_directory(fs::path(dir.str()) / "chair" / id));
}

TEST_CASE("every category in the taxonomy generates and loads back") {
  mmc_test::TempDir dir("synth_all_cats");
  std::vector<std::string> cats = train_categories();
  for (const auto& c : heldout_categories()) cats.push_back(c);
  REQUIRE(cats.size() == 13);
  synth_generate(dir.str(), 1, cats, 5);

  SplitSpec split;
  split.train_cats = cats;
  LoadStats stats;
  const auto records = load_triples(dir.str(), cats, split, nullptr, &stats);
  CHECK(records.size() == 13);
  CHECK(stats.loaded == 13);
  CHECK(stats.skipped == 0);
}

TEST_CASE("category aliases and bad arguments are rejected up front") {
  mmc_test::TempDir dir("synth_args");
  CHECK_THROWS_AS(synth_generate(dir.sub("x"), 0, {"chair"}, 1), InvalidArgument);
  CHECK_THROWS_AS(synth_generate(dir.sub("x"), 1, {}, 1), InvalidArgument);
  CHECK_THROWS_AS(synth_generate(dir.sub("x"), 1, {"zeppelin"}, 1), TaxonomyError);

  synth_generate(dir.sub("alias"), 1, {"phone"}, 1);
  CHECK(fs::is_directory(fs::path(dir.sub("alias")) / "cellphone"));
}

}  // TEST_SUITE

TEST_SUITE("dataset loading") {

TEST_CASE("id allow-lists filter the loaded records") {
  mmc_test::TempDir dir("load_filter");
  for (int m = 0; m < 12; ++m) {
    char id[32];
    std::snprintf(id, sizeof(id), "chair_%04d", m);
    write_fake_model(fs::path(dir.str()) / "chair" / id, 100 + m);
  }

  SplitSpec split = SplitSpec::defaults();
  for (int m = 0; m < 8; ++m) {
    char id[32];
    std::snprintf(id, sizeof(id), "chair_%04d", m);
    split.ids["chair"].insert(id);
  }

  const auto records = load_triples(dir.str(), {"chair"}, split, nullptr);
  REQUIRE(records.size() == 8);
  for (std::size_t i = 0; i < records.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "chair_%04d", static_cast<int>(i));
    CHECK(records[i].model_id == id);
    CHECK(records[i].category == "chair");
    CHECK(records[i].renders.size() == 24);
    CHECK_FALSE(records[i].text.has_value());
  }
}

TEST_CASE("a corrupt model is skipped with a log record") {
  mmc_test::TempDir dir("load_skip");
  const fs::path seed_model = fs::path(dir.str()) / "chair" / "chair_0000";
  write_fake_model(seed_model, 1);
  for (int m = 1; m < 104; ++m) {
    char id[32];
    std::snprintf(id, sizeof(id), "chair_%04d", m);
    const fs::path dst = fs::path(dir.str()) / "chair" / id;
    fs::create_directories(dst);
    fs::copy_file(seed_model / "gt.xyz", dst / "gt.xyz");
    fs::copy_file(seed_model / "partial.xyz", dst / "partial.xyz");
  }
  {
    std::ofstream out(fs::path(dir.str()) / "chair" / "chair_0050" / "gt.xyz",
                      std::ios::trunc);
    out << "this is not a point\n";
  }

  LoadStats stats;
  const auto records = load_triples(dir.str(), {"chair"}, SplitSpec::defaults(), nullptr, &stats);
  CHECK(records.size() == 103);
  CHECK(stats.loaded == 103);
  CHECK(stats.skipped == 1);
  REQUIRE(stats.log.size() == 1);
  CHECK(stats.log[0].find("chair_0050") != std::string::npos);
  for (const auto& r : records) CHECK(r.model_id != "chair_0050");
}

TEST_CASE("a skip rate above one percent aborts the load") {
  mmc_test::TempDir dir("load_abort");
  const fs::path seed_model = fs::path(dir.str()) / "chair" / "chair_0000";
  write_fake_model(seed_model, 2);
  for (int m = 1; m < 50; ++m) {
    char id[32];
    std::snprintf(id, sizeof(id), "chair_%04d", m);
    const fs::path dst = fs::path(dir.str()) / "chair" / id;
    fs::create_directories(dst);
    fs::copy_file(seed_model / "gt.xyz", dst / "gt.xyz");
    fs::copy_file(seed_model / "partial.xyz", dst / "partial.xyz");
  }
  {
    std::ofstream out(fs::path(dir.str()) / "chair" / "chair_0025" / "gt.xyz",
                      std::ios::trunc);
    out << "garbage\n";
  }
  CHECK_THROWS_AS(load_triples(dir.str(), {"chair"}, SplitSpec::defaults(), nullptr), IoError);
}

TEST_CASE("corpus text joins by model id") {
  mmc_test::TempDir dir("load_text");
  write_fake_model(fs::path(dir.str()) / "chair" / "chair_0000", 3);
  write_fake_model(fs::path(dir.str()) / "chair" / "chair_0001", 4);

  std::map<std::string, std::string> corpus = {{"chair_0000", "This is a brown chair."}};
  LoadStats stats;
  const auto records =
      load_triples(dir.str(), {"chair"}, SplitSpec::defaults(), &corpus, &stats);
  REQUIRE(records.size() == 2);
  REQUIRE(records[0].text.has_value());
  CHECK(*records[0].text == "This is a brown chair.");
  CHECK_FALSE(records[1].text.has_value());
  CHECK(stats.missing_text == 1);
}

TEST_CASE("missing root and overlapping splits are rejected") {
  CHECK_THROWS_AS(load_triples("/nonexistent/root", {"chair"}, SplitSpec::defaults(), nullptr),
                  IoError);
  SplitSpec bad = SplitSpec::defaults();
  bad.heldout_cats.push_back("chair");
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("streaming loader bounds resident records at the prefetch depth") {
  mmc_test::TempDir dir("load_stream");
  for (int m = 0; m < 10; ++m) {
    char id[32];
    std::snprintf(id, sizeof(id), "chair_%04d", m);
    write_fake_model(fs::path(dir.str()) / "chair" / id, 200 + m);
  }

  TripleStream stream(dir.str(), {"chair"}, SplitSpec::defaults(), nullptr, 3);
  std::this_thread::sleep_for(std::chrono::milliseconds(100));  // let the queue fill

  int pulled = 0;
  std::string last_id;
  while (auto rec = stream.next()) {
    CHECK(rec->model_id > last_id);  // sorted order
    last_id = rec->model_id;
    ++pulled;
  }
  CHECK(pulled == 10);
  CHECK(stream.peak_resident() >= 1);
  CHECK(stream.peak_resident() <= 3);
  CHECK(stream.stats().loaded == 10);
}

TEST_CASE("abandoning a stream mid-way shuts down cleanly") {
  mmc_test::TempDir dir("load_stream_drop");
  for (int m = 0; m < 6; ++m) {
    char id[32];
    std::snprintf(id, sizeof(id), "chair_%04d", m);
    write_fake_model(fs::path(dir.str()) / "chair" / id, 300 + m);
  }
  TripleStream stream(dir.str(), {"chair"}, SplitSpec::defaults(), nullptr, 2);
  CHECK(stream.next().has_value());
  // destructor must cancel the producer without deadlocking
}

}  // TEST_SUITE

TEST_SUITE("view selection") {

TEST_CASE("evaluation mode always selects the canonical view") {
  for (int e = 0; e < 5; ++e)
    CHECK(pick_view("chair_0001", 9, static_cast<std::uint64_t>(e), true) == 0);
}

TEST_CASE("training views are deterministic in (model, seed, epoch)") {
  const int v = pick_view("chair_0001", 9, 3, false);
  CHECK(v == pick_view("chair_0001", 9, 3, false));
  CHECK(v >= 0);
  CHECK(v < 24);

  bool epoch_changes = false;
  for (std::uint64_t e = 0; e < 16 && !epoch_changes; ++e)
    epoch_changes = pick_view("chair_0001", 9, e, false) != v;
  CHECK(epoch_changes);
}

TEST_CASE("training views are uniform across seeds") {
  // chi-squared over 24 bins, df=23: critical value 41.638 at p=0.01
  std::vector<int> bins(24, 0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed)
    ++bins[static_cast<std::size_t>(pick_view("chair_0007", seed, 2, false))];
  const double expected = 1000.0 / 24.0;
  double chi2 = 0.0;
  for (const int count : bins) {
    const double d = count - expected;
    chi2 += d * d / expected;
  }
  INFO("chi2 = ", chi2);
  CHECK(chi2 < 41.638);
}

}  // TEST_SUITE
