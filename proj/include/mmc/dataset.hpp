#ifndef MMC_DATASET_HPP
#define MMC_DATASET_HPP

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "mmc/geometry.hpp"
#include "mmc/hash.hpp"
#include "mmc/image.hpp"
#include "mmc/taxonomy.hpp"
#include "mmc/types.hpp"
#include "mmc/xyz.hpp"

namespace mmc {

inline constexpr int kGtPoints = 2048;

/// One dataset sample: partial cloud, complete cloud, the 24 render paths,
/// and optionally a corpus description.
struct TripleRecord {
  std::string model_id;
  std::string category;
  PointMatrix<double> partial;
  PointMatrix<double> gt;
  std::vector<std::string> renders;  // exactly 24 paths, view order
  std::optional<std::string> text;

  void validate(const ComponentTaxonomy& taxonomy) const {
    if (gt.rows() != kGtPoints)
      throw InvalidInput(model_id + ": gt must have exactly 2048 points");
    if (partial.rows() == 0) throw InvalidInput(model_id + ": empty partial cloud");
    if (!gt.allFinite() || !partial.allFinite())
      throw InvalidInput(model_id + ": non-finite coordinates");
    if (renders.size() != static_cast<std::size_t>(kViewCount))
      throw InvalidInput(model_id + ": expected 24 renders");
    if (!taxonomy.has(category)) throw TaxonomyError(model_id + ": unknown category " + category);
  }
};

/// Category partition plus optional per-category id allow-lists.
struct SplitSpec {
  std::vector<std::string> train_cats;
  std::vector<std::string> eval_cats;
  std::vector<std::string> heldout_cats;
  std::map<std::string, std::set<std::string>> ids;  // empty set = take all

  void validate() const {
    for (const auto& c : train_cats)
      if (std::find(heldout_cats.begin(), heldout_cats.end(), c) != heldout_cats.end())
        throw InvalidArgument("split: category both trained and held out: " + c);
  }

  static SplitSpec defaults() {
    SplitSpec s;
    s.train_cats = train_categories();
    s.eval_cats = train_categories();
    s.heldout_cats = default_heldout_eval();
    return s;
  }
};

/// Per-(seed, epoch, model) view choice: uniform over the 24 views in train
/// mode, always view 0 in evaluation mode.
inline int pick_view(const std::string& model_id, std::uint64_t seed, std::uint64_t epoch,
                     bool eval_mode) {
  if (eval_mode) return 0;
  std::mt19937_64 rng(mix_u64(mix_u64(seed, epoch), fnv1a(model_id)));
  return static_cast<int>(bounded_u64(rng, static_cast<std::uint64_t>(kViewCount)));
}

struct LoadStats {
  int loaded = 0;
  int skipped = 0;
  int missing_text = 0;
  std::vector<std::string> log;
};

namespace detail {

inline std::optional<TripleRecord> load_one_triple(
    const std::filesystem::path& root, const std::string& category, const std::string& model_id,
    const std::map<std::string, std::string>* corpus, LoadStats& stats) {
  namespace fs = std::filesystem;
  const fs::path dir = root / category / model_id;
  TripleRecord rec;
  rec.model_id = model_id;
  rec.category = category;
  try {
    rec.gt = read_xyz<double>((dir / "gt.xyz").string());
    rec.partial = read_xyz<double>((dir / "partial.xyz").string());
  } catch (const Error& e) {
    stats.log.push_back(std::string("skip ") + model_id + ": " + e.what());
    ++stats.skipped;
    return std::nullopt;
  }
  rec.renders.reserve(kViewCount);
  for (int v = 0; v < kViewCount; ++v) {
    char name[32];
    std::snprintf(name, sizeof(name), "render_%02d.img", v);
    rec.renders.push_back((dir / name).string());
  }
  if (corpus) {
    const auto it = corpus->find(model_id);
    if (it != corpus->end())
      rec.text = it->second;
    else
      ++stats.missing_text;
  }
  return rec;
}

}  // namespace detail

/// Eagerly loads every triple of the requested categories, sorted by
/// model_id. Malformed records are skipped with a log entry; more than 1%
/// skipped is a hard failure.
inline std::vector<TripleRecord> load_triples(const std::string& root,
                                              const std::vector<std::string>& categories,
                                              const SplitSpec& split,
                                              const std::map<std::string, std::string>* corpus,
                                              LoadStats* stats_out = nullptr,
                                              const ComponentTaxonomy* taxonomy = nullptr) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("dataset root not found: " + root);
  const ComponentTaxonomy default_tax = ComponentTaxonomy::default_taxonomy();
  const ComponentTaxonomy& tax = taxonomy ? *taxonomy : default_tax;

  struct Item {
    std::string category, model_id;
  };
  std::vector<Item> items;
  for (const auto& category : categories) {
    const fs::path cat_dir = fs::path(root) / category;
    if (!fs::is_directory(cat_dir)) continue;
    const auto id_filter = split.ids.find(category);
    for (const auto& e : fs::directory_iterator(cat_dir)) {
      if (!e.is_directory()) continue;
      const std::string id = e.path().filename().string();
      if (id_filter != split.ids.end() && !id_filter->second.empty() &&
          id_filter->second.count(id) == 0)
        continue;
      items.push_back({category, id});
    }
  }
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.model_id < b.model_id; });

  LoadStats stats;
  std::vector<TripleRecord> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    auto rec = detail::load_one_triple(root, item.category, item.model_id, corpus, stats);
    if (!rec) continue;
    try {
      rec->validate(tax);
    } catch (const Error& e) {
      stats.log.push_back(std::string("skip ") + item.model_id + ": " + e.what());
      ++stats.skipped;
      continue;
    }
    out.push_back(std::move(*rec));
    ++stats.loaded;
  }

  const int total = stats.loaded + stats.skipped;
  if (total > 0 && stats.skipped * 100 > total)
    throw IoError("dataset: skip rate above 1% (" + std::to_string(stats.skipped) + "/" +
                  std::to_string(total) + ")");
  if (stats_out) *stats_out = std::move(stats);
  return out;
}

/// Bounded-prefetch streaming loader: a producer thread reads records into a
/// queue of at most `depth` items. peak_resident() reports the high-water
/// record count held by the stream, which never exceeds depth.
class TripleStream {
 public:
  TripleStream(std::string root, std::vector<std::string> categories, SplitSpec split,
               const std::map<std::string, std::string>* corpus, std::size_t depth)
      : depth_(depth == 0 ? 1 : depth) {
    worker_ = std::thread([this, root = std::move(root), categories = std::move(categories),
                           split = std::move(split), corpus]() {
      try {
        produce(root, categories, split, corpus);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu_);
        error_ = std::current_exception();
        done_ = true;
        cv_.notify_all();
      }
    });
  }

  ~TripleStream() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      cancelled_ = true;
      cv_.notify_all();
    }
    if (worker_.joinable()) worker_.join();
  }

  /// Blocking pull; nullopt at end of stream.
  std::optional<TripleRecord> next() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return !queue_.empty() || done_; });
    if (queue_.empty()) {
      if (error_) std::rethrow_exception(error_);
      return std::nullopt;
    }
    TripleRecord rec = std::move(queue_.front());
    queue_.pop_front();
    cv_.notify_all();
    return rec;
  }

  std::size_t peak_resident() const { return peak_.load(); }
  const LoadStats& stats() const { return stats_; }  // valid after the stream ends

 private:
  void produce(const std::string& root, const std::vector<std::string>& categories,
               const SplitSpec& split, const std::map<std::string, std::string>* corpus) {
    namespace fs = std::filesystem;
    const ComponentTaxonomy tax = ComponentTaxonomy::default_taxonomy();

    struct Item {
      std::string category, model_id;
    };
    std::vector<Item> items;
    for (const auto& category : categories) {
      const fs::path cat_dir = fs::path(root) / category;
      if (!fs::is_directory(cat_dir)) continue;
      const auto id_filter = split.ids.find(category);
      for (const auto& e : fs::directory_iterator(cat_dir)) {
        if (!e.is_directory()) continue;
        const std::string id = e.path().filename().string();
        if (id_filter != split.ids.end() && !id_filter->second.empty() &&
            id_filter->second.count(id) == 0)
          continue;
        items.push_back({category, id});
      }
    }
    std::sort(items.begin(), items.end(),
              [](const Item& a, const Item& b) { return a.model_id < b.model_id; });

    for (const auto& item : items) {
      auto rec = detail::load_one_triple(root, item.category, item.model_id, corpus, stats_);
      if (rec) {
        try {
          rec->validate(tax);
        } catch (const Error& e) {
          stats_.log.push_back(std::string("skip ") + item.model_id + ": " + e.what());
          ++stats_.skipped;
          rec.reset();
        }
      }
      if (!rec) continue;
      std::unique_lock<std::mutex> lock(mu_);
      cv_.wait(lock, [this] { return queue_.size() < depth_ || cancelled_; });
      if (cancelled_) break;
      queue_.push_back(std::move(*rec));
      ++stats_.loaded;
      const std::size_t size = queue_.size();
      if (size > peak_.load()) peak_.store(size);
      cv_.notify_all();
    }
    std::lock_guard<std::mutex> lock(mu_);
    done_ = true;
    cv_.notify_all();
  }

  std::size_t depth_;
  std::deque<TripleRecord> queue_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool done_ = false;
  bool cancelled_ = false;
  std::exception_ptr error_;
  std::atomic<std::size_t> peak_{0};
  LoadStats stats_;
  std::thread worker_;
};

}  // namespace mmc

#endif  // MMC_DATASET_HPP
