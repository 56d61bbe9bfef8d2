#pragma once

// Attention heatmap documents and run comparison tables.

#include "can/training.hpp"

#include <string>
#include <utility>
#include <vector>

namespace can {

enum class HeatmapTask { Alsc, Acd };

std::string to_string(HeatmapTask t);
HeatmapTask parse_heatmap_task(std::string_view s);

struct HeatmapRow {
  std::string label;      // aspect category
  std::string predicted;  // polarity (ALSC) or "yes 0.912345" (ACD)
  std::string gold;
  std::vector<double> weights;  // one per token, as computed by the model
};

struct HeatmapSentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<HeatmapRow> rows;
};

struct HeatmapDoc {
  HeatmapTask task = HeatmapTask::Alsc;
  std::string variant;
  std::vector<HeatmapSentence> sentences;

  /// Standalone HTML; cell background alpha equals the weight.
  std::string to_html() const;
  /// token(weight) lists, one line per row.
  std::string to_text() const;
};

/// ALSC: one row per mentioned aspect. ACD: one row per category of the
/// inventory, mentioned or not. Mentions without a class in the checkpoint's
/// mode are dropped.
HeatmapDoc render_heatmaps(const Checkpoint& checkpoint, const std::vector<Instance>& instances, HeatmapTask task);

/// Trailing mean over the last `window` values up to and including each index.
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

struct RunSummary {
  std::string name;
  std::string variant;
  Mode mode = Mode::ThreeWay;
  int epochs = 0;
  int best_epoch = 0;  // highest validation accuracy, earliest on ties
  double val_acc = 0;
  double val_f1 = 0;
  double final_reg_sparse = 0;
  double final_reg_orthogonal = 0;
};

struct ModeGroup {
  Mode mode = Mode::ThreeWay;
  std::vector<RunSummary> runs;
  std::vector<History> histories;
};

struct Comparison {
  std::vector<ModeGroup> groups;      // runs with different modes are never merged
  std::vector<std::string> warnings;  // one per run outside the first run's mode

  /// Final-metric table, one line per run.
  std::string table_tsv() const;
  /// Per-epoch validation accuracy and regularizer series, one block per mode.
  std::string curves_tsv() const;
};

Comparison compare_runs(const std::vector<std::pair<std::string, History>>& runs);

}  // namespace can
