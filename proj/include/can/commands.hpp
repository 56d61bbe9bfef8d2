#pragma once

// Command implementations behind the `can` executable: data preparation,
// training of named variants, evaluation, heatmaps and run comparison.

#include "can/report.hpp"
#include "can/training.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace can::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kNumericError = 4 };

/// Model structure of a named variant (LSTM, AT-LSTM, ..., M-CAN-2Ro).
/// Throws ConfigError for unknown names; `custom` is not a named variant.
ModelConfig variant_config(std::string_view name);
const std::vector<std::string>& variant_names();

/// `key = value` lines; '#' starts a comment. Keys are flag names without
/// the leading dashes.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text,
                                                                    std::string_view source_name = "<config>");

enum class Dataset { Rest14, Rest15, Synthetic };
std::string to_string(Dataset d);
Dataset parse_dataset(std::string_view s);

struct PrepareOptions {
  Dataset dataset = Dataset::Synthetic;
  std::filesystem::path train_xml;  // SemEval inputs, unused for synthetic
  std::filesystem::path test_xml;
  std::filesystem::path overlap_annotations;  // optional
  std::filesystem::path out;
  std::uint64_t seed = 1;
  int val_ratio = 5;  // train:val

  // synthetic generator
  int synthetic_train = 60;
  int synthetic_val = 20;
  int synthetic_test = 20;
  int synthetic_categories = 4;
  int synthetic_polarities = 2;
  double synthetic_multi_fraction = 0.5;
};

struct PreparedData {
  std::vector<Instance> train, val, test;
  Vocabulary vocab;
  CategoryInventory inventory;
  std::vector<std::string> warnings;
};

/// Builds the canonical splits in memory.
PreparedData prepare_data(const PrepareOptions& options);
/// Writes train/val/test JSONL dumps, vocab.txt, categories.txt, split.tsv
/// and summary.tsv into options.out. Returns the summary table.
std::string cmd_prepare(const PrepareOptions& options, std::vector<std::string>* warnings = nullptr);
PreparedData load_prepared(const std::filesystem::path& dir);
/// Table of single / multi-aspect sentence counts per split.
std::string summary_table(const PreparedData& data);

struct TrainOptions {
  std::filesystem::path data;  // prepared directory
  std::string variant = "M-CAN-2Ro";
  ModelConfig model;  // structure fields used only for `custom`
  TrainConfig train;
  Mode mode = Mode::ThreeWay;
  std::filesystem::path embeddings;  // optional
  std::filesystem::path out;
};

/// Resolves the variant into a validated ModelConfig for `mode`.
ModelConfig resolve_model(const TrainOptions& options);
/// Writes checkpoint.txt, history.tsv and summary.txt into options.out.
TrainResult cmd_train(const TrainOptions& options);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::string split = "test";
  std::optional<Mode> mode;      // must match the checkpoint when given
  std::filesystem::path out;     // optional: metrics.tsv and predictions.tsv
};

EvaluationResult cmd_eval(const EvalOptions& options);
std::string format_metrics(const EvaluationResult& result);

struct VisualizeOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::string split = "test";
  std::vector<std::string> ids;
  std::string sentence;              // raw text instead of ids
  std::vector<std::string> aspects;  // category:polarity, with `sentence`
  std::filesystem::path out;
};

/// One HTML and one text document per sentence and task. Returns the paths.
std::vector<std::filesystem::path> cmd_visualize(const VisualizeOptions& options);

struct CompareOptions {
  std::vector<std::string> histories;  // path or name=path
  std::filesystem::path out;           // optional
};

Comparison cmd_compare(const CompareOptions& options);

/// Full command line entry point. Reads CAN_DATA_ROOT for default paths.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace can::cli
