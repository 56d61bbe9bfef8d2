#pragma once

// Metrics for aspect sentiment classification and aspect category detection.

#include "can/corpus.hpp"
#include "can/network.hpp"

#include <optional>
#include <vector>

namespace can {

struct ClassScores {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  int support = 0;  // gold count
};

struct MetricsReport {
  Mode mode = Mode::ThreeWay;
  double accuracy = 0;
  double macro_f1 = 0;
  std::vector<ClassScores> per_class;  // indexed by class_index(.., mode)
  int count = 0;
};

/// Aspect-level accuracy and macro-F1. In binary mode neutral gold mentions
/// are skipped; a neutral prediction there is always wrong. Classes without
/// gold or predicted instances contribute F1 = 0.
MetricsReport alsc_metrics(const std::vector<Polarity>& predictions, const std::vector<Polarity>& golds, Mode mode);

struct AcdReport {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double threshold = 0.5;
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
};

/// Micro-averaged over every (sentence, category) decision; category n is
/// predicted when its score is >= threshold.
AcdReport acd_metrics(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<int>>& golds,
                      double threshold = 0.5);

struct EvaluationResult {
  MetricsReport alsc;
  std::optional<AcdReport> acd;
  std::vector<Polarity> predictions;  // one per gold mention, in instance order
};

/// Runs inference over encoded instances (labels indexed in `mode`).
EvaluationResult evaluate_model(const ModelParams& params, const ModelConfig& config,
                                const std::vector<EncodedInstance>& instances, Mode mode);

/// Mean dot product between the first two ALSC attention rows over
/// two-aspect non-overlapping instances.
double mean_attention_overlap(const ModelParams& params, const ModelConfig& config,
                              const std::vector<EncodedInstance>& instances);

}  // namespace can
