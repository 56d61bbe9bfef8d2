#include "can/evaluation.hpp"

#include <stdexcept>

namespace can {

namespace {

double safe_div(double num, double den) { return den > 0 ? num / den : 0.0; }

double harmonic(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace

MetricsReport alsc_metrics(const std::vector<Polarity>& predictions, const std::vector<Polarity>& golds, Mode mode) {
  if (predictions.size() != golds.size()) throw std::invalid_argument("alsc_metrics: size mismatch");
  const int c = num_classes(mode);
  std::vector<int> tp(c, 0), predicted(c, 0), gold(c, 0);
  int total = 0, correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (mode == Mode::Binary && golds[i] == Polarity::Neutral) continue;
    const int g = class_index(golds[i], mode);
    ++total;
    ++gold[g];
    if (mode == Mode::Binary && predictions[i] == Polarity::Neutral) continue;
    const int p = class_index(predictions[i], mode);
    ++predicted[p];
    if (p == g) {
      ++correct;
      ++tp[g];
    }
  }
  if (total == 0) throw std::invalid_argument("alsc_metrics: empty evaluation set");
  MetricsReport report;
  report.mode = mode;
  report.count = total;
  report.accuracy = static_cast<double>(correct) / total;
  double f1_sum = 0;
  for (int k = 0; k < c; ++k) {
    ClassScores s;
    s.support = gold[k];
    s.precision = safe_div(tp[k], predicted[k]);
    s.recall = safe_div(tp[k], gold[k]);
    s.f1 = harmonic(s.precision, s.recall);
    f1_sum += s.f1;
    report.per_class.push_back(s);
  }
  report.macro_f1 = f1_sum / c;
  return report;
}

AcdReport acd_metrics(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<int>>& golds,
                      double threshold) {
  if (scores.size() != golds.size()) throw std::invalid_argument("acd_metrics: size mismatch");
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("acd_metrics: threshold must be in (0,1)");
  AcdReport r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != golds[i].size()) throw std::invalid_argument("acd_metrics: category count mismatch");
    for (std::size_t n = 0; n < scores[i].size(); ++n) {
      const bool pred = scores[i][n] >= threshold;
      const bool gold = golds[i][n] != 0;
      if (pred && gold) ++r.true_positives;
      if (pred && !gold) ++r.false_positives;
      if (!pred && gold) ++r.false_negatives;
    }
  }
  r.precision = safe_div(r.true_positives, r.true_positives + r.false_positives);
  r.recall = safe_div(r.true_positives, r.true_positives + r.false_negatives);
  r.f1 = harmonic(r.precision, r.recall);
  return r;
}

EvaluationResult evaluate_model(const ModelParams& params, const ModelConfig& config,
                                const std::vector<EncodedInstance>& instances, Mode mode) {
  if (instances.empty()) throw std::invalid_argument("evaluate_model: empty evaluation set");
  if (config.classes != num_classes(mode)) throw ConfigError("model class count does not match evaluation mode");
  EvaluationResult result;
  std::vector<Polarity> golds;
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<int>> acd_golds;
  const auto n_categories = static_cast<std::size_t>(params.aspect_embeddings.value.rows());
  for (const auto& inst : instances) {
    const ForwardOutput out = infer(params, config, inst);
    for (std::size_t k = 0; k < inst.labels.size(); ++k) {
      Eigen::Index best = 0;
      out.alsc_probs.row(static_cast<Eigen::Index>(k)).maxCoeff(&best);
      result.predictions.push_back(class_polarity(static_cast<int>(best), mode));
      golds.push_back(class_polarity(inst.labels[k], mode));
    }
    if (config.multi_task) {
      scores.emplace_back(out.acd_scores.data(), out.acd_scores.data() + out.acd_scores.size());
      std::vector<int> g(n_categories, 0);
      for (int c : inst.categories) g[static_cast<std::size_t>(c)] = 1;
      acd_golds.push_back(std::move(g));
    }
  }
  result.alsc = alsc_metrics(result.predictions, golds, mode);
  if (config.multi_task) result.acd = acd_metrics(scores, acd_golds);
  return result;
}

double mean_attention_overlap(const ModelParams& params, const ModelConfig& config,
                              const std::vector<EncodedInstance>& instances) {
  double sum = 0;
  int count = 0;
  for (const auto& inst : instances) {
    if (inst.categories.size() != 2 || inst.overlap != Overlap::NonOverlapping) continue;
    const ForwardOutput out = infer(params, config, inst);
    sum += out.alsc_attention.row(0).dot(out.alsc_attention.row(1));
    ++count;
  }
  if (count == 0) throw std::invalid_argument("mean_attention_overlap: no two-aspect non-overlapping instances");
  return sum / count;
}

}  // namespace can
