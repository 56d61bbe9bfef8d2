#pragma once

// Adagrad training with inverted dropout, mini-batches, validation-selected
// checkpoints and early stopping.

#include "can/corpus.hpp"
#include "can/evaluation.hpp"
#include "can/network.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace can {

/// Non-finite loss during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 25;
  double dropout = 0.7;  // drop probability
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 1;
  double init_range = 0.01;
  double adagrad_eps = 1e-8;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct AdagradState {
  std::vector<Mat> accumulators;  // one per parameter, lazily sized
};

/// acc += g^2; theta -= lr * g / (sqrt(acc) + eps). Frozen parameters are skipped.
void adagrad_step(const std::vector<Param*>& params, AdagradState& state, double lr, double eps);

/// Every tensor ~ U(-range, range) except the LSTM forget-gate bias (1.0)
/// and the word embeddings when a pretrained table is given.
ModelParams init_params(const ModelConfig& config, std::size_t vocab_size, std::size_t n_categories,
                        std::uint64_t seed, double init_range = 0.01, const EmbeddingTable* pretrained = nullptr);

/// Validation selection key: ALSC accuracy, then macro-F1, then ACD F1.
struct ValidationScore {
  double accuracy = 0;
  double macro_f1 = 0;
  double acd_f1 = 0;

  bool better_than(const ValidationScore& other) const;
  bool operator==(const ValidationScore&) const = default;
};

ValidationScore score_of(const EvaluationResult& result);

struct Checkpoint {
  std::string variant;
  Mode mode = Mode::ThreeWay;
  ModelConfig model;
  TrainConfig train;
  Vocabulary vocab;
  CategoryInventory inventory;
  ModelParams params;
  int epoch = 0;
  ValidationScore score;
  std::string rng_fingerprint;
};

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double alsc_loss = 0;
  double acd_loss = 0;
  double reg_total = 0;
  double reg_sparse = 0;
  double reg_orthogonal = 0;
  double val_acc = 0;
  double val_f1 = 0;
  double train_acc = 0;
};

struct History {
  std::string variant;
  Mode mode = Mode::ThreeWay;
  std::vector<EpochRecord> epochs;
};

void write_history(std::ostream& out, const History& history);
History read_history(std::istream& in, std::string_view source_name = "<history>");

struct TrainResult {
  Checkpoint best;
  History history;
  int last_epoch = 0;
  bool early_stopped = false;
};

struct TrainData {
  std::vector<EncodedInstance> train;
  std::vector<EncodedInstance> val;
  Vocabulary vocab;
  CategoryInventory inventory;
  Mode mode = Mode::ThreeWay;
};

/// Called after every epoch with its record and the current parameters.
using EpochObserver = std::function<void(const EpochRecord&, const ModelParams&)>;

/// Per epoch: shuffled batches, mean per-sentence loss, one Adagrad step per
/// batch, then validation. The initial parameters are scored as epoch 0; the
/// run stops after `patience` epochs without a strictly better score.
TrainResult train(const TrainData& data, const ModelConfig& model, const TrainConfig& config,
                  const std::string& variant = "custom", const EmbeddingTable* pretrained = nullptr,
                  const EpochObserver& observer = {});

}  // namespace can
