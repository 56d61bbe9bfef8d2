#pragma once

// Constrained attention network: LSTM encoder, aspect-conditioned attention
// for sentiment classification (ALSC) and category detection (ACD), sparse
// and orthogonal attention regularizers, prediction heads and losses.

#include "can/autodiff.hpp"
#include "can/corpus.hpp"

#include <iosfwd>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace can {

using Real = double;
using Mat = ad::Matrix<Real>;
using Tape = ad::Tape<Real>;
using Var = ad::Var<Real>;
using Param = ad::Parameter<Real>;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sentence encoder family: plain LSTM with averaged states, aspect attention
/// over LSTM states, or attention with the aspect embedding appended to every
/// word embedding.
enum class Encoder { LstmAvg, At, Atae };

enum class Reg { None, Sparse, Orthogonal };

/// Which Gram matrix the orthogonal penalty uses: rows x rows (default) or
/// the literal positions x positions product.
enum class Gram { KxK, LxL };

std::string to_string(Encoder e);
std::string to_string(Reg r);
std::string to_string(Gram g);
Encoder parse_encoder(std::string_view s);
Reg parse_reg(std::string_view s);
Gram parse_gram(std::string_view s);

struct ModelConfig {
  Encoder encoder = Encoder::At;
  bool multi_task = false;
  Reg reg_alsc = Reg::None;
  Reg reg_acd = Reg::None;
  double lambda = 0.1;
  int classes = 3;
  int dim = 300;
  Gram gram = Gram::KxK;

  /// Throws ConfigError naming the violated restriction.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Every trainable tensor of the model. Matrices act on column vectors, so
/// a d x c projection is stored as c x d.
struct ModelParams {
  Param word_embeddings;    // |V| x d
  Param aspect_embeddings;  // N x d
  Param lstm_w;             // 4d x in (gate order: input, forget, cell, output)
  Param lstm_u;             // 4d x d
  Param lstm_b;             // 4d x 1
  Param alsc_w1, alsc_w2;   // d x d
  Param alsc_z;             // d x 1
  Param acd_w1, acd_w2;     // d x d
  Param acd_z;              // d x 1
  Param rep_w1, rep_w2;     // d x d
  Param alsc_wp;            // c x d
  Param alsc_bp;            // c x 1
  Param acd_wp;             // 1 x d
  Param acd_bp;             // 1 x 1

  /// All tensors zero-initialised with the shapes implied by `config`.
  static ModelParams zeros(const ModelConfig& config, std::size_t vocab_size, std::size_t n_categories);

  std::vector<Param*> all();
  std::vector<const Param*> all() const;
  Param* find(std::string_view name);
  void zero_grad();
  std::size_t entry_count() const;
};

/// Inverted dropout on the training path. A null generator or p == 0 is the
/// identity.
struct DropoutContext {
  double p = 0.0;
  std::mt19937_64* rng = nullptr;
};

Var dropout(const Var& x, double p, bool training, std::mt19937_64* rng);

struct AttentionWeights {
  Var w1, w2, z;
};

/// Hidden states H (d x L). Columns at padded positions are zero and are
/// masked out of every attention. `aspect` is required in aspect-concat mode.
Var encode(Tape& tape, ModelParams& params, const PaddedSequence& seq, const Var* aspect,
           const DropoutContext* dropout = nullptr);

/// softmax over unmasked positions of z^T tanh(W1 H + W2 (u (x) e_L)).
Var aspect_attention(const Var& states, const Var& aspect, const AttentionWeights& w,
                     const std::vector<bool>& mask);
/// Same, given W1 H precomputed once per sentence and shared across aspects.
Var aspect_attention_projected(const Var& projected_states, const Var& aspect, const AttentionWeights& w,
                               const std::vector<bool>& mask);

/// |sum(alpha^2) - 1| for one attention row.
Var sparse_reg(const Var& alpha);
/// Frobenius norm of (M M^T - I) (or M^T M - I for Gram::LxL).
Var orthogonal_reg(const Var& attention_rows, Gram gram = Gram::KxK);
/// Mentioned rows followed by the mean of the unmentioned rows.
Var build_acd_matrix(const std::vector<Var>& mentioned, const std::vector<Var>& unmentioned);

/// tanh(W1r (H alpha^T) + W2r h_L)
Var alsc_represent(const Var& states, const Var& alpha, const Var& last_state, const Var& rep_w1,
                   const Var& rep_w2);
/// softmax(Wp r + b), a c x 1 probability vector.
Var alsc_predict(const Var& representation, const Var& wp, const Var& bp);
/// sigmoid(Wp (H beta^T) + b), a 1 x 1 score.
Var acd_predict(const Var& states, const Var& beta, const Var& wp, const Var& bp);

inline constexpr Real kLogFloor = 1e-12;

Var alsc_loss(const std::vector<Var>& probabilities, const std::vector<int>& labels);
Var acd_loss(const std::vector<Var>& scores, const std::vector<int>& targets);
Var total_loss(const Var& alsc, const Var& acd, const Var& reg, Real lambda, std::size_t n_categories,
               bool multi_task);

struct RegularizerValue {
  Var value;
  Real sparse_part = 0;      // sum of sparse terms that were applied
  Real orthogonal_part = 0;  // orthogonal terms that were applied
};

/// Dispatch: Sparse sums the per-row sparse terms; Orthogonal applies the
/// orthogonal penalty to a non-overlapping multi-row matrix and falls back to
/// the per-row sparse sum otherwise.
RegularizerValue regularizer_for_instance(Tape& tape, Reg reg, const std::vector<Var>& rows, Overlap overlap,
                                          Gram gram = Gram::KxK);

/// Nodes produced by one forward pass over one sentence.
struct InstanceGraph {
  std::vector<Var> alsc_probs;      // K entries, each c x 1
  std::vector<Var> alsc_attention;  // K entries, each 1 x L
  std::vector<Var> acd_scores;      // N entries, each 1 x 1 (multi-task only)
  std::vector<Var> acd_attention;   // N entries, each 1 x L (multi-task only)
};

InstanceGraph forward(Tape& tape, ModelParams& params, const ModelConfig& config, const PaddedSequence& seq,
                      const std::vector<int>& categories, const DropoutContext* dropout = nullptr);

struct LossTerms {
  Var total;
  Real alsc = 0;
  Real acd = 0;
  Real reg = 0;
  Real sparse_part = 0;
  Real orthogonal_part = 0;
};

/// Per-sentence training loss L_a + L_b / N + lambda R. Setting
/// `with_regularizer` to false drops the R term from the graph.
LossTerms instance_loss(Tape& tape, const InstanceGraph& graph, const ModelConfig& config,
                        const EncodedInstance& instance, std::size_t n_categories, bool with_regularizer = true);

/// Plain values of one inference pass.
struct ForwardOutput {
  Mat alsc_probs;      // K x c
  Mat alsc_attention;  // K x L
  Mat acd_scores;      // N x 1, empty in single-task mode
  Mat acd_attention;   // N x L, empty in single-task mode
  Real reg_value = 0;  // regularizer as configured, for diagnostics
};

ForwardOutput infer(const ModelParams& params, const ModelConfig& config, const EncodedInstance& instance);

/// Versioned text dump of named tensors; values are written as hex floats so
/// a reload is bit-exact and identical parameters give identical bytes.
void write_params(std::ostream& out, const ModelParams& params);
void read_params(std::istream& in, ModelParams& params);

}  // namespace can
