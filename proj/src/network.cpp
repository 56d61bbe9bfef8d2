#include "can/network.hpp"

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace can {

std::string to_string(Encoder e) {
  switch (e) {
    case Encoder::LstmAvg: return "lstm-avg";
    case Encoder::At: return "at";
    case Encoder::Atae: return "atae";
  }
  return "?";
}

std::string to_string(Reg r) {
  switch (r) {
    case Reg::None: return "none";
    case Reg::Sparse: return "Rs";
    case Reg::Orthogonal: return "Ro";
  }
  return "?";
}

std::string to_string(Gram g) { return g == Gram::KxK ? "KxK" : "LxL"; }

Encoder parse_encoder(std::string_view s) {
  if (s == "lstm-avg" || s == "lstm") return Encoder::LstmAvg;
  if (s == "at") return Encoder::At;
  if (s == "atae") return Encoder::Atae;
  throw ConfigError("unknown encoder '" + std::string(s) + "' (expected lstm-avg, at or atae)");
}

Reg parse_reg(std::string_view s) {
  if (s == "none") return Reg::None;
  if (s == "Rs" || s == "rs" || s == "sparse") return Reg::Sparse;
  if (s == "Ro" || s == "ro" || s == "orthogonal") return Reg::Orthogonal;
  throw ConfigError("unknown regularizer '" + std::string(s) + "' (expected none, Rs or Ro)");
}

Gram parse_gram(std::string_view s) {
  if (s == "KxK") return Gram::KxK;
  if (s == "LxL") return Gram::LxL;
  throw ConfigError("unknown gram '" + std::string(s) + "' (expected KxK or LxL)");
}

void ModelConfig::validate() const {
  if (reg_acd != Reg::None && !multi_task) {
    throw ConfigError("an ACD regularizer requires multi-task training");
  }
  if (encoder == Encoder::Atae && multi_task) {
    throw ConfigError("atae cannot be combined with multi-task training: it re-encodes the sentence per "
                      "aspect, so there are no shared states for the ACD task");
  }
  if (encoder == Encoder::LstmAvg && reg_alsc != Reg::None) {
    throw ConfigError("lstm-avg has no aspect attention to regularize");
  }
  if (lambda < 0 || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (classes != 2 && classes != 3) throw ConfigError("class count must be 2 or 3");
  if (dim < 1) throw ConfigError("dimension must be positive");
}

ModelParams ModelParams::zeros(const ModelConfig& config, std::size_t vocab_size, std::size_t n_categories) {
  const Eigen::Index d = config.dim;
  const Eigen::Index in = config.encoder == Encoder::Atae ? 2 * d : d;
  const Eigen::Index c = config.classes;
  auto z = [](const char* name, Eigen::Index r, Eigen::Index cc) { return Param(name, Mat::Zero(r, cc)); };
  ModelParams p;
  p.word_embeddings = z("word_embeddings", static_cast<Eigen::Index>(vocab_size), d);
  p.aspect_embeddings = z("aspect_embeddings", static_cast<Eigen::Index>(n_categories), d);
  p.lstm_w = z("lstm.w", 4 * d, in);
  p.lstm_u = z("lstm.u", 4 * d, d);
  p.lstm_b = z("lstm.b", 4 * d, 1);
  p.alsc_w1 = z("alsc.w1", d, d);
  p.alsc_w2 = z("alsc.w2", d, d);
  p.alsc_z = z("alsc.z", d, 1);
  p.acd_w1 = z("acd.w1", d, d);
  p.acd_w2 = z("acd.w2", d, d);
  p.acd_z = z("acd.z", d, 1);
  p.rep_w1 = z("rep.w1", d, d);
  p.rep_w2 = z("rep.w2", d, d);
  p.alsc_wp = z("alsc.wp", c, d);
  p.alsc_bp = z("alsc.bp", c, 1);
  p.acd_wp = z("acd.wp", 1, d);
  p.acd_bp = z("acd.bp", 1, 1);
  return p;
}

std::vector<Param*> ModelParams::all() {
  return {&word_embeddings, &aspect_embeddings, &lstm_w, &lstm_u,  &lstm_b,  &alsc_w1, &alsc_w2, &alsc_z, &acd_w1,
          &acd_w2,          &acd_z,             &rep_w1, &rep_w2, &alsc_wp, &alsc_bp, &acd_wp,  &acd_bp};
}

std::vector<const Param*> ModelParams::all() const {
  auto mutable_all = const_cast<ModelParams*>(this)->all();
  return {mutable_all.begin(), mutable_all.end()};
}

Param* ModelParams::find(std::string_view name) {
  for (auto* p : all()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

void ModelParams::zero_grad() {
  for (auto* p : all()) p->zero_grad();
}

std::size_t ModelParams::entry_count() const {
  std::size_t n = 0;
  for (const auto* p : all()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

Var dropout(const Var& x, double p, bool training, std::mt19937_64* rng) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout probability must be in [0, 1)");
  if (!training || p == 0.0 || rng == nullptr) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const Real scale = 1.0 / (1.0 - p);
  Mat mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = keep(*rng) ? scale : 0.0;
  return ad::cwise_product(x, x.tape().constant(std::move(mask)));
}

namespace {

Var apply_dropout(const Var& x, const DropoutContext* ctx) {
  if (ctx == nullptr) return x;
  return dropout(x, ctx->p, true, ctx->rng);
}

}  // namespace

Var encode(Tape& tape, ModelParams& params, const PaddedSequence& seq, const Var* aspect,
           const DropoutContext* dropout_ctx) {
  if (seq.length < 1) throw ad::ShapeError("encode: empty sequence");
  const Eigen::Index d = params.lstm_u.value.cols();
  const bool concat = params.lstm_w.value.cols() == 2 * d;
  if (concat != (aspect != nullptr)) {
    throw std::invalid_argument("encode: an aspect vector is required exactly in aspect-concat mode");
  }
  const std::vector<int> ids(seq.ids.begin(), seq.ids.begin() + seq.length);
  Var inputs = apply_dropout(ad::lookup(tape, params.word_embeddings, ids), dropout_ctx);
  if (concat) inputs = ad::vstack<Real>({inputs, ad::repeat_concat(*aspect, seq.length)});

  const Var w = tape.parameter(params.lstm_w);
  const Var u = tape.parameter(params.lstm_u);
  const Var b = tape.parameter(params.lstm_b);
  const Var projected = ad::matmul(w, inputs);  // 4d x L

  std::vector<Var> states;
  Var h, c;
  for (Eigen::Index t = 0; t < seq.length; ++t) {
    Var gates = ad::column(projected, t) + b;
    if (t > 0) gates = gates + ad::matmul(u, h);
    const Var in_gate = ad::sigmoid(ad::slice_rows(gates, 0, d));
    const Var forget_gate = ad::sigmoid(ad::slice_rows(gates, d, d));
    const Var cell_in = ad::tanh(ad::slice_rows(gates, 2 * d, d));
    const Var out_gate = ad::sigmoid(ad::slice_rows(gates, 3 * d, d));
    c = t > 0 ? ad::cwise_product(forget_gate, c) + ad::cwise_product(in_gate, cell_in)
              : ad::cwise_product(in_gate, cell_in);
    h = ad::cwise_product(out_gate, ad::tanh(c));
    states.push_back(h);
  }
  const auto padded = static_cast<Eigen::Index>(seq.ids.size()) - seq.length;
  if (padded > 0) states.push_back(tape.constant(Mat::Zero(d, padded)));
  return apply_dropout(ad::hstack(states), dropout_ctx);
}

Var aspect_attention_projected(const Var& projected_states, const Var& aspect, const AttentionWeights& w,
                               const std::vector<bool>& mask) {
  const Var aspect_part = ad::repeat_concat(ad::matmul(w.w2, aspect), projected_states.cols());
  const Var scores = ad::matmul(ad::transpose(w.z), ad::tanh(projected_states + aspect_part));
  return ad::softmax(scores, mask);
}

Var aspect_attention(const Var& states, const Var& aspect, const AttentionWeights& w,
                     const std::vector<bool>& mask) {
  return aspect_attention_projected(ad::matmul(w.w1, states), aspect, w, mask);
}

Var sparse_reg(const Var& alpha) { return ad::abs(ad::add_scalar(ad::reduce_sum(ad::square(alpha)), -1.0)); }

Var orthogonal_reg(const Var& rows, Gram gram) {
  const Var gramian =
      gram == Gram::KxK ? ad::matmul(rows, ad::transpose(rows)) : ad::matmul(ad::transpose(rows), rows);
  const Eigen::Index n = gramian.rows();
  const Var diff = gramian - rows.tape().constant(Mat::Identity(n, n));
  return ad::sqrt(ad::reduce_sum(ad::square(diff)));
}

Var build_acd_matrix(const std::vector<Var>& mentioned, const std::vector<Var>& unmentioned) {
  if (mentioned.empty()) throw std::invalid_argument("build_acd_matrix: no mentioned rows");
  std::vector<Var> rows = mentioned;
  if (!unmentioned.empty()) rows.push_back(ad::reduce_mean(ad::vstack(unmentioned), ad::Axis::Rows));
  return ad::vstack(rows);
}

Var alsc_represent(const Var& states, const Var& alpha, const Var& last_state, const Var& rep_w1,
                   const Var& rep_w2) {
  const Var weighted = ad::matmul(states, ad::transpose(alpha));
  return ad::tanh(ad::matmul(rep_w1, weighted) + ad::matmul(rep_w2, last_state));
}

Var alsc_predict(const Var& representation, const Var& wp, const Var& bp) {
  return ad::softmax(ad::matmul(wp, representation) + bp);
}

Var acd_predict(const Var& states, const Var& beta, const Var& wp, const Var& bp) {
  return ad::sigmoid(ad::matmul(wp, ad::matmul(states, ad::transpose(beta))) + bp);
}

Var alsc_loss(const std::vector<Var>& probabilities, const std::vector<int>& labels) {
  if (probabilities.size() != labels.size()) throw std::invalid_argument("alsc_loss: label count mismatch");
  if (probabilities.empty()) throw std::invalid_argument("alsc_loss: no aspects");
  std::vector<Var> terms;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const Var& p = probabilities[k];
    if (labels[k] < 0 || labels[k] >= p.rows()) throw std::invalid_argument("alsc_loss: label out of range");
    Mat onehot = Mat::Zero(p.rows(), 1);
    onehot(labels[k], 0) = 1.0;
    terms.push_back(ad::reduce_sum(ad::cwise_product(p.tape().constant(std::move(onehot)),
                                                     ad::log_clamped(p, kLogFloor))));
  }
  return ad::scale(ad::add_n(terms), -1.0);
}

Var acd_loss(const std::vector<Var>& scores, const std::vector<int>& targets) {
  if (scores.size() != targets.size()) throw std::invalid_argument("acd_loss: target count mismatch");
  if (scores.empty()) throw std::invalid_argument("acd_loss: no categories");
  const Var s = ad::vstack(scores);
  Mat y(s.rows(), 1);
  for (std::size_t n = 0; n < targets.size(); ++n) {
    if (targets[n] != 0 && targets[n] != 1) throw std::invalid_argument("acd_loss: targets must be 0 or 1");
    y(static_cast<Eigen::Index>(n), 0) = targets[n];
  }
  Tape& tape = s.tape();
  const Var yv = tape.constant(y);
  const Var not_y = tape.constant((1.0 - y.array()).matrix());
  const Var not_s = ad::add_scalar(ad::scale(s, -1.0), 1.0);
  const Var ll = ad::cwise_product(yv, ad::log_clamped(s, kLogFloor)) +
                 ad::cwise_product(not_y, ad::log_clamped(not_s, kLogFloor));
  return ad::scale(ad::reduce_sum(ll), -1.0);
}

Var total_loss(const Var& alsc, const Var& acd, const Var& reg, Real lambda, std::size_t n_categories,
               bool multi_task) {
  if (lambda < 0) throw std::invalid_argument("total_loss: lambda must be >= 0");
  Var total = alsc;
  if (multi_task) {
    if (n_categories == 0) throw std::invalid_argument("total_loss: no categories");
    total = total + ad::scale(acd, 1.0 / static_cast<Real>(n_categories));
  }
  return total + ad::scale(reg, lambda);
}

RegularizerValue regularizer_for_instance(Tape& tape, Reg reg, const std::vector<Var>& rows, Overlap overlap,
                                          Gram gram) {
  RegularizerValue out;
  if (reg == Reg::None || rows.empty()) {
    out.value = tape.constant(0.0);
    return out;
  }
  if (reg == Reg::Orthogonal && overlap == Overlap::NonOverlapping && rows.size() >= 2) {
    out.value = orthogonal_reg(ad::vstack(rows), gram);
    out.orthogonal_part = out.value.scalar();
    return out;
  }
  std::vector<Var> terms;
  for (const auto& r : rows) terms.push_back(sparse_reg(r));
  out.value = ad::add_n(terms);
  out.sparse_part = out.value.scalar();
  return out;
}

InstanceGraph forward(Tape& tape, ModelParams& params, const ModelConfig& config, const PaddedSequence& seq,
                      const std::vector<int>& categories, const DropoutContext* dropout_ctx) {
  if (categories.empty()) throw std::invalid_argument("forward: instance has no aspects");
  const auto n_categories = params.aspect_embeddings.value.rows();
  for (int cat : categories) {
    if (cat < 0 || cat >= n_categories) throw std::invalid_argument("forward: category index out of range");
  }
  if (config.multi_task && config.encoder == Encoder::Atae) {
    throw ConfigError("atae cannot run in multi-task mode");
  }
  InstanceGraph g;
  const auto aspect = [&](int cat) { return ad::lookup(tape, params.aspect_embeddings, {cat}); };
  const Var wp = tape.parameter(params.alsc_wp);
  const Var bp = tape.parameter(params.alsc_bp);
  const AttentionWeights alsc_w{tape.parameter(params.alsc_w1), tape.parameter(params.alsc_w2),
                                tape.parameter(params.alsc_z)};
  const Eigen::Index last = seq.length - 1;

  Var shared_states;
  if (config.encoder != Encoder::Atae) shared_states = encode(tape, params, seq, nullptr, dropout_ctx);

  switch (config.encoder) {
    case Encoder::LstmAvg: {
      Mat uniform = Mat::Zero(1, static_cast<Eigen::Index>(seq.ids.size()));
      uniform.leftCols(seq.length).setConstant(1.0 / seq.length);
      const Var weights = tape.constant(std::move(uniform));
      const Var probs = alsc_predict(ad::matmul(shared_states, ad::transpose(weights)), wp, bp);
      for (std::size_t k = 0; k < categories.size(); ++k) {
        g.alsc_attention.push_back(weights);
        g.alsc_probs.push_back(probs);
      }
      break;
    }
    case Encoder::At: {
      const Var projected = ad::matmul(alsc_w.w1, shared_states);
      const Var last_part = ad::matmul(tape.parameter(params.rep_w2), ad::column(shared_states, last));
      const Var rep_w1 = tape.parameter(params.rep_w1);
      for (int cat : categories) {
        const Var alpha = aspect_attention_projected(projected, aspect(cat), alsc_w, seq.mask);
        const Var weighted = ad::matmul(shared_states, ad::transpose(alpha));
        const Var r = ad::tanh(ad::matmul(rep_w1, weighted) + last_part);
        g.alsc_attention.push_back(alpha);
        g.alsc_probs.push_back(alsc_predict(r, wp, bp));
      }
      break;
    }
    case Encoder::Atae: {
      const Var rep_w1 = tape.parameter(params.rep_w1);
      const Var rep_w2 = tape.parameter(params.rep_w2);
      for (int cat : categories) {
        const Var u = aspect(cat);
        const Var states = encode(tape, params, seq, &u, dropout_ctx);
        const Var alpha = aspect_attention(states, u, alsc_w, seq.mask);
        const Var r = alsc_represent(states, alpha, ad::column(states, last), rep_w1, rep_w2);
        g.alsc_attention.push_back(alpha);
        g.alsc_probs.push_back(alsc_predict(r, wp, bp));
      }
      break;
    }
  }

  if (config.multi_task) {
    const AttentionWeights acd_w{tape.parameter(params.acd_w1), tape.parameter(params.acd_w2),
                                 tape.parameter(params.acd_z)};
    const Var projected = ad::matmul(acd_w.w1, shared_states);
    const Var acd_wp = tape.parameter(params.acd_wp);
    const Var acd_bp = tape.parameter(params.acd_bp);
    for (Eigen::Index n = 0; n < n_categories; ++n) {
      const Var beta = aspect_attention_projected(projected, aspect(static_cast<int>(n)), acd_w, seq.mask);
      g.acd_attention.push_back(beta);
      g.acd_scores.push_back(acd_predict(shared_states, beta, acd_wp, acd_bp));
    }
  }
  return g;
}

LossTerms instance_loss(Tape& tape, const InstanceGraph& graph, const ModelConfig& config,
                        const EncodedInstance& instance, std::size_t n_categories, bool with_regularizer) {
  LossTerms out;
  const Var la = alsc_loss(graph.alsc_probs, instance.labels);
  out.alsc = la.scalar();
  Var lb = tape.constant(0.0);
  if (config.multi_task) {
    std::vector<int> targets(n_categories, 0);
    for (int c : instance.categories) targets[static_cast<std::size_t>(c)] = 1;
    lb = acd_loss(graph.acd_scores, targets);
    out.acd = lb.scalar();
  }
  Var reg = tape.constant(0.0);
  if (with_regularizer) {
    std::vector<Var> terms;
    if (config.reg_alsc != Reg::None) {
      auto r = regularizer_for_instance(tape, config.reg_alsc, graph.alsc_attention, instance.overlap, config.gram);
      terms.push_back(r.value);
      out.sparse_part += r.sparse_part;
      out.orthogonal_part += r.orthogonal_part;
    }
    if (config.multi_task && config.reg_acd != Reg::None) {
      std::vector<Var> mentioned, unmentioned;
      std::vector<bool> is_mentioned(n_categories, false);
      for (int c : instance.categories) {
        is_mentioned[static_cast<std::size_t>(c)] = true;
        mentioned.push_back(graph.acd_attention[static_cast<std::size_t>(c)]);
      }
      for (std::size_t n = 0; n < n_categories; ++n) {
        if (!is_mentioned[n]) unmentioned.push_back(graph.acd_attention[n]);
      }
      const Var g = build_acd_matrix(mentioned, unmentioned);
      std::vector<Var> rows;
      for (Eigen::Index i = 0; i < g.rows(); ++i) rows.push_back(ad::row(g, i));
      auto r = regularizer_for_instance(tape, config.reg_acd, rows, instance.overlap, config.gram);
      terms.push_back(r.value);
      out.sparse_part += r.sparse_part;
      out.orthogonal_part += r.orthogonal_part;
    }
    if (!terms.empty()) reg = ad::add_n(terms);
  }
  out.reg = reg.scalar();
  out.total = total_loss(la, lb, reg, config.lambda, n_categories, config.multi_task);
  return out;
}

ForwardOutput infer(const ModelParams& params, const ModelConfig& config, const EncodedInstance& instance) {
  // Inference never runs backward, so the parameters are only read.
  auto& mutable_params = const_cast<ModelParams&>(params);
  Tape tape;
  const PaddedSequence seq = pad(instance.tokens, static_cast<int>(instance.tokens.size()));
  const InstanceGraph g = forward(tape, mutable_params, config, seq, instance.categories, nullptr);
  ForwardOutput out;
  const auto k = static_cast<Eigen::Index>(g.alsc_probs.size());
  const auto len = static_cast<Eigen::Index>(seq.ids.size());
  out.alsc_probs.resize(k, config.classes);
  out.alsc_attention.resize(k, len);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.alsc_probs.row(i) = g.alsc_probs[static_cast<std::size_t>(i)].value().transpose();
    out.alsc_attention.row(i) = g.alsc_attention[static_cast<std::size_t>(i)].value();
  }
  if (config.multi_task) {
    const auto n = static_cast<Eigen::Index>(g.acd_scores.size());
    out.acd_scores.resize(n, 1);
    out.acd_attention.resize(n, len);
    for (Eigen::Index i = 0; i < n; ++i) {
      out.acd_scores(i, 0) = g.acd_scores[static_cast<std::size_t>(i)].scalar();
      out.acd_attention.row(i) = g.acd_attention[static_cast<std::size_t>(i)].value();
    }
  }
  if (config.reg_alsc != Reg::None || config.reg_acd != Reg::None) {
    EncodedInstance labelled = instance;
    labelled.labels.assign(instance.categories.size(), 0);
    out.reg_value = instance_loss(tape, g, config, labelled, static_cast<std::size_t>(params.aspect_embeddings.value.rows()))
                        .reg;
  }
  return out;
}

namespace {
constexpr std::string_view kTensorMagic = "can-tensors";
constexpr int kTensorVersion = 1;
}  // namespace

void write_params(std::ostream& out, const ModelParams& params) {
  const auto tensors = params.all();
  out << kTensorMagic << ' ' << kTensorVersion << ' ' << tensors.size() << '\n';
  for (const auto* p : tensors) {
    out << "tensor " << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        if (c > 0) out << ' ';
        out << std::hexfloat << p->value(r, c) << std::defaultfloat;
      }
      out << '\n';
    }
  }
}

void read_params(std::istream& in, ModelParams& params) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version >> count) || magic != kTensorMagic) throw DataError("not a parameter dump");
  if (version != kTensorVersion) throw DataError("unsupported parameter dump version " + std::to_string(version));
  for (std::size_t i = 0; i < count; ++i) {
    std::string tag, name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> tag >> name >> rows >> cols) || tag != "tensor") throw DataError("truncated parameter dump");
    Param* p = params.find(name);
    if (p == nullptr) throw DataError("unknown tensor '" + name + "' in parameter dump");
    if (p->value.rows() != rows || p->value.cols() != cols) {
      throw DataError("tensor '" + name + "' has shape " + ad::shape_string(rows, cols) + ", expected " +
                      ad::shape_string(p->value.rows(), p->value.cols()));
    }
    std::string tok;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(in >> tok)) throw DataError("truncated tensor '" + name + "'");
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw DataError("bad value '" + tok + "' in tensor '" + name + "'");
        p->value(r, c) = v;
      }
    }
    p->zero_grad();
  }
}

}  // namespace can
