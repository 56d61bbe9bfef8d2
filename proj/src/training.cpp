#include "can/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace can {

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout probability must be in [0, 1)");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (patience < 1 || patience > max_epochs) throw ConfigError("patience must be in [1, max_epochs]");
  if (!(init_range > 0)) throw ConfigError("init range must be positive");
  if (!(adagrad_eps > 0)) throw ConfigError("adagrad eps must be positive");
}

void adagrad_step(const std::vector<Param*>& params, AdagradState& state, double lr, double eps) {
  if (state.accumulators.size() != params.size()) {
    if (!state.accumulators.empty()) throw std::invalid_argument("adagrad_step: parameter list changed");
    for (const auto* p : params) state.accumulators.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    Mat& acc = state.accumulators[i];
    if (acc.rows() != p.value.rows() || acc.cols() != p.value.cols() || p.grad.rows() != p.value.rows() ||
        p.grad.cols() != p.value.cols()) {
      throw ad::ShapeError("adagrad_step: shape mismatch for " + p.name);
    }
    if (!p.trainable) continue;
    acc.array() += p.grad.array().square();
    p.value.array() -= lr * p.grad.array() / (acc.array().sqrt() + eps);
  }
}

ModelParams init_params(const ModelConfig& config, std::size_t vocab_size, std::size_t n_categories,
                        std::uint64_t seed, double init_range, const EmbeddingTable* pretrained) {
  config.validate();
  ModelParams params = ModelParams::zeros(config, vocab_size, n_categories);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-init_range, init_range);
  for (auto* p : params.all()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value(i) = uni(rng);
  }
  const Eigen::Index d = config.dim;
  params.lstm_b.value.middleRows(d, d).setOnes();
  if (pretrained != nullptr) {
    if (pretrained->matrix.rows() != params.word_embeddings.value.rows() ||
        pretrained->matrix.cols() != params.word_embeddings.value.cols()) {
      throw ConfigError("pretrained embeddings are " +
                        ad::shape_string(pretrained->matrix.rows(), pretrained->matrix.cols()) + ", model expects " +
                        ad::shape_string(params.word_embeddings.value.rows(), d));
    }
    params.word_embeddings.value = pretrained->matrix;
  }
  return params;
}

bool ValidationScore::better_than(const ValidationScore& other) const {
  if (accuracy != other.accuracy) return accuracy > other.accuracy;
  if (macro_f1 != other.macro_f1) return macro_f1 > other.macro_f1;
  return acd_f1 > other.acd_f1;
}

ValidationScore score_of(const EvaluationResult& result) {
  return {result.alsc.accuracy, result.alsc.macro_f1, result.acd ? result.acd->f1 : 0.0};
}

namespace {

constexpr std::string_view kCheckpointMagic = "can-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string hex(double v) {
  std::ostringstream os;
  os << std::hexfloat << v;
  return os.str();
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw DataError("bad number '" + s + "'");
  return v;
}

std::string fingerprint(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void save_checkpoint(std::ostream& out, const Checkpoint& c) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "variant " << c.variant << '\n';
  out << "mode " << to_string(c.mode) << '\n';
  out << "model.encoder " << to_string(c.model.encoder) << '\n';
  out << "model.multi_task " << (c.model.multi_task ? 1 : 0) << '\n';
  out << "model.reg_alsc " << to_string(c.model.reg_alsc) << '\n';
  out << "model.reg_acd " << to_string(c.model.reg_acd) << '\n';
  out << "model.lambda " << hex(c.model.lambda) << '\n';
  out << "model.classes " << c.model.classes << '\n';
  out << "model.dim " << c.model.dim << '\n';
  out << "model.gram " << to_string(c.model.gram) << '\n';
  out << "train.learning_rate " << hex(c.train.learning_rate) << '\n';
  out << "train.batch_size " << c.train.batch_size << '\n';
  out << "train.dropout " << hex(c.train.dropout) << '\n';
  out << "train.max_epochs " << c.train.max_epochs << '\n';
  out << "train.patience " << c.train.patience << '\n';
  out << "train.seed " << c.train.seed << '\n';
  out << "train.init_range " << hex(c.train.init_range) << '\n';
  out << "train.adagrad_eps " << hex(c.train.adagrad_eps) << '\n';
  out << "epoch " << c.epoch << '\n';
  out << "score.accuracy " << hex(c.score.accuracy) << '\n';
  out << "score.macro_f1 " << hex(c.score.macro_f1) << '\n';
  out << "score.acd_f1 " << hex(c.score.acd_f1) << '\n';
  out << "rng " << c.rng_fingerprint << '\n';
  out << "vocab " << c.vocab.size() - 1 << '\n';
  for (std::size_t i = 1; i < c.vocab.size(); ++i) out << c.vocab.word(static_cast<int>(i)) << '\n';
  out << "categories " << c.inventory.size() << '\n';
  for (const auto& l : c.inventory.labels()) out << l << '\n';
  write_params(out, c.params);
}

Checkpoint load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion)) {
    throw DataError("not a version " + std::to_string(kCheckpointVersion) + " checkpoint");
  }
  std::map<std::string, std::string> meta;
  Checkpoint c;
  auto read_list = [&](std::size_t n) {
    std::vector<std::string> items;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::getline(in, line)) throw DataError("truncated checkpoint");
      items.push_back(line);
    }
    return items;
  };
  while (std::getline(in, line)) {
    const auto space = line.find(' ');
    const std::string key = line.substr(0, space);
    const std::string value = space == std::string::npos ? "" : line.substr(space + 1);
    if (key == "vocab") {
      c.vocab = Vocabulary::from_words(read_list(std::stoul(value)));
    } else if (key == "categories") {
      c.inventory = CategoryInventory(read_list(std::stoul(value)));
      break;
    } else {
      meta[key] = value;
    }
  }
  auto get = [&](const std::string& key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw DataError("checkpoint is missing '" + key + "'");
    return it->second;
  };
  try {
    c.variant = get("variant");
    c.mode = parse_mode(get("mode"));
    c.model.encoder = parse_encoder(get("model.encoder"));
    c.model.multi_task = get("model.multi_task") == "1";
    c.model.reg_alsc = parse_reg(get("model.reg_alsc"));
    c.model.reg_acd = parse_reg(get("model.reg_acd"));
    c.model.lambda = parse_double(get("model.lambda"));
    c.model.classes = std::stoi(get("model.classes"));
    c.model.dim = std::stoi(get("model.dim"));
    c.model.gram = parse_gram(get("model.gram"));
    c.train.learning_rate = parse_double(get("train.learning_rate"));
    c.train.batch_size = std::stoi(get("train.batch_size"));
    c.train.dropout = parse_double(get("train.dropout"));
    c.train.max_epochs = std::stoi(get("train.max_epochs"));
    c.train.patience = std::stoi(get("train.patience"));
    c.train.seed = std::stoull(get("train.seed"));
    c.train.init_range = parse_double(get("train.init_range"));
    c.train.adagrad_eps = parse_double(get("train.adagrad_eps"));
    c.epoch = std::stoi(get("epoch"));
    c.score.accuracy = parse_double(get("score.accuracy"));
    c.score.macro_f1 = parse_double(get("score.macro_f1"));
    c.score.acd_f1 = parse_double(get("score.acd_f1"));
    c.rng_fingerprint = get("rng");
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("bad checkpoint metadata: ") + e.what());
  }
  c.model.validate();
  c.params = ModelParams::zeros(c.model, c.vocab.size(), c.inventory.size());
  read_params(in, c.params);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

namespace {
constexpr std::string_view kHistoryHeader =
    "epoch\ttrain_loss\tL_a\tL_b\tR_total\tR_s_component\tR_o_component\tval_acc\tval_f1\ttrain_acc";
}

void write_history(std::ostream& out, const History& h) {
  out << "# variant=" << h.variant << '\n';
  out << "# mode=" << to_string(h.mode) << '\n';
  out << kHistoryHeader << '\n';
  for (const auto& e : h.epochs) {
    out << e.epoch << '\t' << format_value(e.train_loss) << '\t' << format_value(e.alsc_loss) << '\t'
        << format_value(e.acd_loss) << '\t' << format_value(e.reg_total) << '\t' << format_value(e.reg_sparse)
        << '\t' << format_value(e.reg_orthogonal) << '\t' << format_value(e.val_acc) << '\t'
        << format_value(e.val_f1) << '\t' << format_value(e.train_acc) << '\n';
  }
}

History read_history(std::istream& in, std::string_view source_name) {
  History h;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  auto fail = [&](const std::string& why) {
    return DataError(std::string(source_name) + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# variant=", 0) == 0) {
      h.variant = line.substr(10);
      continue;
    }
    if (line.rfind("# mode=", 0) == 0) {
      h.mode = parse_mode(line.substr(7));
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {
      if (line != kHistoryHeader) throw fail("unexpected history header");
      header_seen = true;
      continue;
    }
    std::istringstream ls(line);
    EpochRecord e;
    std::string cells[10];
    for (auto& cell : cells) {
      if (!std::getline(ls, cell, '\t')) throw fail("expected 10 columns");
    }
    try {
      e.epoch = std::stoi(cells[0]);
      double* fields[] = {&e.train_loss, &e.alsc_loss, &e.acd_loss, &e.reg_total, &e.reg_sparse,
                          &e.reg_orthogonal, &e.val_acc, &e.val_f1, &e.train_acc};
      for (int i = 0; i < 9; ++i) *fields[i] = parse_double(cells[i + 1]);
    } catch (const std::exception& ex) {
      throw fail(ex.what());
    }
    h.epochs.push_back(e);
  }
  if (!header_seen) throw DataError(std::string(source_name) + ": no history header");
  return h;
}

TrainResult train(const TrainData& data, const ModelConfig& model, const TrainConfig& config,
                  const std::string& variant, const EmbeddingTable* pretrained, const EpochObserver& observer) {
  model.validate();
  config.validate();
  if (data.train.empty()) throw std::invalid_argument("train: empty training set");
  if (data.val.empty()) throw std::invalid_argument("train: empty validation set");
  if (model.classes != num_classes(data.mode)) throw ConfigError("class count does not match mode");

  const std::size_t n_categories = data.inventory.size();
  TrainResult result;
  result.history.variant = variant;
  result.history.mode = data.mode;

  ModelParams params =
      init_params(model, data.vocab.size(), n_categories, config.seed, config.init_range, pretrained);
  AdagradState adagrad;
  std::mt19937_64 dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const DropoutContext dropout{config.dropout, &dropout_rng};

  auto snapshot = [&](int epoch, const ValidationScore& score) {
    Checkpoint c;
    c.variant = variant;
    c.mode = data.mode;
    c.model = model;
    c.train = config;
    c.vocab = data.vocab;
    c.inventory = data.inventory;
    c.params = params;
    c.params.zero_grad();
    c.epoch = epoch;
    c.score = score;
    c.rng_fingerprint = fingerprint(dropout_rng);
    return c;
  };

  result.best = snapshot(0, score_of(evaluate_model(params, model, data.val, data.mode)));
  int since_improvement = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const auto batches = make_batches(data.train, config.batch_size, config.seed, epoch);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Batch& batch = batches[b];
      params.zero_grad();
      Tape tape;
      std::vector<Var> losses;
      for (std::size_t i = 0; i < batch.items.size(); ++i) {
        const EncodedInstance& inst = *batch.items[i];
        const InstanceGraph g = forward(tape, params, model, batch.sequences[i], inst.categories, &dropout);
        const LossTerms terms = instance_loss(tape, g, model, inst, n_categories);
        const std::pair<const char*, double> checks[] = {
            {"L_a", terms.alsc}, {"L_b", terms.acd}, {"R", terms.reg}, {"total", terms.total.scalar()}};
        for (const auto& [name, v] : checks) {
          if (!std::isfinite(v)) {
            throw NumericError("non-finite " + std::string(name) + " at epoch " + std::to_string(epoch) +
                               ", batch " + std::to_string(b + 1) + ", sentence " + inst.id);
          }
        }
        rec.train_loss += terms.total.scalar();
        rec.alsc_loss += terms.alsc;
        rec.acd_loss += terms.acd;
        rec.reg_total += terms.reg;
        rec.reg_sparse += terms.sparse_part;
        rec.reg_orthogonal += terms.orthogonal_part;
        losses.push_back(terms.total);
      }
      const Var batch_loss = ad::scale(ad::add_n(losses), 1.0 / static_cast<double>(losses.size()));
      tape.backward(batch_loss);
      adagrad_step(params.all(), adagrad, config.learning_rate, config.adagrad_eps);
    }
    const double n = static_cast<double>(data.train.size());
    for (double* v : {&rec.train_loss, &rec.alsc_loss, &rec.acd_loss, &rec.reg_total, &rec.reg_sparse,
                      &rec.reg_orthogonal}) {
      *v /= n;
    }
    const EvaluationResult val = evaluate_model(params, model, data.val, data.mode);
    rec.val_acc = val.alsc.accuracy;
    rec.val_f1 = val.alsc.macro_f1;
    rec.train_acc = evaluate_model(params, model, data.train, data.mode).alsc.accuracy;
    result.history.epochs.push_back(rec);
    result.last_epoch = epoch;
    if (observer) observer(rec, params);

    const ValidationScore score = score_of(val);
    if (score.better_than(result.best.score)) {
      result.best = snapshot(epoch, score);
      since_improvement = 0;
    } else if (++since_improvement >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace can
