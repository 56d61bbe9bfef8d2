#include "can/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace can::cli {

namespace fs = std::filesystem;

namespace {

struct NamedVariant {
  const char* name;
  Encoder encoder;
  bool multi_task;
  Reg reg_alsc;
  Reg reg_acd;
};

constexpr NamedVariant kVariants[] = {
    {"LSTM", Encoder::LstmAvg, false, Reg::None, Reg::None},
    {"AT-LSTM", Encoder::At, false, Reg::None, Reg::None},
    {"ATAE-LSTM", Encoder::Atae, false, Reg::None, Reg::None},
    {"AT-CAN-Rs", Encoder::At, false, Reg::Sparse, Reg::None},
    {"AT-CAN-Ro", Encoder::At, false, Reg::Orthogonal, Reg::None},
    {"ATAE-CAN-Rs", Encoder::Atae, false, Reg::Sparse, Reg::None},
    {"ATAE-CAN-Ro", Encoder::Atae, false, Reg::Orthogonal, Reg::None},
    {"M-AT-LSTM", Encoder::At, true, Reg::None, Reg::None},
    {"M-CAN-Rs", Encoder::At, true, Reg::Sparse, Reg::None},
    {"M-CAN-Ro", Encoder::At, true, Reg::Orthogonal, Reg::None},
    {"M-CAN-2Rs", Encoder::At, true, Reg::Sparse, Reg::Sparse},
    {"M-CAN-2Ro", Encoder::At, true, Reg::Orthogonal, Reg::Orthogonal},
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<Instance> read_instances_file(const fs::path& path) {
  std::istringstream in(read_file(path));
  return read_instances(in, path.string());
}

void write_instances_file(const fs::path& path, const std::vector<Instance>& instances) {
  std::ostringstream os;
  write_instances(os, instances);
  write_text(path, os.str());
}

std::string file_safe(std::string_view id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "sentence" : out;
}

std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

ModelConfig variant_config(std::string_view name) {
  for (const auto& v : kVariants) {
    if (name == v.name) {
      ModelConfig c;
      c.encoder = v.encoder;
      c.multi_task = v.multi_task;
      c.reg_alsc = v.reg_alsc;
      c.reg_acd = v.reg_acd;
      return c;
    }
  }
  std::string known;
  for (const auto& v : kVariants) known += std::string(known.empty() ? "" : ", ") + v.name;
  throw ConfigError("unknown variant '" + std::string(name) + "' (known: " + known + ", or custom)");
}

const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& v : kVariants) n.emplace_back(v.name);
    return n;
  }();
  return names;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text,
                                                                    std::string_view source_name) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(std::string(source_name) + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError(std::string(source_name) + ":" + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

std::string to_string(Dataset d) {
  switch (d) {
    case Dataset::Rest14: return "rest14";
    case Dataset::Rest15: return "rest15";
    case Dataset::Synthetic: return "synthetic";
  }
  return "?";
}

Dataset parse_dataset(std::string_view s) {
  if (s == "rest14") return Dataset::Rest14;
  if (s == "rest15") return Dataset::Rest15;
  if (s == "synthetic") return Dataset::Synthetic;
  throw ConfigError("unknown dataset '" + std::string(s) + "' (expected rest14, rest15 or synthetic)");
}

PreparedData prepare_data(const PrepareOptions& o) {
  PreparedData d;
  if (o.dataset == Dataset::Synthetic) {
    SyntheticSpec spec;
    spec.n_categories = o.synthetic_categories;
    spec.n_polarities = o.synthetic_polarities;
    spec.multi_fraction = o.synthetic_multi_fraction;
    spec.seed = o.seed;
    spec.n_sentences = o.synthetic_train;
    auto train = make_synthetic_corpus(spec);
    spec.seed = o.seed + 1000;
    spec.n_sentences = o.synthetic_val;
    auto val = make_synthetic_corpus(spec);
    spec.seed = o.seed + 2000;
    spec.n_sentences = o.synthetic_test;
    auto test = make_synthetic_corpus(spec);
    d.train = std::move(train.instances);
    d.val = std::move(val.instances);
    d.test = std::move(test.instances);
    d.inventory = train.inventory;
  } else {
    if (o.train_xml.empty() || o.test_xml.empty()) throw ConfigError("SemEval datasets need train and test XML paths");
    auto parse = o.dataset == Dataset::Rest14 ? parse_semeval14 : parse_semeval15;
    auto wrap = [&](const fs::path& p) {
      try {
        return parse(read_file(p));
      } catch (const DataError& e) {
        throw DataError(p.string() + ": " + e.what());
      }
    };
    auto full_train = wrap(o.train_xml);
    d.test = wrap(o.test_xml);
    if (!o.overlap_annotations.empty()) {
      const auto ann = parse_overlap_annotations(read_file(o.overlap_annotations));
      auto w1 = merge_overlap_annotations(full_train, ann);
      auto w2 = merge_overlap_annotations(d.test, ann);
      d.warnings.insert(d.warnings.end(), w1.begin(), w1.end());
      d.warnings.insert(d.warnings.end(), w2.begin(), w2.end());
    }
    auto [train, val] = split_train_val(std::move(full_train), o.val_ratio, o.seed);
    d.train = std::move(train);
    d.val = std::move(val);
  }
  std::vector<Instance> all = d.train;
  all.insert(all.end(), d.val.begin(), d.val.end());
  all.insert(all.end(), d.test.begin(), d.test.end());
  if (o.dataset != Dataset::Synthetic) d.inventory = CategoryInventory::from_instances(all);
  d.vocab = Vocabulary::build(all);
  return d;
}

std::string summary_table(const PreparedData& data) {
  std::ostringstream os;
  os << "split\tsentences\tsingle\tmulti\tNOL\tOL\tmentions\n";
  auto row = [&](const char* name, const std::vector<Instance>& part) {
    const CorpusStats s = corpus_stats(part);
    std::size_t mentions = 0;
    for (const auto& i : part) mentions += i.mentions.size();
    os << name << '\t' << s.total() << '\t' << s.single << '\t' << s.multi() << '\t' << s.non_overlapping << '\t'
       << s.overlapping << '\t' << mentions << '\n';
  };
  row("train", data.train);
  row("val", data.val);
  row("test", data.test);
  std::vector<Instance> train_val = data.train;
  train_val.insert(train_val.end(), data.val.begin(), data.val.end());
  row("train+val", train_val);
  return os.str();
}

std::string cmd_prepare(const PrepareOptions& options, std::vector<std::string>* warnings) {
  if (options.out.empty()) throw ConfigError("prepare needs an output directory");
  const PreparedData d = prepare_data(options);
  if (warnings != nullptr) *warnings = d.warnings;
  fs::create_directories(options.out);
  write_instances_file(options.out / "train.jsonl", d.train);
  write_instances_file(options.out / "val.jsonl", d.val);
  write_instances_file(options.out / "test.jsonl", d.test);
  {
    std::ostringstream os;
    for (std::size_t i = 1; i < d.vocab.size(); ++i) os << d.vocab.word(static_cast<int>(i)) << '\n';
    write_text(options.out / "vocab.txt", os.str());
  }
  {
    std::ostringstream os;
    for (const auto& l : d.inventory.labels()) os << l << '\n';
    write_text(options.out / "categories.txt", os.str());
  }
  {
    std::ostringstream os;
    os << "id\tsplit\n";
    for (const auto& i : d.train) os << i.sentence.id << "\ttrain\n";
    for (const auto& i : d.val) os << i.sentence.id << "\tval\n";
    for (const auto& i : d.test) os << i.sentence.id << "\ttest\n";
    write_text(options.out / "split.tsv", os.str());
  }
  const std::string table = summary_table(d);
  write_text(options.out / "summary.tsv", "# dataset=" + to_string(options.dataset) +
                                              " seed=" + std::to_string(options.seed) + '\n' + table);
  return table;
}

PreparedData load_prepared(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("prepared data directory " + dir.string() + " does not exist");
  PreparedData d;
  d.train = read_instances_file(dir / "train.jsonl");
  d.val = read_instances_file(dir / "val.jsonl");
  d.test = read_instances_file(dir / "test.jsonl");
  d.vocab = Vocabulary::from_words(read_lines(dir / "vocab.txt"));
  d.inventory = CategoryInventory(read_lines(dir / "categories.txt"));
  return d;
}

ModelConfig resolve_model(const TrainOptions& o) {
  ModelConfig m = o.model;
  if (o.variant != "custom") {
    const ModelConfig v = variant_config(o.variant);
    m.encoder = v.encoder;
    m.multi_task = v.multi_task;
    m.reg_alsc = v.reg_alsc;
    m.reg_acd = v.reg_acd;
  }
  m.classes = num_classes(o.mode);
  m.validate();
  return m;
}

TrainResult cmd_train(const TrainOptions& o) {
  const ModelConfig model = resolve_model(o);
  o.train.validate();
  if (o.out.empty()) throw ConfigError("train needs an output directory");
  const PreparedData prepared = load_prepared(o.data);
  TrainData data;
  data.mode = o.mode;
  data.vocab = prepared.vocab;
  data.inventory = prepared.inventory;
  data.train = encode_all(filter_for_mode(prepared.train, o.mode), data.vocab, data.inventory, o.mode);
  data.val = encode_all(filter_for_mode(prepared.val, o.mode), data.vocab, data.inventory, o.mode);
  if (data.train.empty() || data.val.empty()) throw DataError("no training or validation instances in this mode");

  std::optional<EmbeddingTable> pretrained;
  if (!o.embeddings.empty()) pretrained = load_embeddings(o.embeddings, data.vocab, model.dim, o.train.seed);

  TrainResult result = train(data, model, o.train, o.variant, pretrained ? &*pretrained : nullptr);

  fs::create_directories(o.out);
  save_checkpoint(o.out / "checkpoint.txt", result.best);
  {
    std::ostringstream os;
    write_history(os, result.history);
    write_text(o.out / "history.tsv", os.str());
  }
  {
    std::ostringstream os;
    os << "variant\t" << o.variant << '\n'
       << "mode\t" << to_string(o.mode) << '\n'
       << "seed\t" << o.train.seed << '\n'
       << "best_epoch\t" << result.best.epoch << '\n'
       << "val_acc\t" << format_g(result.best.score.accuracy) << '\n'
       << "val_f1\t" << format_g(result.best.score.macro_f1) << '\n'
       << "val_acd_f1\t" << format_g(result.best.score.acd_f1) << '\n'
       << "epochs_run\t" << result.last_epoch << '\n'
       << "early_stopped\t" << (result.early_stopped ? "yes" : "no") << '\n';
    if (pretrained) os << "embedding_coverage\t" << format_g(pretrained->coverage()) << '\n';
    write_text(o.out / "summary.txt", os.str());
  }
  return result;
}

namespace {

const std::vector<Instance>& split_of(const PreparedData& d, std::string_view split) {
  if (split == "train") return d.train;
  if (split == "val") return d.val;
  if (split == "test") return d.test;
  throw ConfigError("unknown split '" + std::string(split) + "' (expected train, val or test)");
}

void check_compatible(const Checkpoint& c, const PreparedData& d) {
  if (!(c.vocab == d.vocab)) throw DataError("checkpoint vocabulary does not match the prepared data");
  if (!(c.inventory == d.inventory)) throw DataError("checkpoint categories do not match the prepared data");
}

}  // namespace

std::string format_metrics(const EvaluationResult& r) {
  std::ostringstream os;
  os << "metric\tvalue\n";
  os << "mode\t" << to_string(r.alsc.mode) << '\n';
  os << "count\t" << r.alsc.count << '\n';
  os << "accuracy\t" << format_g(r.alsc.accuracy) << '\n';
  os << "macro_f1\t" << format_g(r.alsc.macro_f1) << '\n';
  for (std::size_t k = 0; k < r.alsc.per_class.size(); ++k) {
    const auto name = to_string(class_polarity(static_cast<int>(k), r.alsc.mode));
    const auto& s = r.alsc.per_class[k];
    os << name << ".precision\t" << format_g(s.precision) << '\n'
       << name << ".recall\t" << format_g(s.recall) << '\n'
       << name << ".f1\t" << format_g(s.f1) << '\n'
       << name << ".support\t" << s.support << '\n';
  }
  if (r.acd) {
    os << "acd.precision\t" << format_g(r.acd->precision) << '\n'
       << "acd.recall\t" << format_g(r.acd->recall) << '\n'
       << "acd.f1\t" << format_g(r.acd->f1) << '\n'
       << "acd.threshold\t" << format_g(r.acd->threshold) << '\n';
  }
  return os.str();
}

EvaluationResult cmd_eval(const EvalOptions& o) {
  const Checkpoint c = load_checkpoint(o.checkpoint);
  if (o.mode && *o.mode != c.mode) {
    throw ConfigError("checkpoint was trained in " + to_string(c.mode) + " mode, not " + to_string(*o.mode));
  }
  const PreparedData d = load_prepared(o.data);
  check_compatible(c, d);
  const auto usable = filter_for_mode(split_of(d, o.split), c.mode);
  const auto encoded = encode_all(usable, c.vocab, c.inventory, c.mode);
  EvaluationResult r = evaluate_model(c.params, c.model, encoded, c.mode);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text(o.out / "metrics.tsv", format_metrics(r));
    std::ostringstream os;
    os << "id\tcategory\tgold\tpredicted\n";
    std::size_t p = 0;
    for (const auto& inst : usable) {
      for (const auto& m : inst.mentions) {
        os << inst.sentence.id << '\t' << m.category << '\t' << to_string(m.polarity) << '\t'
           << to_string(r.predictions[p++]) << '\n';
      }
    }
    write_text(o.out / "predictions.tsv", os.str());
  }
  return r;
}

std::vector<fs::path> cmd_visualize(const VisualizeOptions& o) {
  if (o.out.empty()) throw ConfigError("visualize needs an output directory");
  const Checkpoint c = load_checkpoint(o.checkpoint);
  std::vector<Instance> chosen;
  if (!o.sentence.empty()) {
    if (!o.ids.empty()) throw ConfigError("give either sentence ids or a raw sentence, not both");
    if (o.aspects.empty()) throw ConfigError("a raw sentence needs at least one --aspects category:polarity");
    Instance inst;
    inst.sentence.id = "input";
    inst.sentence.raw_text = o.sentence;
    inst.sentence.tokens = tokenize(o.sentence);
    for (const auto& a : o.aspects) {
      const auto colon = a.rfind(':');
      if (colon == std::string::npos) throw ConfigError("aspect '" + a + "' is not category:polarity");
      inst.mentions.push_back({a.substr(0, colon), parse_polarity(a.substr(colon + 1))});
    }
    inst.overlap = inst.mentions.size() >= 2 ? Overlap::NonOverlapping : Overlap::Single;
    chosen.push_back(std::move(inst));
  } else {
    if (o.ids.empty()) throw ConfigError("visualize needs --ids or --sentence");
    const PreparedData d = load_prepared(o.data);
    check_compatible(c, d);
    const auto& pool = split_of(d, o.split);
    for (const auto& id : o.ids) {
      auto it = std::find_if(pool.begin(), pool.end(), [&](const Instance& i) { return i.sentence.id == id; });
      if (it == pool.end()) throw DataError("unknown sentence id '" + id + "' in split " + o.split);
      chosen.push_back(*it);
    }
  }
  fs::create_directories(o.out);
  std::vector<fs::path> written;
  std::vector<HeatmapTask> tasks = {HeatmapTask::Alsc};
  if (c.model.multi_task) tasks.push_back(HeatmapTask::Acd);
  for (const auto& inst : chosen) {
    for (auto task : tasks) {
      const HeatmapDoc doc = render_heatmaps(c, {inst}, task);
      if (doc.sentences.empty()) {
        throw DataError("sentence '" + inst.sentence.id + "' has no mention usable in " + to_string(c.mode) +
                        " mode");
      }
      const std::string stem = file_safe(inst.sentence.id) + "." + to_string(task);
      write_text(o.out / (stem + ".html"), doc.to_html());
      write_text(o.out / (stem + ".txt"), doc.to_text());
      written.push_back(o.out / (stem + ".html"));
      written.push_back(o.out / (stem + ".txt"));
    }
  }
  return written;
}

Comparison cmd_compare(const CompareOptions& o) {
  if (o.histories.empty()) throw ConfigError("compare needs at least one --history");
  std::vector<std::pair<std::string, History>> runs;
  for (const auto& spec : o.histories) {
    const auto eq = spec.find('=');
    fs::path path = eq == std::string::npos ? fs::path(spec) : fs::path(spec.substr(eq + 1));
    std::string name = eq != std::string::npos ? spec.substr(0, eq)
                       : path.has_parent_path() && path.parent_path().has_filename()
                           ? path.parent_path().filename().string()
                           : path.stem().string();
    std::istringstream in(read_file(path));
    runs.emplace_back(name, read_history(in, path.string()));
  }
  Comparison c = compare_runs(runs);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text(o.out / "comparison.tsv", c.table_tsv());
    write_text(o.out / "curves.tsv", c.curves_tsv());
  }
  return c;
}

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v != nullptr && *v != '\0' ? std::string(v) : fallback;
}

/// Options from a config file become `--key=value` arguments placed ahead of
/// the real ones; with take-last semantics the command line wins.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> config_args;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    std::string path;
    if (a == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file");
      path = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    } else {
      rest.push_back(a);
      continue;
    }
    std::string text;
    try {
      text = read_file(path);
    } catch (const DataError&) {
      throw ConfigError("cannot read config file " + path);
    }
    for (const auto& [k, v] : parse_config_text(text, path)) config_args.push_back("--" + k + "=" + v);
  }
  if (rest.empty()) return rest;
  // File values go right after the subcommand name so that later flags win.
  const std::size_t head = rest.size() > 1 && rest[1].rfind('-', 0) != 0 ? 2 : 1;
  std::vector<std::string> out(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(head));
  out.insert(out.end(), config_args.begin(), config_args.end());
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(head), rest.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  const std::string data_root = env_or("CAN_DATA_ROOT", "data");
  CLI::App app{"Constrained attention networks for multi-aspect sentiment analysis", "can"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all", "Help for every command");

  auto validated = [](auto parse) {
    return [parse](std::string& s) -> std::string {
      try {
        parse(s);
        return {};
      } catch (const std::exception& e) {
        return e.what();
      }
    };
  };
  const CLI::Validator mode_check(validated(parse_mode), "3way|binary", "mode");
  const CLI::Validator dataset_check(validated(parse_dataset), "rest14|rest15|synthetic", "dataset");
  const CLI::Validator gram_check(validated(parse_gram), "KxK|LxL", "gram");

  // prepare
  std::string prep_dataset = "synthetic";
  PrepareOptions prep;
  std::string prep_train, prep_test, prep_overlap, prep_out;
  auto* c_prep = app.add_subcommand("prepare", "Parse and split a dataset into canonical instance dumps");
  c_prep->add_option("--dataset", prep_dataset, "rest14, rest15 or synthetic")->check(dataset_check);
  c_prep->add_option("--train-xml", prep_train, "SemEval training XML (default $CAN_DATA_ROOT/<dataset>/train.xml)");
  c_prep->add_option("--test-xml", prep_test, "SemEval test XML (default $CAN_DATA_ROOT/<dataset>/test.xml)");
  c_prep->add_option("--overlap-annotations", prep_overlap, "id<TAB>OL|NOL file for multi-aspect sentences");
  c_prep->add_option("--out", prep_out, "Output directory (default $CAN_DATA_ROOT/prepared/<dataset>)");
  c_prep->add_option("--seed", prep.seed, "Split and generator seed");
  c_prep->add_option("--val-ratio", prep.val_ratio, "Train:validation ratio")->check(CLI::PositiveNumber);
  c_prep->add_option("--synthetic-train", prep.synthetic_train, "Synthetic training sentences");
  c_prep->add_option("--synthetic-val", prep.synthetic_val, "Synthetic validation sentences");
  c_prep->add_option("--synthetic-test", prep.synthetic_test, "Synthetic test sentences");
  c_prep->add_option("--synthetic-categories", prep.synthetic_categories, "Synthetic category count");
  c_prep->add_option("--synthetic-polarities", prep.synthetic_polarities, "2 or 3");
  c_prep->add_option("--synthetic-multi-fraction", prep.synthetic_multi_fraction, "Share of two-aspect sentences");

  // train
  TrainOptions tr;
  std::string tr_data, tr_out, tr_mode = "3way", tr_gram = "KxK", tr_dataset = "synthetic", tr_emb;
  std::string tr_encoder, tr_reg_alsc, tr_reg_acd;
  bool tr_multi = false;
  auto* c_train = app.add_subcommand("train", "Train a model variant");
  c_train->add_option("--variant", tr.variant, "Variant name or custom")->capture_default_str();
  c_train->add_option("--dataset", tr_dataset, "Dataset used for the default --data path")->check(dataset_check);
  c_train->add_option("--data", tr_data, "Prepared data directory (default $CAN_DATA_ROOT/prepared/<dataset>)");
  c_train->add_option("--mode", tr_mode, "3way or binary")->check(mode_check);
  c_train->add_option("--seed", tr.train.seed, "Initialisation, shuffling and dropout seed");
  c_train->add_option("--lambda", tr.model.lambda, "Regularization weight");
  c_train->add_option("--epochs", tr.train.max_epochs, "Maximum epochs");
  c_train->add_option("--patience", tr.train.patience, "Epochs without improvement before stopping");
  c_train->add_option("--dim", tr.model.dim, "Embedding and hidden size");
  c_train->add_option("--lr", tr.train.learning_rate, "Adagrad learning rate");
  c_train->add_option("--batch-size", tr.train.batch_size, "Sentences per batch");
  c_train->add_option("--dropout", tr.train.dropout, "Drop probability");
  c_train->add_option("--init-range", tr.train.init_range, "Uniform initialisation range");
  c_train->add_option("--gram", tr_gram, "Orthogonal penalty Gram matrix")->check(gram_check);
  c_train->add_option("--embeddings", tr_emb, "Pretrained word vectors (word v1 .. vd per line)");
  c_train->add_option("--out", tr_out, "Run directory")->required();
  c_train->add_option("--encoder", tr_encoder, "custom: lstm-avg, at or atae");
  c_train->add_flag("--multi-task", tr_multi, "custom: add the category detection task");
  c_train->add_option("--reg-alsc", tr_reg_alsc, "custom: none, Rs or Ro");
  c_train->add_option("--reg-acd", tr_reg_acd, "custom: none, Rs or Ro");

  // eval
  EvalOptions ev;
  std::string ev_ckpt, ev_data, ev_out, ev_mode, ev_dataset = "synthetic";
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a prepared split");
  c_eval->add_option("--checkpoint", ev_ckpt, "checkpoint.txt from a training run")->required();
  c_eval->add_option("--dataset", ev_dataset, "Dataset used for the default --data path")->check(dataset_check);
  c_eval->add_option("--data", ev_data, "Prepared data directory");
  c_eval->add_option("--split", ev.split, "train, val or test")->capture_default_str();
  c_eval->add_option("--mode", ev_mode, "Expected mode")->check(mode_check);
  c_eval->add_option("--out", ev_out, "Report directory");

  // visualize
  VisualizeOptions vz;
  std::string vz_ckpt, vz_data, vz_out, vz_dataset = "synthetic";
  auto* c_vis = app.add_subcommand("visualize", "Write attention heatmaps");
  c_vis->add_option("--checkpoint", vz_ckpt, "checkpoint.txt from a training run")->required();
  c_vis->add_option("--dataset", vz_dataset, "Dataset used for the default --data path")->check(dataset_check);
  c_vis->add_option("--data", vz_data, "Prepared data directory");
  c_vis->add_option("--split", vz.split, "train, val or test")->capture_default_str();
  c_vis->add_option("--ids", vz.ids, "Sentence ids")->delimiter(',')->multi_option_policy(
      CLI::MultiOptionPolicy::TakeAll);
  c_vis->add_option("--sentence", vz.sentence, "Raw sentence instead of ids");
  c_vis->add_option("--aspects", vz.aspects, "category:polarity list for --sentence")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  c_vis->add_option("--out", vz_out, "Output directory")->required();

  // compare
  CompareOptions cmp;
  std::string cmp_out;
  auto* c_cmp = app.add_subcommand("compare", "Tabulate training histories");
  c_cmp->add_option("--history", cmp.histories, "history.tsv, optionally name=path")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  c_cmp->add_option("--out", cmp_out, "Output directory");

  auto prepared_dir = [&](const std::string& given, const std::string& dataset) {
    return given.empty() ? fs::path(data_root) / "prepared" / dataset : fs::path(given);
  };

  try {
    std::vector<std::string> args = expand_config(raw_args);
    if (args.empty()) args.push_back("can");
    std::vector<std::string> reversed(args.rbegin(), std::prev(args.rend()));
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return kOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << '\n';
      return kConfigError;
    }

    if (c_prep->parsed()) {
      prep.dataset = parse_dataset(prep_dataset);
      const fs::path raw = fs::path(data_root) / prep_dataset;
      if (prep.dataset != Dataset::Synthetic) {
        prep.train_xml = prep_train.empty() ? raw / "train.xml" : fs::path(prep_train);
        prep.test_xml = prep_test.empty() ? raw / "test.xml" : fs::path(prep_test);
        if (prep_overlap.empty() && fs::exists(raw / "overlap.tsv")) prep_overlap = (raw / "overlap.tsv").string();
      }
      prep.overlap_annotations = prep_overlap;
      prep.out = prepared_dir(prep_out, prep_dataset);
      std::vector<std::string> warnings;
      const std::string table = cmd_prepare(prep, &warnings);
      for (const auto& w : warnings) err << "warning: " << w << '\n';
      out << table;
      out << "wrote " << prep.out.string() << '\n';
    } else if (c_train->parsed()) {
      tr.mode = parse_mode(tr_mode);
      tr.model.gram = parse_gram(tr_gram);
      const bool structural = !tr_encoder.empty() || tr_multi || !tr_reg_alsc.empty() || !tr_reg_acd.empty();
      if (tr.variant != "custom" && structural) {
        throw ConfigError("--encoder, --multi-task, --reg-alsc and --reg-acd require --variant custom");
      }
      if (tr.variant == "custom") {
        if (!tr_encoder.empty()) tr.model.encoder = parse_encoder(tr_encoder);
        tr.model.multi_task = tr_multi;
        if (!tr_reg_alsc.empty()) tr.model.reg_alsc = parse_reg(tr_reg_alsc);
        if (!tr_reg_acd.empty()) tr.model.reg_acd = parse_reg(tr_reg_acd);
      }
      if (c_train->count("--patience") == 0 && tr.train.patience > tr.train.max_epochs) {
        tr.train.patience = tr.train.max_epochs;
      }
      tr.data = prepared_dir(tr_data, tr_dataset);
      tr.embeddings = tr_emb;
      tr.out = tr_out;
      const TrainResult r = cmd_train(tr);
      out << "variant " << tr.variant << ", mode " << to_string(tr.mode) << ": best epoch " << r.best.epoch
          << ", val acc " << format_g(r.best.score.accuracy) << ", val macro-F1 " << format_g(r.best.score.macro_f1)
          << (r.early_stopped ? " (early stop at epoch " + std::to_string(r.last_epoch) + ")" : "") << '\n';
      out << "wrote " << tr.out.string() << '\n';
    } else if (c_eval->parsed()) {
      ev.checkpoint = ev_ckpt;
      ev.data = prepared_dir(ev_data, ev_dataset);
      if (!ev_mode.empty()) ev.mode = parse_mode(ev_mode);
      ev.out = ev_out;
      out << format_metrics(cmd_eval(ev));
    } else if (c_vis->parsed()) {
      vz.checkpoint = vz_ckpt;
      vz.data = prepared_dir(vz_data, vz_dataset);
      vz.out = vz_out;
      for (const auto& p : cmd_visualize(vz)) out << "wrote " << p.string() << '\n';
    } else if (c_cmp->parsed()) {
      cmp.out = cmp_out;
      const Comparison c = cmd_compare(cmp);
      for (const auto& w : c.warnings) err << "warning: " << w << '\n';
      out << c.table_tsv();
    }
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace can::cli
