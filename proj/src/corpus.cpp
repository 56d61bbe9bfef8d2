#include "can/corpus.hpp"

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace can {

namespace pt = boost::property_tree;
using json = nlohmann::json;

std::string to_string(Polarity p) {
  switch (p) {
    case Polarity::Positive: return "positive";
    case Polarity::Neutral: return "neutral";
    case Polarity::Negative: return "negative";
  }
  return "?";
}

std::string to_string(Overlap o) {
  switch (o) {
    case Overlap::Single: return "single";
    case Overlap::NonOverlapping: return "NOL";
    case Overlap::Overlapping: return "OL";
  }
  return "?";
}

std::string to_string(Mode m) { return m == Mode::ThreeWay ? "3way" : "binary"; }

Polarity parse_polarity(std::string_view s) {
  if (s == "positive") return Polarity::Positive;
  if (s == "neutral") return Polarity::Neutral;
  if (s == "negative") return Polarity::Negative;
  throw DataError("unknown polarity '" + std::string(s) + "'");
}

Overlap parse_overlap(std::string_view s) {
  if (s == "single") return Overlap::Single;
  if (s == "NOL" || s == "non-overlapping") return Overlap::NonOverlapping;
  if (s == "OL" || s == "overlapping") return Overlap::Overlapping;
  throw DataError("unknown overlap flag '" + std::string(s) + "'");
}

Mode parse_mode(std::string_view s) {
  if (s == "3way" || s == "3-way") return Mode::ThreeWay;
  if (s == "binary") return Mode::Binary;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "' (expected 3way or binary)");
}

int num_classes(Mode m) { return m == Mode::ThreeWay ? 3 : 2; }

int class_index(Polarity p, Mode m) {
  if (m == Mode::ThreeWay) {
    switch (p) {
      case Polarity::Positive: return 0;
      case Polarity::Neutral: return 1;
      case Polarity::Negative: return 2;
    }
  }
  switch (p) {
    case Polarity::Positive: return 0;
    case Polarity::Negative: return 1;
    case Polarity::Neutral: break;
  }
  throw DataError("neutral polarity has no class in binary mode");
}

Polarity class_polarity(int index, Mode m) {
  if (m == Mode::ThreeWay) {
    static constexpr Polarity kThree[] = {Polarity::Positive, Polarity::Neutral, Polarity::Negative};
    if (index < 0 || index > 2) throw std::out_of_range("class index");
    return kThree[index];
  }
  if (index == 0) return Polarity::Positive;
  if (index == 1) return Polarity::Negative;
  throw std::out_of_range("class index");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      flush();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return tokens;
}

namespace {

pt::ptree parse_xml(std::string_view xml) {
  std::istringstream in{std::string(xml)};
  pt::ptree tree;
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw DataError("malformed XML: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

// Returns nullopt for "conflict"; throws for anything unknown.
std::optional<Polarity> read_polarity(const std::string& s, const std::string& sentence_id) {
  if (s == "conflict") return std::nullopt;
  try {
    return parse_polarity(s);
  } catch (const DataError&) {
    throw DataError("sentence " + sentence_id + ": unknown polarity '" + s + "'");
  }
}

Sentence make_sentence(const pt::ptree& node) {
  Sentence s;
  s.id = node.get<std::string>("<xmlattr>.id", "");
  s.raw_text = node.get<std::string>("text", "");
  s.tokens = tokenize(s.raw_text);
  return s;
}

Instance finish_instance(Sentence sentence, std::vector<AspectMention> mentions) {
  Instance inst{std::move(sentence), std::move(mentions), Overlap::Single};
  inst.overlap = inst.multi_aspect() ? Overlap::NonOverlapping : Overlap::Single;
  return inst;
}

}  // namespace

std::vector<Instance> parse_semeval14(std::string_view xml) {
  const pt::ptree tree = parse_xml(xml);
  const auto root = tree.get_child_optional("sentences");
  if (!root) throw DataError("SemEval-2014 XML: missing <sentences> root");
  std::vector<Instance> out;
  for (const auto& [tag, node] : *root) {
    if (tag != "sentence") continue;
    Sentence sentence = make_sentence(node);
    std::vector<AspectMention> mentions;
    if (const auto cats = node.get_child_optional("aspectCategories")) {
      for (const auto& [ctag, cat] : *cats) {
        if (ctag != "aspectCategory") continue;
        const auto category = cat.get<std::string>("<xmlattr>.category", "");
        const auto polarity = read_polarity(cat.get<std::string>("<xmlattr>.polarity", ""), sentence.id);
        if (category.empty()) throw DataError("sentence " + sentence.id + ": aspectCategory without category");
        if (!polarity) continue;
        mentions.push_back({category, *polarity});
      }
    }
    if (mentions.empty() || sentence.tokens.empty()) continue;
    out.push_back(finish_instance(std::move(sentence), std::move(mentions)));
  }
  return out;
}

std::vector<Instance> parse_semeval15(std::string_view xml) {
  const pt::ptree tree = parse_xml(xml);
  const auto root = tree.get_child_optional("Reviews");
  if (!root) throw DataError("SemEval-2015 XML: missing <Reviews> root");
  std::vector<Instance> out;
  for (const auto& [rtag, review] : *root) {
    if (rtag != "Review") continue;
    const auto sentences = review.get_child_optional("sentences");
    if (!sentences) continue;
    for (const auto& [stag, node] : *sentences) {
      if (stag != "sentence") continue;
      Sentence sentence = make_sentence(node);
      // Votes per category, in first-seen order.
      std::vector<std::string> order;
      std::map<std::string, std::map<Polarity, int>> votes;
      if (const auto ops = node.get_child_optional("Opinions")) {
        for (const auto& [otag, op] : *ops) {
          if (otag != "Opinion") continue;
          const auto category = op.get<std::string>("<xmlattr>.category", "");
          const auto polarity = read_polarity(op.get<std::string>("<xmlattr>.polarity", ""), sentence.id);
          if (category.empty()) throw DataError("sentence " + sentence.id + ": Opinion without category");
          if (!polarity) continue;
          if (!votes.contains(category)) order.push_back(category);
          ++votes[category][*polarity];
        }
      }
      std::vector<AspectMention> mentions;
      for (const auto& category : order) {
        const auto& tally = votes[category];
        int best = 0;
        int winners = 0;
        Polarity winner = Polarity::Positive;
        for (const auto& [pol, count] : tally) {
          if (count > best) {
            best = count;
            winners = 1;
            winner = pol;
          } else if (count == best) {
            ++winners;
          }
        }
        if (winners == 1) mentions.push_back({category, winner});
      }
      if (mentions.empty() || sentence.tokens.empty()) continue;
      out.push_back(finish_instance(std::move(sentence), std::move(mentions)));
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

OverlapAnnotations parse_overlap_annotations(std::string_view text) {
  OverlapAnnotations out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("overlap annotations line " + std::to_string(line_no) + ": expected id<TAB>OL|NOL");
    }
    const std::string id = line.substr(0, tab);
    const std::string flag = line.substr(tab + 1);
    if (flag == "OL") {
      out[id] = Overlap::Overlapping;
    } else if (flag == "NOL") {
      out[id] = Overlap::NonOverlapping;
    } else {
      throw DataError("overlap annotations line " + std::to_string(line_no) + ": unknown flag '" + flag + "'");
    }
  }
  return out;
}

std::string format_overlap_annotations(const OverlapAnnotations& annotations) {
  std::string out;
  for (const auto& [id, flag] : annotations) {
    out += id;
    out += '\t';
    out += flag == Overlap::Overlapping ? "OL" : "NOL";
    out += '\n';
  }
  return out;
}

std::vector<std::string> merge_overlap_annotations(std::vector<Instance>& instances,
                                                   const OverlapAnnotations& annotations) {
  std::vector<std::string> warnings;
  std::set<std::string> known;
  for (auto& inst : instances) {
    known.insert(inst.sentence.id);
    if (!inst.multi_aspect()) {
      inst.overlap = Overlap::Single;
      continue;
    }
    if (auto it = annotations.find(inst.sentence.id); it != annotations.end()) {
      inst.overlap = it->second;
    } else {
      inst.overlap = Overlap::NonOverlapping;
      warnings.push_back("sentence " + inst.sentence.id + ": no overlap annotation, assuming non-overlapping");
    }
  }
  for (const auto& [id, flag] : annotations) {
    if (!known.contains(id)) warnings.push_back("annotation for unknown sentence id " + id);
  }
  return warnings;
}

std::pair<std::vector<Instance>, std::vector<Instance>> split_train_val(std::vector<Instance> instances,
                                                                        int ratio, std::uint64_t seed) {
  if (instances.empty()) throw std::invalid_argument("split_train_val: empty input");
  if (ratio < 1) throw std::invalid_argument("split_train_val: ratio must be >= 1");
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = instances.size() / static_cast<std::size_t>(ratio + 1);
  std::vector<bool> is_val(instances.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  std::vector<Instance> train, val;
  train.reserve(instances.size() - n_val);
  val.reserve(n_val);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    (is_val[i] ? val : train).push_back(std::move(instances[i]));
  }
  return {std::move(train), std::move(val)};
}

std::vector<Instance> filter_for_mode(const std::vector<Instance>& instances, Mode mode) {
  if (mode == Mode::ThreeWay) return instances;
  std::vector<Instance> out;
  for (const auto& inst : instances) {
    Instance copy = inst;
    std::erase_if(copy.mentions, [](const AspectMention& m) { return m.polarity == Polarity::Neutral; });
    if (copy.mentions.empty()) continue;
    if (!copy.multi_aspect()) copy.overlap = Overlap::Single;
    out.push_back(std::move(copy));
  }
  return out;
}

CategoryInventory::CategoryInventory(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (!seen.insert(l).second) throw std::invalid_argument("duplicate category label " + l);
  }
}

CategoryInventory CategoryInventory::from_instances(const std::vector<Instance>& instances) {
  std::set<std::string> labels;
  for (const auto& inst : instances) {
    for (const auto& m : inst.mentions) labels.insert(m.category);
  }
  return CategoryInventory({labels.begin(), labels.end()});
}

std::optional<int> CategoryInventory::index(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return static_cast<int>(i);
  }
  return std::nullopt;
}

Vocabulary::Vocabulary() {
  words_.emplace_back(kUnknownToken);
  index_.emplace(std::string(kUnknownToken), kUnknown);
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words_without_unknown) {
  Vocabulary v;
  for (const auto& w : words_without_unknown) {
    if (w == kUnknownToken || v.index_.contains(w)) throw DataError("vocabulary: duplicate word '" + w + "'");
    v.index_.emplace(w, static_cast<int>(v.words_.size()));
    v.words_.push_back(w);
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<Instance>& train) {
  std::set<std::string> words;
  for (const auto& inst : train) words.insert(inst.sentence.tokens.begin(), inst.sentence.tokens.end());
  words.erase(std::string(kUnknownToken));
  return from_words({words.begin(), words.end()});
}

int Vocabulary::index(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnknown : it->second;
}

EmbeddingTable load_embeddings(std::istream& in, const Vocabulary& vocab, int dim, std::uint64_t seed,
                               std::string_view source_name) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
  EmbeddingTable table;
  const auto rows = static_cast<Eigen::Index>(vocab.size());
  table.matrix.resize(rows, dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-0.01, 0.01);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) table.matrix(r, c) = uni(rng);
  }
  // 0: untouched, 1: filled from a case-folded match, 2: exact match.
  std::vector<int> filled(vocab.size(), 0);
  std::string line;
  int line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    values.clear();
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw DataError(std::string(source_name) + ":" + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
    }
    if (static_cast<int>(values.size()) != dim) {
      throw DataError(std::string(source_name) + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(dim) + " values, got " + std::to_string(values.size()));
    }
    std::string folded = word;
    std::transform(folded.begin(), folded.end(), folded.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const int idx = vocab.index(folded);
    if (idx == Vocabulary::kUnknown && folded != Vocabulary::kUnknownToken) continue;
    const int quality = folded == word ? 2 : 1;
    auto& slot = filled[static_cast<std::size_t>(idx)];
    if (slot >= quality) continue;
    if (slot == 0) ++table.found;
    slot = quality;
    for (int c = 0; c < dim; ++c) table.matrix(idx, c) = values[static_cast<std::size_t>(c)];
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, int dim,
                               std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file " + path.string());
  return load_embeddings(in, vocab, dim, seed, path.string());
}

namespace {

struct CategoryLexicon {
  std::string name;
  std::vector<std::string> terms;
};

std::vector<CategoryLexicon> synthetic_categories(int n) {
  static const std::vector<CategoryLexicon> kNamed = {
      {"food", {"food", "pizza"}},          {"service", {"service", "waiter"}},
      {"price", {"price", "bill"}},         {"ambience", {"ambience", "decor"}},
      {"drinks", {"drinks", "wine"}},       {"location", {"location", "view"}},
      {"staff", {"staff", "hostess"}},      {"menu", {"menu", "selection"}},
  };
  std::vector<CategoryLexicon> out;
  for (int i = 0; i < n; ++i) {
    if (i < static_cast<int>(kNamed.size())) {
      out.push_back(kNamed[static_cast<std::size_t>(i)]);
    } else {
      const std::string name = "aspect" + std::to_string(i);
      out.push_back({name, {name, name + "x"}});
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> synthetic_opinion_words(Polarity p) {
  switch (p) {
    case Polarity::Positive: return {"good", "great", "excellent"};
    case Polarity::Negative: return {"bad", "awful", "terrible"};
    case Polarity::Neutral: return {"ok", "average", "fine"};
  }
  return {};
}

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.n_categories < 2) throw std::invalid_argument("synthetic corpus needs at least 2 categories");
  if (spec.n_polarities != 2 && spec.n_polarities != 3) {
    throw std::invalid_argument("synthetic corpus supports 2 or 3 polarities");
  }
  if (spec.n_sentences < 0) throw std::invalid_argument("synthetic corpus: negative sentence count");
  const auto cats = synthetic_categories(spec.n_categories);
  std::vector<Polarity> polarities = {Polarity::Positive, Polarity::Negative};
  if (spec.n_polarities == 3) polarities.push_back(Polarity::Neutral);

  std::size_t fixed_words = 1;  // and
  for (const auto& c : cats) fixed_words += c.terms.size();
  for (auto p : polarities) fixed_words += synthetic_opinion_words(p).size();
  std::vector<std::string> fillers = {"really", "quite", "very", "sometimes", "honestly"};
  const int extra = spec.vocab_size - static_cast<int>(fixed_words + fillers.size());
  for (int i = 0; i < extra; ++i) fillers.push_back("filler" + std::to_string(i));

  std::mt19937_64 rng(spec.seed);
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  SyntheticCorpus corpus;
  {
    std::vector<std::string> labels;
    for (const auto& c : cats) labels.push_back(c.name);
    std::sort(labels.begin(), labels.end());
    corpus.inventory = CategoryInventory(labels);
  }

  for (int i = 0; i < spec.n_sentences; ++i) {
    const bool two = chance(spec.multi_fraction);
    const std::size_t first = pick(cats.size());
    std::size_t second = first;
    while (two && second == first) second = pick(cats.size());

    std::vector<std::string> tokens;
    std::vector<AspectMention> mentions;
    auto clause = [&](std::size_t cat) {
      const Polarity pol = polarities[pick(polarities.size())];
      const auto& terms = cats[cat].terms;
      const auto words = synthetic_opinion_words(pol);
      tokens.push_back(terms[pick(terms.size())]);
      if (chance(0.4)) tokens.push_back(fillers[pick(fillers.size())]);
      tokens.push_back(words[pick(words.size())]);
      mentions.push_back({cats[cat].name, pol});
    };
    clause(first);
    if (two) {
      tokens.push_back("and");
      clause(second);
    }

    Instance inst;
    inst.sentence.id = "syn-" + std::to_string(spec.seed) + "-" + std::to_string(i);
    inst.sentence.tokens = tokens;
    std::string text;
    for (const auto& t : tokens) {
      if (!text.empty()) text += ' ';
      text += t;
    }
    inst.sentence.raw_text = text;
    inst.mentions = std::move(mentions);
    inst.overlap = two ? Overlap::NonOverlapping : Overlap::Single;
    corpus.instances.push_back(std::move(inst));
  }
  return corpus;
}

void write_instances(std::ostream& out, const std::vector<Instance>& instances) {
  for (const auto& inst : instances) {
    json mentions = json::array();
    for (const auto& m : inst.mentions) mentions.push_back(json::array({m.category, to_string(m.polarity)}));
    json record = {{"id", inst.sentence.id},
                   {"text", inst.sentence.raw_text},
                   {"tokens", inst.sentence.tokens},
                   {"mentions", std::move(mentions)},
                   {"overlap", to_string(inst.overlap)}};
    out << record.dump() << '\n';
  }
}

std::vector<Instance> read_instances(std::istream& in, std::string_view source_name) {
  std::vector<Instance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json record = json::parse(line);
      Instance inst;
      inst.sentence.id = record.at("id").get<std::string>();
      inst.sentence.raw_text = record.value("text", std::string());
      inst.sentence.tokens = record.at("tokens").get<std::vector<std::string>>();
      for (const auto& m : record.at("mentions")) {
        inst.mentions.push_back({m.at(0).get<std::string>(), parse_polarity(m.at(1).get<std::string>())});
      }
      inst.overlap = parse_overlap(record.at("overlap").get<std::string>());
      if (inst.sentence.tokens.empty()) throw DataError("empty token list");
      if (inst.mentions.empty()) throw DataError("no mentions");
      if (inst.multi_aspect() == (inst.overlap == Overlap::Single)) {
        throw DataError("overlap flag inconsistent with mention count");
      }
      out.push_back(std::move(inst));
    } catch (const std::exception& e) {
      throw DataError(std::string(source_name) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

EncodedInstance encode(const Instance& instance, const Vocabulary& vocab, const CategoryInventory& inventory,
                       Mode mode) {
  EncodedInstance e;
  e.id = instance.sentence.id;
  e.overlap = instance.overlap;
  for (const auto& t : instance.sentence.tokens) e.tokens.push_back(vocab.index(t));
  std::set<int> seen;
  for (const auto& m : instance.mentions) {
    const auto idx = inventory.index(m.category);
    if (!idx) throw DataError("sentence " + e.id + ": category '" + m.category + "' not in inventory");
    if (!seen.insert(*idx).second) throw DataError("sentence " + e.id + ": duplicate category " + m.category);
    e.categories.push_back(*idx);
    e.labels.push_back(class_index(m.polarity, mode));
  }
  if (e.tokens.empty()) throw DataError("sentence " + e.id + ": no tokens");
  return e;
}

std::vector<EncodedInstance> encode_all(const std::vector<Instance>& instances, const Vocabulary& vocab,
                                        const CategoryInventory& inventory, Mode mode) {
  std::vector<EncodedInstance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(encode(inst, vocab, inventory, mode));
  return out;
}

PaddedSequence pad(const std::vector<int>& tokens, int length) {
  if (length < static_cast<int>(tokens.size())) throw std::invalid_argument("pad: length shorter than sequence");
  PaddedSequence s;
  s.length = static_cast<int>(tokens.size());
  s.ids.assign(static_cast<std::size_t>(length), Vocabulary::kUnknown);
  s.mask.assign(static_cast<std::size_t>(length), false);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    s.ids[i] = tokens[i];
    s.mask[i] = true;
  }
  return s;
}

std::vector<Batch> make_batches(const std::vector<EncodedInstance>& instances, int batch_size, std::uint64_t seed,
                                int epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    Batch b;
    for (std::size_t i = start; i < end; ++i) {
      const auto* item = &instances[order[i]];
      b.items.push_back(item);
      b.max_length = std::max(b.max_length, static_cast<int>(item->tokens.size()));
    }
    for (const auto* item : b.items) b.sequences.push_back(pad(item->tokens, b.max_length));
    batches.push_back(std::move(b));
  }
  return batches;
}

CorpusStats corpus_stats(const std::vector<Instance>& instances) {
  CorpusStats s;
  for (const auto& inst : instances) {
    switch (inst.overlap) {
      case Overlap::Single: ++s.single; break;
      case Overlap::Overlapping: ++s.overlapping; break;
      case Overlap::NonOverlapping: ++s.non_overlapping; break;
    }
  }
  return s;
}

}  // namespace can
