#pragma once

// Data ingestion for multi-aspect sentiment analysis: SemEval restaurant
// reviews, overlap annotations, vocabularies, pretrained embeddings,
// synthetic corpora and padded mini-batches.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace can {

/// Malformed or unreadable input data. The message carries file and line
/// information where it is known.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Polarity { Positive, Neutral, Negative };

enum class Overlap { Single, NonOverlapping, Overlapping };

/// Evaluation mode: 3-way (positive/neutral/negative) or binary
/// (positive/negative, neutral mentions filtered out).
enum class Mode { ThreeWay, Binary };

std::string to_string(Polarity p);
std::string to_string(Overlap o);
std::string to_string(Mode m);
Polarity parse_polarity(std::string_view s);
Overlap parse_overlap(std::string_view s);
Mode parse_mode(std::string_view s);

int num_classes(Mode m);
/// Class index of a polarity within a mode. Neutral has no binary index.
int class_index(Polarity p, Mode m);
Polarity class_polarity(int index, Mode m);

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::string raw_text;

  bool operator==(const Sentence&) const = default;
};

struct AspectMention {
  std::string category;
  Polarity polarity = Polarity::Positive;

  bool operator==(const AspectMention&) const = default;
};

/// One sentence with all of its aspect mentions, the multi-aspect unit.
struct Instance {
  Sentence sentence;
  std::vector<AspectMention> mentions;
  Overlap overlap = Overlap::Single;

  bool operator==(const Instance&) const = default;
  bool multi_aspect() const { return mentions.size() >= 2; }
};

/// Lowercase, split on whitespace and ASCII punctuation.
std::vector<std::string> tokenize(std::string_view text);

std::vector<Instance> parse_semeval14(std::string_view xml);
std::vector<Instance> parse_semeval15(std::string_view xml);

std::string read_file(const std::filesystem::path& path);

/// sentence id -> overlapping / non-overlapping, read from `id<TAB>OL|NOL` lines.
using OverlapAnnotations = std::map<std::string, Overlap>;
OverlapAnnotations parse_overlap_annotations(std::string_view text);
std::string format_overlap_annotations(const OverlapAnnotations& annotations);

/// Applies annotations to multi-aspect instances. Returns warnings for
/// multi-aspect instances with no annotation and annotations naming unknown
/// sentence ids.
std::vector<std::string> merge_overlap_annotations(std::vector<Instance>& instances,
                                                   const OverlapAnnotations& annotations);

/// Shuffled split at sentence granularity. The validation part holds
/// floor(n / (ratio + 1)) instances.
std::pair<std::vector<Instance>, std::vector<Instance>> split_train_val(
    std::vector<Instance> instances, int ratio, std::uint64_t seed);

/// Drops neutral mentions (and instances left with none); re-derives the
/// overlap flag of instances that fall back to a single mention.
std::vector<Instance> filter_for_mode(const std::vector<Instance>& instances, Mode mode);

class CategoryInventory {
 public:
  CategoryInventory() = default;
  explicit CategoryInventory(std::vector<std::string> labels);

  /// Sorted set of every category mentioned in `instances`.
  static CategoryInventory from_instances(const std::vector<Instance>& instances);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  std::optional<int> index(std::string_view label) const;

  bool operator==(const CategoryInventory&) const = default;

 private:
  std::vector<std::string> labels_;
};

/// word -> index map. Index 0 is reserved for unknown words and padding.
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary();
  /// Indexes every training token; words are ordered lexicographically.
  static Vocabulary build(const std::vector<Instance>& train);
  static Vocabulary from_words(const std::vector<std::string>& words_without_unknown);

  int index(std::string_view word) const;
  const std::string& word(int index) const { return words_.at(static_cast<std::size_t>(index)); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

struct EmbeddingTable {
  Eigen::MatrixXd matrix;  // |V| x d
  std::size_t found = 0;   // vocabulary rows copied from the file
  double coverage() const {
    return matrix.rows() == 0 ? 0.0 : static_cast<double>(found) / static_cast<double>(matrix.rows());
  }
};

/// Reads `word v1 ... vd` lines. Words missing from the file are drawn from
/// U(-0.01, 0.01). A line with the wrong number of values is fatal.
EmbeddingTable load_embeddings(std::istream& in, const Vocabulary& vocab, int dim, std::uint64_t seed,
                               std::string_view source_name = "<embeddings>");
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, int dim,
                               std::uint64_t seed);

struct SyntheticSpec {
  int n_sentences = 60;
  int n_categories = 4;
  int vocab_size = 40;
  std::uint64_t seed = 1;
  int n_polarities = 2;         // 2: positive/negative, 3: adds neutral
  double multi_fraction = 0.5;  // share of two-aspect sentences
};

struct SyntheticCorpus {
  std::vector<Instance> instances;
  CategoryInventory inventory;
};

/// Template sentences "<term-A> <opinion-A> and <term-B> <opinion-B>" whose
/// planted opinion words decide each aspect's polarity. A filler word may
/// precede an opinion.
SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

/// Opinion words the synthetic generator plants for a polarity.
std::vector<std::string> synthetic_opinion_words(Polarity p);

/// Canonical line-delimited JSON dump, one instance per line.
void write_instances(std::ostream& out, const std::vector<Instance>& instances);
std::vector<Instance> read_instances(std::istream& in, std::string_view source_name = "<instances>");

/// Instance mapped to model indices.
struct EncodedInstance {
  std::string id;
  std::vector<int> tokens;
  std::vector<int> categories;  // inventory index per mention
  std::vector<int> labels;      // class index per mention
  Overlap overlap = Overlap::Single;
};

/// Throws DataError for categories outside the inventory or mentions that
/// have no class in `mode`.
EncodedInstance encode(const Instance& instance, const Vocabulary& vocab, const CategoryInventory& inventory,
                       Mode mode);
std::vector<EncodedInstance> encode_all(const std::vector<Instance>& instances, const Vocabulary& vocab,
                                        const CategoryInventory& inventory, Mode mode);

/// Token ids padded with index 0 to a common length; mask marks real tokens.
struct PaddedSequence {
  std::vector<int> ids;
  std::vector<bool> mask;
  int length = 0;
};

struct Batch {
  std::vector<const EncodedInstance*> items;
  std::vector<PaddedSequence> sequences;
  int max_length = 0;
};

PaddedSequence pad(const std::vector<int>& tokens, int length);

/// Shuffles with (seed, epoch) and cuts into batches of at most batch_size.
std::vector<Batch> make_batches(const std::vector<EncodedInstance>& instances, int batch_size,
                                std::uint64_t seed, int epoch);

struct CorpusStats {
  int single = 0;
  int overlapping = 0;
  int non_overlapping = 0;
  int multi() const { return overlapping + non_overlapping; }
  int total() const { return single + multi(); }
};

CorpusStats corpus_stats(const std::vector<Instance>& instances);

}  // namespace can
