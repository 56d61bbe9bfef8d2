#include "can/evaluation.hpp"
#include "can/report.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <regex>
#include <sstream>

using namespace can;

namespace {

constexpr Polarity kPos = Polarity::Positive;
constexpr Polarity kNeu = Polarity::Neutral;
constexpr Polarity kNeg = Polarity::Negative;

// Confusion-matrix computation written independently of alsc_metrics.
struct Oracle {
  double accuracy = 0;
  double macro_f1 = 0;
  std::vector<double> f1;
};

Oracle confusion_oracle(const std::vector<Polarity>& pred, const std::vector<Polarity>& gold, Mode mode) {
  const std::vector<Polarity> classes =
      mode == Mode::ThreeWay ? std::vector<Polarity>{kPos, kNeu, kNeg} : std::vector<Polarity>{kPos, kNeg};
  std::map<std::pair<Polarity, Polarity>, int> cm;  // (gold, pred)
  int n = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (mode == Mode::Binary && gold[i] == kNeu) continue;
    ++cm[{gold[i], pred[i]}];
    ++n;
  }
  Oracle o;
  int diag = 0;
  for (Polarity c : classes) diag += cm[{c, c}];
  o.accuracy = static_cast<double>(diag) / n;
  std::vector<double> f1_by_index(classes.size());
  for (Polarity c : classes) {
    int col = 0, row = 0;
    for (Polarity other : classes) {
      col += cm[{other, c}];
      row += cm[{c, other}];
    }
    row += cm[{c, kNeu}] * (mode == Mode::Binary ? 1 : 0);
    const double tp = cm[{c, c}];
    const double p = col ? tp / col : 0.0;
    const double r = row ? tp / row : 0.0;
    f1_by_index[static_cast<std::size_t>(class_index(c, mode))] = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  o.f1 = f1_by_index;
  for (double f : o.f1) o.macro_f1 += f / static_cast<double>(classes.size());
  return o;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> numbers_in_row(const std::string& text, const std::string& row_label) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find(row_label);
    if (pos == std::string::npos || line.find('&') == std::string::npos) continue;
    std::vector<double> out;
    const std::regex num(R"((\d+(?:\.\d+)?))");
    const std::string rest = line.substr(line.find('&'));
    for (std::sregex_iterator it(rest.begin(), rest.end(), num), end; it != end; ++it) out.push_back(std::stod((*it)[1]));
    return out;
  }
  return {};
}

}  // namespace

TEST_CASE("alsc metrics examples") {
  const auto all = alsc_metrics({kPos, kNeg, kNeu}, {kPos, kNeg, kNeu}, Mode::ThreeWay);
  CHECK(all.accuracy == 1.0);
  CHECK(all.macro_f1 == 1.0);

  const auto half = alsc_metrics({kPos, kPos}, {kPos, kNeg}, Mode::Binary);
  CHECK(half.accuracy == 0.5);
  const auto& pos = half.per_class[static_cast<std::size_t>(class_index(kPos, Mode::Binary))];
  CHECK(pos.precision == 0.5);
  CHECK(pos.recall == 1.0);
  CHECK(pos.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(half.per_class[static_cast<std::size_t>(class_index(kNeg, Mode::Binary))].f1 == 0.0);
  CHECK(half.macro_f1 == doctest::Approx(1.0 / 3.0));

  // binary mode skips neutral golds and counts a neutral prediction as wrong
  const auto bin = alsc_metrics({kNeu, kPos, kNeg}, {kPos, kNeu, kNeg}, Mode::Binary);
  CHECK(bin.count == 2);
  CHECK(bin.accuracy == 0.5);

  CHECK_THROWS(alsc_metrics({}, {}, Mode::ThreeWay));
  CHECK_THROWS(alsc_metrics({kNeu}, {kNeu}, Mode::Binary));
}

TEST_CASE("alsc metrics agree with a confusion-matrix oracle") {
  std::mt19937_64 rng(99);
  const std::vector<Polarity> all = {kPos, kNeu, kNeg};
  for (int trial = 0; trial < 1000; ++trial) {
    const Mode mode = trial % 2 ? Mode::Binary : Mode::ThreeWay;
    const std::size_t n = 1 + rng() % 40;
    std::vector<Polarity> pred(n), gold(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = all[rng() % 3];
      gold[i] = all[rng() % 3];
    }
    if (mode == Mode::Binary) gold[0] = kNeg;
    const auto report = alsc_metrics(pred, gold, mode);
    const auto oracle = confusion_oracle(pred, gold, mode);
    CAPTURE(trial);
    CHECK(report.accuracy == doctest::Approx(oracle.accuracy).epsilon(1e-12));
    CHECK(report.macro_f1 == doctest::Approx(oracle.macro_f1).epsilon(1e-12));
    for (std::size_t k = 0; k < oracle.f1.size(); ++k) CHECK(report.per_class[k].f1 == doctest::Approx(oracle.f1[k]));
    CHECK(report.accuracy >= 0.0);
    CHECK(report.macro_f1 <= 1.0);
  }
}

TEST_CASE("acd metrics") {
  const auto perfect = acd_metrics({{1.0, 0.0, 0.0}, {0.0, 1.0, 1.0}}, {{1, 0, 0}, {0, 1, 1}});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const auto none = acd_metrics({{0.1, 0.2}}, {{1, 0}});
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  CHECK(acd_metrics({{0.5}}, {{1}}).true_positives == 1);
  CHECK_THROWS(acd_metrics({{0.5}}, {{1}}, 1.0));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> scores(5, std::vector<double>(4));
    std::vector<std::vector<int>> golds(5, std::vector<int>(4));
    for (auto& s : scores)
      for (double& v : s) v = u(rng);
    for (auto& g : golds)
      for (int& v : g) v = u(rng) < 0.4;
    const auto r = acd_metrics(scores, golds);
    if (r.precision + r.recall > 0) {
      CHECK(r.f1 == doctest::Approx(2 * r.precision * r.recall / (r.precision + r.recall)));
    }
  }
}

TEST_CASE("model evaluation") {
  ModelConfig m;
  m.dim = 4;
  m.classes = 2;
  m.multi_task = true;
  const ModelParams p = init_params(m, 8, 3, 1, 0.3);
  const std::vector<EncodedInstance> data = {{"a", {1, 2, 3}, {0, 2}, {0, 1}, Overlap::NonOverlapping},
                                             {"b", {4, 5}, {1}, {1}, Overlap::Single}};
  const auto r = evaluate_model(p, m, data, Mode::Binary);
  CHECK(r.predictions.size() == 3);
  CHECK(r.alsc.count == 3);
  REQUIRE(r.acd.has_value());
  CHECK(r.acd->true_positives + r.acd->false_negatives == 3);
  CHECK_THROWS_AS(evaluate_model(p, m, data, Mode::ThreeWay), ConfigError);
  CHECK(mean_attention_overlap(p, m, data) >= 0.0);
  CHECK_THROWS(mean_attention_overlap(p, m, {data[1]}));
}

TEST_CASE("heatmaps") {
  Checkpoint ck;
  ck.variant = "M-CAN-2Ro";
  ck.mode = Mode::ThreeWay;
  ck.model.dim = 4;
  ck.model.multi_task = true;
  ck.vocab = Vocabulary::from_words({"<b>", "and", "food", "good", "service", "slow", "the", "was"});
  ck.inventory = CategoryInventory({"ambience", "food", "service"});
  ck.params = init_params(ck.model, ck.vocab.size(), ck.inventory.size(), 2, 0.5);

  Instance inst;
  inst.sentence.id = "s1";
  inst.sentence.tokens = {"the", "food", "was", "good", "and", "service", "slow", "<b>"};
  inst.mentions = {{"food", kPos}, {"service", kNeg}};
  inst.overlap = Overlap::NonOverlapping;

  const HeatmapDoc alsc = render_heatmaps(ck, {inst}, HeatmapTask::Alsc);
  REQUIRE(alsc.sentences.size() == 1);
  REQUIRE(alsc.sentences[0].rows.size() == 2);
  const HeatmapDoc acd = render_heatmaps(ck, {inst}, HeatmapTask::Acd);
  CHECK(acd.sentences[0].rows.size() == 3);
  CHECK(acd.sentences[0].rows[0].gold == "no");
  CHECK(acd.sentences[0].rows[1].gold == "yes");

  SUBCASE("weights are the model's attention verbatim") {
    const ForwardOutput out = infer(ck.params, ck.model, encode(inst, ck.vocab, ck.inventory, ck.mode));
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& w = alsc.sentences[0].rows[k].weights;
      REQUIRE(w.size() == inst.sentence.tokens.size());
      for (std::size_t l = 0; l < w.size(); ++l) {
        CHECK(w[l] == out.alsc_attention(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)));
      }
    }
    const std::string html = alsc.to_html();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", out.alsc_attention(1, 3));
    CHECK(html.find(std::string("data-weight=\"") + buf + "\"") != std::string::npos);
    CHECK(html.find("&lt;b&gt;") != std::string::npos);
    CHECK(alsc.to_text().find("# s1 [alsc]") == 0);
  }

  SUBCASE("deterministic output") {
    CHECK(render_heatmaps(ck, {inst}, HeatmapTask::Alsc).to_html() == alsc.to_html());
  }

  SUBCASE("one-hot rows saturate one cell") {
    HeatmapDoc doc;
    doc.sentences.push_back({"x", {"a", "b", "c"}, {{"food", "positive", "positive", {0, 1, 0}}}});
    const std::string html = doc.to_html();
    std::size_t saturated = 0;
    for (std::size_t pos = 0; (pos = html.find("data-weight=\"1.000000\"", pos)) != std::string::npos; ++pos) {
      ++saturated;
    }
    CHECK(saturated == 1);
  }

  SUBCASE("mismatches are rejected") {
    Checkpoint single = ck;
    single.model.multi_task = false;
    CHECK_THROWS_AS(render_heatmaps(single, {inst}, HeatmapTask::Acd), ConfigError);
    Checkpoint wrong = ck;
    wrong.vocab = Vocabulary::from_words({"food"});
    CHECK_THROWS_AS(render_heatmaps(wrong, {inst}, HeatmapTask::Alsc), DataError);
  }
}

TEST_CASE("moving average") {
  CHECK(moving_average({1, 2, 3, 4}, 2) == std::vector<double>{1, 1.5, 2.5, 3.5});
  CHECK(moving_average({4, 2}, 10) == std::vector<double>{4, 3});
  CHECK_THROWS(moving_average({1}, 0));
}

TEST_CASE("run comparison") {
  History a;
  a.variant = "M-CAN-2Ro";
  a.mode = Mode::Binary;
  a.epochs.push_back({1, 1, 1, 0, 0.5, 0.1, 0.4, 0.7, 0.6, 0.8});
  a.epochs.push_back({2, 1, 1, 0, 0.4, 0.1, 0.3, 0.9, 0.8, 0.9});
  a.epochs.push_back({3, 1, 1, 0, 0.3, 0.1, 0.2, 0.9, 0.85, 1.0});
  History b = a;
  b.mode = Mode::ThreeWay;

  const Comparison one = compare_runs({{"a", a}});
  REQUIRE(one.groups.size() == 1);
  CHECK(one.groups[0].runs[0].best_epoch == 2);
  CHECK(one.groups[0].runs[0].final_reg_orthogonal == 0.2);
  CHECK(one.warnings.empty());

  const Comparison twin = compare_runs({{"x", a}, {"y", a}});
  const std::string table = twin.table_tsv();
  const auto first = table.find("\nx\t");
  const auto second = table.find("\ny\t");
  REQUIRE(first != std::string::npos);
  CHECK(table.substr(first + 2, second - first - 1) == table.substr(second + 2));

  const Comparison mixed = compare_runs({{"a", a}, {"b", b}});
  CHECK(mixed.groups.size() == 2);
  CHECK(mixed.warnings.size() == 1);
  CHECK(mixed.curves_tsv().find("# mode=3way") != std::string::npos);
  CHECK_THROWS(compare_runs({}));
}

TEST_CASE("reference values from the published tables") {
  const std::string published = read_text(CAN_PUBLISHED_TABLES);
  REQUIRE_FALSE(published.empty());

  // dataset statistics: single, OL, NOL, multi, total
  const auto r14_train = numbers_in_row(published, "Rest14\\_Train");
  REQUIRE(r14_train.size() == 5);
  CHECK(r14_train[0] == 2053);
  CHECK(r14_train[3] == 482);
  CHECK(r14_train[4] == 2535);
  CorpusStats stats{static_cast<int>(r14_train[0]), static_cast<int>(r14_train[1]), static_cast<int>(r14_train[2])};
  CHECK(stats.multi() == 482);
  CHECK(stats.total() == 2535);

  auto nol_share = [&](const char* prefix) {
    double nol = 0, multi = 0;
    for (const char* split : {"\\_Train", "\\_Val", "\\_Test"}) {
      const auto row = numbers_in_row(published, std::string(prefix) + split);
      nol += row.at(2);
      multi += row.at(3);
    }
    return 100.0 * nol / multi;
  };
  CHECK(std::round(nol_share("Rest14") * 100) / 100 == 85.23);
  CHECK(std::round(nol_share("Rest15") * 100) / 100 == 83.73);
  CHECK(published.find("85.23") != std::string::npos);

  // Rest15 train + validation under a 5:1 split
  const auto r15_train = numbers_in_row(published, "Rest15\\_Train");
  const auto r15_val = numbers_in_row(published, "Rest15\\_Val");
  CHECK(r15_train.at(4) == 931);
  CHECK(r15_val.at(4) == 189);

  const auto atae = numbers_in_row(published, "ATAE-LSTM &");
  REQUIRE(atae.size() >= 2);
  CHECK(atae[0] == 82.18);
  CHECK(atae[1] == 69.18);

  const auto full = numbers_in_row(published, "M-CAN-2$R_o$ & {");
  const auto baseline = numbers_in_row(published, "M-AT-LSTM    &");
  REQUIRE_FALSE(full.empty());
  REQUIRE_FALSE(baseline.empty());
  CHECK(full[0] == 84.28);
  CHECK(baseline[0] == 82.60);
  CHECK(full[0] > baseline[0]);

  const auto acd = numbers_in_row(published, "M-CAN-2$R_o$  &");
  REQUIRE(acd.size() >= 3);
  CHECK(acd[2] == 0.8765);
  CHECK(std::abs(2 * acd[0] * acd[1] / (acd[0] + acd[1]) - acd[2]) < 5e-4);
}
