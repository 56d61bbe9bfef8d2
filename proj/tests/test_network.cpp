#include "can/network.hpp"
#include "can/training.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace can;

namespace {

struct Toy {
  ModelConfig config;
  ModelParams params;
  EncodedInstance instance;
  PaddedSequence seq;
};

// 5-word, 2-aspect sentence padded to 7 positions, 4 categories, d = 4.
Toy make_toy(ModelConfig config, std::uint64_t seed = 3) {
  config.dim = 4;
  Toy t;
  t.config = config;
  t.params = init_params(config, 9, 4, seed, 0.5);
  t.instance.id = "toy";
  t.instance.tokens = {1, 4, 2, 7, 3};
  t.instance.categories = {2, 0};
  t.instance.labels = {0, config.classes - 1};
  t.instance.overlap = Overlap::NonOverlapping;
  t.seq = pad(t.instance.tokens, 7);
  return t;
}

double gradient_error(Toy& t) {
  auto build = [&](Tape& tape) {
    const InstanceGraph g = forward(tape, t.params, t.config, t.seq, t.instance.categories);
    return instance_loss(tape, g, t.config, t.instance, 4).total;
  };
  return ad::finite_diff_check<double>(build, t.params.all(), 1e-5);
}

}  // namespace

TEST_CASE("full loss gradient matches finite differences for every configuration") {
  for (Encoder enc : {Encoder::LstmAvg, Encoder::At, Encoder::Atae}) {
    for (bool multi : {false, true}) {
      if (enc == Encoder::Atae && multi) continue;
      for (Reg ra : {Reg::None, Reg::Sparse, Reg::Orthogonal}) {
        if (enc == Encoder::LstmAvg && ra != Reg::None) continue;
        for (Reg rb : {Reg::None, Reg::Sparse, Reg::Orthogonal}) {
          if (!multi && rb != Reg::None) continue;
          ModelConfig c;
          c.encoder = enc;
          c.multi_task = multi;
          c.reg_alsc = ra;
          c.reg_acd = rb;
          Toy t = make_toy(c);
          CAPTURE(to_string(enc));
          CAPTURE(multi);
          CAPTURE(to_string(ra));
          CAPTURE(to_string(rb));
          CHECK(gradient_error(t) < 1e-4);
        }
      }
    }
  }
}

namespace {

Mat row_of(std::initializer_list<double> v) {
  Mat m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) m(0, i++) = x;
  return m;
}

Mat random_simplex_row(std::mt19937_64& rng, Eigen::Index n) {
  std::exponential_distribution<double> e(1.0);
  Mat m(1, n);
  for (Eigen::Index i = 0; i < n; ++i) m(0, i) = e(rng);
  return m / m.sum();
}

std::vector<double> softmax_oracle(const std::vector<double>& s) {
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double total = 0;
  std::vector<double> out;
  for (double v : s) {
    out.push_back(std::exp(v - mx));
    total += out.back();
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace

TEST_CASE("encode") {
  ModelConfig c;
  c.dim = 3;
  SUBCASE("zero parameters give a zero state") {
    ModelParams p = ModelParams::zeros(c, 4, 2);
    Tape tape;
    const Var h = encode(tape, p, pad({2}, 1), nullptr);
    CHECK(h.value().isZero());
  }
  SUBCASE("deterministic and zero on padding") {
    ModelParams p = init_params(c, 6, 2, 1, 0.5);
    Tape tape;
    const Var a = encode(tape, p, pad({1, 2, 3}, 5), nullptr);
    const Var b = encode(tape, p, pad({1, 2, 3}, 5), nullptr);
    CHECK(a.value() == b.value());
    CHECK(a.value().col(3).isZero());
    CHECK(a.value().col(4).isZero());
    CHECK_THROWS(encode(tape, p, pad({}, 2), nullptr));
  }
  SUBCASE("aspect required exactly in aspect-concat mode") {
    ModelParams p = init_params(c, 6, 2, 1, 0.5);
    Tape tape;
    const Var u = tape.constant(Mat::Ones(3, 1));
    CHECK_THROWS(encode(tape, p, pad({1}, 1), &u));
  }
  SUBCASE("six-step unroll gradient") {
    ModelParams p = init_params(c, 6, 2, 4, 0.5);
    const auto seq = pad({1, 2, 3, 4, 5, 1}, 6);
    auto build = [&](Tape& t) {
      const Var h = encode(t, p, seq, nullptr);
      return ad::reduce_sum(ad::cwise_product(h, t.constant(Mat::Constant(3, 6, 0.7))));
    };
    CHECK(ad::finite_diff_check<double>(build, {&p.word_embeddings, &p.lstm_w, &p.lstm_u, &p.lstm_b}) < 1e-4);
  }
}

TEST_CASE("aspect attention") {
  const std::vector<bool> all4(4, true);
  SUBCASE("zero weights give uniform weights") {
    Tape tape;
    const Var h = tape.constant(Mat::Random(3, 4));
    const AttentionWeights w{tape.constant(Mat::Zero(3, 3)), tape.constant(Mat::Zero(3, 3)),
                             tape.constant(Mat::Zero(3, 1))};
    const Var a = aspect_attention(h, tape.constant(Mat::Random(3, 1)), w, all4);
    for (int l = 0; l < 4; ++l) CHECK(a.value()(0, l) == doctest::Approx(0.25));
  }
  SUBCASE("crafted scores") {
    Tape tape;
    const Var h = tape.constant(row_of({30, -30, -30}));
    const AttentionWeights w{tape.constant(Mat::Ones(1, 1)), tape.constant(Mat::Zero(1, 1)),
                             tape.constant(Mat::Constant(1, 1, 10.0))};
    const Var a = aspect_attention(h, tape.constant(Mat::Zero(1, 1)), w, {true, true, true});
    const auto oracle = softmax_oracle({10 * std::tanh(30.0), 10 * std::tanh(-30.0), 10 * std::tanh(-30.0)});
    for (int l = 0; l < 3; ++l) CHECK(a.value()(0, l) == doctest::Approx(oracle[static_cast<std::size_t>(l)]));
    CHECK(a.value()(0, 0) > 0.999);
  }
  SUBCASE("random weights sum to one with zero mass on padding") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
      Tape tape;
      auto rnd = [&](Eigen::Index r, Eigen::Index c) {
        Mat m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = n(rng);
        return tape.constant(m);
      };
      const AttentionWeights w{rnd(3, 3), rnd(3, 3), rnd(3, 1)};
      const Var a = aspect_attention(rnd(3, 6), rnd(3, 1), w, {true, true, true, true, false, false});
      CHECK(a.value().sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(a.value()(0, 4) == 0.0);
      CHECK(a.value()(0, 5) == 0.0);
    }
  }
  SUBCASE("category detection attention uses its own parameters") {
    ModelConfig c;
    c.dim = 4;
    c.multi_task = true;
    ModelParams p = init_params(c, 9, 3, 2, 0.5);
    EncodedInstance inst{"x", {1, 2, 3, 4}, {1}, {0}, Overlap::Single};
    const ForwardOutput out = infer(p, c, inst);
    CHECK((out.alsc_attention.row(0) - out.acd_attention.row(1)).cwiseAbs().maxCoeff() > 1e-6);
  }
}

TEST_CASE("sparse regularizer") {
  Tape tape;
  CHECK(sparse_reg(tape.constant(row_of({0, 1, 0}))).scalar() == 0.0);
  CHECK(sparse_reg(tape.constant(row_of({0.25, 0.25, 0.25, 0.25}))).scalar() == 0.75);
  CHECK(sparse_reg(tape.constant(row_of({0.5, 0.3, 0.2}))).scalar() ==
        doctest::Approx(std::abs(0.25 + 0.09 + 0.04 - 1.0)).epsilon(1e-15));

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = 2 + trial % 9;
    const double uniform = 1.0 - 1.0 / static_cast<double>(n);
    const double v = sparse_reg(tape.constant(random_simplex_row(rng, n))).scalar();
    CHECK(v <= uniform + 1e-12);
    CHECK(v >= 0.0);
  }
}

TEST_CASE("orthogonal regularizer") {
  Tape tape;
  Mat m(2, 2);
  m << 1, 0, 0, 1;
  CHECK(orthogonal_reg(tape.constant(m)).scalar() == 0.0);
  m << 1, 0, 1, 0;
  CHECK(orthogonal_reg(tape.constant(m)).scalar() == doctest::Approx(std::sqrt(2.0)));
  CHECK(orthogonal_reg(tape.constant(row_of({0, 0, 1}))).scalar() == 0.0);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat row = random_simplex_row(rng, 5);
    CHECK(orthogonal_reg(tape.constant(row)).scalar() == doctest::Approx(sparse_reg(tape.constant(row)).scalar()));
  }

  // zero exactly when rows are one-hot and disjoint
  Mat overlap(2, 3);
  overlap << 1, 0, 0, 0, 0.5, 0.5;
  CHECK(orthogonal_reg(tape.constant(overlap)).scalar() > 0.0);
  Mat disjoint(3, 4);
  disjoint << 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 1;
  CHECK(orthogonal_reg(tape.constant(disjoint)).scalar() == 0.0);

  SUBCASE("literal L x L reading") {
    Mat one(1, 2);
    one << 1, 0;
    // M^T M - I_2 = diag(0, -1)
    CHECK(orthogonal_reg(tape.constant(one), Gram::LxL).scalar() == doctest::Approx(1.0));
  }
}

TEST_CASE("category detection matrix") {
  Tape tape;
  const Var g = build_acd_matrix({tape.constant(row_of({0.2, 0.8}))},
                                 {tape.constant(row_of({1, 0})), tape.constant(row_of({0, 1}))});
  CHECK(g.rows() == 2);
  CHECK(g.value()(1, 0) == 0.5);
  CHECK(g.value()(1, 1) == 0.5);

  std::mt19937_64 rng(3);
  std::vector<Var> mentioned, unmentioned;
  for (int i = 0; i < 2; ++i) mentioned.push_back(tape.constant(random_simplex_row(rng, 6)));
  for (int i = 0; i < 3; ++i) unmentioned.push_back(tape.constant(random_simplex_row(rng, 6)));
  const Var big = build_acd_matrix(mentioned, unmentioned);
  CHECK(big.rows() == 3);
  CHECK(big.cols() == 6);
  CHECK(big.value().row(2).sum() == doctest::Approx(1.0));
  CHECK(build_acd_matrix(mentioned, {}).rows() == 2);
}

TEST_CASE("representation and heads") {
  Tape tape;
  Mat hm(2, 3);
  hm << 0.1, 0.2, 0.3, -0.4, 0.5, 0.6;
  const Var h = tape.constant(hm);
  const Var last = tape.constant(hm.col(2));
  const Var id = tape.constant(Mat::Identity(2, 2));
  const Var zero = tape.constant(Mat::Zero(2, 2));
  const Var r = alsc_represent(h, tape.constant(row_of({0, 1, 0})), last, id, zero);
  CHECK(r.value()(0, 0) == doctest::Approx(std::tanh(0.2)));
  CHECK(r.value()(1, 0) == doctest::Approx(std::tanh(0.5)));
  CHECK(alsc_represent(h, tape.constant(row_of({0.2, 0.3, 0.5})), last, zero, zero).value().isZero());

  const Var p = alsc_predict(r, tape.constant(Mat::Zero(3, 2)), tape.constant(Mat::Zero(3, 1)));
  for (int k = 0; k < 3; ++k) CHECK(p.value()(k, 0) == doctest::Approx(1.0 / 3.0));
  Mat wp(3, 2);
  wp << 1, 2, -1, 0.5, 0, 3;
  const Var p1 = alsc_predict(r, tape.constant(wp), tape.constant(Mat::Zero(3, 1)));
  const Var p2 = alsc_predict(r, tape.constant(wp), tape.constant(Mat::Constant(3, 1, 7.0)));
  CHECK(p1.value().sum() == doctest::Approx(1.0));
  CHECK((p1.value() - p2.value()).cwiseAbs().maxCoeff() < 1e-12);

  const Var beta = tape.constant(row_of({0.2, 0.3, 0.5}));
  CHECK(acd_predict(h, beta, tape.constant(Mat::Zero(1, 2)), tape.constant(Mat::Zero(1, 1))).scalar() == 0.5);
  const double s = acd_predict(h, beta, tape.constant(Mat::Constant(1, 2, 40.0)), tape.constant(Mat::Zero(1, 1)))
                       .scalar();
  CHECK(s > 0.0);
  CHECK(s <= 1.0);
}

TEST_CASE("losses") {
  Tape tape;
  Mat sure(3, 1);
  sure << 1, 0, 0;
  CHECK(alsc_loss({tape.constant(sure)}, {0}).scalar() == 0.0);
  const Var uniform = tape.constant(Mat::Constant(3, 1, 1.0 / 3.0));
  CHECK(alsc_loss({uniform}, {1}).scalar() == doctest::Approx(-std::log(1.0 / 3.0)));
  Mat q(3, 1);
  q << 0.2, 0.5, 0.3;
  const Var qv = tape.constant(q);
  CHECK(alsc_loss({uniform, qv}, {1, 2}).scalar() ==
        doctest::Approx(alsc_loss({uniform}, {1}).scalar() + alsc_loss({qv}, {2}).scalar()));
  CHECK(std::isfinite(alsc_loss({tape.constant(sure)}, {1}).scalar()));

  CHECK(acd_loss({tape.constant(1.0), tape.constant(0.0)}, {1, 0}).scalar() == doctest::Approx(0.0));
  std::vector<Var> halves(5, tape.constant(0.5));
  CHECK(acd_loss(halves, {1, 0, 0, 1, 0}).scalar() == doctest::Approx(5 * std::log(2.0)));
  CHECK(acd_loss({tape.constant(0.25)}, {1}).scalar() == doctest::Approx(-std::log(0.25)));

  const Var la = tape.constant(1.0), lb = tape.constant(5.0), reg = tape.constant(2.0);
  CHECK(total_loss(la, lb, reg, 0.1, 5, true).scalar() == doctest::Approx(2.2));
  CHECK(total_loss(la, lb, reg, 0.0, 5, false).scalar() == 1.0);
  double prev = -1;
  for (double r : {0.0, 0.5, 1.0, 3.0}) {
    const double v = total_loss(la, lb, tape.constant(r), 0.1, 5, true).scalar();
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("regularizer dispatch") {
  Tape tape;
  const Var one_hot_a = tape.constant(row_of({1, 0}));
  const Var one_hot_b = tape.constant(row_of({0, 1}));
  const Var u4 = tape.constant(row_of({0.25, 0.25, 0.25, 0.25}));
  const Var half = tape.constant(row_of({0.5, 0.5}));

  const auto single = regularizer_for_instance(tape, Reg::Orthogonal, {half}, Overlap::Single);
  CHECK(single.value.scalar() == doctest::Approx(sparse_reg(half).scalar()));
  CHECK(single.sparse_part == doctest::Approx(0.5));
  CHECK(single.orthogonal_part == 0.0);

  const auto disjoint = regularizer_for_instance(tape, Reg::Orthogonal, {one_hot_a, one_hot_b}, Overlap::NonOverlapping);
  CHECK(disjoint.value.scalar() == 0.0);

  const auto same = regularizer_for_instance(tape, Reg::Orthogonal, {one_hot_a, one_hot_a}, Overlap::NonOverlapping);
  CHECK(same.value.scalar() == doctest::Approx(std::sqrt(2.0)));
  CHECK(same.orthogonal_part == doctest::Approx(std::sqrt(2.0)));

  const auto overlapping = regularizer_for_instance(tape, Reg::Orthogonal, {half, half}, Overlap::Overlapping);
  CHECK(overlapping.value.scalar() == doctest::Approx(1.0));

  const auto sparse = regularizer_for_instance(tape, Reg::Sparse, {u4, u4}, Overlap::NonOverlapping);
  CHECK(sparse.value.scalar() == doctest::Approx(1.5));

  CHECK(regularizer_for_instance(tape, Reg::None, {u4}, Overlap::Single).value.scalar() == 0.0);
}

TEST_CASE("regularizer is training-only when lambda is zero") {
  ModelConfig c;
  c.multi_task = true;
  c.reg_alsc = Reg::Orthogonal;
  c.reg_acd = Reg::Orthogonal;
  c.lambda = 0.0;
  Toy t = make_toy(c);
  Tape tape;
  const InstanceGraph g = forward(tape, t.params, t.config, t.seq, t.instance.categories);
  const double with = instance_loss(tape, g, t.config, t.instance, 4, true).total.scalar();
  const double without = instance_loss(tape, g, t.config, t.instance, 4, false).total.scalar();
  CHECK(with == without);
}

TEST_CASE("model configuration rules") {
  ModelConfig c;
  c.reg_acd = Reg::Sparse;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.encoder = Encoder::Atae;
  c.multi_task = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.lambda = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.classes = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(ModelConfig{}.validate());
}

TEST_CASE("inference shapes and padding") {
  ModelConfig c;
  c.dim = 4;
  c.multi_task = true;
  ModelParams p = init_params(c, 9, 4, 6, 0.5);
  EncodedInstance inst{"x", {1, 2, 3, 4, 5}, {2, 0}, {0, 2}, Overlap::NonOverlapping};
  const ForwardOutput out = infer(p, c, inst);
  CHECK(out.alsc_probs.rows() == 2);
  CHECK(out.alsc_probs.cols() == 3);
  CHECK(out.alsc_attention.rows() == 2);
  CHECK(out.alsc_attention.cols() == 5);
  CHECK(out.acd_scores.rows() == 4);
  CHECK(out.acd_attention.rows() == 4);
  CHECK(out.reg_value >= 0.0);

  Tape tape;
  const InstanceGraph g = forward(tape, p, c, pad(inst.tokens, 9), inst.categories);
  for (const auto& rows : {g.alsc_attention, g.acd_attention}) {
    for (const Var& a : rows) {
      CHECK(a.value().sum() == doctest::Approx(1.0).epsilon(1e-6));
      for (int l = 5; l < 9; ++l) CHECK(a.value()(0, l) == 0.0);
    }
  }
}

TEST_CASE("parameter dump round-trips bit-exactly") {
  ModelConfig c;
  c.dim = 3;
  ModelParams p = init_params(c, 5, 2, 8, 0.3);
  std::ostringstream out;
  write_params(out, p);
  ModelParams q = ModelParams::zeros(c, 5, 2);
  std::istringstream in(out.str());
  read_params(in, q);
  const auto a = p.all();
  const auto b = q.all();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  std::ostringstream again;
  write_params(again, q);
  CHECK(again.str() == out.str());

  ModelParams wrong = ModelParams::zeros(c, 6, 2);
  std::istringstream in2(out.str());
  CHECK_THROWS(read_params(in2, wrong));
}
