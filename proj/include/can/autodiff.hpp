#pragma once

// Tape-based reverse-mode automatic differentiation over dense Eigen
// matrices. Every tensor in the model is at most two-dimensional, so a node
// value is a dynamic Eigen matrix; vectors are stored as single columns
// (or single rows for attention distributions).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace can::ad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << '[' << rows << 'x' << cols << ']';
  return os.str();
}

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), trainable(train) {
    grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

template <typename Scalar>
class Tape;

/// Lightweight handle to a node on a Tape. Copying a Var never copies data.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr && id_ >= 0; }

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  const Matrix<Scalar>& grad() const { return tape_->grad(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Scalar scalar() const {
    if (value().size() != 1) {
      throw ShapeError("scalar() on non-scalar node " + shape_string(rows(), cols()));
    }
    return value()(0, 0);
  }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

/// Append-only computation record. Inputs of a node always precede it, so a
/// reverse sweep over node ids is a valid reverse topological order.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  // Receives the tape and the upstream gradient of the node being visited.
  using Backprop = std::function<void(Tape&, const Mat&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value) { return push(std::move(value), nullptr); }

  Var<Scalar> constant(Scalar value) {
    Mat m(1, 1);
    m(0, 0) = value;
    return constant(std::move(m));
  }

  /// Leaf bound to a Parameter. Repeated calls return the same node, so all
  /// uses accumulate into one gradient.
  Var<Scalar> parameter(Parameter<Scalar>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
      return Var<Scalar>(this, it->second);
    }
    Var<Scalar> v = push(p.value, nullptr);
    nodes_[v.id()].param = &p;
    param_nodes_.emplace(&p, v.id());
    return v;
  }

  Var<Scalar> push(Mat value, Backprop backprop) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(backprop), nullptr});
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  const Mat& value(int id) const { return nodes_.at(id).value; }
  const Mat& grad(int id) const { return nodes_.at(id).grad; }
  std::size_t size() const { return nodes_.size(); }

  void accumulate(int id, const Mat& g) {
    Node& n = nodes_[id];
    if (g.rows() != n.value.rows() || g.cols() != n.value.cols()) {
      throw ShapeError("gradient " + shape_string(g.rows(), g.cols()) + " does not match node " +
                       shape_string(n.value.rows(), n.value.cols()));
    }
    n.grad += g;
  }

  /// Reverse sweep from a scalar root. Parameter gradients are accumulated
  /// (+=) into Parameter::grad; callers zero them between optimizer steps.
  void backward(Var<Scalar> root) {
    if (root.value().size() != 1) {
      throw ShapeError("backward requires a scalar root, got " +
                       shape_string(root.rows(), root.cols()));
    }
    for (Node& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    nodes_[root.id()].grad(0, 0) = Scalar(1);
    for (int i = root.id(); i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backprop) {
        // The closure may append to other nodes' grads but never to this one.
        n.backprop(*this, n.grad);
      }
      if (n.param != nullptr && n.param->trainable) n.param->grad += n.grad;
    }
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backprop backprop;
    Parameter<Scalar>* param;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, int> param_nodes_;
};

namespace detail {

template <typename Scalar>
void require_same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
}

template <typename Scalar>
void require_same_shape(const char* op, const Var<Scalar>& a, const Var<Scalar>& b) {
  require_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) +
                     " vs " + shape_string(b.rows(), b.cols()));
  }
}

template <typename Scalar, typename Fwd, typename Deriv>
Var<Scalar> unary(const Var<Scalar>& x, Fwd fwd, Deriv deriv) {
  const int xi = x.id();
  Matrix<Scalar> out = x.value().unaryExpr(fwd);
  return x.tape().push(std::move(out), [xi, deriv](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const Matrix<Scalar>& xv = t.value(xi);
    t.accumulate(xi, g.cwiseProduct(xv.unaryExpr(deriv)));
  });
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " + shape_string(a.rows(), a.cols()) +
                     " x " + shape_string(b.rows(), b.cols()));
  }
  const int ai = a.id(), bi = b.id();
  Matrix<Scalar> out = a.value() * b.value();
  return a.tape().push(std::move(out), [ai, bi](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ai, g * t.value(bi).transpose());
    t.accumulate(bi, t.value(ai).transpose() * g);
  });
}

template <typename Scalar>
Var<Scalar> transpose(const Var<Scalar>& a) {
  const int ai = a.id();
  Matrix<Scalar> out = a.value().transpose();
  return a.tape().push(std::move(out), [ai](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ai, g.transpose());
  });
}

template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  const int ai = a.id(), bi = b.id();
  Matrix<Scalar> out = a.value() + b.value();
  return a.tape().push(std::move(out), [ai, bi](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ai, g);
    t.accumulate(bi, g);
  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("sub", a, b);
  const int ai = a.id(), bi = b.id();
  Matrix<Scalar> out = a.value() - b.value();
  return a.tape().push(std::move(out), [ai, bi](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ai, g);
    t.accumulate(bi, -g);
  });
}

/// Elementwise (Hadamard) product.
template <typename Scalar>
Var<Scalar> cwise_product(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_shape("mul", a, b);
  const int ai = a.id(), bi = b.id();
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape().push(std::move(out), [ai, bi](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ai, g.cwiseProduct(t.value(bi)));
    t.accumulate(bi, g.cwiseProduct(t.value(ai)));
  });
}

template <typename Scalar>
Var<Scalar> scale(const Var<Scalar>& a, Scalar s) {
  const int ai = a.id();
  Matrix<Scalar> out = a.value() * s;
  return a.tape().push(std::move(out), [ai, s](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ai, g * s);
  });
}

template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) {
  return scale(a, s);
}

template <typename Scalar>
Var<Scalar> add_scalar(const Var<Scalar>& a, Scalar s) {
  const int ai = a.id();
  Matrix<Scalar> out = a.value().array() + s;
  return a.tape().push(std::move(out), [ai](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ai, g);
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return std::tanh(v); },
      [](Scalar v) {
        const Scalar th = std::tanh(v);
        return Scalar(1) - th * th;
      });
}

template <typename Scalar>
Scalar sigmoid_value(Scalar v) {
  // Branching keeps exp() from overflowing for large |v|.
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Var<Scalar> sigmoid(const Var<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return sigmoid_value(v); },
      [](Scalar v) {
        const Scalar s = sigmoid_value(v);
        return s * (Scalar(1) - s);
      });
}

template <typename Scalar>
Var<Scalar> square(const Var<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return v * v; }, [](Scalar v) { return Scalar(2) * v; });
}

/// Derivative at exactly 0 is taken as 0 rather than +inf.
template <typename Scalar>
Var<Scalar> sqrt(const Var<Scalar>& x) {
  if ((x.value().array() < Scalar(0)).any()) {
    throw DomainError("sqrt of negative value");
  }
  return detail::unary(
      x, [](Scalar v) { return std::sqrt(v); },
      [](Scalar v) { return v > Scalar(0) ? Scalar(0.5) / std::sqrt(v) : Scalar(0); });
}

/// Subgradient 0 at 0.
template <typename Scalar>
Var<Scalar> abs(const Var<Scalar>& x) {
  return detail::unary(
      x, [](Scalar v) { return std::abs(v); },
      [](Scalar v) { return v > Scalar(0) ? Scalar(1) : (v < Scalar(0) ? Scalar(-1) : Scalar(0)); });
}

/// log(max(x, floor)); the gradient is zero wherever the clamp is active.
template <typename Scalar>
Var<Scalar> log_clamped(const Var<Scalar>& x, Scalar floor) {
  return detail::unary(
      x, [floor](Scalar v) { return std::log(std::max(v, floor)); },
      [floor](Scalar v) { return v > floor ? Scalar(1) / v : Scalar(0); });
}

enum class Axis { All, Rows, Cols };

/// Axis::Rows collapses the row dimension (result 1 x cols);
/// Axis::Cols collapses the column dimension (result rows x 1).
template <typename Scalar>
Var<Scalar> reduce_sum(const Var<Scalar>& x, Axis axis = Axis::All) {
  const int xi = x.id();
  const Eigen::Index r = x.rows(), c = x.cols();
  Matrix<Scalar> out;
  switch (axis) {
    case Axis::All:
      out.resize(1, 1);
      out(0, 0) = x.value().sum();
      break;
    case Axis::Rows:
      out = x.value().colwise().sum();
      break;
    case Axis::Cols:
      out = x.value().rowwise().sum();
      break;
    default:
      throw std::invalid_argument("reduce: invalid axis");
  }
  return x.tape().push(std::move(out), [xi, r, c, axis](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    switch (axis) {
      case Axis::All:
        t.accumulate(xi, Matrix<Scalar>::Constant(r, c, g(0, 0)));
        break;
      case Axis::Rows:
        t.accumulate(xi, g.replicate(r, 1));
        break;
      case Axis::Cols:
        t.accumulate(xi, g.replicate(1, c));
        break;
    }
  });
}

template <typename Scalar>
Var<Scalar> reduce_mean(const Var<Scalar>& x, Axis axis = Axis::All) {
  Eigen::Index count = 0;
  switch (axis) {
    case Axis::All: count = x.value().size(); break;
    case Axis::Rows: count = x.rows(); break;
    case Axis::Cols: count = x.cols(); break;
    default: throw std::invalid_argument("reduce: invalid axis");
  }
  if (count == 0) throw ShapeError("reduce_mean over empty axis");
  return scale(reduce_sum(x, axis), Scalar(1) / static_cast<Scalar>(count));
}

/// The u (x) e_L operator: a d x L matrix whose every column is u.
template <typename Scalar>
Var<Scalar> repeat_concat(const Var<Scalar>& u, Eigen::Index count) {
  if (count < 1) throw std::invalid_argument("repeat_concat: count must be >= 1");
  if (u.cols() != 1) {
    throw ShapeError("repeat_concat: expected a column vector, got " + shape_string(u.rows(), u.cols()));
  }
  const int ui = u.id();
  Matrix<Scalar> out = u.value().replicate(1, count);
  return u.tape().push(std::move(out), [ui](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ui, g.rowwise().sum());
  });
}

/// Softmax over a row or column vector. Entries whose mask is false get
/// probability exactly 0. An empty mask means every position is valid.
template <typename Scalar>
Var<Scalar> softmax(const Var<Scalar>& x, const std::vector<bool>& mask = {}) {
  const Eigen::Index n = x.value().size();
  if (n == 0) throw ShapeError("softmax of empty input");
  if (x.rows() != 1 && x.cols() != 1) {
    throw ShapeError("softmax expects a vector, got " + shape_string(x.rows(), x.cols()));
  }
  if (!mask.empty() && static_cast<Eigen::Index>(mask.size()) != n) {
    throw ShapeError("softmax: mask length does not match input");
  }
  auto valid = [&](Eigen::Index i) { return mask.empty() || mask[static_cast<std::size_t>(i)]; };
  const auto& xv = x.value();
  Scalar max_v = -std::numeric_limits<Scalar>::infinity();
  bool any_valid = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!valid(i)) continue;
    any_valid = true;
    // NaN must win so that it propagates to the output
    if (std::isnan(xv(i)) || xv(i) > max_v) max_v = xv(i);
    if (std::isnan(max_v)) break;
  }
  if (!any_valid) throw ShapeError("softmax: every position is masked");
  Matrix<Scalar> out = Matrix<Scalar>::Zero(x.rows(), x.cols());
  Scalar total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!valid(i)) continue;
    out(i) = std::exp(xv(i) - max_v);
    total += out(i);
  }
  out /= total;
  const int xi = x.id();
  Matrix<Scalar> probs = out;
  return x.tape().push(std::move(out), [xi, probs](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const Scalar dot = g.cwiseProduct(probs).sum();
    t.accumulate(xi, probs.cwiseProduct((g.array() - dot).matrix()));
  });
}

template <typename Scalar>
Var<Scalar> column(const Var<Scalar>& x, Eigen::Index j) {
  if (j < 0 || j >= x.cols()) throw ShapeError("column index out of range");
  const int xi = x.id();
  const Eigen::Index r = x.rows(), c = x.cols();
  Matrix<Scalar> out = x.value().col(j);
  return x.tape().push(std::move(out), [xi, r, c, j](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(r, c);
    full.col(j) = g;
    t.accumulate(xi, full);
  });
}

template <typename Scalar>
Var<Scalar> row(const Var<Scalar>& x, Eigen::Index i) {
  if (i < 0 || i >= x.rows()) throw ShapeError("row index out of range");
  const int xi = x.id();
  const Eigen::Index r = x.rows(), c = x.cols();
  Matrix<Scalar> out = x.value().row(i);
  return x.tape().push(std::move(out), [xi, r, c, i](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(r, c);
    full.row(i) = g;
    t.accumulate(xi, full);
  });
}

template <typename Scalar>
Var<Scalar> slice_rows(const Var<Scalar>& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 1 || start + count > x.rows()) throw ShapeError("slice_rows out of range");
  const int xi = x.id();
  const Eigen::Index r = x.rows(), c = x.cols();
  Matrix<Scalar> out = x.value().middleRows(start, count);
  return x.tape().push(std::move(out), [xi, r, c, start, count](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Matrix<Scalar> full = Matrix<Scalar>::Zero(r, c);
    full.middleRows(start, count) = g;
    t.accumulate(xi, full);
  });
}

/// Concatenate side by side; all parts share the row count.
template <typename Scalar>
Var<Scalar> hstack(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("hstack of nothing");
  const Eigen::Index r = parts.front().rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.rows() != r) throw ShapeError("hstack: row counts differ");
    total += p.cols();
  }
  Matrix<Scalar> out(r, total);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    spans.emplace_back(p.id(), offset);
    offset += p.cols();
  }
  return parts.front().tape().push(std::move(out), [spans](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    for (const auto& [id, off] : spans) t.accumulate(id, g.middleCols(off, t.value(id).cols()));
  });
}

/// Stack on top of each other; all parts share the column count.
template <typename Scalar>
Var<Scalar> vstack(const std::vector<Var<Scalar>>& parts) {
  if (parts.empty()) throw ShapeError("vstack of nothing");
  const Eigen::Index c = parts.front().cols();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.cols() != c) throw ShapeError("vstack: column counts differ");
    total += p.rows();
  }
  Matrix<Scalar> out(total, c);
  std::vector<std::pair<int, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    spans.emplace_back(p.id(), offset);
    offset += p.rows();
  }
  return parts.front().tape().push(std::move(out), [spans](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    for (const auto& [id, off] : spans) t.accumulate(id, g.middleRows(off, t.value(id).rows()));
  });
}

/// Gathers rows of an embedding table as the columns of a d x L matrix.
/// The backward pass scatters straight into the parameter gradient, so the
/// full |V| x d table never enters the tape.
template <typename Scalar>
Var<Scalar> lookup(Tape<Scalar>& tape, Parameter<Scalar>& table, const std::vector<int>& ids) {
  if (ids.empty()) throw ShapeError("lookup of zero ids");
  const Eigen::Index d = table.value.cols();
  Matrix<Scalar> out(d, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t l = 0; l < ids.size(); ++l) {
    if (ids[l] < 0 || ids[l] >= table.value.rows()) {
      throw ShapeError("lookup: index " + std::to_string(ids[l]) + " outside table '" + table.name + "'");
    }
    out.col(static_cast<Eigen::Index>(l)) = table.value.row(ids[l]).transpose();
  }
  Parameter<Scalar>* p = &table;
  return tape.push(std::move(out), [p, ids](Tape<Scalar>&, const Matrix<Scalar>& g) {
    if (!p->trainable) return;
    for (std::size_t l = 0; l < ids.size(); ++l) {
      p->grad.row(ids[l]) += g.col(static_cast<Eigen::Index>(l)).transpose();
    }
  });
}

/// Sum of a list of same-shape nodes.
template <typename Scalar>
Var<Scalar> add_n(const std::vector<Var<Scalar>>& terms) {
  if (terms.empty()) throw ShapeError("add_n of nothing");
  Var<Scalar> acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = acc + terms[i];
  return acc;
}

/// Compares reverse-mode gradients of `build` against central finite
/// differences over every entry of `params`. Returns
/// max |g_ad - g_fd| / max(1, |g_fd|).
template <typename Scalar>
Scalar finite_diff_check(const std::function<Var<Scalar>(Tape<Scalar>&)>& build,
                         const std::vector<Parameter<Scalar>*>& params, Scalar eps = Scalar(1e-5)) {
  if (!(eps > Scalar(0))) throw std::invalid_argument("finite_diff_check: eps must be positive");
  for (auto* p : params) p->zero_grad();
  {
    Tape<Scalar> tape;
    Var<Scalar> root = build(tape);
    if (!std::isfinite(root.scalar())) throw DomainError("finite_diff_check: non-finite objective");
    tape.backward(root);
  }
  auto evaluate = [&]() {
    Tape<Scalar> tape;
    const Scalar v = build(tape).scalar();
    if (!std::isfinite(v)) throw DomainError("finite_diff_check: non-finite objective");
    return v;
  };
  Scalar worst = 0;
  for (auto* p : params) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const Scalar saved = p->value(i);
      p->value(i) = saved + eps;
      const Scalar up = evaluate();
      p->value(i) = saved - eps;
      const Scalar down = evaluate();
      p->value(i) = saved;
      const Scalar fd = (up - down) / (Scalar(2) * eps);
      const Scalar ad = p->trainable ? p->grad(i) : Scalar(0);
      const Scalar err = std::abs(ad - fd) / std::max(Scalar(1), std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace can::ad
