#include "tabulatime/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tabulatime/errors.hpp"
#include "tabulatime/rand.hpp"

namespace tabulatime {

namespace {

thread_local GradTape* g_active_tape = nullptr;
thread_local bool g_checked_mode = false;

std::size_t usize(std::int64_t v) { return static_cast<std::size_t>(v); }

const std::shared_ptr<TensorNode>& require_node(
    const std::shared_ptr<TensorNode>& node) {
  if (!node) throw StateError("tensor is not initialized");
  return node;
}

void require_rank(const Tensor& t, int rank, const char* where) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(where) + ": expected rank " +
                         std::to_string(rank) + ", got shape " +
                         shape_str(t.shape()));
  }
}

// True when `small` (ignoring leading 1s) is a trailing suffix of `big`.
bool broadcastable_into(const Shape& big, const Shape& small) {
  std::size_t lead = 0;
  while (lead < small.size() && small[lead] == 1) ++lead;
  const std::size_t tail = small.size() - lead;
  if (tail > big.size()) return false;
  for (std::size_t i = 0; i < tail; ++i) {
    if (small[lead + i] != big[big.size() - tail + i]) return false;
  }
  return true;
}

void ensure_grad(const std::shared_ptr<TensorNode>& node) {
  if (node->requires_grad && node->grad.size() != node->data.size()) {
    node->grad.assign(node->data.size(), 0.0);
  }
}

}  // namespace

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw DimensionError("negative dimension in " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

// ---- Tensor -----------------------------------------------------------------

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  const auto n = numel(shape);
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->data.assign(usize(n), fill);
  node_->requires_grad = requires_grad;
  ensure_grad(node_);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  const auto n = numel(shape);
  if (usize(n) != values.size()) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not fill shape " + shape_str(shape));
  }
  node_ = std::make_shared<TensorNode>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
  ensure_grad(node_);
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, {value}); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  return Tensor(std::move(shape), value, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                       bool requires_grad) {
  const auto n = numel(shape);
  std::vector<double> values(usize(n));
  for (auto& v : values) v = uniform_double(rng, lo, hi);
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return require_node(node_)->shape; }

int Tensor::rank() const {
  return static_cast<int>(require_node(node_)->shape.size());
}

std::int64_t Tensor::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::size() const {
  return static_cast<std::int64_t>(require_node(node_)->data.size());
}

const std::vector<double>& Tensor::data() const {
  return require_node(node_)->data;
}

std::vector<double>& Tensor::raw() { return require_node(node_)->data; }

double Tensor::item() const {
  const auto& d = data();
  if (d.size() != 1) {
    throw ContractError("item() needs a scalar, got shape " +
                        shape_str(shape()));
  }
  return d[0];
}

double Tensor::at(std::initializer_list<std::int64_t> index) const {
  const auto& s = shape();
  if (index.size() != s.size()) {
    throw DimensionError("index rank " + std::to_string(index.size()) +
                         " does not match shape " + shape_str(s));
  }
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i < 0 || i >= s[axis]) {
      throw DimensionError("index out of range for shape " + shape_str(s));
    }
    flat = flat * s[axis] + i;
    ++axis;
  }
  return data()[usize(flat)];
}

bool Tensor::requires_grad() const {
  return require_node(node_)->requires_grad;
}

Tensor& Tensor::set_requires_grad(bool value) {
  require_node(node_)->requires_grad = value;
  ensure_grad(node_);
  if (!value) node_->grad.clear();
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  const auto& node = require_node(node_);
  if (!node->requires_grad) {
    throw StateError("grad() on a tensor that does not require grad");
  }
  return node->grad;
}

void Tensor::zero_grad() {
  auto& node = require_node(node_);
  std::fill(node->grad.begin(), node->grad.end(), 0.0);
}

Tensor Tensor::detached() const {
  const auto& node = require_node(node_);
  return Tensor(node->shape, node->data);
}

// ---- checked mode / tape -----------------------------------------------------

void set_checked_mode(bool on) { g_checked_mode = on; }
bool checked_mode() { return g_checked_mode; }

GradTape::GradTape() {
  previous_ = g_active_tape;
  g_active_tape = this;
}

GradTape::~GradTape() { g_active_tape = previous_; }

GradTape* GradTape::active() { return g_active_tape; }

void GradTape::record(std::function<void()> backward_step) {
  steps_.push_back(std::move(backward_step));
}

void GradTape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw StateError("backward() on an untracked loss; no tape was recording");
  }
  if (steps_.empty()) {
    throw StateError("backward() on an empty tape; run a forward pass first");
  }
  loss.node()->grad[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  clear();
}

void GradTape::clear() { steps_.clear(); }

void backward(const Tensor& loss) {
  if (GradTape::active() == nullptr) {
    throw StateError("backward() with no active tape");
  }
  GradTape::active()->backward(loss);
}

// ---- op plumbing --------------------------------------------------------------

namespace detail {

Tensor plain_result(Shape shape, std::vector<double> data) {
  return Tensor(std::move(shape), std::move(data));
}

bool tracing(std::initializer_list<const Tensor*> inputs) {
  if (g_active_tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void track(Tensor& out, std::function<void()> backward_step) {
  out.set_requires_grad(true);
  g_active_tape->record(std::move(backward_step));
}

void guard_finite(const Tensor& t, const char* where) {
  if (!g_checked_mode) return;
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(where) + " produced or received " +
                         (std::isnan(v) ? "NaN" : "Inf"));
    }
  }
}

}  // namespace detail

namespace {

// Shared skeleton for elementwise binaries with trailing-suffix broadcast.
// fwd(a, b) -> out value; bwd_a / bwd_b map the output gradient to each input.
template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Fwd fwd,
                 BwdA bwd_a, BwdB bwd_b) {
  detail::guard_finite(a, name);
  detail::guard_finite(b, name);
  const bool b_small = broadcastable_into(a.shape(), b.shape());
  const bool a_small = !b_small && broadcastable_into(b.shape(), a.shape());
  if (!b_small && !a_small) {
    throw DimensionError(std::string(name) + ": shapes " +
                         shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " do not broadcast");
  }
  const Tensor& big = b_small ? a : b;
  const Tensor& small = b_small ? b : a;
  const auto big_n = big.data().size();
  const auto small_n = small.data().size();

  std::vector<double> out_data(big_n);
  const auto& ad = a.data();
  const auto& bd = b.data();
  if (b_small) {
    for (std::size_t f = 0; f < big_n; ++f) {
      out_data[f] = fwd(ad[f], bd[f % small_n]);
    }
  } else {
    for (std::size_t f = 0; f < big_n; ++f) {
      out_data[f] = fwd(ad[f % small_n], bd[f]);
    }
  }
  Tensor out = detail::plain_result(big.shape(), std::move(out_data));
  detail::guard_finite(out, name);

  if (detail::tracing({&a, &b})) {
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    detail::track(out, [an, bn, on, b_small, small_n, bwd_a, bwd_b]() {
      const auto& g = on->grad;
      for (std::size_t f = 0; f < g.size(); ++f) {
        const std::size_t fa = b_small ? f : f % small_n;
        const std::size_t fb = b_small ? f % small_n : f;
        if (an->requires_grad) {
          an->grad[fa] += bwd_a(g[f], an->data[fa], bn->data[fb]);
        }
        if (bn->requires_grad) {
          bn->grad[fb] += bwd_b(g[f], an->data[fa], bn->data[fb]);
        }
      }
    });
  }
  return out;
}

// Elementwise unaries: fwd(x) -> y; bwd(g, x, y) -> contribution to dx.
template <typename Fwd, typename Bwd>
Tensor unary_op(const char* name, const Tensor& a, Fwd fwd, Bwd bwd) {
  detail::guard_finite(a, name);
  std::vector<double> out_data(a.data().size());
  for (std::size_t f = 0; f < out_data.size(); ++f) {
    out_data[f] = fwd(a.data()[f]);
  }
  Tensor out = detail::plain_result(a.shape(), std::move(out_data));
  detail::guard_finite(out, name);
  if (detail::tracing({&a})) {
    auto an = a.node();
    auto on = out.node();
    detail::track(out, [an, on, bwd]() {
      for (std::size_t f = 0; f < on->grad.size(); ++f) {
        an->grad[f] += bwd(on->grad[f], an->data[f], on->data[f]);
      }
    });
  }
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- elementwise ----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary_op(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double g, double, double) { return factor * g; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary_op(
      "add_scalar", a, [value](double x) { return x + value; },
      [](double g, double, double) { return g; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a, [](double x) { return stable_sigmoid(x); },
      [](double g, double, double y) { return g * y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

Tensor relu_squared(const Tensor& a) {
  return unary_op(
      "relu_squared", a, [](double x) { return x > 0.0 ? x * x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? 2.0 * x * g : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); },
      [](double g, double, double y) { return g * y; });
}

Tensor lerp(const Tensor& mu, const Tensor& x, const Tensor& y) {
  detail::guard_finite(mu, "lerp");
  detail::guard_finite(x, "lerp");
  detail::guard_finite(y, "lerp");
  if (x.shape() != y.shape()) {
    throw DimensionError("lerp: x " + shape_str(x.shape()) + " vs y " +
                         shape_str(y.shape()));
  }
  if (!broadcastable_into(x.shape(), mu.shape())) {
    throw DimensionError("lerp: mu " + shape_str(mu.shape()) +
                         " does not broadcast into " + shape_str(x.shape()));
  }
  const auto n = x.data().size();
  const auto mn = mu.data().size();
  std::vector<double> out_data(n);
  for (std::size_t f = 0; f < n; ++f) {
    const double m = mu.data()[f % mn];
    out_data[f] = m * x.data()[f] + (1.0 - m) * y.data()[f];
  }
  Tensor out = detail::plain_result(x.shape(), std::move(out_data));
  detail::guard_finite(out, "lerp");
  if (detail::tracing({&mu, &x, &y})) {
    auto mun = mu.node();
    auto xn = x.node();
    auto yn = y.node();
    auto on = out.node();
    detail::track(out, [mun, xn, yn, on, mn]() {
      const auto& g = on->grad;
      for (std::size_t f = 0; f < g.size(); ++f) {
        const double m = mun->data[f % mn];
        if (xn->requires_grad) xn->grad[f] += g[f] * m;
        if (yn->requires_grad) yn->grad[f] += g[f] * (1.0 - m);
        if (mun->requires_grad) {
          mun->grad[f % mn] += g[f] * (xn->data[f] - yn->data[f]);
        }
      }
    });
  }
  return out;
}

// ---- shape / structure -----------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " +
                         shape_str(shape) + " changes element count");
  }
  Tensor out = detail::plain_result(std::move(shape), a.data());
  if (detail::tracing({&a})) {
    auto an = a.node();
    auto on = out.node();
    detail::track(out, [an, on]() {
      for (std::size_t f = 0; f < on->grad.size(); ++f) {
        an->grad[f] += on->grad[f];
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const auto rows = a.dim(0);
  const auto cols = a.dim(1);
  std::vector<double> out_data(a.data().size());
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < cols; ++j) {
      out_data[usize(j * rows + i)] = a.data()[usize(i * cols + j)];
    }
  }
  Tensor out = detail::plain_result({cols, rows}, std::move(out_data));
  if (detail::tracing({&a})) {
    auto an = a.node();
    auto on = out.node();
    detail::track(out, [an, on, rows, cols]() {
      for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) {
          an->grad[usize(i * cols + j)] += on->grad[usize(j * rows + i)];
        }
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::int64_t start, std::int64_t count) {
  require_rank(a, 2, "slice_cols");
  const auto rows = a.dim(0);
  const auto cols = a.dim(1);
  if (start < 0 || count < 0 || start + count > cols) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + count) +
                         ") out of range for " + shape_str(a.shape()));
  }
  std::vector<double> out_data(usize(rows * count));
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < count; ++j) {
      out_data[usize(i * count + j)] = a.data()[usize(i * cols + start + j)];
    }
  }
  Tensor out = detail::plain_result({rows, count}, std::move(out_data));
  if (detail::tracing({&a})) {
    auto an = a.node();
    auto on = out.node();
    detail::track(out, [an, on, rows, cols, start, count]() {
      for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < count; ++j) {
          an->grad[usize(i * cols + start + j)] +=
              on->grad[usize(i * count + j)];
        }
      }
    });
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const auto rows = parts[0].dim(0);
  std::int64_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(p.shape()));
    }
    total += p.dim(1);
  }
  std::vector<double> out_data(usize(rows * total));
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const auto cols = p.dim(1);
    for (std::int64_t i = 0; i < rows; ++i) {
      for (std::int64_t j = 0; j < cols; ++j) {
        out_data[usize(i * total + offset + j)] = p.data()[usize(i * cols + j)];
      }
    }
    offset += cols;
  }
  Tensor out = detail::plain_result({rows, total}, std::move(out_data));
  bool any_grad = false;
  for (const auto& p : parts) any_grad = any_grad || p.requires_grad();
  if (GradTape::active() != nullptr && any_grad) {
    std::vector<std::shared_ptr<TensorNode>> nodes;
    std::vector<std::int64_t> widths;
    for (const auto& p : parts) {
      nodes.push_back(p.node());
      widths.push_back(p.dim(1));
    }
    auto on = out.node();
    detail::track(out, [nodes, widths, on, rows, total]() {
      std::int64_t offset = 0;
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        const auto cols = widths[k];
        if (nodes[k]->requires_grad) {
          for (std::int64_t i = 0; i < rows; ++i) {
            for (std::int64_t j = 0; j < cols; ++j) {
              nodes[k]->grad[usize(i * cols + j)] +=
                  on->grad[usize(i * total + offset + j)];
            }
          }
        }
        offset += cols;
      }
    });
  }
  return out;
}

Tensor slice_block(const Tensor& a, std::int64_t offset, Shape shape) {
  const auto n = numel(shape);
  if (offset < 0 || offset + n > a.size()) {
    throw DimensionError("slice_block: range [" + std::to_string(offset) +
                         ", " + std::to_string(offset + n) +
                         ") exceeds size " + std::to_string(a.size()));
  }
  std::vector<double> out_data(a.data().begin() + offset,
                               a.data().begin() + offset + n);
  Tensor out = detail::plain_result(std::move(shape), std::move(out_data));
  if (detail::tracing({&a})) {
    auto an = a.node();
    auto on = out.node();
    detail::track(out, [an, on, offset]() {
      for (std::size_t f = 0; f < on->grad.size(); ++f) {
        an->grad[usize(offset) + f] += on->grad[f];
      }
    });
  }
  return out;
}

Tensor stack_blocks(const std::vector<Tensor>& blocks, Shape shape) {
  if (blocks.empty()) throw ContractError("stack_blocks: no blocks");
  std::int64_t total = 0;
  for (const auto& b : blocks) total += b.size();
  if (total != numel(shape)) {
    throw DimensionError("stack_blocks: blocks hold " + std::to_string(total) +
                         " values, shape " + shape_str(shape) + " wants " +
                         std::to_string(numel(shape)));
  }
  std::vector<double> out_data;
  out_data.reserve(usize(total));
  for (const auto& b : blocks) {
    out_data.insert(out_data.end(), b.data().begin(), b.data().end());
  }
  Tensor out = detail::plain_result(std::move(shape), std::move(out_data));
  bool any_grad = false;
  for (const auto& b : blocks) any_grad = any_grad || b.requires_grad();
  if (GradTape::active() != nullptr && any_grad) {
    std::vector<std::shared_ptr<TensorNode>> nodes;
    for (const auto& b : blocks) nodes.push_back(b.node());
    auto on = out.node();
    detail::track(out, [nodes, on]() {
      std::size_t offset = 0;
      for (const auto& node : nodes) {
        if (node->requires_grad) {
          for (std::size_t f = 0; f < node->data.size(); ++f) {
            node->grad[f] += on->grad[offset + f];
          }
        }
        offset += node->data.size();
      }
    });
  }
  return out;
}

Tensor time_shift(const Tensor& x) {
  require_rank(x, 2, "time_shift");
  const auto rows = x.dim(0);
  const auto cols = x.dim(1);
  std::vector<double> out_data(x.data().size(), 0.0);
  for (std::int64_t t = 1; t < rows; ++t) {
    for (std::int64_t j = 0; j < cols; ++j) {
      out_data[usize(t * cols + j)] = x.data()[usize((t - 1) * cols + j)];
    }
  }
  Tensor out = detail::plain_result({rows, cols}, std::move(out_data));
  if (detail::tracing({&x})) {
    auto xn = x.node();
    auto on = out.node();
    detail::track(out, [xn, on, rows, cols]() {
      for (std::int64_t t = 1; t < rows; ++t) {
        for (std::int64_t j = 0; j < cols; ++j) {
          xn->grad[usize((t - 1) * cols + j)] += on->grad[usize(t * cols + j)];
        }
      }
    });
  }
  return out;
}

Tensor row_scale(const Tensor& m, const Tensor& w) {
  require_rank(m, 2, "row_scale");
  require_rank(w, 1, "row_scale");
  const auto rows = m.dim(0);
  const auto cols = m.dim(1);
  if (w.dim(0) != rows) {
    throw DimensionError("row_scale: weight length " + shape_str(w.shape()) +
                         " vs rows of " + shape_str(m.shape()));
  }
  detail::guard_finite(m, "row_scale");
  detail::guard_finite(w, "row_scale");
  std::vector<double> out_data(m.data().size());
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < cols; ++j) {
      out_data[usize(i * cols + j)] =
          m.data()[usize(i * cols + j)] * w.data()[usize(i)];
    }
  }
  Tensor out = detail::plain_result({rows, cols}, std::move(out_data));
  detail::guard_finite(out, "row_scale");
  if (detail::tracing({&m, &w})) {
    auto mn = m.node();
    auto wn = w.node();
    auto on = out.node();
    detail::track(out, [mn, wn, on, rows, cols]() {
      for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) {
          const auto f = usize(i * cols + j);
          if (mn->requires_grad) mn->grad[f] += on->grad[f] * wn->data[usize(i)];
          if (wn->requires_grad) wn->grad[usize(i)] += on->grad[f] * mn->data[f];
        }
      }
    });
  }
  return out;
}

// ---- reductions --------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  detail::guard_finite(a, "sum");
  double total = 0.0;
  for (double v : a.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (detail::tracing({&a})) {
    auto an = a.node();
    auto on = out.node();
    detail::track(out, [an, on]() {
      for (auto& g : an->grad) g += on->grad[0];
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) {
  detail::guard_finite(a, "mean_all");
  if (a.size() == 0) throw ContractError("mean_all: empty tensor");
  double total = 0.0;
  for (double v : a.data()) total += v;
  const double inv = 1.0 / static_cast<double>(a.size());
  Tensor out = Tensor::scalar(total * inv);
  if (detail::tracing({&a})) {
    auto an = a.node();
    auto on = out.node();
    detail::track(out, [an, on, inv]() {
      for (auto& g : an->grad) g += on->grad[0] * inv;
    });
  }
  return out;
}

Tensor mean_last(const Tensor& a) {
  detail::guard_finite(a, "mean_last");
  if (a.rank() < 1) throw DimensionError("mean_last: rank-0 input");
  const auto& s = a.shape();
  const auto k = s.back();
  if (k == 0) throw ContractError("mean_last: trailing axis is empty");
  Shape out_shape(s.begin(), s.end() - 1);
  if (out_shape.empty()) out_shape = {1};
  const auto groups = numel(out_shape);
  std::vector<double> out_data(usize(groups), 0.0);
  const double inv = 1.0 / static_cast<double>(k);
  for (std::int64_t r = 0; r < groups; ++r) {
    double total = 0.0;
    for (std::int64_t j = 0; j < k; ++j) total += a.data()[usize(r * k + j)];
    out_data[usize(r)] = total * inv;
  }
  Tensor out = detail::plain_result(std::move(out_shape), std::move(out_data));
  if (detail::tracing({&a})) {
    auto an = a.node();
    auto on = out.node();
    detail::track(out, [an, on, k, inv]() {
      for (std::size_t r = 0; r < on->grad.size(); ++r) {
        for (std::int64_t j = 0; j < k; ++j) {
          an->grad[r * usize(k) + usize(j)] += on->grad[r] * inv;
        }
      }
    });
  }
  return out;
}

// ---- linear algebra -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const auto m = a.dim(0);
  const auto k = a.dim(1);
  const auto n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  detail::guard_finite(a, "matmul");
  detail::guard_finite(b, "matmul");
  std::vector<double> out_data(usize(m * n), 0.0);
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      const double av = ad[usize(i * k + p)];
      if (av == 0.0) continue;
      const auto brow = usize(p * n);
      const auto orow = usize(i * n);
      for (std::int64_t j = 0; j < n; ++j) {
        out_data[orow + usize(j)] += av * bd[brow + usize(j)];
      }
    }
  }
  Tensor out = detail::plain_result({m, n}, std::move(out_data));
  detail::guard_finite(out, "matmul");
  if (detail::tracing({&a, &b})) {
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    detail::track(out, [an, bn, on, m, k, n]() {
      const auto& g = on->grad;
      if (an->requires_grad) {
        // dA = G * B^T
        for (std::int64_t i = 0; i < m; ++i) {
          for (std::int64_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::int64_t j = 0; j < n; ++j) {
              acc += g[usize(i * n + j)] * bn->data[usize(p * n + j)];
            }
            an->grad[usize(i * k + p)] += acc;
          }
        }
      }
      if (bn->requires_grad) {
        // dB = A^T * G
        for (std::int64_t p = 0; p < k; ++p) {
          for (std::int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < m; ++i) {
              acc += an->data[usize(i * k + p)] * g[usize(i * n + j)];
            }
            bn->grad[usize(p * n + j)] += acc;
          }
        }
      }
    });
  }
  return out;
}

// ---- fused neural ops -------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  require_rank(x, 2, "layer_norm");
  require_rank(gain, 1, "layer_norm");
  require_rank(bias, 1, "layer_norm");
  const auto rows = x.dim(0);
  const auto cols = x.dim(1);
  if (gain.dim(0) != cols || bias.dim(0) != cols) {
    throw DimensionError("layer_norm: gain/bias must have length " +
                         std::to_string(cols));
  }
  detail::guard_finite(x, "layer_norm");
  std::vector<double> normed(x.data().size());
  std::vector<double> inv_std(usize(rows));
  std::vector<double> out_data(x.data().size());
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto row = usize(i * cols);
    double mean = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) mean += x.data()[row + usize(j)];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      const double d = x.data()[row + usize(j)] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[usize(i)] = istd;
    for (std::int64_t j = 0; j < cols; ++j) {
      const double xn = (x.data()[row + usize(j)] - mean) * istd;
      normed[row + usize(j)] = xn;
      out_data[row + usize(j)] =
          xn * gain.data()[usize(j)] + bias.data()[usize(j)];
    }
  }
  Tensor out = detail::plain_result({rows, cols}, std::move(out_data));
  detail::guard_finite(out, "layer_norm");
  if (detail::tracing({&x, &gain, &bias})) {
    auto xn_node = x.node();
    auto gn = gain.node();
    auto bn = bias.node();
    auto on = out.node();
    detail::track(out, [xn_node, gn, bn, on, rows, cols,
                        normed = std::move(normed),
                        inv_std = std::move(inv_std)]() {
      const auto& g = on->grad;
      for (std::int64_t i = 0; i < rows; ++i) {
        const auto row = usize(i * cols);
        if (gn->requires_grad || bn->requires_grad) {
          for (std::int64_t j = 0; j < cols; ++j) {
            const auto f = row + usize(j);
            if (gn->requires_grad) gn->grad[usize(j)] += g[f] * normed[f];
            if (bn->requires_grad) bn->grad[usize(j)] += g[f];
          }
        }
        if (xn_node->requires_grad) {
          // dL/dxn scaled by gain, then the standard two mean corrections.
          double mean_gh = 0.0;
          double mean_gh_xn = 0.0;
          for (std::int64_t j = 0; j < cols; ++j) {
            const auto f = row + usize(j);
            const double gh = g[f] * gn->data[usize(j)];
            mean_gh += gh;
            mean_gh_xn += gh * normed[f];
          }
          mean_gh /= static_cast<double>(cols);
          mean_gh_xn /= static_cast<double>(cols);
          for (std::int64_t j = 0; j < cols; ++j) {
            const auto f = row + usize(j);
            const double gh = g[f] * gn->data[usize(j)];
            xn_node->grad[f] +=
                inv_std[usize(i)] * (gh - mean_gh - normed[f] * mean_gh_xn);
          }
        }
      }
    });
  }
  return out;
}

Tensor softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax_rows");
  detail::guard_finite(logits, "softmax_rows");
  const auto rows = logits.dim(0);
  const auto cols = logits.dim(1);
  std::vector<double> out_data(logits.data().size());
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto row = usize(i * cols);
    double m = logits.data()[row];
    for (std::int64_t j = 1; j < cols; ++j) {
      m = std::max(m, logits.data()[row + usize(j)]);
    }
    double z = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      const double e = std::exp(logits.data()[row + usize(j)] - m);
      out_data[row + usize(j)] = e;
      z += e;
    }
    for (std::int64_t j = 0; j < cols; ++j) out_data[row + usize(j)] /= z;
  }
  Tensor out = detail::plain_result({rows, cols}, std::move(out_data));
  if (detail::tracing({&logits})) {
    auto ln = logits.node();
    auto on = out.node();
    detail::track(out, [ln, on, rows, cols]() {
      for (std::int64_t i = 0; i < rows; ++i) {
        const auto row = usize(i * cols);
        double dot = 0.0;
        for (std::int64_t j = 0; j < cols; ++j) {
          dot += on->grad[row + usize(j)] * on->data[row + usize(j)];
        }
        for (std::int64_t j = 0; j < cols; ++j) {
          const auto f = row + usize(j);
          ln->grad[f] += on->data[f] * (on->grad[f] - dot);
        }
      }
    });
  }
  return out;
}

Tensor cross_entropy_with_logits(const Tensor& logits,
                                 const std::vector<int>& labels) {
  require_rank(logits, 2, "cross_entropy_with_logits");
  const auto rows = logits.dim(0);
  const auto cols = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != rows) {
    throw DimensionError("cross_entropy_with_logits: " +
                         std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  detail::guard_finite(logits, "cross_entropy_with_logits");
  std::vector<double> softmax(logits.data().size());
  double loss = 0.0;
  for (std::int64_t i = 0; i < rows; ++i) {
    const int label = labels[usize(i)];
    if (label < 0 || label >= cols) {
      throw ContractError("cross_entropy_with_logits: label " +
                          std::to_string(label) + " outside [0, " +
                          std::to_string(cols) + ")");
    }
    const auto row = usize(i * cols);
    double m = logits.data()[row];
    for (std::int64_t j = 1; j < cols; ++j) {
      m = std::max(m, logits.data()[row + usize(j)]);
    }
    double z = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) {
      const double e = std::exp(logits.data()[row + usize(j)] - m);
      softmax[row + usize(j)] = e;
      z += e;
    }
    for (std::int64_t j = 0; j < cols; ++j) softmax[row + usize(j)] /= z;
    loss += (m + std::log(z)) - logits.data()[row + usize(label)];
  }
  loss /= static_cast<double>(rows);
  Tensor out = Tensor::scalar(loss);
  detail::guard_finite(out, "cross_entropy_with_logits");
  if (detail::tracing({&logits})) {
    auto ln = logits.node();
    auto on = out.node();
    detail::track(out, [ln, on, rows, cols, labels,
                        softmax = std::move(softmax)]() {
      const double g = on->grad[0] / static_cast<double>(rows);
      for (std::int64_t i = 0; i < rows; ++i) {
        const auto row = usize(i * cols);
        for (std::int64_t j = 0; j < cols; ++j) {
          const double one_hot = (j == labels[usize(i)]) ? 1.0 : 0.0;
          ln->grad[row + usize(j)] += g * (softmax[row + usize(j)] - one_hot);
        }
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ContractError("dropout: rate must be in [0, 1), got " +
                        std::to_string(rate));
  }
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.data().size());
  for (auto& m : mask) {
    m = (uniform_double(rng) >= rate) ? keep_scale : 0.0;
  }
  std::vector<double> out_data(x.data().size());
  for (std::size_t f = 0; f < out_data.size(); ++f) {
    out_data[f] = x.data()[f] * mask[f];
  }
  Tensor out = detail::plain_result(x.shape(), std::move(out_data));
  if (detail::tracing({&x})) {
    auto xn = x.node();
    auto on = out.node();
    detail::track(out, [xn, on, mask = std::move(mask)]() {
      for (std::size_t f = 0; f < on->grad.size(); ++f) {
        xn->grad[f] += on->grad[f] * mask[f];
      }
    });
  }
  return out;
}

}  // namespace tabulatime
