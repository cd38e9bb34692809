#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace tabulatime {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // same length as data when requires_grad
  bool requires_grad = false;
};

// Value-semantic handle onto a shared storage node. Copies alias the same
// storage; gradients accumulate on the node.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, double fill, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  // Uniform on [lo, hi); the usual init for linear layers is lo = -1/sqrt(fan_in).
  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  std::int64_t dim(int axis) const;
  std::int64_t size() const;

  const std::vector<double>& data() const;
  // Mutable storage access; mutations are invisible to any recorded tape.
  std::vector<double>& raw();
  double item() const;  // scalar tensors only
  double at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  const std::vector<double>& grad() const;
  void zero_grad();

  Tensor detached() const;  // deep copy, no grad, never tracked
  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

// When on, every op validates inputs and outputs are finite and raises
// NumericError otherwise. Off by default; thread-local.
void set_checked_mode(bool on);
bool checked_mode();

// Define-by-run gradient tape. Constructing one makes it the active tape for
// the current thread (nesting restores the previous on destruction). Ops
// record their backward step only while a tape is active and an input
// requires grad; with no tape, forwards run in inference mode.
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* active();

  void record(std::function<void()> backward_step);
  std::size_t size() const { return steps_.size(); }

  // Seeds d(loss)/d(loss) = 1, replays steps newest-first, then clears.
  // The loss must be a tracked scalar produced under this tape.
  void backward(const Tensor& loss);
  void clear();

 private:
  std::vector<std::function<void()>> steps_;
  GradTape* previous_ = nullptr;
};

// Convenience: backward on the active tape.
void backward(const Tensor& loss);

// ---- elementwise / broadcast ops ------------------------------------------
// Binary ops broadcast one operand into the other when its shape (ignoring
// leading 1s) equals a trailing suffix of the other's shape. Anything else is
// a DimensionError.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor relu_squared(const Tensor& a);
Tensor exp(const Tensor& a);
// mu*x + (1-mu)*y, elementwise; mu broadcasts like the binary ops.
Tensor lerp(const Tensor& mu, const Tensor& x, const Tensor& y);

// ---- shape / structure ops -------------------------------------------------
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);  // rank-2 only
// Columns [start, start+count) of a rank-2 tensor.
Tensor slice_cols(const Tensor& a, std::int64_t start, std::int64_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);  // rank-2, same rows
// Contiguous flat range reinterpreted as `shape`; used to peel one (T,C)
// sequence out of a (B,N,T,C) batch.
Tensor slice_block(const Tensor& a, std::int64_t offset, Shape shape);
// Inverse of repeated slice_block: concatenates flat blocks into `shape`.
Tensor stack_blocks(const std::vector<Tensor>& blocks, Shape shape);
// Rows of x shifted down one step: out[t] = x[t-1], out[0] = 0. Rank-2.
Tensor time_shift(const Tensor& x);
// out[i, j] = m[i, j] * w[i] for rank-2 m and length-rows w.
Tensor row_scale(const Tensor& m, const Tensor& w);

// ---- reductions ------------------------------------------------------------
Tensor sum(const Tensor& a);       // scalar
Tensor mean_all(const Tensor& a);  // scalar
Tensor mean_last(const Tensor& a);  // mean over the trailing axis

// ---- linear algebra --------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);  // (m,k)x(k,n) -> (m,n)

// ---- fused neural ops ------------------------------------------------------
// Normalizes each row of x to zero mean / unit variance (population variance,
// eps inside the sqrt), then applies gain and bias (both length row-width).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
// Row-wise softmax of rank-2 logits.
Tensor softmax_rows(const Tensor& logits);
// Mean over rows of -log softmax(logits)[row, label]. Stable log-sum-exp.
Tensor cross_entropy_with_logits(const Tensor& logits,
                                 const std::vector<int>& labels);
// Multiplies x by a fixed 0/1 mask scaled by 1/(1-rate) (inverted dropout).
Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng);

namespace detail {
// Wraps freshly computed data without recording anything.
Tensor plain_result(Shape shape, std::vector<double> data);
// True when a tape is active and any input requires grad.
bool tracing(std::initializer_list<const Tensor*> inputs);
// Marks `out` tracked and records `backward_step` on the active tape.
void track(Tensor& out, std::function<void()> backward_step);
// Checked-mode enforcement; `where` names the op in the error message.
void guard_finite(const Tensor& t, const char* where);
}  // namespace detail

}  // namespace tabulatime
