#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "srd/rng.hpp"

namespace srd {

class Tape;

namespace detail {
struct TensorData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward reaches this tensor
  bool needs_grad = false;
};
}  // namespace detail

// Dense row-major float64 matrix. Copies share the underlying buffer, so a
// parameter tensor captured by a tape stays live and is updated in place.
class Tensor {
 public:
  Tensor() : d_(std::make_shared<detail::TensorData>()) {}
  Tensor(std::size_t rows, std::size_t cols);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor filled(std::size_t rows, std::size_t cols, double value);

  std::size_t rows() const { return d_->rows; }
  std::size_t cols() const { return d_->cols; }
  std::size_t size() const { return d_->values.size(); }

  double& at(std::size_t r, std::size_t c) { return d_->values[r * d_->cols + c]; }
  double at(std::size_t r, std::size_t c) const { return d_->values[r * d_->cols + c]; }

  std::vector<double>& values() { return d_->values; }
  const std::vector<double>& values() const { return d_->values; }

  // Value of a 1x1 tensor.
  double value() const;

  bool requires_grad() const { return d_->needs_grad; }
  Tensor& set_requires_grad(bool on) {
    d_->needs_grad = on;
    return *this;
  }

  bool has_grad() const { return !d_->grad.empty(); }
  std::vector<double>& grad();              // allocates zeros on first use
  const std::vector<double>& grad() const;  // throws if absent
  void zero_grad();

  // Detached copy of the current values (no grad, no tape linkage).
  Tensor detached() const;

  std::string shape_str() const;

  std::shared_ptr<detail::TensorData> state() const { return d_; }

 private:
  std::shared_ptr<detail::TensorData> d_;
};

// Ordered record of operations for one forward pass. Reverse traversal of
// the record implements backpropagation; order is fixed, so gradients are
// bit-identical across runs over the same tape.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the record in reverse, visiting
  // each node exactly once.
  void backward(const Tensor& loss);

 private:
  std::vector<BackwardFn> nodes_;
};

// --- recorded operations -------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& a);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);  // elementwise

Tensor relu(Tape& tape, const Tensor& a);
Tensor exp_elem(Tape& tape, const Tensor& a);
Tensor log_elem(Tape& tape, const Tensor& a);  // domain error on x <= 0
Tensor scale(Tape& tape, const Tensor& a, double c);
Tensor add_bias(Tape& tape, const Tensor& a, const Tensor& bias);  // bias is 1xN

Tensor softmax_rows(Tape& tape, const Tensor& a);
Tensor log_softmax_rows(Tape& tape, const Tensor& a);
Tensor mean_rows(Tape& tape, const Tensor& a);  // m x n -> 1 x n
Tensor max_cols(Tape& tape, const Tensor& a);   // m x n -> 1 x n, first max wins ties
Tensor sum_all(Tape& tape, const Tensor& a);    // -> 1 x 1

Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts);
Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts);

// Row lookup table[ids[i]] -> row i; gradient scatters back into the table.
Tensor gather_rows(Tape& tape, const Tensor& table, const std::vector<int>& ids);

// Sliding windows of `window` consecutive rows, each flattened row-major
// into one output row; rows() - window + 1 output rows.
Tensor im2col_rows(Tape& tape, const Tensor& a, std::size_t window);

Tensor l2_normalize_rows(Tape& tape, const Tensor& a);

// Inverted dropout; identity when training is false or rate is 0.
Tensor dropout(Tape& tape, const Tensor& a, double rate, Rng& rng, bool training);

// --- gradient checking ---------------------------------------------------

struct NamedParam {
  std::string name;
  Tensor tensor;
};

struct GradCheckEntry {
  std::string name;
  double max_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  bool pass = false;
  double max_err = 0.0;
  std::string worst_param;
  std::vector<GradCheckEntry> entries;
};

// Central finite differences of `build` (which must rebuild the same scalar
// loss from current parameter values on every call) against the recorded
// backward pass. Error metric: |a - n| / max(1, |a|, |n|).
GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build,
                           const std::vector<NamedParam>& params,
                           double eps = 1e-5, double tol = 1e-4);

void check_finite(const Tensor& t, const std::string& what);

}  // namespace srd
