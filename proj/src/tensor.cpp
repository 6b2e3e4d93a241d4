#include "srd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace srd {

namespace {

using detail::TensorData;
using State = std::shared_ptr<TensorData>;

void ensure_grad(TensorData& t) {
  if (t.grad.empty()) t.grad.assign(t.values.size(), 0.0);
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " and " +
                              b.shape_str());
}

bool record_needed(Tape&, const std::vector<const Tensor*>& inputs) {
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

Tensor make_output(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

// C += A * B with a zero-skip on A entries; multi-hot features make the
// left operand mostly zero in the graph path.
void matmul_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols) : d_(std::make_shared<TensorData>()) {
  d_->rows = rows;
  d_->cols = cols;
  d_->values.assign(rows * cols, 0.0);
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : d_(std::make_shared<TensorData>()) {
  if (values.size() != rows * cols)
    throw std::invalid_argument("Tensor: " + std::to_string(values.size()) +
                                " values for shape " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  d_->rows = rows;
  d_->cols = cols;
  d_->values = std::move(values);
  check_finite(*this, "Tensor");
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("from_rows: ragged rows");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(v));
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value) {
  Tensor t(rows, cols);
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

double Tensor::value() const {
  if (rows() != 1 || cols() != 1)
    throw std::invalid_argument("value(): tensor is " + shape_str() + ", not 1x1");
  return d_->values[0];
}

std::vector<double>& Tensor::grad() {
  ensure_grad(*d_);
  return d_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (d_->grad.empty()) throw std::runtime_error("grad(): no gradient present");
  return d_->grad;
}

void Tensor::zero_grad() {
  if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
}

Tensor Tensor::detached() const {
  Tensor t;
  t.d_->rows = rows();
  t.d_->cols = cols();
  t.d_->values = d_->values;
  return t;
}

std::string Tensor::shape_str() const {
  return std::to_string(rows()) + "x" + std::to_string(cols());
}

void check_finite(const Tensor& t, const std::string& what) {
  for (double v : t.values())
    if (!std::isfinite(v))
      throw std::runtime_error(what + ": non-finite value in " + t.shape_str() + " tensor");
}

void Tape::backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1x1, got " + loss.shape_str());
  if (!std::isfinite(loss.values()[0]))
    throw std::runtime_error("backward: loss is non-finite");
  auto state = loss.state();
  ensure_grad(*state);
  state->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = make_output(m, n);
  matmul_acc(a.values().data(), b.values().data(), out.values().data(), m, k, n);
  if (record_needed(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), bs = b.state(), os = out.state(), m, k, n]() {
      if (os->grad.empty()) return;
      const double* g = os->grad.data();
      if (as->needs_grad) {
        ensure_grad(*as);
        // dA += G * B^T
        double* da = as->grad.data();
        const double* bv = bs->values.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* grow = g + i * n;
            const double* brow = bv + p * n;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            da[i * k + p] += acc;
          }
      }
      if (bs->needs_grad) {
        ensure_grad(*bs);
        // dB += A^T * G
        double* db = bs->grad.data();
        const double* av = as->values.data();
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            double aip = av[i * k + p];
            if (aip == 0.0) continue;
            double* brow = db + p * n;
            for (std::size_t j = 0; j < n; ++j) brow[j] += aip * grow[j];
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& a) {
  std::size_t m = a.rows(), n = a.cols();
  Tensor out = make_output(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state(), m, n]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) as->grad[i * n + j] += os->grad[j * m + i];
    });
  }
  return out;
}

namespace {

Tensor binary_same_shape(Tape& tape, const Tensor& a, const Tensor& b, const char* name,
                         double (*fwd)(double, double),
                         void (*bwd)(double g, double av, double bv, double& da, double& db)) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(name, a, b);
  Tensor out = make_output(a.rows(), a.cols());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av[i], bv[i]);
  if (record_needed(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), bs = b.state(), os = out.state(), bwd]() {
      if (os->grad.empty()) return;
      bool need_a = as->needs_grad, need_b = bs->needs_grad;
      if (need_a) ensure_grad(*as);
      if (need_b) ensure_grad(*bs);
      double dummy = 0.0;
      for (std::size_t i = 0; i < os->grad.size(); ++i)
        bwd(os->grad[i], as->values[i], bs->values[i], need_a ? as->grad[i] : dummy,
            need_b ? bs->grad[i] : dummy);
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double g, double, double, double& da, double& db) {
        da += g;
        db += g;
      });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double g, double, double, double& da, double& db) {
        da += g;
        db -= g;
      });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary_same_shape(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double g, double x, double y, double& da, double& db) {
        da += g * y;
        db += g * x;
      });
}

Tensor relu(Tape& tape, const Tensor& a) {
  Tensor out = make_output(a.rows(), a.cols());
  const auto& av = a.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] > 0.0 ? av[i] : 0.0;
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state()]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      // subgradient at 0 is 0
      for (std::size_t i = 0; i < os->grad.size(); ++i)
        if (as->values[i] > 0.0) as->grad[i] += os->grad[i];
    });
  }
  return out;
}

Tensor exp_elem(Tape& tape, const Tensor& a) {
  Tensor out = make_output(a.rows(), a.cols());
  const auto& av = a.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    ov[i] = std::exp(av[i]);
    if (!std::isfinite(ov[i]))
      throw std::runtime_error("exp: overflow at input " + std::to_string(av[i]));
  }
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state()]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      for (std::size_t i = 0; i < os->grad.size(); ++i)
        as->grad[i] += os->grad[i] * os->values[i];
    });
  }
  return out;
}

Tensor log_elem(Tape& tape, const Tensor& a) {
  Tensor out = make_output(a.rows(), a.cols());
  const auto& av = a.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    if (!(av[i] > 0.0))
      throw std::domain_error("log: non-positive entry " + std::to_string(av[i]));
    ov[i] = std::log(av[i]);
  }
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state()]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      for (std::size_t i = 0; i < os->grad.size(); ++i)
        as->grad[i] += os->grad[i] / as->values[i];
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double c) {
  Tensor out = make_output(a.rows(), a.cols());
  const auto& av = a.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = c * av[i];
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state(), c]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      for (std::size_t i = 0; i < os->grad.size(); ++i) as->grad[i] += c * os->grad[i];
    });
  }
  return out;
}

Tensor add_bias(Tape& tape, const Tensor& a, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) shape_error("add_bias", a, bias);
  std::size_t m = a.rows(), n = a.cols();
  Tensor out = make_output(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) + bias.at(0, j);
  if (record_needed(tape, {&a, &bias})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), bs = bias.state(), os = out.state(), m, n]() {
      if (os->grad.empty()) return;
      if (as->needs_grad) {
        ensure_grad(*as);
        for (std::size_t i = 0; i < m * n; ++i) as->grad[i] += os->grad[i];
      }
      if (bs->needs_grad) {
        ensure_grad(*bs);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) bs->grad[j] += os->grad[i * n + j];
      }
    });
  }
  return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& a) {
  std::size_t m = a.rows(), n = a.cols();
  if (n == 0 || m == 0) throw std::invalid_argument("softmax_rows: empty tensor");
  Tensor out = make_output(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = a.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double e = std::exp(a.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) /= sum;
  }
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state(), m, n]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      for (std::size_t i = 0; i < m; ++i) {
        const double* p = os->values.data() + i * n;
        const double* g = os->grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[j] * p[j];
        double* da = as->grad.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) da[j] += p[j] * (g[j] - dot);
      }
    });
  }
  return out;
}

Tensor log_softmax_rows(Tape& tape, const Tensor& a) {
  std::size_t m = a.rows(), n = a.cols();
  if (n == 0 || m == 0) throw std::invalid_argument("log_softmax_rows: empty tensor");
  Tensor out = make_output(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = a.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, a.at(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(a.at(i, j) - mx);
    double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) - lse;
  }
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state(), m, n]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      for (std::size_t i = 0; i < m; ++i) {
        const double* lp = os->values.data() + i * n;
        const double* g = os->grad.data() + i * n;
        double gsum = 0.0;
        for (std::size_t j = 0; j < n; ++j) gsum += g[j];
        double* da = as->grad.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) da[j] += g[j] - std::exp(lp[j]) * gsum;
      }
    });
  }
  return out;
}

Tensor mean_rows(Tape& tape, const Tensor& a) {
  std::size_t m = a.rows(), n = a.cols();
  if (m == 0) throw std::invalid_argument("mean_rows: empty tensor");
  Tensor out = make_output(1, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(0, j) += a.at(i, j);
  for (std::size_t j = 0; j < n; ++j) out.at(0, j) /= static_cast<double>(m);
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state(), m, n]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      double inv = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) as->grad[i * n + j] += os->grad[j] * inv;
    });
  }
  return out;
}

Tensor max_cols(Tape& tape, const Tensor& a) {
  std::size_t m = a.rows(), n = a.cols();
  if (m == 0 || n == 0) throw std::invalid_argument("max_cols: empty tensor");
  Tensor out = make_output(1, n);
  auto argmax = std::make_shared<std::vector<std::size_t>>(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    double best = a.at(0, j);
    std::size_t bi = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (a.at(i, j) > best) {  // strict: first maximal row wins ties
        best = a.at(i, j);
        bi = i;
      }
    out.at(0, j) = best;
    (*argmax)[j] = bi;
  }
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state(), argmax, n]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      for (std::size_t j = 0; j < n; ++j) as->grad[(*argmax)[j] * n + j] += os->grad[j];
    });
  }
  return out;
}

Tensor sum_all(Tape& tape, const Tensor& a) {
  Tensor out = make_output(1, 1);
  double s = 0.0;
  for (double v : a.values()) s += v;
  out.values()[0] = s;
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state()]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      double g = os->grad[0];
      for (double& d : as->grad) d += g;
    });
  }
  return out;
}

namespace {

Tensor concat_impl(Tape& tape, const std::vector<Tensor>& parts, bool by_cols) {
  if (parts.empty()) throw std::invalid_argument("concat: no parts");
  std::size_t fixed = by_cols ? parts[0].rows() : parts[0].cols();
  std::size_t total = 0;
  bool needs = false;
  for (const Tensor& p : parts) {
    std::size_t pf = by_cols ? p.rows() : p.cols();
    if (pf != fixed)
      throw std::invalid_argument(std::string("concat: mismatched ") +
                                  (by_cols ? "row" : "column") + " count (" + p.shape_str() +
                                  " vs " + parts[0].shape_str() + ")");
    total += by_cols ? p.cols() : p.rows();
    needs = needs || p.requires_grad();
  }
  Tensor out = by_cols ? Tensor(fixed, total) : Tensor(total, fixed);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    if (by_cols) {
      for (std::size_t i = 0; i < fixed; ++i)
        for (std::size_t j = 0; j < p.cols(); ++j) out.at(i, off + j) = p.at(i, j);
      off += p.cols();
    } else {
      for (std::size_t i = 0; i < p.rows(); ++i)
        for (std::size_t j = 0; j < fixed; ++j) out.at(off + i, j) = p.at(i, j);
      off += p.rows();
    }
  }
  if (needs) {
    out.set_requires_grad(true);
    std::vector<State> states;
    std::vector<std::size_t> sizes;
    for (const Tensor& p : parts) {
      states.push_back(p.state());
      sizes.push_back(by_cols ? p.cols() : p.rows());
    }
    std::size_t ncols = out.cols();
    tape.record([states, sizes, os = out.state(), by_cols, fixed, ncols]() {
      if (os->grad.empty()) return;
      std::size_t off = 0;
      for (std::size_t k = 0; k < states.size(); ++k) {
        auto& s = states[k];
        if (s->needs_grad) {
          ensure_grad(*s);
          if (by_cols) {
            for (std::size_t i = 0; i < fixed; ++i)
              for (std::size_t j = 0; j < sizes[k]; ++j)
                s->grad[i * sizes[k] + j] += os->grad[i * ncols + off + j];
          } else {
            for (std::size_t i = 0; i < sizes[k]; ++i)
              for (std::size_t j = 0; j < fixed; ++j)
                s->grad[i * fixed + j] += os->grad[(off + i) * fixed + j];
          }
        }
        off += sizes[k];
      }
    });
  }
  return out;
}

}  // namespace

Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts) {
  return concat_impl(tape, parts, true);
}

Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts) {
  return concat_impl(tape, parts, false);
}

Tensor gather_rows(Tape& tape, const Tensor& table, const std::vector<int>& ids) {
  std::size_t n = table.cols();
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows())
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) +
                                  " out of range for table " + table.shape_str());
  Tensor out = make_output(ids.size(), n);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = table.at(ids[i], j);
  if (record_needed(tape, {&table})) {
    out.set_requires_grad(true);
    tape.record([ts = table.state(), os = out.state(), ids, n]() {
      if (os->grad.empty() || !ts->needs_grad) return;
      ensure_grad(*ts);
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
          ts->grad[static_cast<std::size_t>(ids[i]) * n + j] += os->grad[i * n + j];
    });
  }
  return out;
}

Tensor im2col_rows(Tape& tape, const Tensor& a, std::size_t window) {
  std::size_t m = a.rows(), n = a.cols();
  if (window == 0 || window > m)
    throw std::invalid_argument("im2col_rows: window " + std::to_string(window) +
                                " does not fit " + a.shape_str());
  std::size_t out_rows = m - window + 1;
  std::size_t out_cols = window * n;
  Tensor out = make_output(out_rows, out_cols);
  for (std::size_t i = 0; i < out_rows; ++i)
    for (std::size_t w = 0; w < window; ++w)
      for (std::size_t j = 0; j < n; ++j) out.at(i, w * n + j) = a.at(i + w, j);
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state(), out_rows, window, n]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      for (std::size_t i = 0; i < out_rows; ++i)
        for (std::size_t w = 0; w < window; ++w)
          for (std::size_t j = 0; j < n; ++j)
            as->grad[(i + w) * n + j] += os->grad[i * (window * n) + w * n + j];
    });
  }
  return out;
}

Tensor l2_normalize_rows(Tape& tape, const Tensor& a) {
  std::size_t m = a.rows(), n = a.cols();
  Tensor out = make_output(m, n);
  auto norms = std::make_shared<std::vector<double>>(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += a.at(i, j) * a.at(i, j);
    double nr = std::sqrt(s);
    if (nr < 1e-12) nr = 1e-12;  // keep zero rows finite
    (*norms)[i] = nr;
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) / nr;
  }
  if (record_needed(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([as = a.state(), os = out.state(), norms, m, n]() {
      if (os->grad.empty() || !as->needs_grad) return;
      ensure_grad(*as);
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = os->values.data() + i * n;
        const double* g = os->grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
        double inv = 1.0 / (*norms)[i];
        double* da = as->grad.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) da[j] += (g[j] - y[j] * dot) * inv;
      }
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& a, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return a;
  double keep = 1.0 - rate;
  Tensor mask(a.rows(), a.cols());
  for (double& v : mask.values()) v = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mul(tape, a, mask);
}

GradCheckReport grad_check(const std::function<Tensor(Tape&)>& build,
                           const std::vector<NamedParam>& params, double eps, double tol) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
  for (const NamedParam& p : params) {
    Tensor handle = p.tensor;
    handle.zero_grad();
  }
  Tape tape;
  Tensor loss = build(tape);
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  for (const NamedParam& p : params)
    analytic.push_back(p.tensor.has_grad() ? p.tensor.grad()
                                           : std::vector<double>(p.tensor.size(), 0.0));

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor handle = params[pi].tensor;
    GradCheckEntry entry;
    entry.name = params[pi].name;
    auto& vals = handle.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      double saved = vals[i];
      vals[i] = saved + eps;
      Tape t1;
      double fp = build(t1).value();
      vals[i] = saved - eps;
      Tape t2;
      double fm = build(t2).value();
      vals[i] = saved;
      double numeric = (fp - fm) / (2.0 * eps);
      double a = analytic[pi][i];
      double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (err > entry.max_err) {
        entry.max_err = err;
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    if (entry.max_err > report.max_err) {
      report.max_err = entry.max_err;
      report.worst_param = entry.name;
    }
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_err < tol;
  return report;
}

}  // namespace srd
