#include "motiondiff/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace motiondiff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap view(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                              b.shape_str());
}

Tensor map_values(const Tensor& a, double (*f)(double)) {
  Tensor out = Tensor::uninitialized(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu_fn(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }
double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}
double sigmoid_fn(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(const ModelParams& params, const std::string& name) {
  const auto key = std::make_pair(&params, name);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = params.at(name);
  n.op = "param";
  n.requires_grad = (&params == trainable_);
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(key, id);
  return Var(this, id);
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> parents, Backward fn) {
  return record(op, std::move(value), std::vector<Var>(parents), std::move(fn));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& parents, Backward fn) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (const Var& p : parents) {
    if (p.tape() != this) throw std::invalid_argument(std::string(op) + ": operand from another tape");
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::grad_slot(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(int id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  Tensor& slot = grad_slot(id);
  if (!slot.same_shape(g)) shape_error("accumulate", slot, g);
  for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss from another tape");
  if (loss.value().size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  if (!nodes_[loss.id()].requires_grad) return;
  grad_slot(loss.id())[0] = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    if (!n.grad.all_finite()) throw NumericError(std::string("non-finite gradient flowing into ") + n.op);
    n.backward(*this, n.value, n.grad);
  }
}

std::vector<double> Tape::param_gradient() const {
  if (trainable_ == nullptr) return {};
  std::vector<double> flat(trainable_->flat_size(), 0.0);
  for (const auto& [key, id] : param_nodes_) {
    if (key.first != trainable_) continue;
    const Tensor& g = nodes_[id].grad;
    if (g.empty()) continue;
    const std::size_t off = trainable_->offset(trainable_->index_of(key.second));
    std::copy(g.flat().begin(), g.flat().end(), flat.begin() + static_cast<std::ptrdiff_t>(off));
  }
  return flat;
}

namespace ag {

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
  Tensor out = Tensor::uninitialized(av.rows(), bv.cols());
  view(out).noalias() = view(av) * view(bv);
  return a.tape()->record("matmul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(a.id())) view(t.grad_slot(a.id())).noalias() += view(g) * view(b.value()).transpose();
    if (t.requires_grad(b.id())) view(t.grad_slot(b.id())).noalias() += view(a.value()).transpose() * view(g);
  });
}

Var add(Var a, Var b) {
  if (!a.value().same_shape(b.value())) shape_error("add", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape()->record("add", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    t.accumulate(a.id(), g);
    t.accumulate(b.id(), g);
  });
}

Var sub(Var a, Var b) {
  if (!a.value().same_shape(b.value())) shape_error("sub", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape()->record("sub", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    t.accumulate(a.id(), g);
    if (t.requires_grad(b.id())) {
      Tensor& slot = t.grad_slot(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  if (!a.value().same_shape(b.value())) shape_error("mul", a.value(), b.value());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape()->record("mul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    if (t.requires_grad(a.id())) {
      Tensor& slot = t.grad_slot(a.id());
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * b.value()[i];
    }
    if (t.requires_grad(b.id())) {
      Tensor& slot = t.grad_slot(b.id());
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * a.value()[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (double& v : out.flat()) v *= s;
  return a.tape()->record("scale", std::move(out), {a}, [a, s](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& slot = t.grad_slot(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += s * g[i];
  });
}

Var add_row(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) shape_error("add_row", av, bv);
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv[c];
  return a.tape()->record("add_row", std::move(out), {a, b}, [a, b](Tape& t, const Tensor&, const Tensor& g) {
    t.accumulate(a.id(), g);
    if (t.requires_grad(b.id())) {
      Tensor& slot = t.grad_slot(b.id());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) slot[c] += g(r, c);
    }
  });
}

Var gelu(Var a) {
  return a.tape()->record("gelu", map_values(a.value(), gelu_fn), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& slot = t.grad_slot(a.id());
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * gelu_grad(x[i]);
  });
}

Var tanh(Var a) {
  Tensor out = map_values(a.value(), [](double x) { return std::tanh(x); });
  return a.tape()->record("tanh", std::move(out), {a}, [a](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor& slot = t.grad_slot(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sigmoid(Var a) {
  return a.tape()->record("sigmoid", map_values(a.value(), sigmoid_fn), {a}, [a](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor& slot = t.grad_slot(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var exp(Var a) {
  Tensor out = map_values(a.value(), [](double x) { return std::exp(x); });
  return a.tape()->record("exp", std::move(out), {a}, [a](Tape& t, const Tensor& y, const Tensor& g) {
    Tensor& slot = t.grad_slot(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * y[i];
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.rows();
  const std::size_t m = xv.cols();
  if (gain.value().size() != m || bias.value().size() != m) shape_error("layer_norm", xv, gain.value());
  Tensor xhat = Tensor::uninitialized(n, m);
  std::vector<double> rstd(n);
  Tensor out = Tensor::uninitialized(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < m; ++c) mean += xv(r, c);
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t c = 0; c < m; ++c) var += (xv(r, c) - mean) * (xv(r, c) - mean);
    var /= static_cast<double>(m);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < m; ++c) {
      xhat(r, c) = (xv(r, c) - mean) * rstd[r];
      out(r, c) = xhat(r, c) * gain.value()[c] + bias.value()[c];
    }
  }
  return x.tape()->record(
      "layer_norm", std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, const Tensor&, const Tensor& g) {
        const std::size_t n = g.rows();
        const std::size_t m = g.cols();
        if (t.requires_grad(gain.id()) || t.requires_grad(bias.id())) {
          Tensor dg(1, m), db(1, m);
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < m; ++c) {
              dg[c] += g(r, c) * xhat(r, c);
              db[c] += g(r, c);
            }
          t.accumulate(gain.id(), dg);
          t.accumulate(bias.id(), db);
        }
        if (!t.requires_grad(x.id())) return;
        Tensor& slot = t.grad_slot(x.id());
        const Tensor& gv = gain.value();
        std::vector<double> dxhat(m);
        for (std::size_t r = 0; r < n; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < m; ++c) {
            dxhat[c] = g(r, c) * gv[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xhat(r, c);
          }
          mean_d /= static_cast<double>(m);
          mean_dx /= static_cast<double>(m);
          for (std::size_t c = 0; c < m; ++c)
            slot(r, c) += rstd[r] * (dxhat[c] - mean_d - xhat(r, c) * mean_dx);
        }
      });
}

}  // namespace ag

Tensor attention_weights(const Tensor& q, const Tensor& k, std::size_t group, std::size_t heads) {
  if (!q.same_shape(k)) shape_error("attention", q, k);
  if (group == 0 || q.rows() % group != 0 || heads == 0 || q.cols() % heads != 0) {
    throw std::invalid_argument("attention: " + q.shape_str() + " incompatible with group " +
                                std::to_string(group) + " and heads " + std::to_string(heads));
  }
  const std::size_t groups = q.rows() / group;
  const std::size_t dh = q.cols() / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor probs(groups * heads * group, group);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t base = (gi * heads + h) * group;
      for (std::size_t i = 0; i < group; ++i) {
        const double* qi = q.data() + (gi * group + i) * q.cols() + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < group; ++j) {
          const double* kj = k.data() + (gi * group + j) * k.cols() + h * dh;
          double s = 0.0;
          for (std::size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
          s *= inv;
          probs(base + i, j) = s;
          mx = std::max(mx, s);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < group; ++j) {
          const double e = std::exp(probs(base + i, j) - mx);
          probs(base + i, j) = e;
          z += e;
        }
        for (std::size_t j = 0; j < group; ++j) probs(base + i, j) /= z;
      }
    }
  }
  return probs;
}

namespace ag {

Var grouped_attention(Var q, Var k, Var v, std::size_t group, std::size_t heads) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  if (!qv.same_shape(vv)) shape_error("grouped_attention", qv, vv);
  Tensor probs = attention_weights(qv, kv, group, heads);
  const std::size_t groups = qv.rows() / group;
  const std::size_t width = qv.cols();
  const std::size_t dh = width / heads;
  Tensor out(qv.rows(), width);
  for (std::size_t gi = 0; gi < groups; ++gi)
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t base = (gi * heads + h) * group;
      for (std::size_t i = 0; i < group; ++i) {
        double* oi = out.data() + (gi * group + i) * width + h * dh;
        for (std::size_t j = 0; j < group; ++j) {
          const double p = probs(base + i, j);
          const double* vj = vv.data() + (gi * group + j) * width + h * dh;
          for (std::size_t d = 0; d < dh; ++d) oi[d] += p * vj[d];
        }
      }
    }
  return q.tape()->record(
      "grouped_attention", std::move(out), {q, k, v},
      [q, k, v, group, heads, probs = std::move(probs)](Tape& t, const Tensor&, const Tensor& g) {
        const Tensor& qv = q.value();
        const Tensor& kv = k.value();
        const Tensor& vv = v.value();
        const std::size_t width = qv.cols();
        const std::size_t dh = width / heads;
        const std::size_t groups = qv.rows() / group;
        const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
        Tensor dq(qv.rows(), width), dk(qv.rows(), width), dv(qv.rows(), width);
        std::vector<double> dp(group), ds(group);
        for (std::size_t gi = 0; gi < groups; ++gi)
          for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t base = (gi * heads + h) * group;
            for (std::size_t i = 0; i < group; ++i) {
              const std::size_t ri = gi * group + i;
              const double* gi_row = g.data() + ri * width + h * dh;
              double dot = 0.0;
              for (std::size_t j = 0; j < group; ++j) {
                const std::size_t rj = gi * group + j;
                const double* vj = vv.data() + rj * width + h * dh;
                double* dvj = dv.data() + rj * width + h * dh;
                const double p = probs(base + i, j);
                double s = 0.0;
                for (std::size_t d = 0; d < dh; ++d) {
                  s += gi_row[d] * vj[d];
                  dvj[d] += p * gi_row[d];
                }
                dp[j] = s;
                dot += p * s;
              }
              for (std::size_t j = 0; j < group; ++j) ds[j] = probs(base + i, j) * (dp[j] - dot) * inv;
              const double* qi = qv.data() + ri * width + h * dh;
              double* dqi = dq.data() + ri * width + h * dh;
              for (std::size_t j = 0; j < group; ++j) {
                const std::size_t rj = gi * group + j;
                const double* kj = kv.data() + rj * width + h * dh;
                double* dkj = dk.data() + rj * width + h * dh;
                for (std::size_t d = 0; d < dh; ++d) {
                  dqi[d] += ds[j] * kj[d];
                  dkj[d] += ds[j] * qi[d];
                }
              }
            }
          }
        t.accumulate(q.id(), dq);
        t.accumulate(k.id(), dk);
        t.accumulate(v.id(), dv);
      });
}

Var gather(Var x, std::vector<std::size_t> index, std::size_t rows, std::size_t cols) {
  if (index.size() != rows * cols) throw std::invalid_argument("gather: index size does not match shape");
  const Tensor& xv = x.value();
  Tensor out = Tensor::uninitialized(rows, cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= xv.size()) throw std::out_of_range("gather: index out of range");
    out[i] = xv[index[i]];
  }
  return x.tape()->record("gather", std::move(out), {x}, [x, index = std::move(index)](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& slot = t.grad_slot(x.id());
    for (std::size_t i = 0; i < index.size(); ++i) slot[index[i]] += g[i];
  });
}

Var gather_rows(Var x, const std::vector<std::size_t>& rows) {
  const std::size_t cols = x.cols();
  std::vector<std::size_t> index;
  index.reserve(rows.size() * cols);
  for (std::size_t r : rows)
    for (std::size_t c = 0; c < cols; ++c) index.push_back(r * cols + c);
  return gather(x, std::move(index), rows.size(), cols);
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  Tensor out = x.value().reshaped(rows, cols);
  return x.tape()->record("reshape", std::move(out), {x}, [x](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& slot = t.grad_slot(x.id());
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    cols += p.cols();
  }
  Tensor out = Tensor::uninitialized(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(pv.row(r).begin(), pv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(off));
    off += pv.cols();
  }
  return parts.front().tape()->record("concat_cols", std::move(out), parts, [parts](Tape& t, const Tensor&, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& p : parts) {
      const std::size_t w = p.cols();
      if (t.requires_grad(p.id())) {
        Tensor& slot = t.grad_slot(p.id());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) slot(r, c) += g(r, off + c);
      }
      off += w;
    }
  });
}

Var group_left_mul(Var a, Var h, std::size_t group) {
  const Tensor& av = a.value();
  const Tensor& hv = h.value();
  if (av.rows() != group || av.cols() != group || hv.rows() % group != 0) shape_error("group_left_mul", av, hv);
  const std::size_t blocks = hv.rows() / group;
  const auto g = static_cast<Eigen::Index>(group);
  const auto w = static_cast<Eigen::Index>(hv.cols());
  Tensor out(hv.rows(), hv.cols());
  for (std::size_t b = 0; b < blocks; ++b) {
    ConstMap hb(hv.data() + b * group * hv.cols(), g, w);
    MutMap ob(out.data() + b * group * hv.cols(), g, w);
    ob.noalias() = view(av) * hb;
  }
  return a.tape()->record("group_left_mul", std::move(out), {a, h}, [a, h, group](Tape& t, const Tensor&, const Tensor& gr) {
    const Tensor& hv = h.value();
    const std::size_t blocks = hv.rows() / group;
    const auto g = static_cast<Eigen::Index>(group);
    const auto w = static_cast<Eigen::Index>(hv.cols());
    const bool need_a = t.requires_grad(a.id());
    const bool need_h = t.requires_grad(h.id());
    for (std::size_t b = 0; b < blocks; ++b) {
      ConstMap gb(gr.data() + b * group * hv.cols(), g, w);
      if (need_a) {
        ConstMap hb(hv.data() + b * group * hv.cols(), g, w);
        view(t.grad_slot(a.id())).noalias() += gb * hb.transpose();
      }
      if (need_h) {
        MutMap db(t.grad_slot(h.id()).data() + b * group * hv.cols(), g, w);
        db.noalias() += view(a.value()).transpose() * gb;
      }
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().flat()) s += v;
  return a.tape()->record("sum", Tensor(1, 1, s), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& slot = t.grad_slot(a.id());
    for (double& v : slot.flat()) v += g[0];
  });
}

Var sum_squares(Var a) {
  return a.tape()->record("sum_squares", Tensor(1, 1, squared_norm(a.value())), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& slot = t.grad_slot(a.id());
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < x.size(); ++i) slot[i] += 2.0 * g[0] * x[i];
  });
}

Var row_sum_squares(Var a) {
  const Tensor& x = a.value();
  Tensor out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (double v : x.row(r)) out[r] += v * v;
  return a.tape()->record("row_sum_squares", std::move(out), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& slot = t.grad_slot(a.id());
    const Tensor& x = a.value();
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) slot(r, c) += 2.0 * g[r] * x(r, c);
  });
}

Var pairwise_sq_dist(Var a) {
  const Tensor& x = a.value();
  const std::size_t n = x.rows();
  Tensor out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        const double d = x(i, c) - x(j, c);
        s += d * d;
      }
      out(i, j) = s;
      out(j, i) = s;
    }
  return a.tape()->record("pairwise_sq_dist", std::move(out), {a}, [a](Tape& t, const Tensor&, const Tensor& g) {
    Tensor& slot = t.grad_slot(a.id());
    const Tensor& x = a.value();
    const std::size_t n = x.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double w = 2.0 * (g(i, j) + g(j, i));
        for (std::size_t c = 0; c < x.cols(); ++c) slot(i, c) += w * (x(i, c) - x(j, c));
      }
  });
}

Var min_entry(Var a) {
  const Tensor& x = a.value();
  if (x.empty()) throw std::invalid_argument("min_entry: empty operand");
  std::size_t arg = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] < x[arg]) arg = i;
  return a.tape()->record("min_entry", Tensor(1, 1, x[arg]), {a}, [a, arg](Tape& t, const Tensor&, const Tensor& g) {
    t.grad_slot(a.id())[arg] += g[0];
  });
}

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

}  // namespace ag

std::vector<double> gradient(const ModelParams& params, const std::function<Var(Tape&)>& loss_closure,
                             double* loss_value) {
  Tape tape(&params);
  Var loss = loss_closure(tape);
  if (loss_value != nullptr) *loss_value = loss.value()[0];
  tape.backward(loss);
  return tape.param_gradient();
}

}  // namespace motiondiff
