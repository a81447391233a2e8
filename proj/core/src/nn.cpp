#include "matmodal/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace matmodal::nn {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": shape mismatch, " + detail);
}

std::size_t numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

NodePtr make_node(std::vector<int> shape, std::vector<double> values,
                  std::vector<NodePtr> parents,
                  std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->parents = std::move(parents);
  node->backward_fn = std::move(backward_fn);
  for (const auto& p : node->parents)
    if (p->requires_grad) node->requires_grad = true;
  return node;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    shape_error(op, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// rows x cols view of a possibly 1-D tensor (1-D treated as one row)
std::pair<int, int> as_rows(const std::vector<int>& shape, const char* op) {
  if (shape.size() == 1) return {1, shape[0]};
  if (shape.size() == 2) return {shape[0], shape[1]};
  shape_error(op, "expected 1-D or 2-D tensor, got " + shape_str(shape));
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  const std::size_t n = numel(shape);
  auto node = make_node(std::move(shape), std::vector<double>(n, 0.0), {}, {});
  node->requires_grad = requires_grad;
  return Tensor(node);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values,
                    bool requires_grad) {
  if (numel(shape) != values.size())
    throw std::invalid_argument("Tensor::from: value count does not match shape");
  auto node = make_node(std::move(shape), std::move(values), {}, {});
  node->requires_grad = requires_grad;
  return Tensor(node);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from({1}, {v}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("Tensor::item: not a scalar");
  return node_->values[0];
}

void Tensor::backward() const {
  if (size() != 1)
    throw std::invalid_argument("backward: loss must be a scalar");
  // reverse topological order via iterative DFS
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : topo) n->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
  }
}

void check_shape(const Tensor& t, const std::vector<int>& expected,
                 const std::string& op) {
  if (t.shape() != expected)
    shape_error(op, "expected " + shape_str(expected) + ", got " +
                        shape_str(t.shape()));
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] + b.values()[i];
  return Tensor(make_node(a.shape(), std::move(out), {a.node(), b.node()},
                          [](Node& self) {
                            for (int p = 0; p < 2; ++p) {
                              Node& par = *self.parents[p];
                              if (!par.requires_grad) continue;
                              for (std::size_t i = 0; i < self.size(); ++i)
                                par.grad[i] += self.grad[i];
                            }
                          }));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] - b.values()[i];
  return Tensor(make_node(a.shape(), std::move(out), {a.node(), b.node()},
                          [](Node& self) {
                            Node& pa = *self.parents[0];
                            Node& pb = *self.parents[1];
                            for (std::size_t i = 0; i < self.size(); ++i) {
                              if (pa.requires_grad) pa.grad[i] += self.grad[i];
                              if (pb.requires_grad) pb.grad[i] -= self.grad[i];
                            }
                          }));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] * b.values()[i];
  return Tensor(make_node(a.shape(), std::move(out), {a.node(), b.node()},
                          [](Node& self) {
                            Node& pa = *self.parents[0];
                            Node& pb = *self.parents[1];
                            for (std::size_t i = 0; i < self.size(); ++i) {
                              if (pa.requires_grad)
                                pa.grad[i] += self.grad[i] * pb.values[i];
                              if (pb.requires_grad)
                                pb.grad[i] += self.grad[i] * pa.values[i];
                            }
                          }));
}

Tensor scale(const Tensor& a, double k) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = k * a.values()[i];
  return Tensor(make_node(a.shape(), std::move(out), {a.node()},
                          [k](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (std::size_t i = 0; i < self.size(); ++i)
                              p.grad[i] += k * self.grad[i];
                          }));
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  check_shape(s, {1}, "scale_by");
  const double k = s.values()[0];
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = k * a.values()[i];
  return Tensor(make_node(a.shape(), std::move(out), {a.node(), s.node()},
                          [](Node& self) {
                            Node& p = *self.parents[0];
                            Node& ps = *self.parents[1];
                            const double kv = ps.values[0];
                            for (std::size_t i = 0; i < self.size(); ++i) {
                              if (p.requires_grad)
                                p.grad[i] += kv * self.grad[i];
                              if (ps.requires_grad)
                                ps.grad[0] += p.values[i] * self.grad[i];
                            }
                          }));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0])
    shape_error("matmul", shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (int i = 0; i < m; ++i)
    for (int kk = 0; kk < k; ++kk) {
      const double aik = av[i * k + kk];
      for (int j = 0; j < n; ++j) out[i * n + j] += aik * bv[kk * n + j];
    }
  return Tensor(make_node({m, n}, std::move(out), {a.node(), b.node()},
                          [m, k, n](Node& self) {
                            Node& pa = *self.parents[0];
                            Node& pb = *self.parents[1];
                            const double* g = self.grad.data();
                            if (pa.requires_grad) {
                              // dA = dC B^T
                              for (int i = 0; i < m; ++i)
                                for (int j = 0; j < n; ++j) {
                                  const double gij = g[i * n + j];
                                  for (int kk = 0; kk < k; ++kk)
                                    pa.grad[i * k + kk] +=
                                        gij * pb.values[kk * n + j];
                                }
                            }
                            if (pb.requires_grad) {
                              // dB = A^T dC
                              for (int i = 0; i < m; ++i)
                                for (int kk = 0; kk < k; ++kk) {
                                  const double aik = pa.values[i * k + kk];
                                  for (int j = 0; j < n; ++j)
                                    pb.grad[kk * n + j] += aik * g[i * n + j];
                                }
                            }
                          }));
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2)
    shape_error("transpose", "expected 2-D, got " + shape_str(a.shape()));
  const int m = a.shape()[0], n = a.shape()[1];
  std::vector<double> out(a.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out[j * m + i] = a.values()[i * n + j];
  return Tensor(make_node({n, m}, std::move(out), {a.node()},
                          [m, n](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (int i = 0; i < m; ++i)
                              for (int j = 0; j < n; ++j)
                                p.grad[i * n + j] += self.grad[j * m + i];
                          }));
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  return Tensor(make_node(a.shape(), std::move(out), {a.node()},
                          [](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (std::size_t i = 0; i < self.size(); ++i)
                              if (p.values[i] > 0.0) p.grad[i] += self.grad[i];
                          }));
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.values()[i]);
  return Tensor(make_node(a.shape(), std::move(out), {a.node()},
                          [](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (std::size_t i = 0; i < self.size(); ++i)
                              p.grad[i] += self.grad[i] * self.values[i];
                          }));
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.values()[i]);
  return Tensor(make_node(a.shape(), std::move(out), {a.node()},
                          [](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (std::size_t i = 0; i < self.size(); ++i)
                              p.grad[i] += self.grad[i] / p.values[i];
                          }));
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return Tensor(make_node({1}, {s}, {a.node()}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += self.grad[0];
  }));
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / a.size()); }

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 1 || b.shape().size() != 1)
    shape_error("concat", "expected vectors");
  std::vector<double> out = a.values();
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t na = a.size();
  const int total = static_cast<int>(out.size());
  return Tensor(make_node({total}, std::move(out),
                          {a.node(), b.node()}, [na](Node& self) {
                            Node& pa = *self.parents[0];
                            Node& pb = *self.parents[1];
                            for (std::size_t i = 0; i < na; ++i)
                              if (pa.requires_grad) pa.grad[i] += self.grad[i];
                            for (std::size_t i = na; i < self.size(); ++i)
                              if (pb.requires_grad)
                                pb.grad[i - na] += self.grad[i];
                          }));
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty input");
  const int d = rows[0].shape().back();
  std::vector<double> out;
  std::vector<NodePtr> parents;
  out.reserve(rows.size() * d);
  for (const auto& r : rows) {
    check_shape(r, {d}, "stack_rows");
    out.insert(out.end(), r.values().begin(), r.values().end());
    parents.push_back(r.node());
  }
  const std::size_t dd = static_cast<std::size_t>(d);
  return Tensor(make_node({static_cast<int>(rows.size()), d}, std::move(out),
                          std::move(parents), [dd](Node& self) {
                            for (std::size_t r = 0; r < self.parents.size(); ++r) {
                              Node& p = *self.parents[r];
                              if (!p.requires_grad) continue;
                              for (std::size_t j = 0; j < dd; ++j)
                                p.grad[j] += self.grad[r * dd + j];
                            }
                          }));
}

Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& idx) {
  if (m.shape().size() != 2) shape_error("gather_rows", "expected 2-D");
  const std::size_t d = static_cast<std::size_t>(m.shape()[1]);
  std::vector<double> out(idx.size() * d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= static_cast<std::size_t>(m.shape()[0]))
      throw std::out_of_range("gather_rows: index out of range");
    std::copy_n(m.values().begin() + idx[r] * d, d, out.begin() + r * d);
  }
  return Tensor(make_node({static_cast<int>(idx.size()), m.shape()[1]},
                          std::move(out), {m.node()}, [idx, d](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (std::size_t r = 0; r < idx.size(); ++r)
                              for (std::size_t j = 0; j < d; ++j)
                                p.grad[idx[r] * d + j] += self.grad[r * d + j];
                          }));
}

Tensor segment_sum(const Tensor& rows, const std::vector<std::size_t>& dst,
                   std::size_t n_out) {
  if (rows.shape().size() != 2) shape_error("segment_sum", "expected 2-D");
  if (dst.size() != static_cast<std::size_t>(rows.shape()[0]))
    shape_error("segment_sum", "index count does not match row count");
  const std::size_t d = static_cast<std::size_t>(rows.shape()[1]);
  std::vector<double> out(n_out * d, 0.0);
  for (std::size_t r = 0; r < dst.size(); ++r) {
    if (dst[r] >= n_out) throw std::out_of_range("segment_sum: index out of range");
    for (std::size_t j = 0; j < d; ++j)
      out[dst[r] * d + j] += rows.values()[r * d + j];
  }
  return Tensor(make_node({static_cast<int>(n_out), rows.shape()[1]},
                          std::move(out), {rows.node()}, [dst, d](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (std::size_t r = 0; r < dst.size(); ++r)
                              for (std::size_t j = 0; j < d; ++j)
                                p.grad[r * d + j] += self.grad[dst[r] * d + j];
                          }));
}

Tensor mean_rows(const Tensor& m) {
  if (m.shape().size() != 2) shape_error("mean_rows", "expected 2-D");
  const int n = m.shape()[0], d = m.shape()[1];
  std::vector<double> out(d, 0.0);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < d; ++j) out[j] += m.values()[r * d + j];
  for (int j = 0; j < d; ++j) out[j] /= n;
  return Tensor(make_node({d}, std::move(out), {m.node()},
                          [n, d](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (int r = 0; r < n; ++r)
                              for (int j = 0; j < d; ++j)
                                p.grad[r * d + j] += self.grad[j] / n;
                          }));
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (numel(shape) != a.size())
    shape_error("reshape", shape_str(a.shape()) + " -> " + shape_str(shape));
  return Tensor(make_node(std::move(shape), a.values(), {a.node()},
                          [](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (std::size_t i = 0; i < self.size(); ++i)
                              p.grad[i] += self.grad[i];
                          }));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const auto [rows, in] = as_rows(x.shape(), "linear");
  if (w.shape().size() != 2 || w.shape()[1] != in)
    shape_error("linear", "weight " + shape_str(w.shape()) + " vs input " +
                              shape_str(x.shape()));
  const int out_dim = w.shape()[0];
  check_shape(b, {out_dim}, "linear bias");
  const bool vector_in = x.shape().size() == 1;
  std::vector<double> out(static_cast<std::size_t>(rows) * out_dim);
  const double* xv = x.values().data();
  const double* wv = w.values().data();
  for (int r = 0; r < rows; ++r)
    for (int o = 0; o < out_dim; ++o) {
      double acc = b.values()[o];
      const double* xr = xv + static_cast<std::size_t>(r) * in;
      const double* wr = wv + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += xr[i] * wr[i];
      out[static_cast<std::size_t>(r) * out_dim + o] = acc;
    }
  std::vector<int> out_shape =
      vector_in ? std::vector<int>{out_dim} : std::vector<int>{rows, out_dim};
  const int rr = rows, ii = in, oo = out_dim;
  return Tensor(make_node(
      std::move(out_shape), std::move(out), {x.node(), w.node(), b.node()},
      [rr, ii, oo](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        Node& pb = *self.parents[2];
        const double* g = self.grad.data();
        if (px.requires_grad)
          for (int r = 0; r < rr; ++r)
            for (int o = 0; o < oo; ++o) {
              const double go = g[r * oo + o];
              for (int i = 0; i < ii; ++i)
                px.grad[r * ii + i] += go * pw.values[o * ii + i];
            }
        if (pw.requires_grad)
          for (int r = 0; r < rr; ++r)
            for (int o = 0; o < oo; ++o) {
              const double go = g[r * oo + o];
              for (int i = 0; i < ii; ++i)
                pw.grad[o * ii + i] += go * px.values[r * ii + i];
            }
        if (pb.requires_grad)
          for (int r = 0; r < rr; ++r)
            for (int o = 0; o < oo; ++o) pb.grad[o] += g[r * oo + o];
      }));
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int stride, int padding) {
  if (x.shape().size() != 2 || kernel.shape().size() != 3)
    shape_error("conv1d", "input " + shape_str(x.shape()) + ", kernel " +
                              shape_str(kernel.shape()));
  const int cin = x.shape()[0], len = x.shape()[1];
  const int cout = kernel.shape()[0], kw = kernel.shape()[2];
  if (kernel.shape()[1] != cin)
    shape_error("conv1d", "kernel channels " + shape_str(kernel.shape()) +
                              " vs input " + shape_str(x.shape()));
  check_shape(bias, {cout}, "conv1d bias");
  if (stride < 1 || padding < 0)
    throw std::invalid_argument("conv1d: bad stride/padding");
  const int lout = (len + 2 * padding - kw) / stride + 1;
  if (lout < 1) shape_error("conv1d", "output length would be empty");

  std::vector<double> out(static_cast<std::size_t>(cout) * lout, 0.0);
  const double* xv = x.values().data();
  const double* kv = kernel.values().data();
  for (int co = 0; co < cout; ++co) {
    double* orow = out.data() + static_cast<std::size_t>(co) * lout;
    for (int t = 0; t < lout; ++t) orow[t] = bias.values()[co];
    for (int ci = 0; ci < cin; ++ci) {
      const double* xrow = xv + static_cast<std::size_t>(ci) * len;
      const double* krow = kv + (static_cast<std::size_t>(co) * cin + ci) * kw;
      for (int t = 0; t < lout; ++t) {
        const int start = t * stride - padding;
        double acc = 0.0;
        for (int u = 0; u < kw; ++u) {
          const int p = start + u;
          if (p >= 0 && p < len) acc += krow[u] * xrow[p];
        }
        orow[t] += acc;
      }
    }
  }
  return Tensor(make_node(
      {cout, lout}, std::move(out), {x.node(), kernel.node(), bias.node()},
      [cin, len, cout, kw, lout, stride, padding](Node& self) {
        Node& px = *self.parents[0];
        Node& pk = *self.parents[1];
        Node& pb = *self.parents[2];
        const double* g = self.grad.data();
        for (int co = 0; co < cout; ++co) {
          const double* grow = g + static_cast<std::size_t>(co) * lout;
          if (pb.requires_grad)
            for (int t = 0; t < lout; ++t) pb.grad[co] += grow[t];
          for (int ci = 0; ci < cin; ++ci) {
            const std::size_t koff = (static_cast<std::size_t>(co) * cin + ci) * kw;
            for (int t = 0; t < lout; ++t) {
              const int start = t * stride - padding;
              const double gt = grow[t];
              for (int u = 0; u < kw; ++u) {
                const int p = start + u;
                if (p < 0 || p >= len) continue;
                if (pk.requires_grad)
                  pk.grad[koff + u] += gt * px.values[ci * len + p];
                if (px.requires_grad)
                  px.grad[ci * len + p] += gt * pk.values[koff + u];
              }
            }
          }
        }
      }));
}

Tensor max_pool1d(const Tensor& x, int window, int stride) {
  if (x.shape().size() != 2) shape_error("max_pool1d", "expected [C,L]");
  if (window < 1 || stride < 1)
    throw std::invalid_argument("max_pool1d: bad window/stride");
  const int c = x.shape()[0], len = x.shape()[1];
  const int lout = (len - window) / stride + 1;
  if (lout < 1) shape_error("max_pool1d", "output length would be empty");
  std::vector<double> out(static_cast<std::size_t>(c) * lout);
  auto argmax = std::make_shared<std::vector<int>>(out.size());
  for (int ci = 0; ci < c; ++ci)
    for (int t = 0; t < lout; ++t) {
      int best = t * stride;
      double bestv = x.values()[ci * len + best];
      for (int u = 1; u < window; ++u) {
        const int p = t * stride + u;
        if (x.values()[ci * len + p] > bestv) {
          bestv = x.values()[ci * len + p];
          best = p;
        }
      }
      out[ci * lout + t] = bestv;
      (*argmax)[ci * lout + t] = ci * len + best;
    }
  return Tensor(make_node({c, lout}, std::move(out), {x.node()},
                          [argmax](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (std::size_t i = 0; i < self.size(); ++i)
                              p.grad[(*argmax)[i]] += self.grad[i];
                          }));
}

Tensor global_avg_pool(const Tensor& x) {
  if (x.shape().size() != 2) shape_error("global_avg_pool", "expected [C,L]");
  const int c = x.shape()[0], len = x.shape()[1];
  std::vector<double> out(c, 0.0);
  for (int ci = 0; ci < c; ++ci) {
    for (int t = 0; t < len; ++t) out[ci] += x.values()[ci * len + t];
    out[ci] /= len;
  }
  return Tensor(make_node({c}, std::move(out), {x.node()},
                          [c, len](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (int ci = 0; ci < c; ++ci)
                              for (int t = 0; t < len; ++t)
                                p.grad[ci * len + t] +=
                                    self.grad[ci] / len;
                          }));
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  const auto [rows, d] = as_rows(x.shape(), "layer_norm");
  check_shape(gain, {d}, "layer_norm gain");
  check_shape(bias, {d}, "layer_norm bias");
  std::vector<double> out(x.size());
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (int r = 0; r < rows; ++r) {
    const double* xr = x.values().data() + static_cast<std::size_t>(r) * d;
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += xr[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int j = 0; j < d; ++j) {
      const double xh = (xr[j] - mu) * is;
      (*xhat)[r * d + j] = xh;
      out[r * d + j] = gain.values()[j] * xh + bias.values()[j];
    }
  }
  const int rr = rows, dd = d;
  return Tensor(make_node(
      x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
      [rr, dd, xhat, inv_std](Node& self) {
        Node& px = *self.parents[0];
        Node& pg = *self.parents[1];
        Node& pb = *self.parents[2];
        for (int r = 0; r < rr; ++r) {
          const double* g = self.grad.data() + static_cast<std::size_t>(r) * dd;
          const double* xh = xhat->data() + static_cast<std::size_t>(r) * dd;
          if (pg.requires_grad || pb.requires_grad)
            for (int j = 0; j < dd; ++j) {
              if (pg.requires_grad) pg.grad[j] += g[j] * xh[j];
              if (pb.requires_grad) pb.grad[j] += g[j];
            }
          if (!px.requires_grad) continue;
          double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
          for (int j = 0; j < dd; ++j) {
            const double dxh = g[j] * pg.values[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
          }
          const double is = (*inv_std)[r];
          for (int j = 0; j < dd; ++j) {
            const double dxh = g[j] * pg.values[j];
            px.grad[r * dd + j] +=
                is * (dxh - sum_dxhat / dd - xh[j] * sum_dxhat_xhat / dd);
          }
        }
      }));
}

Tensor softmax(const Tensor& x) {
  const auto [rows, d] = as_rows(x.shape(), "softmax");
  std::vector<double> out(x.size());
  for (int r = 0; r < rows; ++r) {
    const double* xr = x.values().data() + static_cast<std::size_t>(r) * d;
    double mx = xr[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (int j = 0; j < d; ++j) z += std::exp(xr[j] - mx);
    for (int j = 0; j < d; ++j) out[r * d + j] = std::exp(xr[j] - mx) / z;
  }
  const int rr = rows, dd = d;
  return Tensor(make_node(x.shape(), std::move(out), {x.node()},
                          [rr, dd](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (int r = 0; r < rr; ++r) {
                              const double* y = self.values.data() + r * dd;
                              const double* g = self.grad.data() + r * dd;
                              double dot = 0.0;
                              for (int j = 0; j < dd; ++j) dot += y[j] * g[j];
                              for (int j = 0; j < dd; ++j)
                                p.grad[r * dd + j] += y[j] * (g[j] - dot);
                            }
                          }));
}

Tensor log_softmax(const Tensor& x) {
  const auto [rows, d] = as_rows(x.shape(), "log_softmax");
  std::vector<double> out(x.size());
  for (int r = 0; r < rows; ++r) {
    const double* xr = x.values().data() + static_cast<std::size_t>(r) * d;
    double mx = xr[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (int j = 0; j < d; ++j) z += std::exp(xr[j] - mx);
    const double lse = mx + std::log(z);
    for (int j = 0; j < d; ++j) out[r * d + j] = xr[j] - lse;
  }
  const int rr = rows, dd = d;
  return Tensor(make_node(x.shape(), std::move(out), {x.node()},
                          [rr, dd](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (int r = 0; r < rr; ++r) {
                              const double* y = self.values.data() + r * dd;
                              const double* g = self.grad.data() + r * dd;
                              double gsum = 0.0;
                              for (int j = 0; j < dd; ++j) gsum += g[j];
                              for (int j = 0; j < dd; ++j)
                                p.grad[r * dd + j] +=
                                    g[j] - std::exp(y[j]) * gsum;
                            }
                          }));
}

Tensor masked_logsumexp(const Tensor& x, const std::vector<double>& mask) {
  if (x.shape().size() != 2) shape_error("masked_logsumexp", "expected 2-D");
  if (mask.size() != x.size())
    shape_error("masked_logsumexp", "mask size does not match tensor");
  const int rows = x.shape()[0], d = x.shape()[1];
  std::vector<double> out(rows);
  for (int r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < d; ++j)
      if (mask[r * d + j] != 0.0) mx = std::max(mx, x.values()[r * d + j]);
    if (!std::isfinite(mx))
      throw std::invalid_argument("masked_logsumexp: empty row mask");
    double z = 0.0;
    for (int j = 0; j < d; ++j)
      if (mask[r * d + j] != 0.0)
        z += mask[r * d + j] * std::exp(x.values()[r * d + j] - mx);
    out[r] = mx + std::log(z);
  }
  const int rr = rows, dd = d;
  return Tensor(make_node({rows}, std::move(out), {x.node()},
                          [rr, dd, mask](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (int r = 0; r < rr; ++r)
                              for (int j = 0; j < dd; ++j)
                                if (mask[r * dd + j] != 0.0)
                                  p.grad[r * dd + j] +=
                                      self.grad[r] * mask[r * dd + j] *
                                      std::exp(p.values[r * dd + j] -
                                               self.values[r]);
                          }));
}

Tensor take_diag(const Tensor& x) {
  if (x.shape().size() != 2 || x.shape()[0] != x.shape()[1])
    shape_error("take_diag", "expected square matrix, got " + shape_str(x.shape()));
  const int n = x.shape()[0];
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = x.values()[i * n + i];
  return Tensor(make_node({n}, std::move(out), {x.node()},
                          [n](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (int i = 0; i < n; ++i)
                              p.grad[i * n + i] += self.grad[i];
                          }));
}

Tensor row_l2_normalize(const Tensor& x) {
  const auto [rows, d] = as_rows(x.shape(), "row_l2_normalize");
  std::vector<double> out(x.size());
  auto norms = std::make_shared<std::vector<double>>(rows);
  for (int r = 0; r < rows; ++r) {
    double n2 = 0.0;
    for (int j = 0; j < d; ++j) {
      const double v = x.values()[r * d + j];
      n2 += v * v;
    }
    const double n = std::sqrt(n2);
    if (!(n > 0.0))
      throw std::invalid_argument("row_l2_normalize: zero-norm row " +
                                  std::to_string(r));
    (*norms)[r] = n;
    for (int j = 0; j < d; ++j) out[r * d + j] = x.values()[r * d + j] / n;
  }
  const int rr = rows, dd = d;
  return Tensor(make_node(x.shape(), std::move(out), {x.node()},
                          [rr, dd, norms](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (int r = 0; r < rr; ++r) {
                              const double* y = self.values.data() + r * dd;
                              const double* g = self.grad.data() + r * dd;
                              double dot = 0.0;
                              for (int j = 0; j < dd; ++j) dot += y[j] * g[j];
                              const double n = (*norms)[r];
                              for (int j = 0; j < dd; ++j)
                                p.grad[r * dd + j] += (g[j] - y[j] * dot) / n;
                            }
                          }));
}

Tensor cosine_sim(const Tensor& z1, const Tensor& z2) {
  if (z1.shape().size() != 1 || z2.shape() != z1.shape())
    shape_error("cosine_sim", shape_str(z1.shape()) + " vs " +
                                  shape_str(z2.shape()));
  double n1 = 0.0, n2 = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    n1 += z1.values()[i] * z1.values()[i];
    n2 += z2.values()[i] * z2.values()[i];
    dot += z1.values()[i] * z2.values()[i];
  }
  n1 = std::sqrt(n1);
  n2 = std::sqrt(n2);
  if (!(n1 > 0.0) || !(n2 > 0.0))
    throw std::invalid_argument("cosine_sim: zero-norm vector");
  const double y = dot / (n1 * n2);
  return Tensor(make_node({1}, {y}, {z1.node(), z2.node()},
                          [n1, n2, y](Node& self) {
                            Node& a = *self.parents[0];
                            Node& b = *self.parents[1];
                            const double g = self.grad[0];
                            for (std::size_t i = 0; i < a.values.size(); ++i) {
                              if (a.requires_grad)
                                a.grad[i] += g * (b.values[i] / (n1 * n2) -
                                                  y * a.values[i] / (n1 * n1));
                              if (b.requires_grad)
                                b.grad[i] += g * (a.values[i] / (n1 * n2) -
                                                  y * b.values[i] / (n2 * n2));
                            }
                          }));
}

namespace {
Tensor contrastive_from_sims(const Tensor& sims, int n,
                             ContrastiveVariant variant) {
  std::vector<double> mask(static_cast<std::size_t>(n) * n, 1.0);
  if (variant == ContrastiveVariant::kExcludeDiagonal)
    for (int i = 0; i < n; ++i) mask[i * static_cast<std::size_t>(n) + i] = 0.0;

  const Tensor diag = take_diag(sims);
  const Tensor fwd = mean(sub(masked_logsumexp(sims, mask), diag));
  const Tensor bwd = mean(sub(masked_logsumexp(transpose(sims), mask), diag));
  return scale(add(fwd, bwd), 0.5);
}

int contrastive_batch_size(const Tensor& z1, const Tensor& z2) {
  if (z1.shape().size() != 2 || z1.shape() != z2.shape())
    shape_error("contrastive_loss", shape_str(z1.shape()) + " vs " +
                                        shape_str(z2.shape()));
  const int n = z1.shape()[0];
  if (n < 2)
    throw std::invalid_argument("contrastive_loss: batch size must be >= 2");
  return n;
}
}  // namespace

Tensor contrastive_loss(const Tensor& z1, const Tensor& z2, double tau,
                        ContrastiveVariant variant) {
  const int n = contrastive_batch_size(z1, z2);
  if (!(tau > 0.0))
    throw std::invalid_argument("contrastive_loss: tau must be positive");
  const Tensor sims = scale(
      matmul(row_l2_normalize(z1), transpose(row_l2_normalize(z2))), 1.0 / tau);
  return contrastive_from_sims(sims, n, variant);
}

Tensor contrastive_loss(const Tensor& z1, const Tensor& z2,
                        const Tensor& inv_tau, ContrastiveVariant variant) {
  const int n = contrastive_batch_size(z1, z2);
  if (!(inv_tau.values()[0] > 0.0))
    throw std::invalid_argument("contrastive_loss: 1/tau must be positive");
  const Tensor sims = scale_by(
      matmul(row_l2_normalize(z1), transpose(row_l2_normalize(z2))), inv_tau);
  return contrastive_from_sims(sims, n, variant);
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  const Tensor d = sub(pred, target);
  return mean(mul(d, d));
}

Tensor mae_loss(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mae_loss");
  // |.| with subgradient 0 at the kink
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::abs(pred.values()[i] - target.values()[i]);
  Tensor absdiff(make_node(
      pred.shape(), std::move(out), {pred.node(), target.node()},
      [](Node& self) {
        Node& p = *self.parents[0];
        Node& t = *self.parents[1];
        for (std::size_t i = 0; i < self.size(); ++i) {
          const double diff = p.values[i] - t.values[i];
          const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          if (p.requires_grad) p.grad[i] += self.grad[i] * s;
          if (t.requires_grad) t.grad[i] -= self.grad[i] * s;
        }
      }));
  return mean(absdiff);
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& targets) {
  const auto [rows, c] = as_rows(logits.shape(), "cross_entropy_loss");
  if (targets.size() != static_cast<std::size_t>(rows))
    shape_error("cross_entropy_loss", "target count does not match batch");
  for (int t : targets)
    if (t < 0 || t >= c)
      throw std::invalid_argument("cross_entropy_loss: class target out of range");
  Tensor ls = log_softmax(logits);
  if (ls.shape().size() == 1) ls = Tensor(make_node({1, c}, ls.values(),
                                                    {ls.node()}, [](Node& self) {
                                                      Node& p = *self.parents[0];
                                                      if (!p.requires_grad) return;
                                                      for (std::size_t i = 0;
                                                           i < self.size(); ++i)
                                                        p.grad[i] += self.grad[i];
                                                    }));
  // pick log p of the target class per row on the flat layout
  const int cc = c;
  std::vector<double> out(rows);
  for (int r = 0; r < rows; ++r) out[r] = -ls.values()[r * cc + targets[r]];
  Tensor picked(make_node({rows}, std::move(out), {ls.node()},
                          [targets, cc](Node& self) {
                            Node& p = *self.parents[0];
                            if (!p.requires_grad) return;
                            for (std::size_t r = 0; r < targets.size(); ++r)
                              p.grad[r * cc + targets[r]] -= self.grad[r];
                          }));
  return mean(picked);
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    if (!p.requires_grad())
      throw std::invalid_argument("Adam: parameter does not require grad");
    m_.push_back(std::vector<double>(p.size(), 0.0));
    v_.push_back(std::vector<double>(p.size(), 0.0));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    auto& p = params_[pi];
    if (p.grad().size() != p.size())
      throw std::invalid_argument("Adam::step: missing gradient (run backward first)");
    auto& vals = p.mutable_values();
    const auto& g = p.grad();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      m_[pi][i] = config_.beta1 * m_[pi][i] + (1.0 - config_.beta1) * g[i];
      v_[pi][i] = config_.beta2 * v_[pi][i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m_[pi][i] / bc1;
      const double vhat = v_[pi][i] / bc2;
      vals[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

double gradient_check(const std::function<Tensor()>& rebuild,
                      const std::vector<Tensor>& params, double h) {
  Tensor loss = rebuild();
  for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.grad());

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& vals = const_cast<Tensor&>(params[pi]).mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double fp = rebuild().item();
      vals[i] = orig - h;
      const double fm = rebuild().item();
      vals[i] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = analytic[pi][i];
      const double rel =
          std::abs(fd - ad) / std::max(std::abs(fd) + std::abs(ad), 1e-6);
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace matmodal::nn
