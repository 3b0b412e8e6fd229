// Copyright 2026 The FedSplit Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedsplit/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "fedsplit/error.hpp"

namespace fedsplit {
namespace {

constexpr double kMaskedScore = -1e9;

Graph& graph_of(Var a) {
  if (a.graph == nullptr) fail(ErrorKind::Dimension, "op on a detached variable");
  return *a.graph;
}

Graph& same_graph(Var a, Var b) {
  Graph& g = graph_of(a);
  if (b.graph != &g) fail(ErrorKind::Dimension, "op mixes variables from different graphs");
  return g;
}

// grad(id) += src, then rounded to the active precision.
void accumulate(Graph& g, std::size_t id, const double* src) {
  Tensor& dst = g.grad_mut(id);
  auto d = dst.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
  dst.round_to_precision();
}

void accumulate(Graph& g, std::size_t id, const Tensor& src) { accumulate(g, id, src.data().data()); }

}  // namespace

const Tensor& Var::value() const {
  if (graph == nullptr) fail(ErrorKind::Dimension, "value() of a detached variable");
  return graph->value(id);
}

Var Graph::constant(Tensor value) {
  value.round_to_precision();
  nodes_.push_back(Node{std::move(value), Tensor(), {}, nullptr, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Graph::parameter(const std::string& name, Tensor value) {
  nodes_.push_back(Node{std::move(value), Tensor(), {}, nullptr, name, true});
  param_ids_.push_back(nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

std::map<std::string, Var> Graph::parameters(const ParameterSet& params) {
  std::map<std::string, Var> vars;
  for (const auto& [name, t] : params) vars.emplace(name, parameter(name, t));
  return vars;
}

Var Graph::push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  for (std::size_t in : inputs) needs = needs || nodes_[in].needs_grad;
  value.round_to_precision();
  nodes_.push_back(Node{std::move(value), Tensor(), std::move(inputs), needs ? std::move(backward) : nullptr,
                        {}, needs});
  return Var{this, nodes_.size() - 1};
}

Tensor& Graph::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.numel() == 0) n.grad = Tensor(n.value.shape());
  return n.grad;
}

ParameterSet Graph::backward(Var loss) {
  if (loss.graph != this) fail(ErrorKind::Dimension, "loss belongs to another graph");
  if (nodes_[loss.id].value.numel() != 1) {
    fail(ErrorKind::Dimension, "backward needs a scalar loss, got " + shape_str(nodes_[loss.id].value.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_mut(loss.id).fill(1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.numel() == 0) continue;
    n.backward(*this, id);
  }
  ParameterSet grads;
  for (std::size_t id : param_ids_) {
    Node& n = nodes_[id];
    grads.insert_or_assign(n.param_name, n.grad.numel() ? n.grad : Tensor(n.value.shape()));
  }
  return grads;
}

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  Tensor out = matmul(a.value(), b.value());
  return g.push(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
    const Tensor& A = g.value(ia);
    const Tensor& B = g.value(ib);
    const Tensor& dC = g.grad(self);
    const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
    const double* pa = A.data().data();
    const double* pb = B.data().data();
    const double* pd = dC.data().data();
    if (g.needs_grad(ia)) {
      // dA = dC * B^T
      std::vector<double> bt(n * k);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = pb[p * n + j];
      std::vector<double> dA(m * k, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double* drow = pd + i * n;
        double* out = dA.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const double dv = drow[j];
          const double* trow = bt.data() + j * k;
          for (std::size_t p = 0; p < k; ++p) out[p] += dv * trow[p];
        }
      }
      accumulate(g, ia, dA.data());
    }
    if (g.needs_grad(ib)) {
      // dB = A^T * dC
      std::vector<double> dB(k * n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        const double* drow = pd + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa[i * k + p];
          double* out = dB.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) out[j] += av * drow[j];
        }
      }
      accumulate(g, ib, dB.data());
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) fail(ErrorKind::Dimension, "add of " + shape_str(A.shape()) + " and " + shape_str(B.shape()));
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += B[i];
  return g.push(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
    const Tensor& dC = g.grad(self);
    if (g.needs_grad(ia)) accumulate(g, ia, dC);
    if (g.needs_grad(ib)) accumulate(g, ib, dC);
  });
}

Var add_tiled(Var x, Var y) {
  Graph& g = same_graph(x, y);
  const Tensor& X = x.value();
  const Tensor& Y = y.value();
  if (Y.cols() != X.cols() || X.numel() % Y.numel() != 0) {
    fail(ErrorKind::Dimension, "cannot tile " + shape_str(Y.shape()) + " over " + shape_str(X.shape()));
  }
  const std::size_t ny = Y.numel();
  Tensor out = X;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += Y[i % ny];
  return g.push(std::move(out), {x.id, y.id}, [ix = x.id, iy = y.id, ny](Graph& g, std::size_t self) {
    const Tensor& dC = g.grad(self);
    if (g.needs_grad(iy)) {
      std::vector<double> dy(ny, 0.0);
      for (std::size_t i = 0; i < dC.numel(); ++i) dy[i % ny] += dC[i];
      accumulate(g, iy, dy.data());
    }
    if (g.needs_grad(ix)) accumulate(g, ix, g.grad(self));
  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) fail(ErrorKind::Dimension, "mul of " + shape_str(A.shape()) + " and " + shape_str(B.shape()));
  Tensor out = A;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= B[i];
  return g.push(std::move(out), {a.id, b.id}, [ia = a.id, ib = b.id](Graph& g, std::size_t self) {
    const Tensor& dC = g.grad(self);
    const std::size_t n = dC.numel();
    if (g.needs_grad(ia)) {
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = dC[i] * g.value(ib)[i];
      accumulate(g, ia, d.data());
    }
    if (g.needs_grad(ib)) {
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = dC[i] * g.value(ia)[i];
      accumulate(g, ib, d.data());
    }
  });
}

Var scale(Var x, double factor) {
  Graph& g = graph_of(x);
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return g.push(std::move(out), {x.id}, [ix = x.id, factor](Graph& g, std::size_t self) {
    const Tensor& dC = g.grad(self);
    std::vector<double> d(dC.numel());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = factor * dC[i];
    accumulate(g, ix, d.data());
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x);
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return g.push(Tensor::scalar(s), {x.id}, [ix = x.id](Graph& g, std::size_t self) {
    const double d = g.grad(self)[0];
    std::vector<double> dx(g.value(ix).numel(), d);
    accumulate(g, ix, dx.data());
  });
}

double gelu_scalar(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Var gelu(Var x) {
  Graph& g = graph_of(x);
  Tensor out = x.value();
  for (double& v : out.data()) v = gelu_scalar(v);
  return g.push(std::move(out), {x.id}, [ix = x.id](Graph& g, std::size_t self) {
    const Tensor& X = g.value(ix);
    const Tensor& dC = g.grad(self);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
    std::vector<double> d(X.numel());
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double xv = X[i];
      const double cdf = 0.5 * (1.0 + std::erf(xv * inv_sqrt2));
      const double pdf = inv_sqrt2pi * std::exp(-0.5 * xv * xv);
      d[i] = dC[i] * (cdf + xv * pdf);
    }
    accumulate(g, ix, d.data());
  });
}

namespace {

struct LayerNormCache {
  std::vector<double> xhat;
  std::vector<double> rstd;
};

void check_layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.cols();
  if (d == 0) fail(ErrorKind::Dimension, "layer_norm over an empty last dimension");
  if (gamma.numel() != d || beta.numel() != d) {
    fail(ErrorKind::Dimension, "layer_norm of " + shape_str(x.shape()) + " with gamma " + shape_str(gamma.shape()) +
                                   " and beta " + shape_str(beta.shape()));
  }
  if (!(eps >= 0.0)) fail(ErrorKind::Config, "layer_norm eps must be >= 0");
}

Tensor layer_norm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                          LayerNormCache* cache) {
  check_layer_norm(x, gamma, beta, eps);
  const std::size_t d = x.cols();
  const std::size_t rows = x.rows();
  Tensor out(x.shape());
  if (cache) {
    cache->xhat.resize(x.numel());
    cache->rstd.resize(rows);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + eps);
    double* yr = out.data().data() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (xr[j] - mean) * rstd;
      if (cache) cache->xhat[r * d + j] = xh;
      yr[j] = xh * gamma[j] + beta[j];
    }
    if (cache) cache->rstd[r] = rstd;
  }
  return out;
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  Tensor out = layer_norm_forward(x, gamma, beta, eps, nullptr);
  out.round_to_precision();
  return out;
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Graph& g = same_graph(x, gamma);
  same_graph(x, beta);
  auto cache = std::make_shared<LayerNormCache>();
  Tensor out = layer_norm_forward(x.value(), gamma.value(), beta.value(), eps, cache.get());
  return g.push(std::move(out), {x.id, gamma.id, beta.id},
                [ix = x.id, ig = gamma.id, ib = beta.id, cache](Graph& g, std::size_t self) {
                  const Tensor& dY = g.grad(self);
                  const Tensor& G = g.value(ig);
                  const std::size_t d = dY.cols();
                  const std::size_t rows = dY.rows();
                  const auto& xhat = cache->xhat;
                  if (g.needs_grad(ig) || g.needs_grad(ib)) {
                    std::vector<double> dg(d, 0.0), db(d, 0.0);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t j = 0; j < d; ++j) {
                        dg[j] += dY[r * d + j] * xhat[r * d + j];
                        db[j] += dY[r * d + j];
                      }
                    }
                    if (g.needs_grad(ig)) accumulate(g, ig, dg.data());
                    if (g.needs_grad(ib)) accumulate(g, ib, db.data());
                  }
                  if (g.needs_grad(ix)) {
                    std::vector<double> dx(rows * d);
                    std::vector<double> dxh(d);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                      for (std::size_t j = 0; j < d; ++j) {
                        dxh[j] = dY[r * d + j] * G[j];
                        mean_dxh += dxh[j];
                        mean_dxh_xh += dxh[j] * xhat[r * d + j];
                      }
                      mean_dxh /= static_cast<double>(d);
                      mean_dxh_xh /= static_cast<double>(d);
                      for (std::size_t j = 0; j < d; ++j) {
                        dx[r * d + j] = cache->rstd[r] * (dxh[j] - mean_dxh - xhat[r * d + j] * mean_dxh_xh);
                      }
                    }
                    accumulate(g, ix, dx.data());
                  }
                });
}

Var embedding(Var table, std::span<const std::int32_t> ids) {
  Graph& g = graph_of(table);
  const Tensor& T = table.value();
  if (T.rank() != 2) fail(ErrorKind::Dimension, "embedding table must be 2-D, got " + shape_str(T.shape()));
  if (ids.empty()) fail(ErrorKind::Dimension, "embedding of an empty id list");
  const std::size_t vocab = T.dim(0), d = T.dim(1);
  Tensor out({ids.size(), d});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const std::int32_t id = ids[r];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      fail(ErrorKind::Index, "token id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(vocab));
    }
    std::copy_n(T.data().data() + static_cast<std::size_t>(id) * d, d, out.data().data() + r * d);
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return g.push(std::move(out), {table.id}, [it = table.id, saved = std::move(saved), d](Graph& g, std::size_t self) {
    const Tensor& dY = g.grad(self);
    Tensor dT(g.value(it).shape());
    for (std::size_t r = 0; r < saved.size(); ++r) {
      double* row = dT.data().data() + static_cast<std::size_t>(saved[r]) * d;
      for (std::size_t j = 0; j < d; ++j) row[j] += dY[r * d + j];
    }
    accumulate(g, it, dT);
  });
}

Var attention(Var q, Var k, Var v, std::span<const std::uint8_t> key_mask, std::size_t batch, std::size_t heads) {
  Graph& g = same_graph(q, k);
  same_graph(q, v);
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  if (Q.rank() != 2 || Q.shape() != K.shape() || Q.shape() != V.shape()) {
    fail(ErrorKind::Dimension, "attention q/k/v shapes " + shape_str(Q.shape()) + ", " + shape_str(K.shape()) + ", " +
                                   shape_str(V.shape()));
  }
  const std::size_t rows = Q.dim(0), d = Q.dim(1);
  if (batch == 0 || rows % batch != 0) fail(ErrorKind::Dimension, "attention rows not divisible by batch");
  if (heads == 0 || d % heads != 0) fail(ErrorKind::Dimension, "attention width not divisible by heads");
  if (key_mask.size() != rows) fail(ErrorKind::Dimension, "attention mask length does not match rows");
  const std::size_t seq = rows / batch, dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  // probs[((b*heads + h)*seq + i)*seq + j]
  auto probs = std::make_shared<std::vector<double>>(batch * heads * seq * seq);
  Tensor out({rows, d});
  const double* pq = Q.data().data();
  const double* pk = K.data().data();
  const double* pv = V.data().data();
  double* po = out.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < seq; ++i) {
        double* p = probs->data() + ((b * heads + h) * seq + i) * seq;
        const double* qi = pq + (b * seq + i) * d + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < seq; ++j) {
          const double* kj = pk + (b * seq + j) * d + h * dh;
          double s = 0.0;
          for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
          s *= sc;
          if (!key_mask[b * seq + j]) s += kMaskedScore;
          p[j] = s;
          mx = std::max(mx, s);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < seq; ++j) {
          p[j] = std::exp(p[j] - mx);
          z += p[j];
        }
        for (std::size_t j = 0; j < seq; ++j) p[j] /= z;
        double* oi = po + (b * seq + i) * d + h * dh;
        for (std::size_t j = 0; j < seq; ++j) {
          const double* vj = pv + (b * seq + j) * d + h * dh;
          for (std::size_t c = 0; c < dh; ++c) oi[c] += p[j] * vj[c];
        }
      }
    }
  }
  return g.push(std::move(out), {q.id, k.id, v.id},
                [iq = q.id, ik = k.id, iv = v.id, probs, batch, heads, seq, d, dh, sc](Graph& g, std::size_t self) {
                  const double* pq = g.value(iq).data().data();
                  const double* pk = g.value(ik).data().data();
                  const double* pv = g.value(iv).data().data();
                  const double* pdo = g.grad(self).data().data();
                  std::vector<double> dq(batch * seq * d, 0.0), dk(dq.size(), 0.0), dv(dq.size(), 0.0);
                  std::vector<double> dp(seq);
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t h = 0; h < heads; ++h) {
                      for (std::size_t i = 0; i < seq; ++i) {
                        const double* p = probs->data() + ((b * heads + h) * seq + i) * seq;
                        const double* doi = pdo + (b * seq + i) * d + h * dh;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < seq; ++j) {
                          const double* vj = pv + (b * seq + j) * d + h * dh;
                          double* dvj = dv.data() + (b * seq + j) * d + h * dh;
                          double s = 0.0;
                          for (std::size_t c = 0; c < dh; ++c) {
                            s += doi[c] * vj[c];
                            dvj[c] += p[j] * doi[c];
                          }
                          dp[j] = s;
                          dot += p[j] * s;
                        }
                        const double* qi = pq + (b * seq + i) * d + h * dh;
                        double* dqi = dq.data() + (b * seq + i) * d + h * dh;
                        for (std::size_t j = 0; j < seq; ++j) {
                          const double ds = p[j] * (dp[j] - dot) * sc;
                          if (ds == 0.0) continue;
                          const double* kj = pk + (b * seq + j) * d + h * dh;
                          double* dkj = dk.data() + (b * seq + j) * d + h * dh;
                          for (std::size_t c = 0; c < dh; ++c) {
                            dqi[c] += ds * kj[c];
                            dkj[c] += ds * qi[c];
                          }
                        }
                      }
                    }
                  }
                  if (g.needs_grad(iq)) accumulate(g, iq, dq.data());
                  if (g.needs_grad(ik)) accumulate(g, ik, dk.data());
                  if (g.needs_grad(iv)) accumulate(g, iv, dv.data());
                });
}

Var mean_pool(Var x, std::span<const std::uint8_t> mask, std::size_t batch) {
  Graph& g = graph_of(x);
  const Tensor& X = x.value();
  if (X.rank() != 2) fail(ErrorKind::Dimension, "mean_pool expects a 2-D input, got " + shape_str(X.shape()));
  const std::size_t rows = X.dim(0), d = X.dim(1);
  if (batch == 0 || rows % batch != 0) fail(ErrorKind::Dimension, "mean_pool rows not divisible by batch");
  if (mask.size() != rows) fail(ErrorKind::Dimension, "mean_pool mask length does not match rows");
  const std::size_t seq = rows / batch;
  std::vector<double> weight(rows, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t live = 0;
    for (std::size_t i = 0; i < seq; ++i) live += mask[b * seq + i] ? 1 : 0;
    for (std::size_t i = 0; i < seq; ++i) {
      if (live == 0) {
        weight[b * seq + i] = 1.0 / static_cast<double>(seq);
      } else if (mask[b * seq + i]) {
        weight[b * seq + i] = 1.0 / static_cast<double>(live);
      }
    }
  }
  Tensor out({batch, d});
  for (std::size_t r = 0; r < rows; ++r) {
    if (weight[r] == 0.0) continue;
    double* o = out.data().data() + (r / seq) * d;
    const double* xr = X.data().data() + r * d;
    for (std::size_t j = 0; j < d; ++j) o[j] += weight[r] * xr[j];
  }
  return g.push(std::move(out), {x.id}, [ix = x.id, weight = std::move(weight), seq, d](Graph& g, std::size_t self) {
    const Tensor& dY = g.grad(self);
    std::vector<double> dx(weight.size() * d, 0.0);
    for (std::size_t r = 0; r < weight.size(); ++r) {
      if (weight[r] == 0.0) continue;
      const double* dyr = dY.data().data() + (r / seq) * d;
      for (std::size_t j = 0; j < d; ++j) dx[r * d + j] = weight[r] * dyr[j];
    }
    accumulate(g, ix, dx.data());
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  Graph& g = graph_of(logits);
  const Tensor& L = logits.value();
  if (L.rank() != 2) fail(ErrorKind::Dimension, "logits must be [B x C], got " + shape_str(L.shape()));
  const std::size_t B = L.dim(0), C = L.dim(1);
  if (labels.size() != B) fail(ErrorKind::Dimension, "label count does not match batch");
  auto probs = std::make_shared<std::vector<double>>(B * C);
  double loss = 0.0;
  for (std::size_t r = 0; r < B; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= C) {
      fail(ErrorKind::Index, "label " + std::to_string(labels[r]) + " outside [0, " + std::to_string(C) + ")");
    }
    const double* lr = L.data().data() + r * C;
    const double mx = *std::max_element(lr, lr + C);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(lr[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < C; ++c) (*probs)[r * C + c] = std::exp(lr[c] - lse);
    loss += lse - lr[labels[r]];
  }
  loss /= static_cast<double>(B);
  std::vector<int> saved(labels.begin(), labels.end());
  return g.push(Tensor::scalar(loss), {logits.id},
                [il = logits.id, probs, saved = std::move(saved), B, C](Graph& g, std::size_t self) {
                  const double d = g.grad(self)[0] / static_cast<double>(B);
                  std::vector<double> dl(B * C);
                  for (std::size_t r = 0; r < B; ++r) {
                    for (std::size_t c = 0; c < C; ++c) {
                      const double onehot = static_cast<int>(c) == saved[r] ? 1.0 : 0.0;
                      dl[r * C + c] = d * ((*probs)[r * C + c] - onehot);
                    }
                  }
                  accumulate(g, il, dl.data());
                });
}

Var mse_loss(Var pred, std::span<const double> targets) {
  Graph& g = graph_of(pred);
  const Tensor& P = pred.value();
  if (P.numel() != targets.size()) fail(ErrorKind::Dimension, "prediction count does not match targets");
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) loss += (P[i] - targets[i]) * (P[i] - targets[i]);
  const std::size_t n = targets.size();
  loss /= static_cast<double>(n);
  std::vector<double> saved(targets.begin(), targets.end());
  return g.push(Tensor::scalar(loss), {pred.id}, [ip = pred.id, saved = std::move(saved)](Graph& g, std::size_t self) {
    const double d = g.grad(self)[0] * 2.0 / static_cast<double>(saved.size());
    const Tensor& P = g.value(ip);
    std::vector<double> dp(saved.size());
    for (std::size_t i = 0; i < saved.size(); ++i) dp[i] = d * (P[i] - saved[i]);
    accumulate(g, ip, dp.data());
  });
}

}  // namespace fedsplit
