#include "spot/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "spot/error.hpp"
#include "spot/rng.hpp"

namespace spot::nn {

namespace {

using NodePtr = std::shared_ptr<Node>;

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

Shape matrix_shape(std::size_t rows, std::size_t cols, bool keep_rank1) {
  return keep_rank1 ? Shape{cols} : Shape{rows, cols};
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& a, Forward f, Derivative df) {
  std::vector<double> out(a.size());
  const auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(a.shape(), std::move(out), {a.node()}, [df](Node& self) {
    Node& x = parent(self, 0);
    auto& gx = x.grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      gx[i] += self.grad[i] * df(x.value[i], self.value[i]);
    }
  });
}

bool broadcasts(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && b.size() == a.cols() && a.shape() != b.shape();
}

double log_sum_exp(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) m = std::max(m, x[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::exp(x[j] - m);
  return m + std::log(s);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(b.rank() == 2, "matmul: right operand must be rank 2, got " + to_string(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  require(b.rows() == k, "matmul: shape mismatch " + to_string(a.shape()) + " x " +
                             to_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_result(matrix_shape(m, n, a.rank() == 1), std::move(out), {a.node(), b.node()},
                     [m, k, n](Node& self) {
                       Node& A = parent(self, 0);
                       Node& B = parent(self, 1);
                       const auto& g = self.grad;
                       if (A.requires_grad) {
                         auto& ga = A.grad_buffer();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             double s = 0.0;
                             for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * B.value[p * n + j];
                             ga[i * k + p] += s;
                           }
                       }
                       if (B.requires_grad) {
                         auto& gb = B.grad_buffer();
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t p = 0; p < k; ++p) {
                             const double aip = A.value[i * k + p];
                             if (aip == 0.0) continue;
                             for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                           }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_result({n, m}, std::move(out), {a.node()}, [m, n](Node& self) {
    auto& ga = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j * m + i];
  });
}

namespace {

Tensor add_signed(const Tensor& a, const Tensor& b, double sign, const char* name) {
  const bool bc = broadcasts(a, b);
  require(bc || a.shape() == b.shape(), std::string(name) + ": shape mismatch " +
                                            to_string(a.shape()) + " vs " + to_string(b.shape()));
  const std::size_t n = b.size();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * bv[bc ? i % n : i];
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [sign, bc, n](Node& self) {
    Node& A = parent(self, 0);
    Node& B = parent(self, 1);
    if (A.requires_grad) {
      auto& ga = A.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
    }
    if (B.requires_grad) {
      auto& gb = B.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[bc ? i % n : i] += sign * self.grad[i];
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_signed(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_signed(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(),
          "mul: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_result(a.shape(), std::move(out), {a.node(), b.node()}, [](Node& self) {
    Node& A = parent(self, 0);
    Node& B = parent(self, 1);
    if (A.requires_grad) {
      auto& ga = A.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * B.value[i];
    }
    if (B.requires_grad) {
      auto& gb = B.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * A.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor one_minus(const Tensor& a) {
  return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a,
      [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_result({1}, {s}, {a.node()}, [](Node& self) {
    auto& ga = parent(self, 0).grad_buffer();
    for (auto& g : ga) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor row_norms(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m, 0.0);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += av[i * n + j] * av[i * n + j];
    out[i] = std::sqrt(s);
  }
  return make_result({m}, std::move(out), {a.node()}, [n](Node& self) {
    Node& A = parent(self, 0);
    auto& ga = A.grad_buffer();
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const double norm = self.value[i];
      if (norm == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[i] * A.value[i * n + j] / norm;
    }
  });
}

Tensor mean_rows(const Tensor& a, std::span<const std::uint8_t> mask) {
  const std::size_t m = a.rows(), n = a.cols();
  require(mask.empty() || mask.size() == m, "mean_rows: mask length mismatch");
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  if (keep.empty()) keep.assign(m, 1);
  const auto count = static_cast<double>(std::count_if(keep.begin(), keep.end(), [](auto k) { return k != 0; }));
  require(count > 0, "mean_rows: every row is masked");
  std::vector<double> out(n, 0.0);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i)
    if (keep[i])
      for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j] / count;
  return make_result({n}, std::move(out), {a.node()}, [keep, n, count](Node& self) {
    auto& ga = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < keep.size(); ++i)
      if (keep[i])
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += self.grad[j] / count;
  });
}

Tensor softmax_rows(const Tensor& a, std::span<const std::uint8_t> allowed) {
  const std::size_t m = a.rows(), n = a.cols();
  require(allowed.empty() || allowed.size() == m * n, "softmax_rows: mask size mismatch");
  std::vector<double> out(m * n, 0.0);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (allowed.empty() || allowed[i * n + j]) mx = std::max(mx, av[i * n + j]);
    if (std::isinf(mx)) continue;  // nothing allowed in this row
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!allowed.empty() && !allowed[i * n + j]) continue;
      out[i * n + j] = std::exp(av[i * n + j] - mx);
      s += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= s;
  }
  return make_result(a.shape(), std::move(out), {a.node()}, [m, n](Node& self) {
    auto& ga = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.value[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        ga[i * n + j] += self.value[i * n + j] * (self.grad[i * n + j] - dot);
    }
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    const double lse = log_sum_exp(&av[i * n], n);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] - lse;
  }
  return make_result(a.shape(), std::move(out), {a.node()}, [m, n](Node& self) {
    auto& ga = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < n; ++j) gs += self.grad[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        ga[i * n + j] += self.grad[i * n + j] - std::exp(self.value[i * n + j]) * gs;
    }
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  const std::size_t m = logits.rows(), n = logits.cols();
  require(labels.size() == m, "cross_entropy: label count does not match logits rows");
  std::vector<double> probs(m * n);
  double loss = 0.0;
  const auto x = logits.values();
  for (std::size_t i = 0; i < m; ++i) {
    require(labels[i] < n, "cross_entropy: label out of range");
    const double lse = log_sum_exp(&x[i * n], n);
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] = std::exp(x[i * n + j] - lse);
    loss += lse - x[i * n + labels[i]];
  }
  loss /= static_cast<double>(m);
  std::vector<std::size_t> y(labels.begin(), labels.end());
  return make_result({1}, {loss}, {logits.node()},
                     [probs = std::move(probs), y = std::move(y), m, n](Node& self) {
                       auto& g = parent(self, 0).grad_buffer();
                       const double s = self.grad[0] / static_cast<double>(m);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < n; ++j)
                           g[i * n + j] += s * (probs[i * n + j] - (j == y[i] ? 1.0 : 0.0));
                     });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t m = a.rows(), n = a.cols();
  require(gain.size() == n && bias.size() == n, "layer_norm: gain/bias width mismatch");
  std::vector<double> out(m * n), xhat(m * n), inv(m);
  const auto av = a.values();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += av[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (av[i * n + j] - mu) * (av[i * n + j] - mu);
    var /= static_cast<double>(n);
    inv[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (av[i * n + j] - mu) * inv[i];
      out[i * n + j] = xhat[i * n + j] * gain.at(j) + bias.at(j);
    }
  }
  return make_result(a.shape(), std::move(out), {a.node(), gain.node(), bias.node()},
                     [xhat = std::move(xhat), inv = std::move(inv), m, n](Node& self) {
                       Node& A = parent(self, 0);
                       Node& G = parent(self, 1);
                       Node& B = parent(self, 2);
                       const auto& g = self.grad;
                       if (G.requires_grad) {
                         auto& gg = G.grad_buffer();
                         for (std::size_t i = 0; i < m * n; ++i) gg[i % n] += g[i] * xhat[i];
                       }
                       if (B.requires_grad) {
                         auto& gb = B.grad_buffer();
                         for (std::size_t i = 0; i < m * n; ++i) gb[i % n] += g[i];
                       }
                       if (A.requires_grad) {
                         auto& ga = A.grad_buffer();
                         const double dn = static_cast<double>(n);
                         for (std::size_t i = 0; i < m; ++i) {
                           double s1 = 0.0, s2 = 0.0;
                           for (std::size_t j = 0; j < n; ++j) {
                             const double dx = g[i * n + j] * G.value[j];
                             s1 += dx;
                             s2 += dx * xhat[i * n + j];
                           }
                           for (std::size_t j = 0; j < n; ++j) {
                             const double dx = g[i * n + j] * G.value[j];
                             ga[i * n + j] += inv[i] / dn * (dn * dx - s1 - xhat[i * n + j] * s2);
                           }
                         }
                       }
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require(element_count(shape) == a.size(),
          "reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a.node()}, [](Node& self) {
    auto& ga = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor row(const Tensor& a, std::size_t index) {
  require(index < a.rows(), "row: index out of range");
  const std::size_t n = a.cols();
  std::vector<double> out(a.values().begin() + index * n, a.values().begin() + (index + 1) * n);
  return make_result({n}, std::move(out), {a.node()}, [index, n](Node& self) {
    auto& ga = parent(self, 0).grad_buffer();
    for (std::size_t j = 0; j < n; ++j) ga[index * n + j] += self.grad[j];
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
  require(!indices.empty(), "gather_rows: no indices");
  const std::size_t n = a.cols();
  std::vector<double> out;
  out.reserve(indices.size() * n);
  for (auto r : indices) {
    require(r < a.rows(), "gather_rows: index out of range");
    out.insert(out.end(), a.values().begin() + r * n, a.values().begin() + (r + 1) * n);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result({idx.size(), n}, std::move(out), {a.node()}, [idx, n](Node& self) {
    auto& ga = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < n; ++j) ga[idx[i] * n + j] += self.grad[i * n + j];
  });
}

Tensor gather(const Tensor& a, std::span<const std::size_t> indices) {
  require(a.rank() == 1, "gather: expects a rank-1 tensor");
  require(!indices.empty(), "gather: no indices");
  std::vector<double> out;
  for (auto i : indices) {
    require(i < a.size(), "gather: index out of range");
    out.push_back(a.at(i));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result({idx.size()}, std::move(out), {a.node()}, [idx](Node& self) {
    auto& ga = parent(self, 0).grad_buffer();
    for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  const std::size_t m = a.rows(), n = a.cols();
  require(count > 0 && start + count <= n, "slice_cols: range out of bounds");
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = a.at(i * n + start + j);
  return make_result(matrix_shape(m, count, a.rank() == 1), std::move(out), {a.node()},
                     [m, n, start, count](Node& self) {
                       auto& ga = parent(self, 0).grad_buffer();
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < count; ++j)
                           ga[i * n + start + j] += self.grad[i * count + j];
                     });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].rows();
  bool all_rank1 = true;
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) {
    require(p.rows() == m, "concat_cols: row count mismatch");
    all_rank1 = all_rank1 && p.rank() == 1;
    widths.push_back(p.cols());
    total += p.cols();
    nodes.push_back(p.node());
  }
  std::vector<double> out(m * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j)
        out[i * total + offset + j] = parts[k].at(i * widths[k] + j);
    offset += widths[k];
  }
  return make_result(matrix_shape(m, total, all_rank1), std::move(out), std::move(nodes),
                     [widths, m, total](Node& self) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         Node& p = parent(self, k);
                         if (p.requires_grad) {
                           auto& gp = p.grad_buffer();
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < widths[k]; ++j)
                               gp[i * widths[k] + j] += self.grad[i * total + off + j];
                         }
                         off += widths[k];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows: nothing to concatenate");
  const std::size_t n = parts[0].cols();
  std::vector<double> out;
  std::vector<std::size_t> sizes;
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) {
    require(p.cols() == n, "concat_rows: column count mismatch");
    out.insert(out.end(), p.values().begin(), p.values().end());
    sizes.push_back(p.size());
    nodes.push_back(p.node());
  }
  const std::size_t m = out.size() / n;
  return make_result({m, n}, std::move(out), std::move(nodes), [sizes](Node& self) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      Node& p = parent(self, k);
      if (p.requires_grad) {
        auto& gp = p.grad_buffer();
        for (std::size_t i = 0; i < sizes[k]; ++i) gp[i] += self.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return a;
  require(rate < 1.0, "dropout: rate must be below 1");
  std::vector<double> keep(a.size());
  for (auto& k : keep) k = rng.uniform() >= rate ? 1.0 / (1.0 - rate) : 0.0;
  return mul(a, Tensor::from(a.shape(), std::move(keep)));
}

}  // namespace spot::nn
