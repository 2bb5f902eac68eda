#include "tier/tape.hpp"

#include <cmath>
#include <utility>

#include "tier/kernels.hpp"

namespace tier {

namespace {

// Shape of a node treated as a row matrix: {d} and {1,d} both count as 1 x d.
std::pair<std::size_t, std::size_t> as_rows(const Tensor& t, const char* op) {
  if (t.ndim() == 1) return {1, t.shape()[0]};
  if (t.ndim() == 2) return {t.shape()[0], t.shape()[1]};
  throw ShapeError(std::string(op) + ": expected a 1-d or 2-d tensor");
}

void require_scalar(const Tensor& t, const char* op) {
  if (t.numel() != 1) throw ContractError(std::string(op) + ": expected a scalar node");
}

}  // namespace

Tape::NodeId Tape::record(Tensor value, bool requires_grad, const char* op,
                          std::function<void(Tape&)> backward_fn) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.op = op;
  node.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(node));
  NodeId id = static_cast<NodeId>(nodes_.size() - 1);
  check_finite(id);
  return id;
}

void Tape::check_finite(NodeId id) const {
  if (!nodes_[id].value.all_finite()) {
    throw NumericError("non-finite values in output of '" + std::string(nodes_[id].op) +
                       "' (node " + std::to_string(id) + ")");
  }
}

const Tensor& Tape::checked(NodeId id, const char* op) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw ContractError(std::string(op) + ": node id not on this tape");
  }
  return nodes_[id].value;
}

Tensor& Tape::grad_buffer(NodeId id) { return nodes_[id].grad; }

const Tensor& Tape::value(NodeId id) const { return checked(id, "value"); }

const Tensor& Tape::grad(NodeId id) const {
  checked(id, "grad");
  if (!nodes_[id].grad_ready) {
    throw ContractError("grad: no gradient for node " + std::to_string(id) +
                        " (backward not run, or node does not require grad)");
  }
  return nodes_[id].grad;
}

bool Tape::has_grad(NodeId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < nodes_.size() && nodes_[id].grad_ready;
}

Tape::NodeId Tape::leaf(Tensor value, bool requires_grad, const char* name) {
  return record(std::move(value), requires_grad, name, nullptr);
}

// ==================== elementwise / broadcast ====================

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& va = checked(a, "add");
  const Tensor& vb = checked(b, "add");
  if (!va.same_shape(vb)) throw ShapeError("add: shape mismatch");
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = va[i] + vb[i];
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  NodeId id = record(std::move(out), rg, "add", nullptr);
  nodes_[id].backward_fn = [a, b, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    if (t.nodes_[a].requires_grad) {
      Tensor& ga = t.grad_buffer(a);
      for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    }
    if (t.nodes_[b].requires_grad) {
      Tensor& gb = t.grad_buffer(b);
      for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
    }
  };
  return id;
}

Tape::NodeId Tape::add_rowvec(NodeId m, NodeId v) {
  const Tensor& vm = checked(m, "add_rowvec");
  const Tensor& vv = checked(v, "add_rowvec");
  auto [r, c] = as_rows(vm, "add_rowvec");
  if (vv.numel() != c) throw ShapeError("add_rowvec: vector length does not match columns");
  Tensor out(vm.shape());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = vm[i * c + j] + vv[j];
  }
  bool rg = nodes_[m].requires_grad || nodes_[v].requires_grad;
  NodeId id = record(std::move(out), rg, "add_rowvec", nullptr);
  nodes_[id].backward_fn = [m, v, id, r = r, c = c](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    if (t.nodes_[m].requires_grad) {
      Tensor& gm = t.grad_buffer(m);
      for (std::size_t i = 0; i < g.numel(); ++i) gm[i] += g[i];
    }
    if (t.nodes_[v].requires_grad) {
      Tensor& gv = t.grad_buffer(v);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) gv[j] += g[i * c + j];
      }
    }
  };
  return id;
}

Tape::NodeId Tape::scale(NodeId x, double cst) {
  const Tensor& vx = checked(x, "scale");
  Tensor out(vx.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = cst * vx[i];
  NodeId id = record(std::move(out), nodes_[x].requires_grad, "scale", nullptr);
  nodes_[id].backward_fn = [x, cst, id](Tape& t) {
    if (!t.nodes_[x].requires_grad) return;
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += cst * g[i];
  };
  return id;
}

Tape::NodeId Tape::tanh_op(NodeId x) {
  const Tensor& vx = checked(x, "tanh");
  Tensor out(vx.shape());
  kernels::tanh_map(vx.data(), out.data(), out.numel());
  NodeId id = record(std::move(out), nodes_[x].requires_grad, "tanh", nullptr);
  nodes_[id].backward_fn = [x, id](Tape& t) {
    if (!t.nodes_[x].requires_grad) return;
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& y = t.nodes_[id].value;
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  };
  return id;
}

// ==================== linear algebra ====================

Tape::NodeId Tape::matmul(NodeId a, NodeId b, bool ta, bool tb) {
  const Tensor& va = checked(a, "matmul");
  const Tensor& vb = checked(b, "matmul");
  if (va.ndim() != 2 || vb.ndim() != 2) throw ShapeError("matmul: operands must be 2-d");
  const std::size_t m = ta ? va.shape()[1] : va.shape()[0];
  const std::size_t ka = ta ? va.shape()[0] : va.shape()[1];
  const std::size_t kb = tb ? vb.shape()[1] : vb.shape()[0];
  const std::size_t n = tb ? vb.shape()[0] : vb.shape()[1];
  if (ka != kb) throw ShapeError("matmul: inner dimensions disagree");
  const std::size_t k = ka;
  Tensor out({m, n});
  kernels::matmul(va.data(), vb.data(), out.data(), m, k, n, ta, tb, false);
  bool rg = nodes_[a].requires_grad || nodes_[b].requires_grad;
  NodeId id = record(std::move(out), rg, "matmul", nullptr);
  nodes_[id].backward_fn = [a, b, ta, tb, m, k, n, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;      // m x n
    const Tensor& va2 = t.nodes_[a].value;
    const Tensor& vb2 = t.nodes_[b].value;
    if (t.nodes_[a].requires_grad) {
      Tensor& ga = t.grad_buffer(a);
      if (!ta) {
        // dA(m x k) += tb ? dY*B : dY*B^T
        kernels::matmul(g.data(), vb2.data(), ga.data(), m, n, k, false, !tb, true);
      } else if (!tb) {
        // A physical k x m; dA += B * dY^T
        kernels::matmul(vb2.data(), g.data(), ga.data(), k, n, m, false, true, true);
      } else {
        // A physical k x m, B physical n x k; dA += B^T * dY^T
        kernels::matmul(vb2.data(), g.data(), ga.data(), k, n, m, true, true, true);
      }
    }
    if (t.nodes_[b].requires_grad) {
      Tensor& gb = t.grad_buffer(b);
      if (!tb) {
        // dB(k x n) += ta ? A*dY : A^T*dY
        kernels::matmul(va2.data(), g.data(), gb.data(), k, m, n, !ta, false, true);
      } else if (!ta) {
        // B physical n x k; dB += dY^T * A
        kernels::matmul(g.data(), va2.data(), gb.data(), n, m, k, true, false, true);
      } else {
        // B physical n x k, A physical k x m; dB += dY^T * A^T
        kernels::matmul(g.data(), va2.data(), gb.data(), n, m, k, true, true, true);
      }
    }
  };
  return id;
}

Tape::NodeId Tape::transpose(NodeId x) {
  const Tensor& vx = checked(x, "transpose");
  if (vx.ndim() != 2) throw ShapeError("transpose: expected a 2-d tensor");
  const std::size_t r = vx.shape()[0];
  const std::size_t c = vx.shape()[1];
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = vx[i * c + j];
  }
  NodeId id = record(std::move(out), nodes_[x].requires_grad, "transpose", nullptr);
  nodes_[id].backward_fn = [x, r, c, id](Tape& t) {
    if (!t.nodes_[x].requires_grad) return;
    const Tensor& g = t.nodes_[id].grad;  // c x r
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    }
  };
  return id;
}

// ==================== normalization / softmax / entropy ====================

Tape::NodeId Tape::l2_normalize_rows_op(NodeId x) {
  const Tensor& vx = checked(x, "l2_normalize");
  auto [r, c] = as_rows(vx, "l2_normalize");
  Tensor out(vx.shape());
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < c; ++j) sq += vx[i * c + j] * vx[i * c + j];
    double norm = std::sqrt(sq);
    if (norm < kNormEps) {
      throw DegenerateVectorError("l2_normalize: slice " + std::to_string(i) +
                                  " has norm below epsilon");
    }
    norms[i] = norm;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = vx[i * c + j] / norm;
  }
  NodeId id = record(std::move(out), nodes_[x].requires_grad, "l2_normalize", nullptr);
  nodes_[id].backward_fn = [x, r = r, c = c, norms = std::move(norms), id](Tape& t) {
    if (!t.nodes_[x].requires_grad) return;
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& y = t.nodes_[id].value;
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += y[i * c + j] * g[i * c + j];
      for (std::size_t j = 0; j < c; ++j) {
        gx[i * c + j] += (g[i * c + j] - y[i * c + j] * dot) / norms[i];
      }
    }
  };
  return id;
}

Tape::NodeId Tape::l2_normalize(NodeId x, int axis) {
  const Tensor& vx = checked(x, "l2_normalize");
  if (vx.ndim() == 1) {
    if (axis != 0) throw ShapeError("l2_normalize: axis out of range for 1-d tensor");
    return l2_normalize_rows_op(x);
  }
  if (axis == 1) return l2_normalize_rows_op(x);
  if (axis == 0) return transpose(l2_normalize_rows_op(transpose(x)));
  throw ShapeError("l2_normalize: axis out of range");
}

Tape::NodeId Tape::softmax_rows_op(NodeId x) {
  const Tensor& vx = checked(x, "softmax");
  auto [r, c] = as_rows(vx, "softmax");
  Tensor out(vx.shape());
  kernels::softmax_rows(vx.data(), out.data(), r, c);
  NodeId id = record(std::move(out), nodes_[x].requires_grad, "softmax", nullptr);
  nodes_[id].backward_fn = [x, r = r, c = c, id](Tape& t) {
    if (!t.nodes_[x].requires_grad) return;
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& p = t.nodes_[id].value;
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * p[i * c + j];
      for (std::size_t j = 0; j < c; ++j) {
        gx[i * c + j] += p[i * c + j] * (g[i * c + j] - dot);
      }
    }
  };
  return id;
}

Tape::NodeId Tape::softmax(NodeId x, int axis) {
  const Tensor& vx = checked(x, "softmax");
  if (vx.ndim() == 1) {
    if (axis != 0) throw ShapeError("softmax: axis out of range for 1-d tensor");
    return softmax_rows_op(x);
  }
  if (axis == 1) return softmax_rows_op(x);
  if (axis == 0) return transpose(softmax_rows_op(transpose(x)));
  throw ShapeError("softmax: axis out of range");
}

Tape::NodeId Tape::entropy_rows_op(NodeId p) {
  const Tensor& vp = checked(p, "entropy");
  auto [r, c] = as_rows(vp, "entropy");
  for (std::size_t i = 0; i < r; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double v = vp[i * c + j];
      if (v < 0.0) throw DomainError("entropy: negative probability in slice " + std::to_string(i));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw DomainError("entropy: slice " + std::to_string(i) + " does not sum to 1");
    }
  }
  Tensor out({r});
  kernels::row_entropy(vp.data(), out.data(), r, c);
  NodeId id = record(std::move(out), nodes_[p].requires_grad, "entropy", nullptr);
  nodes_[id].backward_fn = [p, r = r, c = c, id](Tape& t) {
    if (!t.nodes_[p].requires_grad) return;
    const Tensor& g = t.nodes_[id].grad;  // {r}
    const Tensor& vp2 = t.nodes_[p].value;
    Tensor& gp = t.grad_buffer(p);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        double v = vp2[i * c + j];
        if (v != 0.0) gp[i * c + j] += g[i] * (-(std::log(v) + 1.0));
      }
    }
  };
  return id;
}

Tape::NodeId Tape::entropy(NodeId p, int axis) {
  const Tensor& vp = checked(p, "entropy");
  if (vp.ndim() == 1) {
    if (axis != 0) throw ShapeError("entropy: axis out of range for 1-d tensor");
    return entropy_rows_op(p);
  }
  if (axis == 1) return entropy_rows_op(p);
  if (axis == 0) return entropy_rows_op(transpose(p));
  throw ShapeError("entropy: axis out of range");
}

// ==================== reductions ====================

Tape::NodeId Tape::mean_rows(NodeId x) {
  const Tensor& vx = checked(x, "mean_rows");
  if (vx.ndim() != 2) throw ShapeError("mean_rows: expected a 2-d tensor");
  const std::size_t r = vx.shape()[0];
  const std::size_t c = vx.shape()[1];
  if (r == 0) throw ContractError("mean_rows: empty tensor");
  Tensor out({1, c});
  for (std::size_t j = 0; j < c; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < r; ++i) acc += vx[i * c + j];
    out[j] = acc / static_cast<double>(r);
  }
  NodeId id = record(std::move(out), nodes_[x].requires_grad, "mean_rows", nullptr);
  nodes_[id].backward_fn = [x, r, c, id](Tape& t) {
    if (!t.nodes_[x].requires_grad) return;
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gx = t.grad_buffer(x);
    const double inv = 1.0 / static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j] * inv;
    }
  };
  return id;
}

Tape::NodeId Tape::sum_all(NodeId x) {
  const Tensor& vx = checked(x, "sum_all");
  double acc = 0.0;
  for (std::size_t i = 0; i < vx.numel(); ++i) acc += vx[i];
  NodeId id = record(Tensor::scalar(acc), nodes_[x].requires_grad, "sum_all", nullptr);
  nodes_[id].backward_fn = [x, id](Tape& t) {
    if (!t.nodes_[x].requires_grad) return;
    const double g = t.nodes_[id].grad[0];
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  };
  return id;
}

Tape::NodeId Tape::mean_all(NodeId x) {
  const Tensor& vx = checked(x, "mean_all");
  const std::size_t n = vx.numel();
  if (n == 0) throw ContractError("mean_all: empty tensor");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += vx[i];
  NodeId id = record(Tensor::scalar(acc / static_cast<double>(n)), nodes_[x].requires_grad,
                     "mean_all", nullptr);
  nodes_[id].backward_fn = [x, n, id](Tape& t) {
    if (!t.nodes_[x].requires_grad) return;
    const double g = t.nodes_[id].grad[0] / static_cast<double>(n);
    Tensor& gx = t.grad_buffer(x);
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  };
  return id;
}

// ==================== scalar coupling ====================

Tape::NodeId Tape::mul_by_scalar(NodeId x, NodeId s) {
  const Tensor& vx = checked(x, "mul_by_scalar");
  const Tensor& vs = checked(s, "mul_by_scalar");
  require_scalar(vs, "mul_by_scalar");
  Tensor out(vx.shape());
  const double sv = vs[0];
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = sv * vx[i];
  bool rg = nodes_[x].requires_grad || nodes_[s].requires_grad;
  NodeId id = record(std::move(out), rg, "mul_by_scalar", nullptr);
  nodes_[id].backward_fn = [x, s, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    const Tensor& vx2 = t.nodes_[x].value;
    const double sv2 = t.nodes_[s].value[0];
    if (t.nodes_[x].requires_grad) {
      Tensor& gx = t.grad_buffer(x);
      for (std::size_t i = 0; i < g.numel(); ++i) gx[i] += sv2 * g[i];
    }
    if (t.nodes_[s].requires_grad) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.numel(); ++i) acc += vx2[i] * g[i];
      t.grad_buffer(s)[0] += acc;
    }
  };
  return id;
}

Tape::NodeId Tape::exp_scalar(NodeId s) {
  const Tensor& vs = checked(s, "exp_scalar");
  require_scalar(vs, "exp_scalar");
  NodeId id = record(Tensor::scalar(std::exp(vs[0])), nodes_[s].requires_grad, "exp_scalar",
                     nullptr);
  nodes_[id].backward_fn = [s, id](Tape& t) {
    if (!t.nodes_[s].requires_grad) return;
    t.grad_buffer(s)[0] += t.nodes_[id].grad[0] * t.nodes_[id].value[0];
  };
  return id;
}

// ==================== gather / stack ====================

Tape::NodeId Tape::gather_rows(NodeId x, std::vector<std::size_t> indices) {
  const Tensor& vx = checked(x, "gather_rows");
  if (vx.ndim() != 2) throw ShapeError("gather_rows: expected a 2-d tensor");
  const std::size_t rows = vx.shape()[0];
  const std::size_t c = vx.shape()[1];
  for (std::size_t idx : indices) {
    if (idx >= rows) throw DomainError("gather_rows: index " + std::to_string(idx) +
                                       " out of range (" + std::to_string(rows) + " rows)");
  }
  const std::size_t k = indices.size();
  Tensor out({k, c});
  for (std::size_t i = 0; i < k; ++i) {
    const double* src = vx.data() + indices[i] * c;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = src[j];
  }
  NodeId id = record(std::move(out), nodes_[x].requires_grad, "gather_rows", nullptr);
  nodes_[id].backward_fn = [x, indices = std::move(indices), c, id](Tape& t) {
    if (!t.nodes_[x].requires_grad) return;
    const Tensor& g = t.nodes_[id].grad;
    Tensor& gx = t.grad_buffer(x);
    // serial scatter: repeated indices accumulate in a fixed order
    for (std::size_t i = 0; i < indices.size(); ++i) {
      double* dst = gx.data() + indices[i] * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += g[i * c + j];
    }
  };
  return id;
}

Tape::NodeId Tape::stack_rows(const std::vector<NodeId>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  std::size_t c = 0;
  bool rg = false;
  for (NodeId r : rows) {
    const Tensor& v = checked(r, "stack_rows");
    auto [rr, rc] = as_rows(v, "stack_rows");
    if (rr != 1) throw ShapeError("stack_rows: each input must be a single row");
    if (c == 0) c = rc;
    if (rc != c) throw ShapeError("stack_rows: row lengths differ");
    rg = rg || nodes_[r].requires_grad;
  }
  const std::size_t k = rows.size();
  Tensor out({k, c});
  for (std::size_t i = 0; i < k; ++i) {
    const Tensor& v = nodes_[rows[i]].value;
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = v[j];
  }
  NodeId id = record(std::move(out), rg, "stack_rows", nullptr);
  nodes_[id].backward_fn = [rows = rows, c, id](Tape& t) {
    const Tensor& g = t.nodes_[id].grad;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!t.nodes_[rows[i]].requires_grad) continue;
      Tensor& gr = t.grad_buffer(rows[i]);
      for (std::size_t j = 0; j < c; ++j) gr[j] += g[i * c + j];
    }
  };
  return id;
}

// ==================== fused losses ====================

Tape::NodeId Tape::cross_entropy_diag_rows(NodeId logits) {
  const Tensor& vx = checked(logits, "cross_entropy_diag");
  if (vx.ndim() != 2 || vx.shape()[0] != vx.shape()[1]) {
    throw ShapeError("cross_entropy_diag: expected a square matrix");
  }
  const std::size_t n = vx.shape()[0];
  // stable per-row: lse - x[i,i]
  Tensor probs({n, n});
  kernels::softmax_rows(vx.data(), probs.data(), n, n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* xr = vx.data() + i * n;
    double mx = xr[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xr[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(xr[j] - mx);
    loss += mx + std::log(sum) - xr[i];
  }
  loss /= static_cast<double>(n);
  NodeId id = record(Tensor::scalar(loss), nodes_[logits].requires_grad, "cross_entropy_diag",
                     nullptr);
  nodes_[id].backward_fn = [logits, probs = std::move(probs), n, id](Tape& t) {
    if (!t.nodes_[logits].requires_grad) return;
    const double g = t.nodes_[id].grad[0] / static_cast<double>(n);
    Tensor& gx = t.grad_buffer(logits);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double delta = (i == j) ? 1.0 : 0.0;
        gx[i * n + j] += g * (probs[i * n + j] - delta);
      }
    }
  };
  return id;
}

// ==================== backward ====================

void Tape::backward(NodeId loss) {
  const Tensor& vl = checked(loss, "backward");
  if (vl.numel() != 1) throw ContractError("backward: loss must be a scalar");
  for (NodeId i = 0; i <= loss; ++i) {
    Node& node = nodes_[i];
    if (node.requires_grad) {
      node.grad = Tensor(node.value.shape());
      node.grad_ready = true;
    }
  }
  if (!nodes_[loss].requires_grad) return;  // constant loss: all gradients stay zero
  nodes_[loss].grad[0] = 1.0;
  for (NodeId i = loss; i >= 0; --i) {
    Node& node = nodes_[i];
    if (node.backward_fn && node.requires_grad) node.backward_fn(*this);
  }
}

}  // namespace tier
