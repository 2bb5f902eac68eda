#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "tier/tensor.hpp"

namespace tier {

// Reverse-mode differentiation tape, rebuilt per forward pass (define-by-run).
// Nodes are recorded in execution order, which is automatically a topological
// order; backward() replays them exactly once in reverse. Node ids index into
// the tape's value/grad storage.
//
// A Tape is single-threaded. Independent tapes may run concurrently; the
// kernels underneath parallelize across output elements without changing
// results bit-for-bit.
class Tape {
 public:
  using NodeId = int;
  static constexpr double kNormEps = 1e-12;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- graph construction ----
  NodeId leaf(Tensor value, bool requires_grad = true, const char* name = "leaf");

  NodeId add(NodeId a, NodeId b);
  // m: r x c, v: {c} or {1,c}; adds v to every row of m.
  NodeId add_rowvec(NodeId m, NodeId v);
  NodeId scale(NodeId x, double c);
  NodeId matmul(NodeId a, NodeId b, bool transpose_a = false, bool transpose_b = false);
  NodeId transpose(NodeId x);
  NodeId tanh_op(NodeId x);
  NodeId l2_normalize(NodeId x, int axis);
  NodeId softmax(NodeId x, int axis);
  NodeId entropy(NodeId p, int axis);
  NodeId mean_rows(NodeId x);  // r x c -> {1,c}
  NodeId mean_all(NodeId x);   // -> scalar {1}
  NodeId sum_all(NodeId x);    // -> scalar {1}
  NodeId mul_by_scalar(NodeId x, NodeId s);  // s: {1}
  NodeId exp_scalar(NodeId s);               // s: {1}
  NodeId gather_rows(NodeId x, std::vector<std::size_t> indices);
  NodeId stack_rows(const std::vector<NodeId>& rows);  // each {d} or {1,d} -> {k,d}
  // mean over rows i of cross-entropy(softmax(row_i), target=i); logits n x n.
  NodeId cross_entropy_diag_rows(NodeId logits);

  // ---- execution ----
  // Fills gradients for every requires-grad node reachable from `loss`.
  // `loss` must be scalar.
  void backward(NodeId loss);

  const Tensor& value(NodeId id) const;
  const Tensor& grad(NodeId id) const;
  bool has_grad(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated by backward()
    bool requires_grad = false;
    bool grad_ready = false;
    const char* op = "";
    std::function<void(Tape&)> backward_fn;  // empty for leaves
  };

  NodeId record(Tensor value, bool requires_grad, const char* op,
                std::function<void(Tape&)> backward_fn);
  void check_finite(NodeId id) const;
  const Tensor& checked(NodeId id, const char* op) const;
  Tensor& grad_buffer(NodeId id);

  // axis-0 variants are composed from the row kernels via transposes.
  NodeId softmax_rows_op(NodeId x);
  NodeId entropy_rows_op(NodeId p);
  NodeId l2_normalize_rows_op(NodeId x);

  std::vector<Node> nodes_;
};

}  // namespace tier
