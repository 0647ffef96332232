#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "dpr/core/ndarray.hpp"

namespace dpr {

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, const NdArray<Scalar>& a, const NdArray<Scalar>& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <typename Scalar>
NdArray<Scalar> add(const NdArray<Scalar>& a, const NdArray<Scalar>& b) {
  detail::require_same_shape("add", a, b);
  auto n = detail::result_node<Scalar>("add", a.shape(), {&a, &b});
  MatMap<Scalar>(n->data.data(), n->rows(), n->cols()) = a.value() + b.value();
  if (n->requires_grad) {
    auto pa = a.node();
    auto pb = b.node();
    auto* self = n.get();
    n->backward_fn = [self, pa, pb] {
      if (pa->requires_grad) pa->grad_map() += self->grad_map();
      if (pb->requires_grad) pb->grad_map() += self->grad_map();
    };
  }
  return NdArray<Scalar>(std::move(n));
}

template <typename Scalar>
NdArray<Scalar> mul(const NdArray<Scalar>& a, const NdArray<Scalar>& b) {
  detail::require_same_shape("mul", a, b);
  auto n = detail::result_node<Scalar>("mul", a.shape(), {&a, &b});
  MatMap<Scalar>(n->data.data(), n->rows(), n->cols()) =
      a.value().cwiseProduct(b.value());
  if (n->requires_grad) {
    auto pa = a.node();
    auto pb = b.node();
    auto* self = n.get();
    n->backward_fn = [self, pa, pb] {
      if (pa->requires_grad) pa->grad_map() += self->grad_map().cwiseProduct(pb->value_map());
      if (pb->requires_grad) pb->grad_map() += self->grad_map().cwiseProduct(pa->value_map());
    };
  }
  return NdArray<Scalar>(std::move(n));
}

template <typename Scalar>
NdArray<Scalar> scale(const NdArray<Scalar>& a, Scalar c) {
  auto n = detail::result_node<Scalar>("scale", a.shape(), {&a});
  MatMap<Scalar>(n->data.data(), n->rows(), n->cols()) = a.value() * c;
  if (n->requires_grad) {
    auto pa = a.node();
    auto* self = n.get();
    n->backward_fn = [self, pa, c] { pa->grad_map() += self->grad_map() * c; };
  }
  return NdArray<Scalar>(std::move(n));
}

template <typename Scalar>
NdArray<Scalar> operator+(const NdArray<Scalar>& a, const NdArray<Scalar>& b) {
  return add(a, b);
}
template <typename Scalar>
NdArray<Scalar> operator*(const NdArray<Scalar>& a, const NdArray<Scalar>& b) {
  return mul(a, b);
}

// Broadcasts a length-C row vector over every row of a.
template <typename Scalar>
NdArray<Scalar> add_rowvec(const NdArray<Scalar>& a, const NdArray<Scalar>& v) {
  if (v.numel() != a.cols())
    throw DimensionError("add_rowvec: vector " + shape_str(v.shape()) + " does not span columns of " +
                         shape_str(a.shape()));
  auto n = detail::result_node<Scalar>("add_rowvec", a.shape(), {&a, &v});
  MatMap<Scalar> out(n->data.data(), n->rows(), n->cols());
  out = a.value();
  out.rowwise() += Eigen::Map<const Eigen::RowVectorX<Scalar>>(v.data(), v.numel());
  if (n->requires_grad) {
    auto pa = a.node();
    auto pv = v.node();
    auto* self = n.get();
    n->backward_fn = [self, pa, pv] {
      if (pa->requires_grad) pa->grad_map() += self->grad_map();
      if (pv->requires_grad) {
        auto g = self->grad_map();
        Eigen::Map<Eigen::RowVectorX<Scalar>>(pv->grad_map().data(), pv->numel()) +=
            g.colwise().sum();
      }
    };
  }
  return NdArray<Scalar>(std::move(n));
}

template <typename Scalar>
NdArray<Scalar> gelu(const NdArray<Scalar>& a) {
  auto n = detail::result_node<Scalar>("gelu", a.shape(), {&a});
  const Scalar c = Scalar(std::sqrt(2.0 / M_PI));
  const Scalar k = Scalar(0.044715);
  auto x = a.value().array();
  MatMap<Scalar> out(n->data.data(), n->rows(), n->cols());
  out.array() = Scalar(0.5) * x * (Scalar(1) + ((x + k * x.cube()) * c).tanh());
  if (n->requires_grad) {
    auto pa = a.node();
    auto* self = n.get();
    n->backward_fn = [self, pa, c, k] {
      auto xm = pa->value_map();
      auto x = xm.array();
      Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t =
          ((x + k * x.cube()) * c).tanh();
      pa->grad_map().array() +=
          self->grad_map().array() *
          (Scalar(0.5) * (Scalar(1) + t) + Scalar(0.5) * x * (Scalar(1) - t.square()) * c *
                                               (Scalar(1) + Scalar(3) * k * x.square()));
    };
  }
  return NdArray<Scalar>(std::move(n));
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

template <typename Scalar>
NdArray<Scalar> matmul(const NdArray<Scalar>& a, const NdArray<Scalar>& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  auto n = detail::result_node<Scalar>("matmul", {a.rows(), b.cols()}, {&a, &b});
  MatMap<Scalar>(n->data.data(), n->rows(), n->cols()).noalias() = a.value() * b.value();
  if (n->requires_grad) {
    auto pa = a.node();
    auto pb = b.node();
    auto* self = n.get();
    n->backward_fn = [self, pa, pb] {
      auto g = self->grad_map();
      if (pa->requires_grad) pa->grad_map().noalias() += g * pb->value_map().transpose();
      if (pb->requires_grad) pb->grad_map().noalias() += pa->value_map().transpose() * g;
    };
  }
  return NdArray<Scalar>(std::move(n));
}

// a * b^T without materializing the transpose.
template <typename Scalar>
NdArray<Scalar> matmul_nt(const NdArray<Scalar>& a, const NdArray<Scalar>& b) {
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt: inner dimensions disagree: " + shape_str(a.shape()) +
                         " x transpose of " + shape_str(b.shape()));
  auto n = detail::result_node<Scalar>("matmul_nt", {a.rows(), b.rows()}, {&a, &b});
  MatMap<Scalar>(n->data.data(), n->rows(), n->cols()).noalias() =
      a.value() * b.value().transpose();
  if (n->requires_grad) {
    auto pa = a.node();
    auto pb = b.node();
    auto* self = n.get();
    n->backward_fn = [self, pa, pb] {
      auto g = self->grad_map();
      if (pa->requires_grad) pa->grad_map().noalias() += g * pb->value_map();
      if (pb->requires_grad) pb->grad_map().noalias() += g.transpose() * pa->value_map();
    };
  }
  return NdArray<Scalar>(std::move(n));
}

// ---------------------------------------------------------------------------
// Row-structured ops
// ---------------------------------------------------------------------------

// Numerically stable row softmax (max subtraction before exponentiation).
template <typename Scalar>
NdArray<Scalar> softmax_rows(const NdArray<Scalar>& a) {
  auto n = detail::result_node<Scalar>("softmax_rows", a.shape(), {&a});
  auto x = a.value();
  MatMap<Scalar> out(n->data.data(), n->rows(), n->cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  if (n->requires_grad) {
    auto pa = a.node();
    auto* self = n.get();
    n->backward_fn = [self, pa] {
      auto y = self->value_map();
      auto g = self->grad_map();
      auto gx = pa->grad_map();
      for (Index r = 0; r < y.rows(); ++r) {
        const Scalar dot = g.row(r).cwiseProduct(y.row(r)).sum();
        gx.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
      }
    };
  }
  return NdArray<Scalar>(std::move(n));
}

// Row-wise standardization to mean 0 / variance 1 (epsilon inside the sqrt),
// then the affine map gain (*) + bias. gain and bias span the columns.
template <typename Scalar>
NdArray<Scalar> layer_norm(const NdArray<Scalar>& a, const NdArray<Scalar>& gain,
                           const NdArray<Scalar>& bias, Scalar eps = Scalar(1e-5)) {
  if (gain.numel() != a.cols() || bias.numel() != a.cols())
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not span columns of " +
                         shape_str(a.shape()));
  auto n = detail::result_node<Scalar>("layer_norm", a.shape(), {&a, &gain, &bias});
  const Index R = a.rows(), C = a.cols();
  auto x = a.value();
  Eigen::Map<const Eigen::RowVectorX<Scalar>> g(gain.data(), C);
  Eigen::Map<const Eigen::RowVectorX<Scalar>> b(bias.data(), C);
  // inv std per row is needed again in backward; keep it.
  auto inv_std = std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(R));
  MatMap<Scalar> out(n->data.data(), R, C);
  for (Index r = 0; r < R; ++r) {
    const Scalar mean = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mean).square().sum() / Scalar(C);
    const Scalar is = Scalar(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<std::size_t>(r)] = is;
    out.row(r) = (((x.row(r).array() - mean) * is) * g.array() + b.array()).matrix();
  }
  if (n->requires_grad) {
    auto pa = a.node();
    auto pg = gain.node();
    auto pb = bias.node();
    auto* self = n.get();
    n->backward_fn = [self, pa, pg, pb, inv_std] {
      const Index R = self->rows(), C = self->cols();
      auto x = pa->value_map();
      Eigen::Map<const Eigen::RowVectorX<Scalar>> g(pg->data.data(), C);
      auto dy = self->grad_map();
      for (Index r = 0; r < R; ++r) {
        const Scalar is = (*inv_std)[static_cast<std::size_t>(r)];
        const Scalar mean = x.row(r).mean();
        Eigen::RowVectorX<Scalar> xhat = ((x.row(r).array() - mean) * is).matrix();
        if (pg->requires_grad)
          Eigen::Map<Eigen::RowVectorX<Scalar>>(pg->grad_map().data(), C).array() +=
              dy.row(r).array() * xhat.array();
        if (pb->requires_grad)
          Eigen::Map<Eigen::RowVectorX<Scalar>>(pb->grad_map().data(), C) += dy.row(r);
        if (pa->requires_grad) {
          Eigen::RowVectorX<Scalar> dxhat = (dy.row(r).array() * g.array()).matrix();
          const Scalar m1 = dxhat.mean();
          const Scalar m2 = dxhat.cwiseProduct(xhat).mean();
          pa->grad_map().row(r).array() +=
              is * (dxhat.array() - m1 - xhat.array() * m2);
        }
      }
    };
  }
  return NdArray<Scalar>(std::move(n));
}

// Gathers table rows by token id. Backward scatter-adds into the table.
template <typename Scalar>
NdArray<Scalar> embedding_lookup(const NdArray<Scalar>& table, std::span<const int> ids) {
  const Index V = table.rows(), C = table.cols();
  for (int id : ids)
    if (id < 0 || id >= V)
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " outside table of " +
                       std::to_string(V) + " rows");
  auto n = detail::result_node<Scalar>("embedding_lookup",
                                       {static_cast<Index>(ids.size()), C}, {&table});
  auto t = table.value();
  MatMap<Scalar> out(n->data.data(), n->rows(), n->cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Index>(i)) = t.row(ids[i]);
  if (n->requires_grad) {
    auto pt = table.node();
    auto idx = std::make_shared<std::vector<int>>(ids.begin(), ids.end());
    auto* self = n.get();
    n->backward_fn = [self, pt, idx] {
      auto g = self->grad_map();
      auto gt = pt->grad_map();
      for (std::size_t i = 0; i < idx->size(); ++i)
        gt.row((*idx)[i]) += g.row(static_cast<Index>(i));
    };
  }
  return NdArray<Scalar>(std::move(n));
}

// Selects rows of a by index, in order (duplicates allowed).
template <typename Scalar>
NdArray<Scalar> rows_gather(const NdArray<Scalar>& a, std::span<const Index> rows) {
  const Index R = a.rows();
  for (Index r : rows)
    if (r < 0 || r >= R)
      throw IndexError("rows_gather: row " + std::to_string(r) + " outside " + std::to_string(R));
  auto n = detail::result_node<Scalar>("rows_gather",
                                       {static_cast<Index>(rows.size()), a.cols()}, {&a});
  auto x = a.value();
  MatMap<Scalar> out(n->data.data(), n->rows(), n->cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(rows[i]);
  if (n->requires_grad) {
    auto pa = a.node();
    auto idx = std::make_shared<std::vector<Index>>(rows.begin(), rows.end());
    auto* self = n.get();
    n->backward_fn = [self, pa, idx] {
      auto g = self->grad_map();
      auto gx = pa->grad_map();
      for (std::size_t i = 0; i < idx->size(); ++i)
        gx.row((*idx)[i]) += g.row(static_cast<Index>(i));
    };
  }
  return NdArray<Scalar>(std::move(n));
}

// Stacks pieces with equal column counts on top of each other.
template <typename Scalar>
NdArray<Scalar> concat_rows(const std::vector<NdArray<Scalar>>& pieces) {
  if (pieces.empty()) throw ContractError("concat_rows: no pieces");
  const Index C = pieces.front().cols();
  Index R = 0;
  for (const auto& p : pieces) {
    if (p.cols() != C)
      throw DimensionError("concat_rows: piece " + shape_str(p.shape()) +
                           " has mismatched columns (expected " + std::to_string(C) + ")");
    R += p.rows();
  }
  auto n = std::make_shared<TapeNode<Scalar>>();
  n->op = "concat_rows";
  n->shape = {R, C};
  n->data.assign(static_cast<std::size_t>(R * C), Scalar(0));
  for (const auto& p : pieces) {
    n->parents.push_back(p.node());
    n->requires_grad = n->requires_grad || p.requires_grad();
  }
  MatMap<Scalar> out(n->data.data(), R, C);
  Index at = 0;
  for (const auto& p : pieces) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  if (n->requires_grad) {
    auto* self = n.get();
    auto parents = n->parents;
    n->backward_fn = [self, parents] {
      auto g = self->grad_map();
      Index at = 0;
      for (const auto& p : parents) {
        if (p->requires_grad) p->grad_map() += g.middleRows(at, p->rows());
        at += p->rows();
      }
    };
  }
  return NdArray<Scalar>(std::move(n));
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

template <typename Scalar>
NdArray<Scalar> sum(const NdArray<Scalar>& a) {
  auto n = detail::result_node<Scalar>("sum", {1}, {&a});
  n->data[0] = a.value().sum();
  if (n->requires_grad) {
    auto pa = a.node();
    auto* self = n.get();
    n->backward_fn = [self, pa] { pa->grad_map().array() += self->grad[0]; };
  }
  return NdArray<Scalar>(std::move(n));
}

template <typename Scalar>
struct CrossEntropyResult {
  NdArray<Scalar> loss;   // scalar
  Index contributing = 0; // rows that entered the mean
  bool empty() const { return contributing == 0; }
};

// Mean negative log-softmax probability of the target over rows whose
// target differs from ignore_index. All-ignored input yields loss 0 with
// the empty flag set.
template <typename Scalar>
CrossEntropyResult<Scalar> cross_entropy_logits(const NdArray<Scalar>& logits,
                                                std::span<const int> targets,
                                                int ignore_index = -1) {
  const Index R = logits.rows(), C = logits.cols();
  if (static_cast<Index>(targets.size()) != R)
    throw DimensionError("cross_entropy_logits: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(R) + " logit rows");
  Index contributing = 0;
  for (int t : targets) {
    if (t == ignore_index) continue;
    if (t < 0 || t >= C)
      throw IndexError("cross_entropy_logits: target " + std::to_string(t) +
                       " outside vocabulary of " + std::to_string(C));
    ++contributing;
  }
  auto n = detail::result_node<Scalar>("cross_entropy", {1}, {&logits});
  auto x = logits.value();
  Scalar total = Scalar(0);
  for (Index r = 0; r < R; ++r) {
    if (targets[static_cast<std::size_t>(r)] == ignore_index) continue;
    const Scalar m = x.row(r).maxCoeff();
    const Scalar lse = m + std::log((x.row(r).array() - m).exp().sum());
    total += lse - x(r, targets[static_cast<std::size_t>(r)]);
  }
  n->data[0] = contributing > 0 ? total / Scalar(contributing) : Scalar(0);
  if (n->requires_grad && contributing > 0) {
    auto pl = logits.node();
    auto tgt = std::make_shared<std::vector<int>>(targets.begin(), targets.end());
    auto* self = n.get();
    const Scalar inv = Scalar(1) / Scalar(contributing);
    n->backward_fn = [self, pl, tgt, ignore_index, inv] {
      const Scalar g = self->grad[0] * inv;
      auto x = pl->value_map();
      auto gx = pl->grad_map();
      for (Index r = 0; r < x.rows(); ++r) {
        const int t = (*tgt)[static_cast<std::size_t>(r)];
        if (t == ignore_index) continue;
        const Scalar m = x.row(r).maxCoeff();
        Eigen::RowVectorX<Scalar> p = (x.row(r).array() - m).exp().matrix();
        p /= p.sum();
        gx.row(r) += g * p;
        gx(r, t) -= g;
      }
    };
  }
  return {NdArray<Scalar>(std::move(n)), contributing};
}

// ---------------------------------------------------------------------------
// Fused multi-head attention
// ---------------------------------------------------------------------------

// Scaled dot-product attention over a batch of equal-length sequences laid
// out as (batch*seq_len) x d. key_mask marks real tokens (1) vs padding (0);
// padded keys are never attended to. With causal=true, position i attends
// to keys <= i only. Output is the pre-projection head concatenation.
template <typename Scalar>
NdArray<Scalar> multi_head_attention(const NdArray<Scalar>& q, const NdArray<Scalar>& k,
                                     const NdArray<Scalar>& v, Index batch, Index seq_len,
                                     int n_heads, std::span<const std::uint8_t> key_mask,
                                     bool causal) {
  detail::require_same_shape("multi_head_attention", q, k);
  detail::require_same_shape("multi_head_attention", q, v);
  const Index d = q.cols();
  if (q.rows() != batch * seq_len)
    throw DimensionError("multi_head_attention: " + std::to_string(q.rows()) + " rows, expected " +
                         std::to_string(batch) + "*" + std::to_string(seq_len));
  if (n_heads <= 0 || d % n_heads != 0)
    throw DimensionError("multi_head_attention: d_model " + std::to_string(d) +
                         " not divisible by " + std::to_string(n_heads) + " heads");
  if (static_cast<Index>(key_mask.size()) != batch * seq_len)
    throw DimensionError("multi_head_attention: key_mask length mismatch");
  const Index dh = d / n_heads;
  const Scalar inv_sqrt_dh = Scalar(1) / std::sqrt(Scalar(dh));
  const Scalar neg_inf = Scalar(-1e9);

  auto n = detail::result_node<Scalar>("multi_head_attention", q.shape(), {&q, &k, &v});
  // Softmax weights are reused by backward: batch x heads x seq x seq.
  auto weights = std::make_shared<std::vector<Scalar>>(
      static_cast<std::size_t>(batch) * n_heads * seq_len * seq_len);
  auto qm = q.value();
  auto km = k.value();
  auto vm = v.value();
  MatMap<Scalar> out(n->data.data(), n->rows(), n->cols());
  for (Index b = 0; b < batch; ++b) {
    const Index r0 = b * seq_len;
    for (int h = 0; h < n_heads; ++h) {
      const Index c0 = h * dh;
      MatMap<Scalar> a(weights->data() + (b * n_heads + h) * seq_len * seq_len, seq_len, seq_len);
      a.noalias() = qm.block(r0, c0, seq_len, dh) * km.block(r0, c0, seq_len, dh).transpose();
      a *= inv_sqrt_dh;
      for (Index i = 0; i < seq_len; ++i) {
        for (Index j = 0; j < seq_len; ++j) {
          const bool masked = key_mask[static_cast<std::size_t>(r0 + j)] == 0 || (causal && j > i);
          if (masked) a(i, j) = neg_inf;
        }
        const Scalar m = a.row(i).maxCoeff();
        a.row(i) = (a.row(i).array() - m).exp();
        a.row(i) /= a.row(i).sum();
      }
      out.block(r0, c0, seq_len, dh).noalias() = a * vm.block(r0, c0, seq_len, dh);
    }
  }
  if (n->requires_grad) {
    auto pq = q.node();
    auto pk = k.node();
    auto pv = v.node();
    auto* self = n.get();
    n->backward_fn = [self, pq, pk, pv, weights, batch, seq_len, n_heads, dh, inv_sqrt_dh] {
      auto g = self->grad_map();
      auto qm = pq->value_map();
      auto km = pk->value_map();
      auto vm = pv->value_map();
      auto gq = pq->grad_map();
      auto gk = pk->grad_map();
      auto gv = pv->grad_map();
      Mat<Scalar> da(seq_len, seq_len);
      for (Index b = 0; b < batch; ++b) {
        const Index r0 = b * seq_len;
        for (int h = 0; h < n_heads; ++h) {
          const Index c0 = h * dh;
          ConstMatMap<Scalar> a(weights->data() + (b * n_heads + h) * seq_len * seq_len, seq_len,
                                seq_len);
          auto go = g.block(r0, c0, seq_len, dh);
          gv.block(r0, c0, seq_len, dh).noalias() += a.transpose() * go;
          da.noalias() = go * vm.block(r0, c0, seq_len, dh).transpose();
          // softmax backward per row, then unscale
          for (Index i = 0; i < seq_len; ++i) {
            const Scalar dot = da.row(i).cwiseProduct(a.row(i)).sum();
            da.row(i) = (a.row(i).array() * (da.row(i).array() - dot)).matrix() * inv_sqrt_dh;
          }
          gq.block(r0, c0, seq_len, dh).noalias() += da * km.block(r0, c0, seq_len, dh);
          gk.block(r0, c0, seq_len, dh).noalias() += da.transpose() * qm.block(r0, c0, seq_len, dh);
        }
      }
    };
  }
  return NdArray<Scalar>(std::move(n));
}

}  // namespace dpr
