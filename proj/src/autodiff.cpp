#include "seqcrf/autodiff.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "seqcrf/kernels.hpp"

namespace seqcrf {

// ---------------------------------------------------------------- Var

template <typename S>
const Shape& Var<S>::shape() const {
  return tape_->shape(id_);
}

template <typename S>
std::size_t Var<S>::size() const {
  return shape_size(shape());
}

template <typename S>
std::span<const S> Var<S>::value() const {
  return tape_->value(id_);
}

template <typename S>
std::span<const S> Var<S>::grad() const {
  return tape_->grad(id_);
}

template <typename S>
bool Var<S>::tracked() const {
  return tape_->tracked(id_);
}

template <typename S>
Array<S> Var<S>::to_array() const {
  auto v = value();
  return Array<S>(shape(), std::vector<S>(v.begin(), v.end()));
}

template <typename S>
S Var<S>::item() const {
  if (size() != 1) throw ShapeError("item: node has shape " + shape_string(shape()));
  return value()[0];
}

// ---------------------------------------------------------------- Tape

template <typename S>
Var<S> Tape<S>::constant(Array<S> a) {
  Node n;
  n.shape = std::move(a.shape);
  n.value = std::move(a.data);
  nodes_.push_back(std::move(n));
  return Var<S>(this, nodes_.size() - 1);
}

template <typename S>
Var<S> Tape<S>::variable(Array<S> a) {
  Var<S> v = constant(std::move(a));
  nodes_.back().tracked = true;
  return v;
}

template <typename S>
Var<S> Tape<S>::parameter(Parameter<S>& p) {
  if (p.grad.size() != p.value.size()) p.grad.assign(p.value.size(), S(0));
  Node n;
  n.shape = p.value.shape;
  n.external_value = p.value.data.data();
  n.external_grad = p.grad.data();
  n.tracked = true;
  nodes_.push_back(std::move(n));
  return Var<S>(this, nodes_.size() - 1);
}

template <typename S>
Var<S> Tape<S>::record(Shape shape, std::vector<S> value, std::span<const Var<S>> inputs,
                       BackwardFn fn) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  for (const auto& in : inputs) {
    if (&in.tape() != this) throw std::invalid_argument("record: input belongs to another tape");
    if (nodes_[in.id()].tracked) n.tracked = true;
  }
  if (n.tracked) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var<S>(this, nodes_.size() - 1);
}

template <typename S>
std::size_t Tape<S>::recorded_ops() const {
  std::size_t count = 0;
  for (const auto& n : nodes_) count += n.backward ? 1 : 0;
  return count;
}

template <typename S>
std::span<const S> Tape<S>::value(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.external_value) return {n.external_value, shape_size(n.shape)};
  return n.value;
}

template <typename S>
std::span<const S> Tape<S>::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.external_grad) return {n.external_grad, shape_size(n.shape)};
  return n.grad;
}

template <typename S>
std::span<S> Tape<S>::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.tracked) return {};
  n.grad_touched = true;
  if (n.external_grad) return {n.external_grad, shape_size(n.shape)};
  if (n.grad.empty()) n.grad.assign(shape_size(n.shape), S(0));
  return n.grad;
}

template <typename S>
void Tape<S>::backward(Var<S> root) {
  if (&root.tape() != this) throw std::invalid_argument("backward: root belongs to another tape");
  if (root.size() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " + shape_string(root.shape()));
  }
  if (!root.tracked()) return;
  grad_accumulator(root.id())[0] += S(1);
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || !n.grad_touched) continue;
    n.backward(*this, id);
    ++backward_visits_;
  }
}

template class Tape<float>;
template class Tape<double>;
template class Var<float>;
template class Var<double>;

// ---------------------------------------------------------------- primitives

namespace ag {
namespace {

constexpr std::size_t kMaxRank = 4;

[[noreturn]] void shape_fail(const std::string& op, const Shape& a, const Shape& b) {
  throw ShapeError(op + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

[[noreturn]] void shape_fail(const std::string& op, const Shape& a, const std::string& why) {
  throw ShapeError(op + ": shape " + shape_string(a) + " " + why);
}

template <typename S>
void same_tape(const std::string& op, Var<S> a, Var<S> b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(op + ": operands on different tapes");
}

struct Broadcast {
  Shape out;
  std::array<std::size_t, kMaxRank> dims{};
  std::array<std::size_t, kMaxRank> stride_a{};
  std::array<std::size_t, kMaxRank> stride_b{};
  bool same = false;
};

Broadcast make_broadcast(const std::string& op, const Shape& a, const Shape& b) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  if (a.size() > kMaxRank || b.size() > kMaxRank) shape_fail(op, a, b);
  std::array<std::size_t, kMaxRank> pa{1, 1, 1, 1}, pb{1, 1, 1, 1};
  std::copy(a.begin(), a.end(), pa.begin() + (kMaxRank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (kMaxRank - b.size()));
  const std::size_t rank = std::max(a.size(), b.size());
  std::size_t sa = 1, sb = 1;
  for (std::size_t d = kMaxRank; d-- > 0;) {
    if (pa[d] != pb[d] && pa[d] != 1 && pb[d] != 1) shape_fail(op, a, b);
    bc.dims[d] = std::max(pa[d], pb[d]);
    bc.stride_a[d] = pa[d] == 1 ? 0 : sa;
    bc.stride_b[d] = pb[d] == 1 ? 0 : sb;
    sa *= pa[d];
    sb *= pb[d];
  }
  bc.out.assign(bc.dims.begin() + (kMaxRank - rank), bc.dims.end());
  return bc;
}

template <typename F>
void for_each_broadcast(const Broadcast& bc, F&& f) {
  const auto& d = bc.dims;
  std::size_t o = 0;
  for (std::size_t i0 = 0; i0 < d[0]; ++i0)
    for (std::size_t i1 = 0; i1 < d[1]; ++i1)
      for (std::size_t i2 = 0; i2 < d[2]; ++i2) {
        const std::size_t base_a = i0 * bc.stride_a[0] + i1 * bc.stride_a[1] + i2 * bc.stride_a[2];
        const std::size_t base_b = i0 * bc.stride_b[0] + i1 * bc.stride_b[1] + i2 * bc.stride_b[2];
        for (std::size_t i3 = 0; i3 < d[3]; ++i3, ++o) {
          f(o, base_a + i3 * bc.stride_a[3], base_b + i3 * bc.stride_b[3]);
        }
      }
}

// View of a shape as [outer, n, inner] around one axis.
struct AxisView {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const std::string& op, const Shape& s, std::size_t axis) {
  if (axis >= s.size()) shape_fail(op, s, "has no axis " + std::to_string(axis));
  AxisView v;
  for (std::size_t d = 0; d < axis; ++d) v.outer *= s[d];
  v.n = s[axis];
  for (std::size_t d = axis + 1; d < s.size(); ++d) v.inner *= s[d];
  return v;
}

template <typename S, typename Fwd, typename Bwd>
Var<S> unary_map(Var<S> x, Fwd fwd, Bwd bwd) {
  auto xv = x.value();
  std::vector<S> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const std::size_t xid = x.id();
  std::array<Var<S>, 1> in{x};
  return x.tape().record(x.shape(), std::move(out), in, [xid, bwd](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto y = t.value(self);
    auto xs = t.value(xid);
    auto gx = t.grad_accumulator(xid);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * bwd(xs[i], y[i]);
  });
}

}  // namespace

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  same_tape("matmul", a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) shape_fail("matmul", sa, sb);
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  std::vector<S> out(m * n, S(0));
  kernels::gemm_nn(m, n, k, a.value().data(), b.value().data(), out.data());
  const std::size_t aid = a.id(), bid = b.id();
  std::array<Var<S>, 2> in{a, b};
  return a.tape().record({m, n}, std::move(out), in, [=](Tape<S>& t, std::size_t self) {
    const S* g = t.grad(self).data();
    auto ga = t.grad_accumulator(aid);
    if (!ga.empty()) kernels::gemm_nt(m, k, n, g, t.value(bid).data(), ga.data());
    auto gb = t.grad_accumulator(bid);
    if (!gb.empty()) kernels::gemm_tn(k, n, m, t.value(aid).data(), g, gb.data());
  });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  same_tape("add", a, b);
  Broadcast bc = make_broadcast("add", a.shape(), b.shape());
  auto av = a.value();
  auto bv = b.value();
  std::vector<S> out(shape_size(bc.out));
  if (bc.same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  } else {
    for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = av[ia] + bv[ib]; });
  }
  const std::size_t aid = a.id(), bid = b.id();
  std::array<Var<S>, 2> in{a, b};
  Shape out_shape = bc.out;
  return a.tape().record(std::move(out_shape), std::move(out), in,
                         [aid, bid, bc = std::move(bc)](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto ga = t.grad_accumulator(aid);
    auto gb = t.grad_accumulator(bid);
    if (bc.same) {
      if (!ga.empty()) for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      if (!gb.empty()) for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      return;
    }
    for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      if (!ga.empty()) ga[ia] += g[o];
      if (!gb.empty()) gb[ib] += g[o];
    });
  });
}

template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  same_tape("mul", a, b);
  Broadcast bc = make_broadcast("mul", a.shape(), b.shape());
  auto av = a.value();
  auto bv = b.value();
  std::vector<S> out(shape_size(bc.out));
  if (bc.same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  } else {
    for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = av[ia] * bv[ib]; });
  }
  const std::size_t aid = a.id(), bid = b.id();
  std::array<Var<S>, 2> in{a, b};
  Shape out_shape = bc.out;
  return a.tape().record(std::move(out_shape), std::move(out), in,
                         [aid, bid, bc = std::move(bc)](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto av = t.value(aid);
    auto bv = t.value(bid);
    auto ga = t.grad_accumulator(aid);
    auto gb = t.grad_accumulator(bid);
    if (bc.same) {
      if (!ga.empty()) for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      if (!gb.empty()) for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      return;
    }
    for_each_broadcast(bc, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      if (!ga.empty()) ga[ia] += g[o] * bv[ib];
      if (!gb.empty()) gb[ib] += g[o] * av[ia];
    });
  });
}

template <typename S>
Var<S> concat(std::span<const Var<S>> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  Shape out_shape = first;
  if (axis >= first.size()) shape_fail("concat", first, "has no axis " + std::to_string(axis));
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    same_tape("concat", parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_fail("concat", first, s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) shape_fail("concat", first, s);
    }
    out_shape[axis] += s[axis];
  }
  const AxisView ov = axis_view("concat", out_shape, axis);
  std::vector<S> out(shape_size(out_shape));
  std::vector<std::size_t> ids, widths;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.shape()[axis] * ov.inner;
    auto v = p.value();
    for (std::size_t o = 0; o < ov.outer; ++o) {
      std::copy_n(v.begin() + o * w, w, out.begin() + o * ov.n * ov.inner + offset);
    }
    offset += w;
    ids.push_back(p.id());
    widths.push_back(w);
  }
  return parts[0].tape().record(std::move(out_shape), std::move(out), parts,
                                [ov, ids, widths](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto gi = t.grad_accumulator(ids[i]);
      const std::size_t w = widths[i];
      if (!gi.empty()) {
        for (std::size_t o = 0; o < ov.outer; ++o) {
          const S* src = g.data() + o * ov.n * ov.inner + off;
          S* dst = gi.data() + o * w;
          for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
        }
      }
      off += w;
    }
  });
}

template <typename S>
Var<S> slice(Var<S> x, std::size_t axis, std::size_t begin, std::size_t end) {
  const AxisView v = axis_view("slice", x.shape(), axis);
  if (begin > end || end > v.n) {
    shape_fail("slice", x.shape(),
               "cannot be sliced to [" + std::to_string(begin) + "," + std::to_string(end) + ")");
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t w = (end - begin) * v.inner;
  auto xv = x.value();
  std::vector<S> out(v.outer * w);
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(xv.begin() + o * v.n * v.inner + begin * v.inner, w, out.begin() + o * w);
  }
  const std::size_t xid = x.id();
  std::array<Var<S>, 1> in{x};
  return x.tape().record(std::move(out_shape), std::move(out), in,
                         [xid, v, w, begin](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto gx = t.grad_accumulator(xid);
    if (gx.empty()) return;
    for (std::size_t o = 0; o < v.outer; ++o) {
      S* dst = gx.data() + o * v.n * v.inner + begin * v.inner;
      const S* src = g.data() + o * w;
      for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
    }
  });
}

template <typename S>
Var<S> reshape(Var<S> x, Shape shape) {
  if (shape_size(shape) != x.size()) shape_fail("reshape", x.shape(), shape);
  auto xv = x.value();
  std::vector<S> out(xv.begin(), xv.end());
  const std::size_t xid = x.id();
  std::array<Var<S>, 1> in{x};
  return x.tape().record(std::move(shape), std::move(out), in, [xid](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto gx = t.grad_accumulator(xid);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <typename S>
Var<S> tanh(Var<S> x) {
  return unary_map(x, [](S v) { return std::tanh(v); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> sigmoid(Var<S> x) {
  return unary_map(
      x,
      [](S v) {
        // Split on sign so exp never overflows.
        if (v >= 0) return S(1) / (S(1) + std::exp(-v));
        const S e = std::exp(v);
        return e / (S(1) + e);
      },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> exp(Var<S> x) {
  return unary_map(x, [](S v) { return std::exp(v); }, [](S, S y) { return y; });
}

template <typename S>
Var<S> log(Var<S> x) {
  return unary_map(x, [](S v) { return std::log(v); }, [](S v, S) { return S(1) / v; });
}

template <typename S>
Var<S> softmax(Var<S> x) {
  const Shape& s = x.shape();
  if (s.empty()) shape_fail("softmax", s, "is a scalar");
  const std::size_t n = s.back();
  const std::size_t rows = x.size() / std::max<std::size_t>(n, 1);
  auto xv = x.value();
  std::vector<S> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const S* in = xv.data() + r * n;
    S* o = out.data() + r * n;
    const S mx = *std::max_element(in, in + n);
    S z = 0;
    for (std::size_t j = 0; j < n; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  const std::size_t xid = x.id();
  std::array<Var<S>, 1> in{x};
  return x.tape().record(s, std::move(out), in, [xid, rows, n](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto y = t.value(self);
    auto gx = t.grad_accumulator(xid);
    if (gx.empty()) return;
    for (std::size_t r = 0; r < rows; ++r) {
      S dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

template <typename S>
Var<S> logsumexp(Var<S> x, std::size_t axis, bool keepdim) {
  const AxisView v = axis_view("logsumexp", x.shape(), axis);
  if (v.n == 0) shape_fail("logsumexp", x.shape(), "reduces an empty axis");
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  auto xv = x.value();
  std::vector<S> out(v.outer * v.inner);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t in = 0; in < v.inner; ++in) {
      const S* base = xv.data() + o * v.n * v.inner + in;
      S mx = -std::numeric_limits<S>::infinity();
      for (std::size_t i = 0; i < v.n; ++i) mx = std::max(mx, base[i * v.inner]);
      S acc = 0;
      if (std::isinf(mx)) {
        out[o * v.inner + in] = mx;
        continue;
      }
      for (std::size_t i = 0; i < v.n; ++i) acc += std::exp(base[i * v.inner] - mx);
      out[o * v.inner + in] = mx + std::log(acc);
    }
  }
  const std::size_t xid = x.id();
  std::array<Var<S>, 1> in{x};
  return x.tape().record(std::move(out_shape), std::move(out), in, [xid, v](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto y = t.value(self);
    auto xs = t.value(xid);
    auto gx = t.grad_accumulator(xid);
    if (gx.empty()) return;
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t in = 0; in < v.inner; ++in) {
        const std::size_t r = o * v.inner + in;
        const std::size_t base = o * v.n * v.inner + in;
        for (std::size_t i = 0; i < v.n; ++i) {
          const std::size_t k = base + i * v.inner;
          gx[k] += g[r] * std::exp(xs[k] - y[r]);
        }
      }
    }
  });
}

template <typename S>
Var<S> gather_rows(Var<S> table, std::span<const int> indices) {
  const Shape& s = table.shape();
  if (s.size() != 2) shape_fail("gather_rows", s, "is not a [rows x dim] table");
  const std::size_t rows = s[0], dim = s[1];
  auto tv = table.value();
  std::vector<S> out(indices.size() * dim);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= rows) {
      throw ShapeError("gather_rows: index " + std::to_string(idx) + " outside table " +
                       shape_string(s));
    }
    std::copy_n(tv.begin() + static_cast<std::size_t>(idx) * dim, dim, out.begin() + i * dim);
  }
  const std::size_t tid = table.id();
  std::vector<int> idx(indices.begin(), indices.end());
  std::array<Var<S>, 1> in{table};
  return table.tape().record({indices.size(), dim}, std::move(out), in,
                             [tid, dim, idx = std::move(idx)](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto gt = t.grad_accumulator(tid);
    if (gt.empty()) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      S* dst = gt.data() + static_cast<std::size_t>(idx[i]) * dim;
      const S* src = g.data() + i * dim;
      for (std::size_t j = 0; j < dim; ++j) dst[j] += src[j];
    }
  });
}

template <typename S>
Var<S> dropout(Var<S> x, const Array<S>& mask) {
  if (mask.shape != x.shape()) shape_fail("dropout", x.shape(), mask.shape);
  auto xv = x.value();
  std::vector<S> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask.data[i];
  const std::size_t xid = x.id();
  std::array<Var<S>, 1> in{x};
  return x.tape().record(x.shape(), std::move(out), in,
                         [xid, m = mask.data](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto gx = t.grad_accumulator(xid);
    if (gx.empty()) return;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * m[i];
  });
}

template <typename S>
Var<S> sum(Var<S> x) {
  S acc = 0;
  for (S v : x.value()) acc += v;
  const std::size_t xid = x.id();
  std::array<Var<S>, 1> in{x};
  return x.tape().record({}, {acc}, in, [xid](Tape<S>& t, std::size_t self) {
    const S g = t.grad(self)[0];
    auto gx = t.grad_accumulator(xid);
    for (auto& v : gx) v += g;
  });
}

template <typename S>
Var<S> mean(Var<S> x) {
  const std::size_t n = x.size();
  if (n == 0) shape_fail("mean", x.shape(), "is empty");
  S acc = 0;
  for (S v : x.value()) acc += v;
  const std::size_t xid = x.id();
  std::array<Var<S>, 1> in{x};
  return x.tape().record({}, {acc / static_cast<S>(n)}, in, [xid, n](Tape<S>& t, std::size_t self) {
    const S g = t.grad(self)[0] / static_cast<S>(n);
    auto gx = t.grad_accumulator(xid);
    for (auto& v : gx) v += g;
  });
}

template <typename S>
Var<S> sum_axis(Var<S> x, std::size_t axis, bool keepdim) {
  const AxisView v = axis_view("sum_axis", x.shape(), axis);
  Shape out_shape = x.shape();
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  auto xv = x.value();
  std::vector<S> out(v.outer * v.inner, S(0));
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.n; ++i)
      for (std::size_t in = 0; in < v.inner; ++in)
        out[o * v.inner + in] += xv[(o * v.n + i) * v.inner + in];
  const std::size_t xid = x.id();
  std::array<Var<S>, 1> in{x};
  return x.tape().record(std::move(out_shape), std::move(out), in, [xid, v](Tape<S>& t, std::size_t self) {
    auto g = t.grad(self);
    auto gx = t.grad_accumulator(xid);
    if (gx.empty()) return;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < v.n; ++i)
        for (std::size_t in = 0; in < v.inner; ++in)
          gx[(o * v.n + i) * v.inner + in] += g[o * v.inner + in];
  });
}

template <typename S>
Var<S> scale(Var<S> x, S factor) {
  return mul(x, x.tape().constant(Array<S>({}, factor)));
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  return add(a, scale(b, S(-1)));
}

#define SEQCRF_INSTANTIATE_OPS(S)                                                  \
  template Var<S> matmul<S>(Var<S>, Var<S>);                                       \
  template Var<S> add<S>(Var<S>, Var<S>);                                          \
  template Var<S> mul<S>(Var<S>, Var<S>);                                          \
  template Var<S> concat<S>(std::span<const Var<S>>, std::size_t);                 \
  template Var<S> slice<S>(Var<S>, std::size_t, std::size_t, std::size_t);         \
  template Var<S> reshape<S>(Var<S>, Shape);                                       \
  template Var<S> tanh<S>(Var<S>);                                                 \
  template Var<S> sigmoid<S>(Var<S>);                                              \
  template Var<S> exp<S>(Var<S>);                                                  \
  template Var<S> log<S>(Var<S>);                                                  \
  template Var<S> softmax<S>(Var<S>);                                              \
  template Var<S> logsumexp<S>(Var<S>, std::size_t, bool);                         \
  template Var<S> gather_rows<S>(Var<S>, std::span<const int>);                    \
  template Var<S> dropout<S>(Var<S>, const Array<S>&);                             \
  template Var<S> sum<S>(Var<S>);                                                  \
  template Var<S> mean<S>(Var<S>);                                                 \
  template Var<S> sum_axis<S>(Var<S>, std::size_t, bool);                          \
  template Var<S> scale<S>(Var<S>, S);                                             \
  template Var<S> sub<S>(Var<S>, Var<S>);

SEQCRF_INSTANTIATE_OPS(float)
SEQCRF_INSTANTIATE_OPS(double)

#undef SEQCRF_INSTANTIATE_OPS

}  // namespace ag
}  // namespace seqcrf
