#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqcrf/array.hpp"

// Reverse-mode automatic differentiation over dense arrays.
//
// A Tape records every primitive applied to tracked inputs in creation order,
// which is a topological order by construction. backward() walks the record in
// reverse exactly once. A tape belongs to one thread; parameters referenced by
// a tape must not be mutated until the tape is discarded.
namespace seqcrf {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Trainable array. Tapes read `value` in place and accumulate into `grad`.
template <typename S>
struct Parameter {
  std::string name;
  Array<S> value;
  std::vector<S> grad;

  Parameter() = default;
  Parameter(std::string n, Shape shape)
      : name(std::move(n)), value(std::move(shape)), grad(value.size(), S(0)) {}

  void zero_grad() { std::fill(grad.begin(), grad.end(), S(0)); }
};

template <typename S>
class Tape;

// Handle to one node of a tape.
template <typename S>
class Var {
 public:
  Var() = default;
  Var(Tape<S>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<S>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  std::size_t size() const;
  std::span<const S> value() const;
  // Empty when no gradient reached this node.
  std::span<const S> grad() const;
  bool tracked() const;
  Array<S> to_array() const;
  // Value of a single-element node.
  S item() const;

 private:
  Tape<S>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename S>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> constant(Array<S> value);
  // Tracked leaf that owns its gradient buffer.
  Var<S> variable(Array<S> value);
  // Tracked leaf viewing p.value; backward accumulates into p.grad.
  Var<S> parameter(Parameter<S>& p);

  // Appends a node. The node is tracked (and fn retained) iff any input is.
  Var<S> record(Shape shape, std::vector<S> value, std::span<const Var<S>> inputs,
                BackwardFn fn);

  // Seeds d(root)/d(root) = 1 and propagates to every tracked leaf.
  void backward(Var<S> root);

  std::size_t size() const { return nodes_.size(); }
  std::size_t recorded_ops() const;
  std::size_t backward_visits() const { return backward_visits_; }

  const Shape& shape(std::size_t id) const { return nodes_[id].shape; }
  std::span<const S> value(std::size_t id) const;
  bool tracked(std::size_t id) const { return nodes_[id].tracked; }
  std::span<const S> grad(std::size_t id) const;
  // Gradient accumulator for an input; empty span when the node is untracked.
  std::span<S> grad_accumulator(std::size_t id);

 private:
  struct Node {
    Shape shape;
    std::vector<S> value;
    const S* external_value = nullptr;
    std::vector<S> grad;
    S* external_grad = nullptr;
    bool tracked = false;
    bool grad_touched = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::size_t backward_visits_ = 0;
};

// Primitive operations. Elementwise binary ops broadcast numpy-style (trailing
// alignment, size-1 dimensions stretch). All shape violations throw ShapeError
// naming the op and the offending shapes.
namespace ag {

template <typename S> Var<S> matmul(Var<S> a, Var<S> b);
template <typename S> Var<S> add(Var<S> a, Var<S> b);
template <typename S> Var<S> mul(Var<S> a, Var<S> b);
template <typename S> Var<S> concat(std::span<const Var<S>> parts, std::size_t axis);
template <typename S> Var<S> slice(Var<S> x, std::size_t axis, std::size_t begin, std::size_t end);
template <typename S> Var<S> reshape(Var<S> x, Shape shape);
template <typename S> Var<S> tanh(Var<S> x);
template <typename S> Var<S> sigmoid(Var<S> x);
template <typename S> Var<S> exp(Var<S> x);
template <typename S> Var<S> log(Var<S> x);
// Softmax over the last axis.
template <typename S> Var<S> softmax(Var<S> x);
// Max-stabilised log-sum-exp over `axis`; the axis is removed unless keepdim.
template <typename S> Var<S> logsumexp(Var<S> x, std::size_t axis, bool keepdim = false);
// Rows of `table` ([V,E]) selected by `indices` -> [n,E].
template <typename S> Var<S> gather_rows(Var<S> table, std::span<const int> indices);
// Multiplies by a fixed (non-differentiable) mask of the same shape.
template <typename S> Var<S> dropout(Var<S> x, const Array<S>& mask);
template <typename S> Var<S> sum(Var<S> x);
template <typename S> Var<S> mean(Var<S> x);
template <typename S> Var<S> sum_axis(Var<S> x, std::size_t axis, bool keepdim = false);

// Compositions of the primitives above.
template <typename S> Var<S> scale(Var<S> x, S factor);
template <typename S> Var<S> sub(Var<S> a, Var<S> b);
template <typename S> Var<S> concat(std::initializer_list<Var<S>> parts, std::size_t axis) {
  std::vector<Var<S>> v(parts);
  return concat<S>(std::span<const Var<S>>(v), axis);
}

}  // namespace ag

extern template class Tape<float>;
extern template class Tape<double>;
extern template class Var<float>;
extern template class Var<double>;

}  // namespace seqcrf
