#ifndef LISNOW_TENSOR_HPP
#define LISNOW_TENSOR_HPP

#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace lisnow {

// Minimal reverse-mode tape. A Tensor is a handle to a node holding dense
// values, optional gradient storage, and a closure that pushes the node's
// gradient into its parents. Scalar type S is double for training and
// correctness tests, float for fast inference.
template <class S>
struct TensorNode {
  std::vector<int> shape;
  std::vector<S> val;
  std::vector<S> grad;  // allocated lazily, same length as val
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backprop;  // accumulate this->grad into parents

  std::size_t numel() const { return val.size(); }
  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), S(0));
  }
};

template <class S>
class Tensor {
 public:
  using Node = TensorNode<S>;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    n->shape = std::move(shape);
    n->val.assign(count, S(0));
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from(std::vector<int> shape, std::vector<S> vals, bool requires_grad = false) {
    auto t = zeros(std::move(shape), requires_grad);
    if (vals.size() != t.numel()) throw std::invalid_argument("tensor: value count mismatch");
    t.n_->val = std::move(vals);
    return t;
  }

  bool defined() const { return n_ != nullptr; }
  const std::vector<int>& shape() const { return n_->shape; }
  std::size_t numel() const { return n_->val.size(); }
  std::vector<S>& values() { return n_->val; }
  const std::vector<S>& values() const { return n_->val; }
  std::vector<S>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  bool has_grad() const { return n_->grad.size() == n_->val.size(); }
  bool requires_grad() const { return n_->requires_grad; }
  std::shared_ptr<Node> node() const { return n_; }

  S item() const {
    if (numel() != 1) throw std::invalid_argument("item() on non-scalar tensor");
    return n_->val[0];
  }

  bool all_finite() const {
    for (S v : n_->val)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  int dim(int i) const { return n_->shape[i]; }

  // Reverse pass from a scalar root: seeds d(root)/d(root) = 1 and walks the
  // tape in reverse topological order.
  void backward() {
    if (numel() != 1) throw std::invalid_argument("backward() requires a scalar root");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.push_back({n_.get(), 0});
    seen.insert(n_.get());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        Node* parent = node->parents[next++].get();
        if (seen.insert(parent).second) stack.push_back({parent, 0});
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    n_->ensure_grad();
    n_->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backprop) (*it)->backprop();
  }

 private:
  std::shared_ptr<Node> n_;
};

namespace ops {

template <class S>
std::shared_ptr<TensorNode<S>> make_node(std::vector<int> shape,
                                         std::vector<std::shared_ptr<TensorNode<S>>> parents) {
  auto n = std::make_shared<TensorNode<S>>();
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  n->shape = std::move(shape);
  n->val.assign(count, S(0));
  n->parents = std::move(parents);
  for (const auto& p : n->parents) n->requires_grad = n->requires_grad || p->requires_grad;
  return n;
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("add: shape mismatch");
  auto n = make_node<S>(a.shape(), {a.node(), b.node()});
  for (std::size_t i = 0; i < n->val.size(); ++i) n->val[i] = a.values()[i] + b.values()[i];
  auto out = n.get();
  n->backprop = [out]() {
    for (int side = 0; side < 2; ++side) {
      auto& p = *out->parents[side];
      p.ensure_grad();
      for (std::size_t i = 0; i < out->grad.size(); ++i) p.grad[i] += out->grad[i];
    }
  };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("sub: shape mismatch");
  auto n = make_node<S>(a.shape(), {a.node(), b.node()});
  for (std::size_t i = 0; i < n->val.size(); ++i) n->val[i] = a.values()[i] - b.values()[i];
  auto out = n.get();
  n->backprop = [out]() {
    auto& pa = *out->parents[0];
    auto& pb = *out->parents[1];
    pa.ensure_grad();
    pb.ensure_grad();
    for (std::size_t i = 0; i < out->grad.size(); ++i) {
      pa.grad[i] += out->grad[i];
      pb.grad[i] -= out->grad[i];
    }
  };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, double c) {
  auto n = make_node<S>(a.shape(), {a.node()});
  const S cs = static_cast<S>(c);
  for (std::size_t i = 0; i < n->val.size(); ++i) n->val[i] = a.values()[i] * cs;
  auto out = n.get();
  n->backprop = [out, cs]() {
    auto& p = *out->parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < out->grad.size(); ++i) p.grad[i] += cs * out->grad[i];
  };
  return Tensor<S>(n);
}

// Sum of |x| over a channel range [c0, c1) of an NCHW tensor; the full-tensor
// L1 norm is the special case covering all channels. Subgradient 0 at 0.
template <class S>
Tensor<S> l1_sum_channels(const Tensor<S>& x, int c0, int c1) {
  if (x.shape().size() != 4) throw std::invalid_argument("l1_sum_channels: expected NCHW");
  const int nb = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c0 < 0 || c1 > c || c0 >= c1) throw std::invalid_argument("l1_sum_channels: bad range");
  auto n = make_node<S>({1}, {x.node()});
  const std::size_t plane = size_t(h) * w;
  double acc = 0.0;
  for (int b = 0; b < nb; ++b)
    for (int ch = c0; ch < c1; ++ch) {
      const S* p = x.values().data() + (size_t(b) * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += std::abs(static_cast<double>(p[i]));
    }
  n->val[0] = static_cast<S>(acc);
  auto out = n.get();
  n->backprop = [out, nb, c, c0, c1, plane]() {
    auto& p = *out->parents[0];
    p.ensure_grad();
    const S g = out->grad[0];
    for (int b = 0; b < nb; ++b)
      for (int ch = c0; ch < c1; ++ch) {
        const std::size_t off = (size_t(b) * c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const S v = p.val[off + i];
          if (v > S(0))
            p.grad[off + i] += g;
          else if (v < S(0))
            p.grad[off + i] -= g;
        }
      }
  };
  return Tensor<S>(n);
}

template <class S>
Tensor<S> l1_sum(const Tensor<S>& x) {
  if (x.shape().size() == 4) return l1_sum_channels(x, 0, x.dim(1));
  // generic fallback for flat tensors
  auto n = make_node<S>({1}, {x.node()});
  double acc = 0.0;
  for (S v : x.values()) acc += std::abs(static_cast<double>(v));
  n->val[0] = static_cast<S>(acc);
  auto out = n.get();
  n->backprop = [out]() {
    auto& p = *out->parents[0];
    p.ensure_grad();
    const S g = out->grad[0];
    for (std::size_t i = 0; i < p.val.size(); ++i) {
      if (p.val[i] > S(0))
        p.grad[i] += g;
      else if (p.val[i] < S(0))
        p.grad[i] -= g;
    }
  };
  return Tensor<S>(n);
}

// c0*t0 + c1*t1 + ... over scalar tensors.
template <class S>
Tensor<S> weighted_sum(const std::vector<Tensor<S>>& terms, const std::vector<double>& coeffs) {
  if (terms.empty() || terms.size() != coeffs.size())
    throw std::invalid_argument("weighted_sum: bad arguments");
  std::vector<std::shared_ptr<TensorNode<S>>> parents;
  for (const auto& t : terms) {
    if (t.numel() != 1) throw std::invalid_argument("weighted_sum: non-scalar term");
    parents.push_back(t.node());
  }
  auto n = make_node<S>({1}, std::move(parents));
  double acc = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i)
    acc += coeffs[i] * static_cast<double>(terms[i].values()[0]);
  n->val[0] = static_cast<S>(acc);
  auto out = n.get();
  auto cs = coeffs;
  n->backprop = [out, cs]() {
    for (std::size_t i = 0; i < out->parents.size(); ++i) {
      auto& p = *out->parents[i];
      p.ensure_grad();
      p.grad[0] += static_cast<S>(cs[i]) * out->grad[0];
    }
  };
  return Tensor<S>(n);
}

}  // namespace ops

}  // namespace lisnow

#endif  // LISNOW_TENSOR_HPP
