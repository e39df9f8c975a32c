#pragma once

#include <cstdint>
#include <vector>

#include "indexcast/codec.hpp"
#include "indexcast/errors.hpp"
#include "indexcast/losses.hpp"
#include "indexcast/rng.hpp"

namespace indexcast::nn {

// Dense row-major matrix of doubles. Vectors are n x 1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  int size() const { return rows * cols; }
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double& operator[](int i) { return data[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data[static_cast<std::size_t>(i)]; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  void resize(int r, int c) {
    rows = r;
    cols = c;
    data.assign(static_cast<std::size_t>(r) * c, 0.0);
  }
};

// Reverse-mode gradient tape over tensor operations. A graph is rebuilt for
// every sample; node slots (and their buffers) are recycled across rebuilds,
// so steady-state graph construction does not allocate.
//
// Parameters enter as leaves that reference external value/gradient tensors;
// backward() accumulates (+=) into those gradient sinks, which lets a
// training batch sum per-sample gradients before an optimizer step.
class Tape {
 public:
  using Id = int;

  // Leaf that copies `len` doubles; carries no gradient.
  Id input(const double* values, int len);
  Id input(const Tensor& t);

  // Leaf referencing an external parameter and its gradient sink.
  Id param(const Tensor* value, Tensor* grad);

  // Leaf referencing an external tensor without a gradient (eval passes).
  Id constant_ref(const Tensor* value);

  // w [m x n] * x [n x 1] + b [m x 1]
  Id affine(Id w, Id x, Id b);
  Id relu(Id x);

  // Multiplies by an inverted-dropout mask drawn from rng: each entry is
  // 0 with probability p, else 1 / (1 - p). p = 0 is an exact identity.
  Id dropout(Id x, double p, Rng& rng);

  // Stacks column vectors.
  Id concat(const std::vector<Id>& xs);

  // Element-wise pools over same-shape vectors. Ties in max/min route the
  // gradient to the first input; the mean is summed in value order so the
  // result is identical under any permutation of the inputs.
  Id pool_max(const std::vector<Id>& xs);
  Id pool_mean(const std::vector<Id>& xs);
  Id pool_min(const std::vector<Id>& xs);

  Id add(Id a, Id b);        // same shape
  Id scale(Id a, double c);

  // Scalar loss nodes over a 30-logit vector; gradients are the analytic
  // forms from the losses module.
  Id loss_weighted_ce(Id logits, const codec::BinaryCode& truth,
                      const losses::BitWeights& w);
  Id loss_confidence(Id logits, const codec::BinaryCode& truth, losses::GcVariant variant);

  const Tensor& value(Id id) const;

  // Seeds d(root)/d(root) = 1 and accumulates gradients down the graph.
  // root must be scalar.
  void backward(Id root);

  // Forgets the graph but keeps node buffers for reuse.
  void clear() { n_used_ = 0; }

  int size() const { return n_used_; }

  // Diagnostics for non-finite forward passes.
  Id first_nonfinite_node() const;     // -1 when all values are finite
  int affine_nodes_before(Id id) const;

 private:
  enum class Op : std::uint8_t {
    kInput,
    kParam,
    kAffine,
    kRelu,
    kDropout,
    kConcat,
    kPoolMax,
    kPoolMean,
    kPoolMin,
    kAdd,
    kScale,
    kLossCe,
    kLossConf,
  };

  struct Node {
    Op op = Op::kInput;
    bool requires_grad = false;
    Id a = -1;
    Id b = -1;
    Id c = -1;
    std::vector<Id> parents;   // concat / pool inputs
    Tensor value;              // owned result (unused for param leaves)
    Tensor grad;
    const Tensor* ext_value = nullptr;
    Tensor* ext_grad = nullptr;
    Tensor aux;                // dropout mask or cached d(loss)/d(logits)
    std::vector<int> iaux;     // pool argmax/argmin selections
    double scale = 1.0;
  };

  Node& fresh();
  Id finish(Node& n);  // zero-fills the grad buffer, assigns the id

  const Tensor& val(const Node& n) const { return n.ext_value ? *n.ext_value : n.value; }
  Tensor& grad_of(Node& n) { return n.ext_grad ? *n.ext_grad : n.grad; }

  void check_vector(Id id, const char* who) const;

  std::vector<Node> nodes_;
  int n_used_ = 0;
  std::vector<double> sort_buf_;
};

}  // namespace indexcast::nn
