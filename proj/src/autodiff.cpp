#include "indexcast/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace indexcast::nn {

namespace {

void resize_like(Tensor& t, int rows, int cols) {
  if (t.rows != rows || t.cols != cols) {
    t.resize(rows, cols);
  }
}

}  // namespace

// Growing the pool can move every existing node, so builders must take
// value() references only after this call.
Tape::Node& Tape::fresh() {
  if (n_used_ == static_cast<int>(nodes_.size())) {
    nodes_.emplace_back();
  }
  Node& n = nodes_[static_cast<std::size_t>(n_used_)];
  n.op = Op::kInput;
  n.requires_grad = false;
  n.a = n.b = n.c = -1;
  n.parents.clear();
  n.ext_value = nullptr;
  n.ext_grad = nullptr;
  n.iaux.clear();
  n.scale = 1.0;
  return n;
}

Tape::Id Tape::finish(Node& n) {
  if (!n.ext_value) {
    resize_like(n.grad, n.value.rows, n.value.cols);
    n.grad.fill(0.0);
  }
  return n_used_++;
}

const Tensor& Tape::value(Id id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ext_value ? *n.ext_value : n.value;
}

void Tape::check_vector(Id id, const char* who) const {
  const Tensor& t = value(id);
  if (t.cols != 1) {
    throw model_error(std::string(who) + ": expected a column vector, got " +
                      std::to_string(t.rows) + "x" + std::to_string(t.cols));
  }
}

Tape::Id Tape::input(const double* values, int len) {
  Node& n = fresh();
  n.op = Op::kInput;
  resize_like(n.value, len, 1);
  std::copy(values, values + len, n.value.data.begin());
  return finish(n);
}

Tape::Id Tape::input(const Tensor& t) {
  Node& n = fresh();
  n.op = Op::kInput;
  resize_like(n.value, t.rows, t.cols);
  n.value.data = t.data;
  return finish(n);
}

Tape::Id Tape::param(const Tensor* value, Tensor* grad) {
  if (value->rows != grad->rows || value->cols != grad->cols) {
    throw model_error("param: value and gradient shapes differ");
  }
  Node& n = fresh();
  n.op = Op::kParam;
  n.requires_grad = true;
  n.ext_value = value;
  n.ext_grad = grad;
  return finish(n);
}

Tape::Id Tape::constant_ref(const Tensor* value) {
  Node& n = fresh();
  n.op = Op::kParam;
  n.ext_value = value;
  return finish(n);
}

Tape::Id Tape::affine(Id w, Id x, Id b) {
  check_vector(x, "affine");
  check_vector(b, "affine");
  if (value(w).cols != value(x).rows || value(w).rows != value(b).rows) {
    throw model_error("affine: shape mismatch " + std::to_string(value(w).rows) + "x" +
                      std::to_string(value(w).cols) + " * " + std::to_string(value(x).rows) +
                      " + " + std::to_string(value(b).rows));
  }
  Node& n = fresh();
  const Tensor& wv = value(w);
  const Tensor& xv = value(x);
  const Tensor& bv = value(b);
  n.op = Op::kAffine;
  n.a = w;
  n.b = x;
  n.c = b;
  n.requires_grad = nodes_[static_cast<std::size_t>(w)].requires_grad ||
                    nodes_[static_cast<std::size_t>(x)].requires_grad ||
                    nodes_[static_cast<std::size_t>(b)].requires_grad;
  resize_like(n.value, wv.rows, 1);
  const double* wp = wv.data.data();
  const double* xp = xv.data.data();
  for (int r = 0; r < wv.rows; ++r) {
    const double* row = wp + static_cast<std::size_t>(r) * wv.cols;
    double acc = 0;
    for (int c = 0; c < wv.cols; ++c) acc += row[c] * xp[c];
    n.value[r] = acc + bv[r];
  }
  return finish(n);
}

Tape::Id Tape::relu(Id x) {
  Node& n = fresh();
  const Tensor& xv = value(x);
  n.op = Op::kRelu;
  n.a = x;
  n.requires_grad = nodes_[static_cast<std::size_t>(x)].requires_grad;
  resize_like(n.value, xv.rows, xv.cols);
  for (int i = 0; i < xv.size(); ++i) n.value[i] = xv[i] > 0 ? xv[i] : 0.0;
  return finish(n);
}

Tape::Id Tape::dropout(Id x, double p, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw model_error("dropout: p must be in [0, 1)");
  Node& n = fresh();
  const Tensor& xv = value(x);
  n.op = Op::kDropout;
  n.a = x;
  n.requires_grad = nodes_[static_cast<std::size_t>(x)].requires_grad;
  resize_like(n.value, xv.rows, xv.cols);
  resize_like(n.aux, xv.rows, xv.cols);
  double keep = 1.0 / (1.0 - p);
  for (int i = 0; i < xv.size(); ++i) {
    n.aux[i] = rng.uniform() < p ? 0.0 : keep;
    n.value[i] = xv[i] * n.aux[i];
  }
  return finish(n);
}

Tape::Id Tape::concat(const std::vector<Id>& xs) {
  if (xs.empty()) throw model_error("concat: no inputs");
  int total = 0;
  bool req = false;
  for (Id id : xs) {
    check_vector(id, "concat");
    total += value(id).rows;
    req = req || nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  Node& n = fresh();
  n.op = Op::kConcat;
  n.parents = xs;
  n.requires_grad = req;
  resize_like(n.value, total, 1);
  int at = 0;
  for (Id id : xs) {
    const Tensor& t = value(id);
    std::copy(t.data.begin(), t.data.end(), n.value.data.begin() + at);
    at += t.rows;
  }
  return finish(n);
}

Tape::Id Tape::pool_max(const std::vector<Id>& xs) {
  if (xs.empty()) throw model_error("pool: no inputs");
  int rows = value(xs[0]).rows;
  bool req = false;
  for (Id id : xs) {
    check_vector(id, "pool");
    if (value(id).rows != rows) throw model_error("pool: input shapes differ");
    req = req || nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  Node& n = fresh();
  n.op = Op::kPoolMax;
  n.parents = xs;
  n.requires_grad = req;
  resize_like(n.value, rows, 1);
  n.iaux.assign(static_cast<std::size_t>(rows), 0);
  for (int r = 0; r < rows; ++r) {
    double best = value(xs[0])[r];
    int arg = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      double v = value(xs[i])[r];
      if (v > best) {
        best = v;
        arg = static_cast<int>(i);
      }
    }
    n.value[r] = best;
    n.iaux[static_cast<std::size_t>(r)] = arg;
  }
  return finish(n);
}

Tape::Id Tape::pool_min(const std::vector<Id>& xs) {
  if (xs.empty()) throw model_error("pool: no inputs");
  int rows = value(xs[0]).rows;
  bool req = false;
  for (Id id : xs) {
    check_vector(id, "pool");
    if (value(id).rows != rows) throw model_error("pool: input shapes differ");
    req = req || nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  Node& n = fresh();
  n.op = Op::kPoolMin;
  n.parents = xs;
  n.requires_grad = req;
  resize_like(n.value, rows, 1);
  n.iaux.assign(static_cast<std::size_t>(rows), 0);
  for (int r = 0; r < rows; ++r) {
    double best = value(xs[0])[r];
    int arg = 0;
    for (std::size_t i = 1; i < xs.size(); ++i) {
      double v = value(xs[i])[r];
      if (v < best) {
        best = v;
        arg = static_cast<int>(i);
      }
    }
    n.value[r] = best;
    n.iaux[static_cast<std::size_t>(r)] = arg;
  }
  return finish(n);
}

Tape::Id Tape::pool_mean(const std::vector<Id>& xs) {
  if (xs.empty()) throw model_error("pool: no inputs");
  int rows = value(xs[0]).rows;
  bool req = false;
  for (Id id : xs) {
    check_vector(id, "pool");
    if (value(id).rows != rows) throw model_error("pool: input shapes differ");
    req = req || nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  Node& n = fresh();
  n.op = Op::kPoolMean;
  n.parents = xs;
  n.requires_grad = req;
  resize_like(n.value, rows, 1);
  // Summing in sorted order makes the result independent of input order.
  sort_buf_.resize(xs.size());
  for (int r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < xs.size(); ++i) sort_buf_[i] = value(xs[i])[r];
    std::sort(sort_buf_.begin(), sort_buf_.end());
    double acc = 0;
    for (double v : sort_buf_) acc += v;
    n.value[r] = acc / static_cast<double>(xs.size());
  }
  return finish(n);
}

Tape::Id Tape::add(Id a, Id b) {
  if (value(a).rows != value(b).rows || value(a).cols != value(b).cols) {
    throw model_error("add: shape mismatch");
  }
  Node& n = fresh();
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[static_cast<std::size_t>(a)].requires_grad ||
                    nodes_[static_cast<std::size_t>(b)].requires_grad;
  resize_like(n.value, av.rows, av.cols);
  for (int i = 0; i < av.size(); ++i) n.value[i] = av[i] + bv[i];
  return finish(n);
}

Tape::Id Tape::scale(Id a, double c) {
  Node& n = fresh();
  const Tensor& av = value(a);
  n.op = Op::kScale;
  n.a = a;
  n.scale = c;
  n.requires_grad = nodes_[static_cast<std::size_t>(a)].requires_grad;
  resize_like(n.value, av.rows, av.cols);
  for (int i = 0; i < av.size(); ++i) n.value[i] = c * av[i];
  return finish(n);
}

Tape::Id Tape::loss_weighted_ce(Id logits, const codec::BinaryCode& truth,
                                const losses::BitWeights& w) {
  const Tensor& lv = value(logits);
  if (lv.rows != codec::kLogits || lv.cols != 1) {
    throw model_error("loss: logits must be a " + std::to_string(codec::kLogits) + "-vector");
  }
  std::array<double, codec::kLogits> a{};
  std::copy(lv.data.begin(), lv.data.end(), a.begin());
  losses::LossGrad lg = losses::weighted_ce_grad(truth, a, w);

  Node& n = fresh();
  n.op = Op::kLossCe;
  n.a = logits;
  n.requires_grad = nodes_[static_cast<std::size_t>(logits)].requires_grad;
  resize_like(n.value, 1, 1);
  n.value[0] = lg.value;
  resize_like(n.aux, codec::kLogits, 1);
  std::copy(lg.grad.begin(), lg.grad.end(), n.aux.data.begin());
  return finish(n);
}

Tape::Id Tape::loss_confidence(Id logits, const codec::BinaryCode& truth,
                               losses::GcVariant variant) {
  const Tensor& lv = value(logits);
  if (lv.rows != codec::kLogits || lv.cols != 1) {
    throw model_error("loss: logits must be a " + std::to_string(codec::kLogits) + "-vector");
  }
  std::array<double, codec::kLogits> a{};
  std::copy(lv.data.begin(), lv.data.end(), a.begin());
  losses::LossGrad lg = losses::confidence_reg_grad(truth, a, variant);

  Node& n = fresh();
  n.op = Op::kLossConf;
  n.a = logits;
  n.requires_grad = nodes_[static_cast<std::size_t>(logits)].requires_grad;
  resize_like(n.value, 1, 1);
  n.value[0] = lg.value;
  resize_like(n.aux, codec::kLogits, 1);
  std::copy(lg.grad.begin(), lg.grad.end(), n.aux.data.begin());
  return finish(n);
}

Tape::Id Tape::first_nonfinite_node() const {
  for (Id id = 0; id < n_used_; ++id) {
    const Tensor& v = val(nodes_[static_cast<std::size_t>(id)]);
    for (int i = 0; i < v.size(); ++i) {
      if (!std::isfinite(v[i])) return id;
    }
  }
  return -1;
}

int Tape::affine_nodes_before(Id id) const {
  int count = 0;
  for (Id i = 0; i <= id && i < n_used_; ++i) {
    if (nodes_[static_cast<std::size_t>(i)].op == Op::kAffine) ++count;
  }
  return count;
}

void Tape::backward(Id root) {
  if (root < 0 || root >= n_used_) throw model_error("backward: bad root id");
  Node& rn = nodes_[static_cast<std::size_t>(root)];
  if (val(rn).size() != 1) throw model_error("backward: root must be scalar");
  grad_of(rn)[0] += 1.0;

  for (Id id = root; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) continue;
    const Tensor& g = n.ext_grad ? *n.ext_grad : n.grad;
    switch (n.op) {
      case Op::kInput:
      case Op::kParam:
        break;
      case Op::kAffine: {
        Node& wn = nodes_[static_cast<std::size_t>(n.a)];
        Node& xn = nodes_[static_cast<std::size_t>(n.b)];
        Node& bn = nodes_[static_cast<std::size_t>(n.c)];
        const Tensor& wv = val(wn);
        const Tensor& xv = val(xn);
        if (wn.requires_grad) {
          Tensor& gw = grad_of(wn);
          for (int r = 0; r < wv.rows; ++r) {
            double gr = g[r];
            if (gr == 0.0) continue;
            double* row = gw.data.data() + static_cast<std::size_t>(r) * wv.cols;
            const double* xp = xv.data.data();
            for (int c = 0; c < wv.cols; ++c) row[c] += gr * xp[c];
          }
        }
        if (xn.requires_grad) {
          Tensor& gx = grad_of(xn);
          for (int r = 0; r < wv.rows; ++r) {
            double gr = g[r];
            if (gr == 0.0) continue;
            const double* row = wv.data.data() + static_cast<std::size_t>(r) * wv.cols;
            for (int c = 0; c < wv.cols; ++c) gx[c] += gr * row[c];
          }
        }
        if (bn.requires_grad) {
          Tensor& gb = grad_of(bn);
          for (int r = 0; r < wv.rows; ++r) gb[r] += g[r];
        }
        break;
      }
      case Op::kRelu: {
        Node& xn = nodes_[static_cast<std::size_t>(n.a)];
        if (xn.requires_grad) {
          Tensor& gx = grad_of(xn);
          for (int i = 0; i < n.value.size(); ++i) {
            if (n.value[i] > 0) gx[i] += g[i];
          }
        }
        break;
      }
      case Op::kDropout: {
        Node& xn = nodes_[static_cast<std::size_t>(n.a)];
        if (xn.requires_grad) {
          Tensor& gx = grad_of(xn);
          for (int i = 0; i < n.value.size(); ++i) gx[i] += g[i] * n.aux[i];
        }
        break;
      }
      case Op::kConcat: {
        int at = 0;
        for (Id pid : n.parents) {
          Node& pn = nodes_[static_cast<std::size_t>(pid)];
          int rows = val(pn).rows;
          if (pn.requires_grad) {
            Tensor& gp = grad_of(pn);
            for (int i = 0; i < rows; ++i) gp[i] += g[at + i];
          }
          at += rows;
        }
        break;
      }
      case Op::kPoolMax:
      case Op::kPoolMin: {
        for (int r = 0; r < n.value.rows; ++r) {
          Node& pn = nodes_[static_cast<std::size_t>(
              n.parents[static_cast<std::size_t>(n.iaux[static_cast<std::size_t>(r)])])];
          if (pn.requires_grad) grad_of(pn)[r] += g[r];
        }
        break;
      }
      case Op::kPoolMean: {
        double inv = 1.0 / static_cast<double>(n.parents.size());
        for (Id pid : n.parents) {
          Node& pn = nodes_[static_cast<std::size_t>(pid)];
          if (!pn.requires_grad) continue;
          Tensor& gp = grad_of(pn);
          for (int r = 0; r < n.value.rows; ++r) gp[r] += g[r] * inv;
        }
        break;
      }
      case Op::kAdd: {
        Node& an = nodes_[static_cast<std::size_t>(n.a)];
        Node& bn = nodes_[static_cast<std::size_t>(n.b)];
        if (an.requires_grad) {
          Tensor& ga = grad_of(an);
          for (int i = 0; i < n.value.size(); ++i) ga[i] += g[i];
        }
        if (bn.requires_grad) {
          Tensor& gb = grad_of(bn);
          for (int i = 0; i < n.value.size(); ++i) gb[i] += g[i];
        }
        break;
      }
      case Op::kScale: {
        Node& an = nodes_[static_cast<std::size_t>(n.a)];
        if (an.requires_grad) {
          Tensor& ga = grad_of(an);
          for (int i = 0; i < n.value.size(); ++i) ga[i] += g[i] * n.scale;
        }
        break;
      }
      case Op::kLossCe:
      case Op::kLossConf: {
        Node& ln = nodes_[static_cast<std::size_t>(n.a)];
        if (ln.requires_grad) {
          Tensor& gl = grad_of(ln);
          double gs = g[0];
          for (int i = 0; i < codec::kLogits; ++i) gl[i] += gs * n.aux[i];
        }
        break;
      }
    }
  }
}

}  // namespace indexcast::nn
