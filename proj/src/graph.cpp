#include "aetsep/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace aetsep {

namespace {

struct PadPlan {
  Index pad_left = 0;
  Index pad_right = 0;
  Index out_len = 0;
};

// Output length follows floor((T_padded - W) / stride) + 1. Same padding picks
// the smallest symmetric-ish pad (extra sample on the right) that yields
// ceil(T / stride) output frames.
PadPlan plan_padding(Index t, Index w, Index stride, Padding padding) {
  if (stride < 1) throw std::invalid_argument("conv stride must be >= 1");
  PadPlan p;
  if (padding == Padding::kSame) {
    Index out = (t + stride - 1) / stride;
    Index total = std::max<Index>(0, (out - 1) * stride + w - t);
    p.pad_left = total / 2;
    p.pad_right = total - p.pad_left;
  }
  Index padded = t + p.pad_left + p.pad_right;
  if (w > padded)
    throw std::invalid_argument("filter width " + std::to_string(w) +
                                " exceeds padded signal length " + std::to_string(padded));
  p.out_len = (padded - w) / stride + 1;
  return p;
}

Tensor pad_rows(const Tensor& x, Index pad_left, Index pad_right) {
  if (pad_left == 0 && pad_right == 0) return x;
  Index c = x.dim(0), t = x.dim(1);
  Tensor out({c, t + pad_left + pad_right});
  for (Index i = 0; i < c; ++i)
    std::copy(x.values.begin() + i * t, x.values.begin() + (i + 1) * t,
              out.values.begin() + i * (t + pad_left + pad_right) + pad_left);
  return out;
}

void check_rank(const NodePtr& n, int rank, const char* what) {
  if (n->value.rank() != rank)
    throw std::invalid_argument(std::string(what) + " must have rank " + std::to_string(rank) +
                                ", got shape " + shape_str(n->value.shape));
}

NodePtr finish(Tensor value, std::vector<NodePtr> parents,
               std::function<void(const GraphNode&)> backward_fn) {
  auto node = std::make_shared<GraphNode>();
  node->value = std::move(value);
  node->parents = std::move(parents);
  for (const auto& p : node->parents)
    if (p->requires_grad) node->requires_grad = true;
  if (node->requires_grad) node->backward_fn = std::move(backward_fn);
  return node;
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

NodePtr constant(Tensor value) {
  auto node = std::make_shared<GraphNode>();
  node->value = std::move(value);
  return node;
}

NodePtr parameter(Tensor value) {
  auto node = std::make_shared<GraphNode>();
  node->value = std::move(value);
  node->requires_grad = true;
  return node;
}

NodePtr make_op(Tensor forward, std::vector<NodePtr> parents,
                std::function<void(const GraphNode&)> backward_fn) {
  return finish(std::move(forward), std::move(parents), std::move(backward_fn));
}

void accumulate_grad(GraphNode& dst, const Tensor& src) {
  if (dst.grad.values.empty()) dst.grad = Tensor(dst.value.shape);
  double* d = dst.grad.data();
  const double* s = src.data();
  Index n = src.numel();
  for (Index i = 0; i < n; ++i) d[i] += s[i];
}

// ---------------------------------------------------------------------------
// Convolutions
// ---------------------------------------------------------------------------

NodePtr conv1d(const NodePtr& signal, const NodePtr& filters, Index stride, Padding padding) {
  check_rank(signal, 2, "conv1d signal");
  check_rank(filters, 3, "conv1d filters");
  Index c_in = signal->value.dim(0), t = signal->value.dim(1);
  Index c_out = filters->value.dim(0), w = filters->value.dim(2);
  if (filters->value.dim(1) != c_in)
    throw std::invalid_argument("conv1d channel mismatch: filters expect " +
                                std::to_string(filters->value.dim(1)) + " input channels, signal has " +
                                std::to_string(c_in));

  PadPlan pad = plan_padding(t, w, stride, padding);
  Tensor xpad = pad_rows(signal->value, pad.pad_left, pad.pad_right);
  Index tp = xpad.dim(1);

  Tensor out({c_out, pad.out_len});
  for (Index k = 0; k < c_out; ++k) {
    for (Index c = 0; c < c_in; ++c) {
      const double* xr = xpad.data() + c * tp;
      const double* fr = filters->value.data() + (k * c_in + c) * w;
      double* yr = out.data() + k * pad.out_len;
      for (Index n = 0; n < pad.out_len; ++n) {
        const double* xs = xr + n * stride;
        double acc = 0.0;
        for (Index i = 0; i < w; ++i) acc += xs[i] * fr[i];
        yr[n] += acc;
      }
    }
  }

  // Padded input is kept alive by the closure for the filter gradient.
  auto xpad_shared = std::make_shared<Tensor>(std::move(xpad));
  NodePtr sig = signal, fil = filters;
  Index pl = pad.pad_left, out_len = pad.out_len;
  return finish(std::move(out), {signal, filters}, [=](const GraphNode& self) {
    const Tensor& g = self.grad;
    if (fil->requires_grad) {
      Tensor gf(fil->value.shape);
      for (Index k = 0; k < c_out; ++k)
        for (Index c = 0; c < c_in; ++c) {
          const double* gr = g.data() + k * out_len;
          const double* xr = xpad_shared->data() + c * tp;
          double* fr = gf.data() + (k * c_in + c) * w;
          for (Index i = 0; i < w; ++i) {
            double acc = 0.0;
            for (Index n = 0; n < out_len; ++n) acc += gr[n] * xr[n * stride + i];
            fr[i] += acc;
          }
        }
      accumulate_grad(*fil, gf);
    }
    if (sig->requires_grad) {
      Tensor gxp({c_in, tp});
      for (Index k = 0; k < c_out; ++k)
        for (Index c = 0; c < c_in; ++c) {
          const double* gr = g.data() + k * out_len;
          const double* fr = fil->value.data() + (k * c_in + c) * w;
          double* xr = gxp.data() + c * tp;
          for (Index n = 0; n < out_len; ++n) {
            double gv = gr[n];
            double* xs = xr + n * stride;
            for (Index i = 0; i < w; ++i) xs[i] += gv * fr[i];
          }
        }
      Tensor gx({c_in, t});
      for (Index c = 0; c < c_in; ++c)
        std::copy(gxp.values.begin() + c * tp + pl, gxp.values.begin() + c * tp + pl + t,
                  gx.values.begin() + c * t);
      accumulate_grad(*sig, gx);
    }
  });
}

NodePtr depthwise_conv1d(const NodePtr& signal, const NodePtr& filters, Index stride,
                         Padding padding) {
  check_rank(signal, 2, "depthwise_conv1d signal");
  check_rank(filters, 2, "depthwise_conv1d filters");
  Index c = signal->value.dim(0), t = signal->value.dim(1);
  Index w = filters->value.dim(1);
  if (filters->value.dim(0) != c)
    throw std::invalid_argument("depthwise_conv1d channel mismatch: filters have " +
                                std::to_string(filters->value.dim(0)) + " rows, signal has " +
                                std::to_string(c) + " channels");

  PadPlan pad = plan_padding(t, w, stride, padding);
  Tensor xpad = pad_rows(signal->value, pad.pad_left, pad.pad_right);
  Index tp = xpad.dim(1);

  Tensor out({c, pad.out_len});
  for (Index ch = 0; ch < c; ++ch) {
    const double* xr = xpad.data() + ch * tp;
    const double* fr = filters->value.data() + ch * w;
    double* yr = out.data() + ch * pad.out_len;
    for (Index n = 0; n < pad.out_len; ++n) {
      const double* xs = xr + n * stride;
      double acc = 0.0;
      for (Index i = 0; i < w; ++i) acc += xs[i] * fr[i];
      yr[n] = acc;
    }
  }

  auto xpad_shared = std::make_shared<Tensor>(std::move(xpad));
  NodePtr sig = signal, fil = filters;
  Index pl = pad.pad_left, out_len = pad.out_len;
  return finish(std::move(out), {signal, filters}, [=](const GraphNode& self) {
    const Tensor& g = self.grad;
    if (fil->requires_grad) {
      Tensor gf(fil->value.shape);
      for (Index ch = 0; ch < c; ++ch) {
        const double* gr = g.data() + ch * out_len;
        const double* xr = xpad_shared->data() + ch * tp;
        double* fr = gf.data() + ch * w;
        for (Index i = 0; i < w; ++i) {
          double acc = 0.0;
          for (Index n = 0; n < out_len; ++n) acc += gr[n] * xr[n * stride + i];
          fr[i] = acc;
        }
      }
      accumulate_grad(*fil, gf);
    }
    if (sig->requires_grad) {
      Tensor gxp({c, tp});
      for (Index ch = 0; ch < c; ++ch) {
        const double* gr = g.data() + ch * out_len;
        const double* fr = fil->value.data() + ch * w;
        double* xr = gxp.data() + ch * tp;
        for (Index n = 0; n < out_len; ++n) {
          double gv = gr[n];
          double* xs = xr + n * stride;
          for (Index i = 0; i < w; ++i) xs[i] += gv * fr[i];
        }
      }
      Tensor gx({c, t});
      for (Index ch = 0; ch < c; ++ch)
        std::copy(gxp.values.begin() + ch * tp + pl, gxp.values.begin() + ch * tp + pl + t,
                  gx.values.begin() + ch * t);
      accumulate_grad(*sig, gx);
    }
  });
}

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

NodePtr dense(const NodePtr& input, const NodePtr& weight, const NodePtr& bias) {
  check_rank(input, 2, "dense input");
  check_rank(weight, 2, "dense weight");
  check_rank(bias, 1, "dense bias");
  Index b = input->value.dim(0), din = input->value.dim(1);
  Index dout = weight->value.dim(1);
  if (weight->value.dim(0) != din)
    throw std::invalid_argument("dense dimension mismatch: input " + shape_str(input->value.shape) +
                                " vs weight " + shape_str(weight->value.shape));
  if (bias->value.dim(0) != dout)
    throw std::invalid_argument("dense bias length " + std::to_string(bias->value.dim(0)) +
                                " does not match output width " + std::to_string(dout));

  Tensor out({b, dout});
  for (Index r = 0; r < b; ++r) {
    double* yr = out.data() + r * dout;
    const double* xr = input->value.data() + r * din;
    for (Index j = 0; j < dout; ++j) yr[j] = bias->value.values[static_cast<std::size_t>(j)];
    for (Index i = 0; i < din; ++i) {
      double xv = xr[i];
      const double* wr = weight->value.data() + i * dout;
      for (Index j = 0; j < dout; ++j) yr[j] += xv * wr[j];
    }
  }

  NodePtr in = input, wgt = weight, bs = bias;
  return finish(std::move(out), {input, weight, bias}, [=](const GraphNode& self) {
    const Tensor& g = self.grad;
    if (wgt->requires_grad) {
      Tensor gw(wgt->value.shape);
      for (Index r = 0; r < b; ++r) {
        const double* xr = in->value.data() + r * din;
        const double* gr = g.data() + r * dout;
        for (Index i = 0; i < din; ++i) {
          double xv = xr[i];
          double* wr = gw.data() + i * dout;
          for (Index j = 0; j < dout; ++j) wr[j] += xv * gr[j];
        }
      }
      accumulate_grad(*wgt, gw);
    }
    if (bs->requires_grad) {
      Tensor gb(bs->value.shape);
      for (Index r = 0; r < b; ++r) {
        const double* gr = g.data() + r * dout;
        for (Index j = 0; j < dout; ++j) gb.values[static_cast<std::size_t>(j)] += gr[j];
      }
      accumulate_grad(*bs, gb);
    }
    if (in->requires_grad) {
      Tensor gx(in->value.shape);
      for (Index r = 0; r < b; ++r) {
        const double* gr = g.data() + r * dout;
        double* xr = gx.data() + r * din;
        for (Index i = 0; i < din; ++i) {
          const double* wr = wgt->value.data() + i * dout;
          double acc = 0.0;
          for (Index j = 0; j < dout; ++j) acc += gr[j] * wr[j];
          xr[i] = acc;
        }
      }
      accumulate_grad(*in, gx);
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

NodePtr softplus(const NodePtr& input) {
  Tensor out(input->value.shape);
  Index n = input->value.numel();
  for (Index i = 0; i < n; ++i) {
    double v = input->value.values[static_cast<std::size_t>(i)];
    double y;
    if (v > 30.0)
      y = v + std::log1p(std::exp(-v));
    else if (v < -30.0)
      y = std::exp(v);
    else
      y = std::log1p(std::exp(v));
    out.values[static_cast<std::size_t>(i)] = y;
  }
  NodePtr in = input;
  return finish(std::move(out), {input}, [=](const GraphNode& self) {
    Tensor gx(in->value.shape);
    for (Index i = 0; i < n; ++i)
      gx.values[static_cast<std::size_t>(i)] =
          self.grad.values[static_cast<std::size_t>(i)] *
          sigmoid(in->value.values[static_cast<std::size_t>(i)]);
    accumulate_grad(*in, gx);
  });
}

NodePtr abs_elem(const NodePtr& input) {
  Tensor out(input->value.shape);
  Index n = input->value.numel();
  for (Index i = 0; i < n; ++i)
    out.values[static_cast<std::size_t>(i)] = std::fabs(input->value.values[static_cast<std::size_t>(i)]);
  NodePtr in = input;
  return finish(std::move(out), {input}, [=](const GraphNode& self) {
    Tensor gx(in->value.shape);
    for (Index i = 0; i < n; ++i) {
      double v = in->value.values[static_cast<std::size_t>(i)];
      // Subgradient 0 at exactly 0.
      double s = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      gx.values[static_cast<std::size_t>(i)] = self.grad.values[static_cast<std::size_t>(i)] * s;
    }
    accumulate_grad(*in, gx);
  });
}

namespace {

void check_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + " shape mismatch: " + shape_str(a->value.shape) +
                                " vs " + shape_str(b->value.shape));
}

}  // namespace

NodePtr add_elem(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "add_elem");
  Tensor out(a->value.shape);
  Index n = out.numel();
  for (Index i = 0; i < n; ++i)
    out.values[static_cast<std::size_t>(i)] =
        a->value.values[static_cast<std::size_t>(i)] + b->value.values[static_cast<std::size_t>(i)];
  NodePtr pa = a, pb = b;
  return finish(std::move(out), {a, b}, [=](const GraphNode& self) {
    if (pa->requires_grad) accumulate_grad(*pa, self.grad);
    if (pb->requires_grad) accumulate_grad(*pb, self.grad);
  });
}

NodePtr sub_elem(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "sub_elem");
  Tensor out(a->value.shape);
  Index n = out.numel();
  for (Index i = 0; i < n; ++i)
    out.values[static_cast<std::size_t>(i)] =
        a->value.values[static_cast<std::size_t>(i)] - b->value.values[static_cast<std::size_t>(i)];
  NodePtr pa = a, pb = b;
  return finish(std::move(out), {a, b}, [=](const GraphNode& self) {
    if (pa->requires_grad) accumulate_grad(*pa, self.grad);
    if (pb->requires_grad) {
      Tensor gb(pb->value.shape);
      for (Index i = 0; i < n; ++i)
        gb.values[static_cast<std::size_t>(i)] = -self.grad.values[static_cast<std::size_t>(i)];
      accumulate_grad(*pb, gb);
    }
  });
}

NodePtr mul_elem(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "mul_elem");
  Tensor out(a->value.shape);
  Index n = out.numel();
  for (Index i = 0; i < n; ++i)
    out.values[static_cast<std::size_t>(i)] =
        a->value.values[static_cast<std::size_t>(i)] * b->value.values[static_cast<std::size_t>(i)];
  NodePtr pa = a, pb = b;
  return finish(std::move(out), {a, b}, [=](const GraphNode& self) {
    if (pa->requires_grad) {
      Tensor ga(pa->value.shape);
      for (Index i = 0; i < n; ++i)
        ga.values[static_cast<std::size_t>(i)] =
            self.grad.values[static_cast<std::size_t>(i)] * pb->value.values[static_cast<std::size_t>(i)];
      accumulate_grad(*pa, ga);
    }
    if (pb->requires_grad) {
      Tensor gb(pb->value.shape);
      for (Index i = 0; i < n; ++i)
        gb.values[static_cast<std::size_t>(i)] =
            self.grad.values[static_cast<std::size_t>(i)] * pa->value.values[static_cast<std::size_t>(i)];
      accumulate_grad(*pb, gb);
    }
  });
}

NodePtr div_elem(const NodePtr& a, const NodePtr& b, double eps) {
  check_same_shape(a, b, "div_elem");
  Tensor out(a->value.shape);
  Index n = out.numel();
  auto clamp_den = [eps](double v) {
    if (std::fabs(v) >= eps) return v;
    return v < 0.0 ? -eps : eps;
  };
  for (Index i = 0; i < n; ++i)
    out.values[static_cast<std::size_t>(i)] =
        a->value.values[static_cast<std::size_t>(i)] / clamp_den(b->value.values[static_cast<std::size_t>(i)]);
  NodePtr pa = a, pb = b;
  return finish(std::move(out), {a, b}, [=](const GraphNode& self) {
    if (pa->requires_grad) {
      Tensor ga(pa->value.shape);
      for (Index i = 0; i < n; ++i)
        ga.values[static_cast<std::size_t>(i)] =
            self.grad.values[static_cast<std::size_t>(i)] / clamp_den(pb->value.values[static_cast<std::size_t>(i)]);
      accumulate_grad(*pa, ga);
    }
    if (pb->requires_grad) {
      Tensor gb(pb->value.shape);
      for (Index i = 0; i < n; ++i) {
        double bv = pb->value.values[static_cast<std::size_t>(i)];
        if (std::fabs(bv) < eps) continue;  // clamped region: denominator held constant
        gb.values[static_cast<std::size_t>(i)] = -self.grad.values[static_cast<std::size_t>(i)] *
                                                 pa->value.values[static_cast<std::size_t>(i)] / (bv * bv);
      }
      accumulate_grad(*pb, gb);
    }
  });
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

MaxPoolResult maxpool1d(const NodePtr& input, Index pool) {
  check_rank(input, 2, "maxpool1d input");
  if (pool < 1) throw std::invalid_argument("maxpool1d pool must be >= 1");
  Index c = input->value.dim(0), t = input->value.dim(1);
  Index windows = (t + pool - 1) / pool;

  Tensor out({c, windows});
  auto argmax = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(c * windows));
  for (Index ch = 0; ch < c; ++ch) {
    const double* xr = input->value.data() + ch * t;
    for (Index wd = 0; wd < windows; ++wd) {
      Index lo = wd * pool, hi = std::min(t, lo + pool);
      Index best = lo;
      double bv = xr[lo];
      for (Index i = lo + 1; i < hi; ++i)
        if (xr[i] > bv) {  // ties keep the smallest index
          bv = xr[i];
          best = i;
        }
      out.at2(ch, wd) = bv;
      (*argmax)[static_cast<std::size_t>(ch * windows + wd)] = best;
    }
  }

  NodePtr in = input;
  NodePtr node = finish(std::move(out), {input}, [=](const GraphNode& self) {
    Tensor gx(in->value.shape);
    for (Index ch = 0; ch < c; ++ch)
      for (Index wd = 0; wd < windows; ++wd)
        gx.values[static_cast<std::size_t>(ch * t + (*argmax)[static_cast<std::size_t>(ch * windows + wd)])] +=
            self.grad.at2(ch, wd);
    accumulate_grad(*in, gx);
  });
  return MaxPoolResult{node, *argmax};
}

NodePtr unpool_zero_insert(const NodePtr& pooled, Index pool, Index target_length,
                           UnpoolPlacement placement, const std::vector<Index>* indices) {
  check_rank(pooled, 2, "unpool_zero_insert input");
  if (pool < 1) throw std::invalid_argument("unpool pool must be >= 1");
  Index c = pooled->value.dim(0), n = pooled->value.dim(1);
  if (n * pool < target_length - pool + 1)
    throw std::invalid_argument("unpool: " + std::to_string(n) + " windows of " +
                                std::to_string(pool) + " cannot cover target length " +
                                std::to_string(target_length));
  if (placement == UnpoolPlacement::kRecordedIndices && indices == nullptr)
    throw std::invalid_argument("unpool: recorded_indices placement requires indices");

  auto position = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(c * n), Index(-1));
  for (Index ch = 0; ch < c; ++ch)
    for (Index wd = 0; wd < n; ++wd) {
      Index pos = placement == UnpoolPlacement::kWindowStart
                      ? wd * pool
                      : (*indices)[static_cast<std::size_t>(ch * n + wd)];
      if (pos >= 0 && pos < target_length)
        (*position)[static_cast<std::size_t>(ch * n + wd)] = pos;
    }

  Tensor out({c, target_length});
  for (Index ch = 0; ch < c; ++ch)
    for (Index wd = 0; wd < n; ++wd) {
      Index pos = (*position)[static_cast<std::size_t>(ch * n + wd)];
      if (pos >= 0) out.at2(ch, pos) = pooled->value.at2(ch, wd);
    }

  NodePtr in = pooled;
  return finish(std::move(out), {pooled}, [=](const GraphNode& self) {
    Tensor gx(in->value.shape);
    for (Index ch = 0; ch < c; ++ch)
      for (Index wd = 0; wd < n; ++wd) {
        Index pos = (*position)[static_cast<std::size_t>(ch * n + wd)];
        if (pos >= 0) gx.at2(ch, wd) = self.grad.at2(ch, pos);
      }
    accumulate_grad(*in, gx);
  });
}

// ---------------------------------------------------------------------------
// Bias, reductions, reshaping
// ---------------------------------------------------------------------------

NodePtr add_channel_bias(const NodePtr& input, const NodePtr& bias) {
  check_rank(input, 2, "add_channel_bias input");
  check_rank(bias, 1, "add_channel_bias bias");
  Index c = input->value.dim(0), t = input->value.dim(1);
  if (bias->value.dim(0) != c)
    throw std::invalid_argument("add_channel_bias: bias length " + std::to_string(bias->value.dim(0)) +
                                " vs " + std::to_string(c) + " channels");
  Tensor out(input->value.shape);
  for (Index ch = 0; ch < c; ++ch) {
    double bv = bias->value.values[static_cast<std::size_t>(ch)];
    const double* xr = input->value.data() + ch * t;
    double* yr = out.data() + ch * t;
    for (Index i = 0; i < t; ++i) yr[i] = xr[i] + bv;
  }
  NodePtr in = input, bs = bias;
  return finish(std::move(out), {input, bias}, [=](const GraphNode& self) {
    if (in->requires_grad) accumulate_grad(*in, self.grad);
    if (bs->requires_grad) {
      Tensor gb(bs->value.shape);
      for (Index ch = 0; ch < c; ++ch) {
        const double* gr = self.grad.data() + ch * t;
        double acc = 0.0;
        for (Index i = 0; i < t; ++i) acc += gr[i];
        gb.values[static_cast<std::size_t>(ch)] = acc;
      }
      accumulate_grad(*bs, gb);
    }
  });
}

NodePtr reduce(const NodePtr& input, Reduce kind) {
  Index n = input->value.numel();
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) acc += input->value.values[static_cast<std::size_t>(i)];
  double denom = (kind == Reduce::kMean && n > 0) ? static_cast<double>(n) : 1.0;
  NodePtr in = input;
  return finish(Tensor::scalar(acc / denom), {input}, [=](const GraphNode& self) {
    double g = self.grad.values[0] / denom;
    Tensor gx(in->value.shape, g);
    accumulate_grad(*in, gx);
  });
}

NodePtr reduce_dot(const NodePtr& a, const NodePtr& b) {
  check_same_shape(a, b, "reduce_dot");
  Index n = a->value.numel();
  double acc = 0.0;
  for (Index i = 0; i < n; ++i)
    acc += a->value.values[static_cast<std::size_t>(i)] * b->value.values[static_cast<std::size_t>(i)];
  NodePtr pa = a, pb = b;
  return finish(Tensor::scalar(acc), {a, b}, [=](const GraphNode& self) {
    double g = self.grad.values[0];
    if (pa->requires_grad) {
      Tensor ga(pa->value.shape);
      for (Index i = 0; i < n; ++i)
        ga.values[static_cast<std::size_t>(i)] = g * pb->value.values[static_cast<std::size_t>(i)];
      accumulate_grad(*pa, ga);
    }
    if (pb->requires_grad) {
      Tensor gb(pb->value.shape);
      for (Index i = 0; i < n; ++i)
        gb.values[static_cast<std::size_t>(i)] = g * pa->value.values[static_cast<std::size_t>(i)];
      accumulate_grad(*pb, gb);
    }
  });
}

NodePtr scale(const NodePtr& input, double factor) {
  Tensor out(input->value.shape);
  Index n = out.numel();
  for (Index i = 0; i < n; ++i)
    out.values[static_cast<std::size_t>(i)] = factor * input->value.values[static_cast<std::size_t>(i)];
  NodePtr in = input;
  return finish(std::move(out), {input}, [=](const GraphNode& self) {
    Tensor gx(in->value.shape);
    for (Index i = 0; i < n; ++i)
      gx.values[static_cast<std::size_t>(i)] = factor * self.grad.values[static_cast<std::size_t>(i)];
    accumulate_grad(*in, gx);
  });
}

NodePtr add_const(const NodePtr& input, double c) {
  Tensor out(input->value.shape);
  Index n = out.numel();
  for (Index i = 0; i < n; ++i)
    out.values[static_cast<std::size_t>(i)] = c + input->value.values[static_cast<std::size_t>(i)];
  NodePtr in = input;
  return finish(std::move(out), {input},
                [=](const GraphNode& self) { accumulate_grad(*in, self.grad); });
}

NodePtr transpose(const NodePtr& input) {
  check_rank(input, 2, "transpose input");
  Index r = input->value.dim(0), c = input->value.dim(1);
  Tensor out({c, r});
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) out.at2(j, i) = input->value.at2(i, j);
  NodePtr in = input;
  return finish(std::move(out), {input}, [=](const GraphNode& self) {
    Tensor gx({r, c});
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j) gx.at2(i, j) = self.grad.at2(j, i);
    accumulate_grad(*in, gx);
  });
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

void backward(const NodePtr& root) {
  if (!root) throw std::invalid_argument("backward: null root");
  if (root->value.numel() != 1)
    throw std::invalid_argument("backward requires a scalar root, got shape " +
                                shape_str(root->value.shape));

  // Iterative post-order DFS; reversing it yields a topological order with the
  // root first, so every node is processed before its parents.
  std::vector<GraphNode*> order;
  std::unordered_set<GraphNode*> visited;
  std::vector<std::pair<GraphNode*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      GraphNode* p = node->parents[next].get();
      ++next;
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (GraphNode* n : order) {
    n->grad = Tensor(n->value.shape);
  }
  root->grad.values[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    GraphNode* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace aetsep
