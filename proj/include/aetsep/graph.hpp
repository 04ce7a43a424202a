#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "aetsep/tensor.hpp"

namespace aetsep {

// Reverse-mode autodiff over dense tensors. Each operation builds a GraphNode
// holding its forward value, links to its inputs, and a closure that scatters
// the node's gradient back into the parents' gradients. The graph is acyclic:
// children hold shared_ptrs to parents, never the reverse.
struct GraphNode {
  Tensor value;
  Tensor grad;  // allocated by backward(); same shape as value once populated
  bool requires_grad = false;
  std::vector<std::shared_ptr<GraphNode>> parents;
  std::function<void(const GraphNode&)> backward_fn;
};

using NodePtr = std::shared_ptr<GraphNode>;

NodePtr constant(Tensor value);
NodePtr parameter(Tensor value);

enum class Padding { kValid, kSame };

// Cross-correlation convention (no filter flip): out[k][n] = sum_c sum_w
// padded_signal[c][n*stride + w] * filters[k][c][w].
NodePtr conv1d(const NodePtr& signal /*C_in x T*/, const NodePtr& filters /*C_out x C_in x W*/,
               Index stride, Padding padding);

// Channel c of the output depends only on channel c of the input.
NodePtr depthwise_conv1d(const NodePtr& signal /*C x T*/, const NodePtr& filters /*C x W*/,
                         Index stride, Padding padding);

NodePtr dense(const NodePtr& input /*B x Din*/, const NodePtr& weight /*Din x Dout*/,
              const NodePtr& bias /*Dout*/);

NodePtr softplus(const NodePtr& input);
NodePtr abs_elem(const NodePtr& input);

struct MaxPoolResult {
  NodePtr values;               // C x ceil(T / pool)
  std::vector<Index> argmax;    // absolute time index per (channel, window), row-major
};
MaxPoolResult maxpool1d(const NodePtr& input /*C x T*/, Index pool);

enum class UnpoolPlacement { kWindowStart, kRecordedIndices };
NodePtr unpool_zero_insert(const NodePtr& pooled /*C x N*/, Index pool, Index target_length,
                           UnpoolPlacement placement,
                           const std::vector<Index>* indices = nullptr);

NodePtr add_elem(const NodePtr& a, const NodePtr& b);
NodePtr sub_elem(const NodePtr& a, const NodePtr& b);
NodePtr mul_elem(const NodePtr& a, const NodePtr& b);
// Denominator magnitude is clamped at eps; the clamp is treated as locally
// constant in the backward pass.
NodePtr div_elem(const NodePtr& a, const NodePtr& b, double eps = 1e-8);

// Per-channel bias broadcast along time: out[c][t] = input[c][t] + bias[c].
NodePtr add_channel_bias(const NodePtr& input /*C x T*/, const NodePtr& bias /*C*/);

enum class Reduce { kSum, kMean };
NodePtr reduce(const NodePtr& input, Reduce kind);
NodePtr reduce_dot(const NodePtr& a, const NodePtr& b);

NodePtr scale(const NodePtr& input, double factor);
NodePtr add_const(const NodePtr& input, double c);
NodePtr transpose(const NodePtr& input /*R x C*/);

// Generic hook for modules that define their own differentiable operations
// (synthesis convolution, inverse STFT). forward is the node's value;
// backward_fn receives the finished node and accumulates into parent grads.
NodePtr make_op(Tensor forward, std::vector<NodePtr> parents,
                std::function<void(const GraphNode&)> backward_fn);

// Populates grad on every node reachable from root. root must be scalar.
// Grads are zeroed first, so repeated calls are deterministic and identical.
void backward(const NodePtr& root);

// Accumulate src into dst.grad, allocating it on first touch.
void accumulate_grad(GraphNode& dst, const Tensor& src);

}  // namespace aetsep
