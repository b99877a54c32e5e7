#pragma once
// Tape-based reverse-mode autodiff over the float NN primitives.
//
// A Graph records each op as it executes (the forward pass is eager, so
// every node's value is available immediately); backward() walks the tape
// once in reverse, accumulating gradients into the nodes that need them.
// A graph is built fresh per training step: record, call backward once,
// read the leaf gradients.

#include <vector>

#include "core/dynconv.hpp"
#include "core/nn_ops.hpp"

namespace udvd {

class Graph {
 public:
  // Leaves: constants never receive gradients; variables do.
  int constant(Tensor value);
  int variable(Tensor value);

  int conv2d(int x, int weight, int bias, int pad);
  int relu(int x);
  int pixel_shuffle(int x, int r);
  int concat(int a, int b);
  int add(int a, int b);
  int dynamic_conv(int input, int kernels, int k, int r, bool channel_shared);
  int l2_loss(int pred, int target);
  // c = a + scale * b; used to combine per-stage losses.
  int axpy(int a, int b, float scale);

  const Tensor& value(int id) const;
  bool needs_grad(int id) const;

  // Seeds d(loss)/d(loss) = 1 and back-propagates; loss must be scalar.
  void backward(int loss);

  // Gradient accumulated at a node; zeros if the node was not reached.
  Tensor grad(int id) const;

  size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    Leaf,
    Conv2d,
    Relu,
    PixelShuffle,
    Concat,
    Add,
    DynConv,
    L2Loss,
    Axpy,
  };

  struct Node {
    Op op = Op::Leaf;
    int in0 = -1, in1 = -1, in2 = -1;
    int pad = 0, k = 0, r = 0;
    bool channel_shared = false;
    float scale = 1.0f;
    Tensor value;
    Tensor grad;  // empty until backward touches it
    bool needs_grad = false;
  };

  int push(Node n);
  const Node& node(int id) const;
  void accumulate(int id, Tensor g);

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
};

}  // namespace udvd
