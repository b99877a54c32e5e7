#include "core/graph.hpp"

namespace udvd {

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Graph::Node& Graph::node(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    fail(ErrorCode::Graph, "node ", id, " was never recorded on this graph");
  return nodes_[id];
}

int Graph::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

int Graph::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  return push(std::move(n));
}

int Graph::conv2d(int x, int weight, int bias, int pad) {
  Node n;
  n.op = Op::Conv2d;
  n.in0 = x;
  n.in1 = weight;
  n.in2 = bias;
  n.pad = pad;
  n.value = udvd::conv2d(node(x).value, node(weight).value, node(bias).value, pad);
  n.needs_grad = node(x).needs_grad || node(weight).needs_grad || node(bias).needs_grad;
  return push(std::move(n));
}

int Graph::relu(int x) {
  Node n;
  n.op = Op::Relu;
  n.in0 = x;
  n.value = udvd::relu(node(x).value);
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

int Graph::pixel_shuffle(int x, int r) {
  Node n;
  n.op = Op::PixelShuffle;
  n.in0 = x;
  n.r = r;
  n.value = udvd::pixel_shuffle(node(x).value, r);
  n.needs_grad = node(x).needs_grad;
  return push(std::move(n));
}

int Graph::concat(int a, int b) {
  Node n;
  n.op = Op::Concat;
  n.in0 = a;
  n.in1 = b;
  n.value = concat_channels(node(a).value, node(b).value);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

int Graph::add(int a, int b) {
  Node n;
  n.op = Op::Add;
  n.in0 = a;
  n.in1 = b;
  n.value = udvd::add(node(a).value, node(b).value);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

int Graph::dynamic_conv(int input, int kernels, int k, int r, bool channel_shared) {
  Node n;
  n.op = Op::DynConv;
  n.in0 = input;
  n.in1 = kernels;
  n.k = k;
  n.r = r;
  n.channel_shared = channel_shared;
  n.value = dynamic_conv_upsample(node(input).value,
                                  PerPixelKernels{node(kernels).value, k, r, channel_shared});
  n.needs_grad = node(input).needs_grad || node(kernels).needs_grad;
  return push(std::move(n));
}

int Graph::l2_loss(int pred, int target) {
  Node n;
  n.op = Op::L2Loss;
  n.in0 = pred;
  n.in1 = target;
  n.value = Tensor::scalar(udvd::l2_loss(node(pred).value, node(target).value));
  n.needs_grad = node(pred).needs_grad || node(target).needs_grad;
  return push(std::move(n));
}

int Graph::axpy(int a, int b, float scale) {
  Node n;
  n.op = Op::Axpy;
  n.in0 = a;
  n.in1 = b;
  n.scale = scale;
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  if (!av.same_shape(bv)) fail_shape("axpy: shapes differ");
  Tensor out = av;
  for (size_t i = 0; i < out.numel(); ++i) out[i] += scale * bv[i];
  n.value = std::move(out);
  n.needs_grad = node(a).needs_grad || node(b).needs_grad;
  return push(std::move(n));
}

const Tensor& Graph::value(int id) const { return node(id).value; }

bool Graph::needs_grad(int id) const { return node(id).needs_grad; }

void Graph::accumulate(int id, Tensor g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.empty()) {
    n.grad = std::move(g);
    return;
  }
  for (size_t i = 0; i < n.grad.numel(); ++i) n.grad[i] += g[i];
}

void Graph::backward(int loss) {
  const Node& ln = node(loss);
  if (ran_backward_) fail(ErrorCode::Graph, "backward already ran on this graph");
  if (ln.value.numel() != 1)
    fail(ErrorCode::Graph, "backward needs a scalar loss, got shape ", shape_str(ln.value));
  ran_backward_ = true;
  if (!ln.needs_grad) return;
  nodes_[loss].grad = Tensor::scalar(1.0f);

  for (int i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.empty() || n.op == Op::Leaf) continue;
    const Tensor& up = n.grad;
    switch (n.op) {
      case Op::Conv2d: {
        Conv2dGrads g = conv2d_backward(up, nodes_[n.in0].value, nodes_[n.in1].value, n.pad);
        accumulate(n.in0, std::move(g.x));
        accumulate(n.in1, std::move(g.weight));
        accumulate(n.in2, std::move(g.bias));
        break;
      }
      case Op::Relu:
        accumulate(n.in0, relu_backward(up, nodes_[n.in0].value));
        break;
      case Op::PixelShuffle:
        accumulate(n.in0, pixel_unshuffle(up, n.r));
        break;
      case Op::Concat: {
        auto [ga, gb] = concat_backward(up, nodes_[n.in0].value.c());
        accumulate(n.in0, std::move(ga));
        accumulate(n.in1, std::move(gb));
        break;
      }
      case Op::Add:
        accumulate(n.in0, up);
        accumulate(n.in1, up);
        break;
      case Op::DynConv: {
        DynConvGrads g = dynamic_conv_backward(
            up, nodes_[n.in0].value,
            PerPixelKernels{nodes_[n.in1].value, n.k, n.r, n.channel_shared});
        accumulate(n.in0, std::move(g.input));
        accumulate(n.in1, std::move(g.kernels));
        break;
      }
      case Op::L2Loss: {
        Tensor gp = l2_loss_backward(up[0], nodes_[n.in0].value, nodes_[n.in1].value);
        if (nodes_[n.in1].needs_grad) {
          Tensor gt = gp;
          for (size_t q = 0; q < gt.numel(); ++q) gt[q] = -gt[q];
          accumulate(n.in1, std::move(gt));
        }
        accumulate(n.in0, std::move(gp));
        break;
      }
      case Op::Axpy: {
        accumulate(n.in0, up);
        Tensor gb = up;
        for (size_t q = 0; q < gb.numel(); ++q) gb[q] *= n.scale;
        accumulate(n.in1, std::move(gb));
        break;
      }
      case Op::Leaf:
        break;
    }
  }
}

Tensor Graph::grad(int id) const {
  const Node& n = node(id);
  if (n.grad.empty()) return Tensor(n.value.n(), n.value.c(), n.value.h(), n.value.w());
  return n.grad;
}

}  // namespace udvd
