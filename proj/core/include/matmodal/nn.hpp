#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace matmodal::nn {

// Reverse-mode autodiff over shaped 64-bit float arrays. Tensors are cheap
// handles onto shared graph nodes; ops build the graph eagerly and
// backward() runs the tape in reverse topological order. A graph instance
// belongs to one thread.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated lazily, same size as values
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;  // accumulates into parents' grads
  bool requires_grad = false;

  std::size_t size() const { return values.size(); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& mutable_values() { return node_->values; }
  const std::vector<double>& grad() const { return node_->grad; }
  std::size_t size() const { return node_->size(); }
  double item() const;  // scalar tensors only
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

  NodePtr node() const { return node_; }

  // Runs backpropagation from this scalar tensor.
  void backward() const;

 private:
  NodePtr node_;
};

void check_shape(const Tensor& t, const std::vector<int>& expected,
                 const std::string& op);

// --- elementwise and linear algebra ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double k);
Tensor scale_by(const Tensor& a, const Tensor& s);  // s is a scalar tensor
Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]
Tensor transpose(const Tensor& a);                // [m,n] -> [n,m]
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sum(const Tensor& a);    // -> scalar
Tensor mean(const Tensor& a);   // -> scalar
Tensor concat(const Tensor& a, const Tensor& b);            // vectors
Tensor stack_rows(const std::vector<Tensor>& rows);         // [d]... -> [N,d]
Tensor gather_rows(const Tensor& m, const std::vector<std::size_t>& idx);
Tensor segment_sum(const Tensor& rows, const std::vector<std::size_t>& dst,
                   std::size_t n_out);  // scatter-add rows by index
Tensor mean_rows(const Tensor& m);      // [n,d] -> [d]
Tensor reshape(const Tensor& a, std::vector<int> shape);  // same element count

// y = x W^T + b with W [out,in], b [out]; x is [in] or [N,in].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// --- CNN building blocks (single sample, x is [C,L]) ---
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int stride = 1, int padding = 0);  // kernel [Cout,Cin,k]
Tensor max_pool1d(const Tensor& x, int window, int stride);
Tensor global_avg_pool(const Tensor& x);  // [C,L] -> [C]

// --- normalization / softmax ---
// layer_norm over the last dimension; gain/bias have that dimension.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor softmax(const Tensor& x);      // rowwise for [N,C], whole for [C]
Tensor log_softmax(const Tensor& x);
// rowwise logsumexp with a 0/1 mask over columns
Tensor masked_logsumexp(const Tensor& x, const std::vector<double>& mask);
Tensor take_diag(const Tensor& x);            // [N,N] -> [N]
Tensor row_l2_normalize(const Tensor& x);     // rows scaled to unit norm

// --- similarities and losses ---
Tensor cosine_sim(const Tensor& z1, const Tensor& z2);  // vectors -> scalar

enum class ContrastiveVariant { kStandard, kExcludeDiagonal };

// Symmetric two-direction contrastive loss over row-matched embedding
// batches Z1, Z2 [N,d], averaged over the two directions. kStandard keeps
// the matched pair in its own denominator (InfoNCE); kExcludeDiagonal excludes
// it.
Tensor contrastive_loss(const Tensor& z1, const Tensor& z2, double tau,
                        ContrastiveVariant variant = ContrastiveVariant::kStandard);
// Same loss with a learnable inverse temperature (scalar tensor).
Tensor contrastive_loss(const Tensor& z1, const Tensor& z2, const Tensor& inv_tau,
                        ContrastiveVariant variant = ContrastiveVariant::kStandard);

Tensor mse_loss(const Tensor& pred, const Tensor& target);
Tensor mae_loss(const Tensor& pred, const Tensor& target);
// logits [N,C] (or [C]), integer class targets
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& targets);

// --- optimizer ---
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config = {});
  void step();       // consumes grads accumulated by backward()
  void zero_grad();
  std::int64_t step_count() const { return t_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::int64_t t_ = 0;
};

// --- verification harness ---
// Central-difference check of d f / d params against backward gradients;
// rebuild must recompute the scalar loss from current parameter values.
double gradient_check(const std::function<Tensor()>& rebuild,
                      const std::vector<Tensor>& params, double h = 1e-5);

}  // namespace matmodal::nn
