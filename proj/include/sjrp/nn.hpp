#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sjrp/core.hpp"

namespace sjrp::nn {

/// Row-major matrix of activations/weights: rows = neurons, cols = batch.
struct Matrix {
  int rows = 0;
  int64_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int64_t c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double* data() { return a.data(); }
  const double* data() const { return a.data(); }
  double& at(int r, int64_t c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int64_t c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

/// Fully connected network, ELU on hidden layers, identity output.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> widths);

  const std::vector<int>& widths() const { return widths_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int layers() const { return static_cast<int>(weights_.size()); }
  int64_t parameter_count() const;

  Matrix& weight(int layer) { return weights_[layer]; }
  const Matrix& weight(int layer) const { return weights_[layer]; }
  Vec& bias(int layer) { return biases_[layer]; }
  const Vec& bias(int layer) const { return biases_[layer]; }

  /// Refresh the packed weight panels after any in-place parameter change.
  void sync_packs() const;

  Vec forward(const Vec& x) const;

  /// Batched forward: x is [input_dim x batch]; returns [output_dim x batch].
  Matrix forward_batch(const Matrix& x) const;

  /// Jacobian of the output w.r.t. the input at a single point
  /// (output_dim x input_dim, row-major), by forward-mode propagation.
  Matrix input_jacobian(const Vec& x) const;

  /// Reverse-mode gradient of output[index] w.r.t. the input.
  Vec input_gradient(const Vec& x, int output_index = 0) const;

  // --- training support ---

  struct Trace {
    // acts[0] is the input block; acts[l+1] the post-activation of layer l.
    std::vector<Matrix> acts;
  };

  /// Forward keeping the per-layer activations needed for a backward pass.
  Matrix forward_batch_traced(const Matrix& x, Trace& trace) const;

  struct Gradients {
    std::vector<Matrix> weight;
    std::vector<Vec> bias;
    void init_like(const Mlp& net);
    void scale(double s);
    double squared_norm() const;
  };

  /// Reusable delta buffers for backward passes.
  struct Workspace {
    Matrix a, b;
  };

  /// Accumulate parameter gradients for dLoss/dOutput `dy`
  /// ([output_dim x batch]) into `grads` (adds; callers zero beforehand).
  void backward_batch(const Trace& trace, const Matrix& dy, Gradients& grads,
                      Workspace* ws = nullptr) const;

 private:
  std::vector<int> widths_;
  std::vector<Matrix> weights_;  // weight(l): [widths_[l+1] x widths_[l]]
  std::vector<Vec> biases_;
  // Packed panels for the fast gemm path: W and W^T per layer.
  mutable std::vector<std::vector<double>> wpack_, wtpack_;
  mutable bool packs_valid_ = false;
};

/// He-uniform initialization: weights ~ U[-sqrt(6/fan_in), +sqrt(6/fan_in)],
/// zero biases.
Mlp he_init(const std::vector<int>& widths, RandomStream& rng);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const Mlp& net, AdamConfig cfg = {});

  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

  /// One bias-corrected Adam update applied in place to `net`.
  void step(Mlp& net, const Mlp::Gradients& grads, double lr);

  // Raw accessors for checkpoint/resume.
  std::vector<Matrix>& m_weight() { return mw_; }
  std::vector<Matrix>& v_weight() { return vw_; }
  std::vector<Vec>& m_bias() { return mb_; }
  std::vector<Vec>& v_bias() { return vb_; }
  void set_step_count(int64_t s) { step_ = s; }

 private:
  AdamConfig cfg_;
  int64_t step_ = 0;
  std::vector<Matrix> mw_, vw_;
  std::vector<Vec> mb_, vb_;
};

/// Checkpoint container: named networks in a flat binary file.
/// Layout: magic "SJRPNET1", u32 version, u32 net count; per net a u32 width
/// count and u32 widths; then per net, per layer, row-major little-endian f64
/// weights followed by the bias vector.
void save_checkpoint(const std::string& path, const std::vector<const Mlp*>& nets);
std::vector<Mlp> load_checkpoint(const std::string& path);

}  // namespace sjrp::nn
