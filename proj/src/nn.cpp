#include "sjrp/nn.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "sjrp/simd.hpp"

namespace sjrp::nn {

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ConfigError("Mlp: need at least input and output widths");
  for (int w : widths_)
    if (w <= 0) throw ConfigError("Mlp: zero or negative layer width");
  const int nl = static_cast<int>(widths_.size()) - 1;
  weights_.reserve(nl);
  biases_.reserve(nl);
  for (int l = 0; l < nl; ++l) {
    weights_.emplace_back(widths_[l + 1], widths_[l]);
    biases_.emplace_back(widths_[l + 1], 0.0);
  }
  wpack_.resize(nl);
  wtpack_.resize(nl);
}

int64_t Mlp::parameter_count() const {
  int64_t n = 0;
  for (int l = 0; l < layers(); ++l)
    n += static_cast<int64_t>(weights_[l].rows) * weights_[l].cols + biases_[l].size();
  return n;
}

void Mlp::sync_packs() const {
  for (int l = 0; l < layers(); ++l) {
    const Matrix& w = weights_[l];
    simd::pack_a(w.data(), w.rows, static_cast<int>(w.cols), w.cols, wpack_[l]);
    // Transposed pack for the backward data path (W^T panels).
    std::vector<double> wt(static_cast<size_t>(w.rows) * w.cols);
    for (int i = 0; i < w.rows; ++i)
      for (int64_t j = 0; j < w.cols; ++j)
        wt[static_cast<size_t>(j) * w.rows + i] = w.at(i, j);
    simd::pack_a(wt.data(), static_cast<int>(w.cols), w.rows, w.rows, wtpack_[l]);
  }
  packs_valid_ = true;
}

Vec Mlp::forward(const Vec& x) const {
  if (static_cast<int>(x.size()) != input_dim())
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  Vec cur = x;
  Vec next;
  for (int l = 0; l < layers(); ++l) {
    const Matrix& w = weights_[l];
    next.assign(w.rows, 0.0);
    for (int i = 0; i < w.rows; ++i) {
      const double* row = w.data() + static_cast<size_t>(i) * w.cols;
      double s = biases_[l][i];
      for (int64_t j = 0; j < w.cols; ++j) s += row[j] * cur[j];
      next[i] = s;
    }
    if (l + 1 < layers())
      for (double& v : next) v = v >= 0.0 ? v : simd::expm1_neg(v);
    cur.swap(next);
  }
  return cur;
}

Matrix Mlp::forward_batch(const Matrix& x) const {
  Trace scratch;
  return forward_batch_traced(x, scratch);
}

Matrix Mlp::forward_batch_traced(const Matrix& x, Trace& trace) const {
  if (x.rows != input_dim())
    throw std::invalid_argument("Mlp::forward_batch: input dimension mismatch");
  if (!packs_valid_) sync_packs();
  const int64_t batch = x.cols;
  // Reuse the trace buffers when shapes repeat across calls; gemm overwrites
  // every element, so stale contents are harmless.
  auto shaped = [&](Matrix& m, int rows) {
    if (m.rows != rows || m.cols != batch) m = Matrix(rows, batch);
  };
  if (trace.acts.size() != static_cast<size_t>(layers()) + 1)
    trace.acts.resize(layers() + 1);
  shaped(trace.acts[0], x.rows);
  trace.acts[0].a = x.a;
  for (int l = 0; l < layers(); ++l) {
    const Matrix& w = weights_[l];
    Matrix& z = trace.acts[l + 1];
    shaped(z, w.rows);
    simd::gemm_packed(wpack_[l].data(), w.rows, static_cast<int>(w.cols),
                      trace.acts[l].data(), batch, z.data(), batch,
                      static_cast<int>(batch), /*acc=*/false);
    simd::add_bias(z.data(), biases_[l].data(), w.rows, batch, batch);
    if (l + 1 < layers())
      simd::elu(z.data(), z.data(), static_cast<int64_t>(w.rows) * batch);
  }
  return trace.acts.back();
}

void Mlp::Gradients::init_like(const Mlp& net) {
  weight.clear();
  bias.clear();
  for (int l = 0; l < net.layers(); ++l) {
    weight.emplace_back(net.weight(l).rows, net.weight(l).cols);
    bias.emplace_back(net.bias(l).size(), 0.0);
  }
}

void Mlp::Gradients::scale(double s) {
  for (auto& w : weight)
    for (auto& v : w.a) v *= s;
  for (auto& b : bias)
    for (auto& v : b) v *= s;
}

double Mlp::Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weight)
    for (double v : w.a) s += v * v;
  for (const auto& b : bias)
    for (double v : b) s += v * v;
  return s;
}

void Mlp::backward_batch(const Trace& trace, const Matrix& dy, Gradients& grads,
                         Workspace* ws) const {
  if (!packs_valid_) sync_packs();
  const int64_t batch = dy.cols;
  if (dy.rows != output_dim() || trace.acts.size() != static_cast<size_t>(layers()) + 1)
    throw std::invalid_argument("Mlp::backward_batch: shape mismatch");
  Workspace local;
  if (!ws) ws = &local;
  auto shaped = [&](Matrix& m, int rows) {
    if (m.rows != rows || m.cols != batch) m = Matrix(rows, batch);
  };
  shaped(ws->a, dy.rows);
  ws->a.a = dy.a;
  Matrix* delta = &ws->a;
  Matrix* spare = &ws->b;
  for (int l = layers() - 1; l >= 0; --l) {
    const Matrix& w = weights_[l];
    const Matrix& a_in = trace.acts[l];
    // dW_l += delta * a_in^T;  db_l += row sums of delta.
    simd::gemm_bt(delta->data(), batch, w.rows, static_cast<int>(batch), a_in.data(),
                  batch, grads.weight[l].data(), w.cols, static_cast<int>(w.cols),
                  /*acc=*/true);
    for (int i = 0; i < w.rows; ++i) {
      const double* row = delta->data() + static_cast<size_t>(i) * batch;
      double s = 0.0;
      for (int64_t j = 0; j < batch; ++j) s += row[j];
      grads.bias[l][i] += s;
    }
    if (l == 0) break;
    shaped(*spare, static_cast<int>(w.cols));
    simd::gemm_packed(wtpack_[l].data(), static_cast<int>(w.cols), w.rows,
                      delta->data(), batch, spare->data(), batch,
                      static_cast<int>(batch), /*acc=*/false);
    // Through the ELU of layer l-1 (its post-activations are acts[l]).
    simd::elu_backward(a_in.data(), spare->data(), spare->data(),
                       static_cast<int64_t>(spare->rows) * batch);
    std::swap(delta, spare);
  }
}

Matrix Mlp::input_jacobian(const Vec& x) const {
  if (!packs_valid_) sync_packs();
  const int d = input_dim();
  // Tangent block [width x d], seeded with the identity.
  Matrix jac(d, d);
  for (int i = 0; i < d; ++i) jac.at(i, i) = 1.0;
  Vec cur = x;
  for (int l = 0; l < layers(); ++l) {
    const Matrix& w = weights_[l];
    // Activation values (needed for the ELU derivative).
    Vec z(w.rows);
    for (int i = 0; i < w.rows; ++i) {
      const double* row = w.data() + static_cast<size_t>(i) * w.cols;
      double s = biases_[l][i];
      for (int64_t j = 0; j < w.cols; ++j) s += row[j] * cur[j];
      z[i] = s;
    }
    Matrix jnext(w.rows, d);
    simd::gemm_packed(wpack_[l].data(), w.rows, static_cast<int>(w.cols), jac.data(), d,
                      jnext.data(), d, d, /*acc=*/false);
    if (l + 1 < layers()) {
      for (int i = 0; i < w.rows; ++i) {
        double deriv = 1.0;
        if (z[i] < 0.0) {
          z[i] = simd::expm1_neg(z[i]);
          deriv = z[i] + 1.0;
        }
        for (int c = 0; c < d; ++c) jnext.at(i, c) *= deriv;
      }
    }
    cur = z;
    jac = std::move(jnext);
  }
  return jac;
}

Vec Mlp::input_gradient(const Vec& x, int output_index) const {
  // Single-point reverse pass through plain loops.
  std::vector<Vec> acts;
  acts.push_back(x);
  Vec cur = x;
  for (int l = 0; l < layers(); ++l) {
    const Matrix& w = weights_[l];
    Vec next(w.rows);
    for (int i = 0; i < w.rows; ++i) {
      const double* row = w.data() + static_cast<size_t>(i) * w.cols;
      double s = biases_[l][i];
      for (int64_t j = 0; j < w.cols; ++j) s += row[j] * cur[j];
      next[i] = s;
    }
    if (l + 1 < layers())
      for (double& v : next) v = v >= 0.0 ? v : simd::expm1_neg(v);
    acts.push_back(next);
    cur = next;
  }
  Vec delta(output_dim(), 0.0);
  delta[output_index] = 1.0;
  for (int l = layers() - 1; l >= 0; --l) {
    const Matrix& w = weights_[l];
    Vec dprev(w.cols, 0.0);
    for (int i = 0; i < w.rows; ++i) {
      const double* row = w.data() + static_cast<size_t>(i) * w.cols;
      for (int64_t j = 0; j < w.cols; ++j) dprev[j] += row[j] * delta[i];
    }
    if (l > 0) {
      const Vec& a = acts[l];
      for (size_t j = 0; j < dprev.size(); ++j)
        dprev[j] *= a[j] >= 0.0 ? 1.0 : a[j] + 1.0;
    }
    delta = std::move(dprev);
  }
  return delta;
}

Mlp he_init(const std::vector<int>& widths, RandomStream& rng) {
  Mlp net(widths);
  for (int l = 0; l < net.layers(); ++l) {
    Matrix& w = net.weight(l);
    const double bound = std::sqrt(6.0 / static_cast<double>(w.cols));
    for (auto& v : w.a) v = bound * (2.0 * rng.uniform() - 1.0);
  }
  net.sync_packs();
  return net;
}

AdamState::AdamState(const Mlp& net, AdamConfig cfg) : cfg_(cfg) {
  for (int l = 0; l < net.layers(); ++l) {
    mw_.emplace_back(net.weight(l).rows, net.weight(l).cols);
    vw_.emplace_back(net.weight(l).rows, net.weight(l).cols);
    mb_.emplace_back(net.bias(l).size(), 0.0);
    vb_.emplace_back(net.bias(l).size(), 0.0);
  }
}

void AdamState::step(Mlp& net, const Mlp::Gradients& grads, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  auto update = [&](double* theta, double* m, double* v, const double* g, size_t n) {
    for (size_t i = 0; i < n; ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  };
  for (int l = 0; l < net.layers(); ++l) {
    update(net.weight(l).a.data(), mw_[l].a.data(), vw_[l].a.data(),
           grads.weight[l].a.data(), net.weight(l).a.size());
    update(net.bias(l).data(), mb_[l].data(), vb_[l].data(), grads.bias[l].data(),
           net.bias(l).size());
  }
  net.sync_packs();
}

namespace {
constexpr char kMagic[8] = {'S', 'J', 'R', 'P', 'N', 'E', 'T', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& f, uint32_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::ifstream& f) {
  uint32_t v = 0;
  f.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const std::vector<const Mlp*>& nets) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write(kMagic, sizeof(kMagic));
  write_u32(f, kVersion);
  write_u32(f, static_cast<uint32_t>(nets.size()));
  for (const Mlp* net : nets) {
    write_u32(f, static_cast<uint32_t>(net->widths().size()));
    for (int w : net->widths()) write_u32(f, static_cast<uint32_t>(w));
  }
  for (const Mlp* net : nets) {
    for (int l = 0; l < net->layers(); ++l) {
      const auto& w = net->weight(l).a;
      f.write(reinterpret_cast<const char*>(w.data()), w.size() * sizeof(double));
      const auto& b = net->bias(l);
      f.write(reinterpret_cast<const char*>(b.data()), b.size() * sizeof(double));
    }
  }
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

std::vector<Mlp> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  const uint32_t version = read_u32(f);
  if (version != kVersion) throw std::runtime_error("unsupported checkpoint version");
  const uint32_t count = read_u32(f);
  std::vector<std::vector<int>> widths(count);
  for (auto& ws : widths) {
    const uint32_t n = read_u32(f);
    ws.resize(n);
    for (auto& w : ws) w = static_cast<int>(read_u32(f));
  }
  std::vector<Mlp> nets;
  nets.reserve(count);
  for (const auto& ws : widths) nets.emplace_back(ws);
  for (auto& net : nets) {
    for (int l = 0; l < net.layers(); ++l) {
      auto& w = net.weight(l).a;
      f.read(reinterpret_cast<char*>(w.data()), w.size() * sizeof(double));
      auto& b = net.bias(l);
      f.read(reinterpret_cast<char*>(b.data()), b.size() * sizeof(double));
    }
    net.sync_packs();
  }
  if (!f) throw std::runtime_error("truncated checkpoint: " + path);
  return nets;
}

}  // namespace sjrp::nn
