#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crmgrasp/rng.hpp"

namespace crmgrasp::nn {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

struct MlpGrads {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;

  void set_zero() {
    for (auto& m : w) m.setZero();
    for (auto& v : b) v.setZero();
  }

  MlpGrads& operator+=(const MlpGrads& o) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += o.w[i];
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += o.b[i];
    return *this;
  }

  MlpGrads& operator*=(double s) {
    for (auto& m : w) m *= s;
    for (auto& v : b) v *= s;
    return *this;
  }

  bool finite() const {
    for (const auto& m : w)
      if (!m.allFinite()) return false;
    for (const auto& v : b)
      if (!v.allFinite()) return false;
    return true;
  }
};

// Dense multilayer perceptron, tanh on hidden layers and identity on the
// output layer. Weights are stored per layer as (out x in) matrices.
class Mlp {
 public:
  explicit Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2)
      throw std::invalid_argument("Mlp: need at least input and output layer");
    for (int s : sizes_)
      if (s <= 0) throw std::invalid_argument("Mlp: layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      w_.emplace_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
      b_.emplace_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
  }

  // Glorot-uniform initialization: +-sqrt(6 / (fan_in + fan_out)).
  static Mlp glorot(const std::vector<int>& layer_sizes, Rng& rng) {
    Mlp net(layer_sizes);
    for (std::size_t l = 0; l < net.w_.size(); ++l) {
      const double lim =
          std::sqrt(6.0 / static_cast<double>(net.sizes_[l] + net.sizes_[l + 1]));
      auto& m = net.w_[l];
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-lim, lim);
    }
    return net;
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t layer_count() const { return w_.size(); }

  std::vector<Eigen::MatrixXd>& weights() { return w_; }
  std::vector<Eigen::VectorXd>& biases() { return b_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }

  // Cached activations from a forward pass, consumed by backward().
  struct Trace {
    std::vector<Eigen::VectorXd> act;  // act[0] = input, act[l+1] = layer l output
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x, Trace* trace = nullptr) const {
    if (x.size() != sizes_.front())
      throw std::invalid_argument("mlp_forward: input size " + std::to_string(x.size()) +
                                  ", expected " + std::to_string(sizes_.front()));
    Eigen::VectorXd a = x;
    if (trace) {
      trace->act.clear();
      trace->act.push_back(a);
    }
    for (std::size_t l = 0; l < w_.size(); ++l) {
      Eigen::VectorXd z = w_[l] * a + b_[l];
      a = (l + 1 < w_.size()) ? z.array().tanh().matrix() : z;
      if (trace) trace->act.push_back(a);
    }
    return a;
  }

  // Backpropagates grad_out through the cached pass. Optionally reports the
  // gradient w.r.t. the network input.
  MlpGrads backward(const Trace& trace, const Eigen::VectorXd& grad_out,
                    Eigen::VectorXd* grad_in = nullptr) const {
    if (trace.act.size() != w_.size() + 1)
      throw std::invalid_argument("mlp_backward: trace does not match network depth");
    if (grad_out.size() != sizes_.back())
      throw std::invalid_argument("mlp_backward: grad size " +
                                  std::to_string(grad_out.size()) + ", expected " +
                                  std::to_string(sizes_.back()));
    MlpGrads g = zero_grads();
    Eigen::VectorXd delta = grad_out;
    for (std::size_t l = w_.size(); l-- > 0;) {
      if (!delta.allFinite())
        throw std::runtime_error("mlp_backward: non-finite gradient at layer " +
                                 std::to_string(l));
      g.w[l] = delta * trace.act[l].transpose();
      g.b[l] = delta;
      if (l > 0) {
        // tanh'(z) expressed through the cached activation.
        const auto& a = trace.act[l];
        delta = (w_[l].transpose() * delta).cwiseProduct(
            (1.0 - a.array().square()).matrix());
      } else if (grad_in) {
        *grad_in = w_[0].transpose() * delta;
      }
    }
    return g;
  }

  MlpGrads zero_grads() const {
    MlpGrads g;
    for (std::size_t l = 0; l < w_.size(); ++l) {
      g.w.emplace_back(Eigen::MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
      g.b.emplace_back(Eigen::VectorXd::Zero(b_[l].size()));
    }
    return g;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < w_.size(); ++l)
      n += static_cast<std::size_t>(w_[l].size() + b_[l].size());
    return n;
  }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adaptive-moment optimizer over one Mlp. step() skips the update and
// returns false when handed a non-finite gradient.
class Adam {
 public:
  Adam(const Mlp& shape, AdamConfig cfg) : cfg_(cfg), m_(shape.zero_grads()), v_(shape.zero_grads()) {
    if (cfg_.lr <= 0.0) throw std::invalid_argument("Adam: lr must be positive");
  }

  bool step(Mlp& params, const MlpGrads& g) {
    if (!g.finite()) return false;
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t l = 0; l < m_.w.size(); ++l) {
      m_.w[l] = cfg_.beta1 * m_.w[l] + (1.0 - cfg_.beta1) * g.w[l];
      v_.w[l] = cfg_.beta2 * v_.w[l] + (1.0 - cfg_.beta2) * g.w[l].cwiseProduct(g.w[l]);
      params.weights()[l].array() -=
          cfg_.lr * (m_.w[l].array() / bc1) /
          ((v_.w[l].array() / bc2).sqrt() + cfg_.eps);
      m_.b[l] = cfg_.beta1 * m_.b[l] + (1.0 - cfg_.beta1) * g.b[l];
      v_.b[l] = cfg_.beta2 * v_.b[l] + (1.0 - cfg_.beta2) * g.b[l].cwiseProduct(g.b[l]);
      params.biases()[l].array() -=
          cfg_.lr * (m_.b[l].array() / bc1) /
          ((v_.b[l].array() / bc2).sqrt() + cfg_.eps);
    }
    return true;
  }

  long step_count() const { return t_; }
  AdamConfig& config() { return cfg_; }
  const MlpGrads& first_moment() const { return m_; }
  const MlpGrads& second_moment() const { return v_; }

 private:
  AdamConfig cfg_;
  MlpGrads m_, v_;
  long t_ = 0;
};

// Adam over a flat vector (used for the state-independent log_std head).
class AdamVec {
 public:
  AdamVec(Eigen::Index n, AdamConfig cfg)
      : cfg_(cfg), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  bool step(Eigen::VectorXd& params, const Eigen::VectorXd& g) {
    if (!g.allFinite()) return false;
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    params.array() -= cfg_.lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
    return true;
  }

  long step_count() const { return t_; }
  AdamConfig& config() { return cfg_; }

 private:
  AdamConfig cfg_;
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

inline double gaussian_log_prob(const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& log_std,
                                const Eigen::VectorXd& action) {
  double lp = 0.0;
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    const double ls = std::clamp(log_std[i], kLogStdMin, kLogStdMax);
    const double z = (action[i] - mean[i]) * std::exp(-ls);
    lp += -0.5 * z * z - ls - 0.5 * kLogTwoPi;
  }
  return lp;
}

// Diagonal-Gaussian policy head: Mlp mean plus a state-independent log_std
// vector, clamped to [kLogStdMin, kLogStdMax] wherever it is used.
class GaussianPolicy {
 public:
  GaussianPolicy(Mlp mean_net, Eigen::Index action_dim)
      : net_(std::move(mean_net)), log_std_(Eigen::VectorXd::Zero(action_dim)) {
    if (net_.output_dim() != action_dim)
      throw std::invalid_argument("GaussianPolicy: net output does not match action_dim");
  }

  struct Sample {
    Eigen::VectorXd action;
    double log_prob;
  };

  Sample sample(const Eigen::VectorXd& obs, Rng& rng) const {
    const Eigen::VectorXd mean = net_.forward(obs);
    Eigen::VectorXd action(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      const double ls = std::clamp(log_std_[i], kLogStdMin, kLogStdMax);
      action[i] = mean[i] + std::exp(ls) * rng.normal();
    }
    return {action, gaussian_log_prob(mean, log_std_, action)};
  }

  Eigen::VectorXd mean_action(const Eigen::VectorXd& obs) const { return net_.forward(obs); }

  double log_prob(const Eigen::VectorXd& obs, const Eigen::VectorXd& action) const {
    return gaussian_log_prob(net_.forward(obs), log_std_, action);
  }

  Eigen::VectorXd clamped_log_std() const {
    return log_std_.array().max(kLogStdMin).min(kLogStdMax).matrix();
  }

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  Eigen::VectorXd& log_std() { return log_std_; }
  const Eigen::VectorXd& log_std() const { return log_std_; }
  Eigen::Index action_dim() const { return log_std_.size(); }

 private:
  Mlp net_;
  Eigen::VectorXd log_std_;
};

// ---------------------------------------------------------------------------
// Checkpoint serialization: versioned binary (header with layer sizes and
// log_std, then flat 64-bit floats) plus a JSON export for inspection.

struct CheckpointEntry {
  std::string name;
  Mlp net;
  bool has_log_std = false;
  Eigen::VectorXd log_std;
};

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
inline void write_f64s(std::ostream& os, const double* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
inline void read_f64s(std::istream& is, double* p, std::size_t n) {
  is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointMagic = 0x43524D47;  // "CRMG"
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path,
                            const std::vector<CheckpointEntry>& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  detail::write_u32(os, kCheckpointMagic);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_u32(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    detail::write_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::write_u32(os, static_cast<std::uint32_t>(e.net.layer_sizes().size()));
    for (int s : e.net.layer_sizes()) detail::write_u32(os, static_cast<std::uint32_t>(s));
    detail::write_u32(os, e.has_log_std ? 1u : 0u);
    if (e.has_log_std) {
      detail::write_u32(os, static_cast<std::uint32_t>(e.log_std.size()));
      detail::write_f64s(os, e.log_std.data(), static_cast<std::size_t>(e.log_std.size()));
    }
    for (std::size_t l = 0; l < e.net.layer_count(); ++l) {
      detail::write_f64s(os, e.net.weights()[l].data(),
                         static_cast<std::size_t>(e.net.weights()[l].size()));
      detail::write_f64s(os, e.net.biases()[l].data(),
                         static_cast<std::size_t>(e.net.biases()[l].size()));
    }
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  if (detail::read_u32(is) != kCheckpointMagic)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  if (detail::read_u32(is) != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version in " + path);
  const std::uint32_t n = detail::read_u32(is);
  std::vector<CheckpointEntry> entries;
  entries.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name(detail::read_u32(is), '\0');
    is.read(name.data(), static_cast<std::streamsize>(name.size()));
    std::vector<int> sizes(detail::read_u32(is));
    for (auto& s : sizes) s = static_cast<int>(detail::read_u32(is));
    CheckpointEntry e{name, Mlp(sizes)};
    e.has_log_std = detail::read_u32(is) != 0;
    if (e.has_log_std) {
      e.log_std.resize(detail::read_u32(is));
      detail::read_f64s(is, e.log_std.data(), static_cast<std::size_t>(e.log_std.size()));
    }
    for (std::size_t l = 0; l < e.net.layer_count(); ++l) {
      detail::read_f64s(is, e.net.weights()[l].data(),
                        static_cast<std::size_t>(e.net.weights()[l].size()));
      detail::read_f64s(is, e.net.biases()[l].data(),
                        static_cast<std::size_t>(e.net.biases()[l].size()));
    }
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path);
    entries.push_back(std::move(e));
  }
  return entries;
}

inline nlohmann::json checkpoint_to_json(const std::vector<CheckpointEntry>& entries) {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json je;
    je["name"] = e.name;
    je["layer_sizes"] = e.net.layer_sizes();
    if (e.has_log_std)
      je["log_std"] = std::vector<double>(e.log_std.data(), e.log_std.data() + e.log_std.size());
    auto layers = nlohmann::json::array();
    for (std::size_t l = 0; l < e.net.layer_count(); ++l) {
      const auto& w = e.net.weights()[l];
      nlohmann::json jl;
      jl["weights"] = std::vector<double>(w.data(), w.data() + w.size());
      const auto& b = e.net.biases()[l];
      jl["biases"] = std::vector<double>(b.data(), b.data() + b.size());
      layers.push_back(std::move(jl));
    }
    je["layers"] = std::move(layers);
    j["entries"].push_back(std::move(je));
  }
  return j;
}

}  // namespace crmgrasp::nn
