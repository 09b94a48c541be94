/*
 * Copyright 2026 The cshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Reference 1-D convolutional classifier over (time, metric) windows.
//
//   input 2 x W -> [conv k, stride 1, same padding, ReLU] x L
//               -> flatten -> dense fc_size (ReLU) -> dense 3 -> softmax
//
// Convolutions are lowered to GEMMs over im2col patch matrices; activations
// are stored as C x (batch * W) column-major matrices so that a sample's
// flattened feature vector is one contiguous column block.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "cshap/dataset.hpp"
#include "cshap/error.hpp"
#include "cshap/model.hpp"
#include "cshap/numeric.hpp"

namespace cshap {

struct TrainingConfig {
  int epochs = 30;
  std::size_t batch_size = 64;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

struct ConvNetConfig {
  std::vector<int> channel_sizes = {8, 8, 16};
  int kernel_size = 5;
  int fc_size = 64;
  std::size_t window_size = 100;
  TrainingConfig training;

  static constexpr int kInputChannels = 2;

  // Architecture as listed for the full-size model.
  static ConvNetConfig paper_scale(std::size_t window_size) {
    ConvNetConfig c;
    c.channel_sizes = {64, 64, 128, 128, 256, 256};
    c.fc_size = 4096;
    c.window_size = window_size;
    return c;
  }

  void validate() const {
    require(!channel_sizes.empty(), "convnet needs at least one convolution layer");
    for (int c : channel_sizes) require(c >= 1, "convnet channel sizes must be positive");
    require(kernel_size >= 1 && kernel_size % 2 == 1, "convnet kernel size must be odd");
    require(fc_size >= 1, "convnet fc size must be positive");
    require(window_size >= 1, "convnet window size must be positive");
    require(training.epochs >= 0 && training.batch_size >= 1, "convnet training config invalid");
    require(training.learning_rate > 0.0 && training.momentum >= 0.0 && training.momentum < 1.0,
            "convnet optimizer config invalid");
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    std::size_t cin = kInputChannels;
    for (int c : channel_sizes) {
      n += static_cast<std::size_t>(c) * cin * static_cast<std::size_t>(kernel_size) + static_cast<std::size_t>(c);
      cin = static_cast<std::size_t>(c);
    }
    n += static_cast<std::size_t>(fc_size) * cin * window_size + static_cast<std::size_t>(fc_size);
    n += static_cast<std::size_t>(kNumClasses) * static_cast<std::size_t>(fc_size) + kNumClasses;
    return n;
  }

  nlohmann::json to_json() const {
    return {{"channel_sizes", channel_sizes},
            {"kernel_size", kernel_size},
            {"fc_size", fc_size},
            {"window_size", window_size},
            {"training",
             {{"epochs", training.epochs},
              {"batch_size", training.batch_size},
              {"learning_rate", training.learning_rate},
              {"momentum", training.momentum},
              {"seed", training.seed}}}};
  }

  static ConvNetConfig from_json(const nlohmann::json& j) {
    ConvNetConfig c;
    try {
      c.channel_sizes = j.value("channel_sizes", c.channel_sizes);
      c.kernel_size = j.value("kernel_size", c.kernel_size);
      c.fc_size = j.value("fc_size", c.fc_size);
      c.window_size = j.value("window_size", c.window_size);
      if (j.contains("training")) {
        const auto& t = j.at("training");
        c.training.epochs = t.value("epochs", c.training.epochs);
        c.training.batch_size = t.value("batch_size", c.training.batch_size);
        c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
        c.training.momentum = t.value("momentum", c.training.momentum);
        c.training.seed = t.value("seed", c.training.seed);
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("convnet config: ") + e.what());
    }
    c.validate();
    return c;
  }
};

// Per-channel standardization statistics (time, metric), fixed at training.
struct ChannelStats {
  double time_mean = 0.0, time_std = 1.0;
  double metric_mean = 0.0, metric_std = 1.0;
};

inline ChannelStats compute_channel_stats(const std::vector<WindowInstance>& windows) {
  double st = 0, st2 = 0, sm = 0, sm2 = 0;
  std::size_t n = 0;
  for (const WindowInstance& w : windows) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      st += w.time_channel[i];
      st2 += w.time_channel[i] * w.time_channel[i];
      sm += w.metric_channel[i];
      sm2 += w.metric_channel[i] * w.metric_channel[i];
    }
    n += w.size();
  }
  ChannelStats s;
  if (n == 0) return s;
  const double dn = static_cast<double>(n);
  s.time_mean = st / dn;
  s.metric_mean = sm / dn;
  const double vt = std::max(0.0, st2 / dn - s.time_mean * s.time_mean);
  const double vm = std::max(0.0, sm2 / dn - s.metric_mean * s.metric_mean);
  s.time_std = vt > 0.0 ? std::sqrt(vt) : 1.0;
  s.metric_std = vm > 0.0 ? std::sqrt(vm) : 1.0;
  return s;
}

class ConvNet final : public Classifier {
 public:
  using Matrix = Eigen::MatrixXd;

  explicit ConvNet(ConvNetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build_layout();
    params_.assign(cfg_.parameter_count(), 0.0);
  }

  const ConvNetConfig& config() const { return cfg_; }
  const ChannelStats& stats() const { return stats_; }
  void set_stats(const ChannelStats& s) { stats_ = s; }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  // He-normal weights, zero biases.
  void init_random(std::uint64_t seed) {
    Rng rng(seed);
    std::fill(params_.begin(), params_.end(), 0.0);
    auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in) {
      std::normal_distribution<double> d(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (std::size_t i = 0; i < count; ++i) params_[off + i] = d(rng);
    };
    for (const ConvLayout& l : conv_) fill(l.w, l.cout * l.cin * k(), l.cin * k());
    fill(fc1_w_, fc_ * flat_, flat_);
    fill(fc2_w_, kNumClasses * fc_, fc_);
  }

  void zero_output_layer() {
    std::fill(params_.begin() + static_cast<std::ptrdiff_t>(fc2_w_), params_.end(), 0.0);
  }

  Probabilities predict_values(std::span<const double> time, std::span<const double> metric) const override {
    return predict_batch(time, std::vector<Series>{Series(metric.begin(), metric.end())}).front();
  }

  std::vector<Probabilities> predict_batch(std::span<const double> time,
                                           const std::vector<Series>& metrics) const override {
    std::vector<Probabilities> out;
    out.reserve(metrics.size());
    constexpr std::size_t kChunk = 128;
    for (std::size_t start = 0; start < metrics.size(); start += kChunk) {
      const std::size_t b = std::min(kChunk, metrics.size() - start);
      Matrix input(ConvNetConfig::kInputChannels, b * w());
      for (std::size_t s = 0; s < b; ++s) {
        load_sample(input, s, time, metrics[start + s]);
      }
      Cache cache;
      forward(input, b, cache);
      for (std::size_t s = 0; s < b; ++s) {
        Probabilities p;
        for (int c = 0; c < kNumClasses; ++c) p[c] = cache.probs(c, static_cast<Eigen::Index>(s));
        out.push_back(p);
      }
    }
    return out;
  }

  std::string kind() const override { return "convnet"; }

  // Standardized input block for a set of windows.
  Matrix make_input(const std::vector<WindowInstance>& windows, std::span<const std::size_t> idx) const {
    Matrix input(ConvNetConfig::kInputChannels, idx.size() * w());
    for (std::size_t s = 0; s < idx.size(); ++s) {
      const WindowInstance& win = windows[idx[s]];
      load_sample(input, s, win.time_channel, win.metric_channel);
    }
    return input;
  }

  // Mean cross-entropy over the batch; writes d(loss)/d(params) into grad.
  double loss_and_gradient(const Matrix& input, std::span<const int> labels, std::span<double> grad) const {
    const std::size_t b = labels.size();
    Cache cache;
    forward(input, b, cache);
    double loss = 0.0;
    Matrix dlogits = cache.probs;
    for (std::size_t s = 0; s < b; ++s) {
      const auto col = static_cast<Eigen::Index>(s);
      loss -= std::log(std::max(cache.probs(labels[s], col), 1e-300));
      dlogits(labels[s], col) -= 1.0;
    }
    loss /= static_cast<double>(b);
    dlogits /= static_cast<double>(b);
    backward(cache, dlogits, b, grad);
    return loss;
  }

  double loss(const Matrix& input, std::span<const int> labels) const {
    Cache cache;
    forward(input, labels.size(), cache);
    double l = 0.0;
    for (std::size_t s = 0; s < labels.size(); ++s) {
      l -= std::log(std::max(cache.probs(labels[s], static_cast<Eigen::Index>(s)), 1e-300));
    }
    return l / static_cast<double>(labels.size());
  }

  // Hash of the on/off pattern of every ReLU for this input. Finite
  // differences are only meaningful between inputs that share a pattern.
  std::uint64_t activation_signature(const Matrix& input, std::size_t batch) const {
    Cache cache;
    forward(input, batch, cache);
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](const Matrix& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        h ^= m.data()[i] > 0.0 ? 1u : 0u;
        h *= 1099511628211ULL;
      }
    };
    for (const Matrix& m : cache.pre) mix(m);
    mix(cache.flat_pre);
    return h;
  }

  void save(const std::filesystem::path& path) const;
  static ConvNet load(const std::filesystem::path& path);

 private:
  struct ConvLayout {
    std::size_t cin, cout, w, b;  // w/b: parameter offsets
  };

  struct Cache {
    std::vector<Matrix> patches;  // per conv layer, (cin*k) x (B*W)
    std::vector<Matrix> pre;      // per conv layer, cout x (B*W)
    std::vector<Matrix> act;      // per conv layer, post-ReLU
    Matrix flat_pre, flat_act;    // fc x B
    Matrix probs;                 // 3 x B
  };

  std::size_t w() const { return cfg_.window_size; }
  std::size_t k() const { return static_cast<std::size_t>(cfg_.kernel_size); }

  void build_layout() {
    std::size_t off = 0;
    std::size_t cin = ConvNetConfig::kInputChannels;
    for (int c : cfg_.channel_sizes) {
      const auto cout = static_cast<std::size_t>(c);
      ConvLayout l{cin, cout, off, off + cout * cin * k()};
      off = l.b + cout;
      conv_.push_back(l);
      cin = cout;
    }
    flat_ = cin * w();
    fc_ = static_cast<std::size_t>(cfg_.fc_size);
    fc1_w_ = off;
    fc1_b_ = fc1_w_ + fc_ * flat_;
    fc2_w_ = fc1_b_ + fc_;
    fc2_b_ = fc2_w_ + kNumClasses * fc_;
  }

  void load_sample(Matrix& input, std::size_t s, std::span<const double> time,
                   std::span<const double> metric) const {
    if (time.size() != w() || metric.size() != w()) {
      throw DataError("convnet expects windows of length " + std::to_string(w()) + ", got " +
                      std::to_string(metric.size()));
    }
    for (std::size_t t = 0; t < w(); ++t) {
      const auto col = static_cast<Eigen::Index>(s * w() + t);
      input(0, col) = (time[t] - stats_.time_mean) / stats_.time_std;
      input(1, col) = (metric[t] - stats_.metric_mean) / stats_.metric_std;
    }
  }

  using ConstMap = Eigen::Map<const Matrix>;
  using MutMap = Eigen::Map<Matrix>;

  ConstMap pmat(std::size_t off, std::size_t rows, std::size_t cols) const {
    return ConstMap(params_.data() + off, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }
  Eigen::Map<const Eigen::VectorXd> pvec(std::size_t off, std::size_t n) const {
    return Eigen::Map<const Eigen::VectorXd>(params_.data() + off, static_cast<Eigen::Index>(n));
  }

  Matrix im2col(const Matrix& a, std::size_t batch) const {
    const auto cin = static_cast<std::size_t>(a.rows());
    const std::size_t kk = k(), pad = kk / 2, ww = w();
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(cin * kk), static_cast<Eigen::Index>(batch * ww));
    for (std::size_t s = 0; s < batch; ++s) {
      for (std::size_t t = 0; t < ww; ++t) {
        double* dst = p.data() + (s * ww + t) * cin * kk;
        for (std::size_t j = 0; j < kk; ++j) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(ww)) continue;
          const double* col = a.data() + (s * ww + static_cast<std::size_t>(src)) * cin;
          for (std::size_t c = 0; c < cin; ++c) dst[c * kk + j] = col[c];
        }
      }
    }
    return p;
  }

  Matrix col2im(const Matrix& dp, std::size_t cin, std::size_t batch) const {
    const std::size_t kk = k(), pad = kk / 2, ww = w();
    Matrix da = Matrix::Zero(static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(batch * ww));
    for (std::size_t s = 0; s < batch; ++s) {
      for (std::size_t t = 0; t < ww; ++t) {
        const double* src_col = dp.data() + (s * ww + t) * cin * kk;
        for (std::size_t j = 0; j < kk; ++j) {
          const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(t + j) - static_cast<std::ptrdiff_t>(pad);
          if (dst < 0 || dst >= static_cast<std::ptrdiff_t>(ww)) continue;
          double* col = da.data() + (s * ww + static_cast<std::size_t>(dst)) * cin;
          for (std::size_t c = 0; c < cin; ++c) col[c] += src_col[c * kk + j];
        }
      }
    }
    return da;
  }

  void forward(const Matrix& input, std::size_t batch, Cache& cache) const {
    const Matrix* a = &input;
    cache.patches.resize(conv_.size());
    cache.pre.resize(conv_.size());
    cache.act.resize(conv_.size());
    for (std::size_t l = 0; l < conv_.size(); ++l) {
      const ConvLayout& L = conv_[l];
      cache.patches[l] = im2col(*a, batch);
      cache.pre[l].noalias() = pmat(L.w, L.cout, L.cin * k()) * cache.patches[l];
      cache.pre[l].colwise() += pvec(L.b, L.cout);
      cache.act[l] = cache.pre[l].cwiseMax(0.0);
      a = &cache.act[l];
    }
    const ConstMap flat(a->data(), static_cast<Eigen::Index>(flat_), static_cast<Eigen::Index>(batch));
    cache.flat_pre.noalias() = pmat(fc1_w_, fc_, flat_) * flat;
    cache.flat_pre.colwise() += pvec(fc1_b_, fc_);
    cache.flat_act = cache.flat_pre.cwiseMax(0.0);
    Matrix logits = pmat(fc2_w_, kNumClasses, fc_) * cache.flat_act;
    logits.colwise() += pvec(fc2_b_, kNumClasses);
    cache.probs.resize(kNumClasses, static_cast<Eigen::Index>(batch));
    for (Eigen::Index s = 0; s < logits.cols(); ++s) {
      const double m = logits.col(s).maxCoeff();
      double z = 0.0;
      for (int c = 0; c < kNumClasses; ++c) {
        cache.probs(c, s) = std::exp(logits(c, s) - m);
        z += cache.probs(c, s);
      }
      cache.probs.col(s) /= z;
    }
  }

  void backward(const Cache& cache, const Matrix& dlogits, std::size_t batch, std::span<double> grad) const {
    require(grad.size() == params_.size(), "gradient buffer has the wrong size");
    auto gmat = [&](std::size_t off, std::size_t rows, std::size_t cols) {
      return MutMap(grad.data() + off, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    };
    auto gvec = [&](std::size_t off, std::size_t n) {
      return Eigen::Map<Eigen::VectorXd>(grad.data() + off, static_cast<Eigen::Index>(n));
    };
    const Matrix& last = cache.act.back();
    const ConstMap flat(last.data(), static_cast<Eigen::Index>(flat_), static_cast<Eigen::Index>(batch));

    gmat(fc2_w_, kNumClasses, fc_).noalias() = dlogits * cache.flat_act.transpose();
    gvec(fc2_b_, kNumClasses) = dlogits.rowwise().sum();
    Matrix dh = pmat(fc2_w_, kNumClasses, fc_).transpose() * dlogits;
    dh = dh.cwiseProduct((cache.flat_pre.array() > 0.0).cast<double>().matrix());
    gmat(fc1_w_, fc_, flat_).noalias() = dh * flat.transpose();
    gvec(fc1_b_, fc_) = dh.rowwise().sum();
    Matrix dflat = pmat(fc1_w_, fc_, flat_).transpose() * dh;
    Matrix da = Eigen::Map<Matrix>(dflat.data(), static_cast<Eigen::Index>(conv_.back().cout),
                                   static_cast<Eigen::Index>(batch * w()));

    for (std::size_t l = conv_.size(); l-- > 0;) {
      const ConvLayout& L = conv_[l];
      Matrix dz = da.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
      gmat(L.w, L.cout, L.cin * k()).noalias() = dz * cache.patches[l].transpose();
      gvec(L.b, L.cout) = dz.rowwise().sum();
      if (l == 0) break;
      Matrix dp = pmat(L.w, L.cout, L.cin * k()).transpose() * dz;
      da = col2im(dp, L.cin, batch);
    }
  }

  ConvNetConfig cfg_;
  ChannelStats stats_;
  std::vector<double> params_;
  std::vector<ConvLayout> conv_;
  std::size_t flat_ = 0, fc_ = 0;
  std::size_t fc1_w_ = 0, fc1_b_ = 0, fc2_w_ = 0, fc2_b_ = 0;
};

// Checkpoint layout (little-endian):
//   "CSHAPNET" | u32 version | u64 header length | JSON header | u64 count | f64[count]
// The JSON header carries the architecture, training settings and channel
// standardization statistics.
namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline std::uint64_t get_uint(std::istream& is, int bytes) {
  unsigned char b[8] = {};
  if (!is.read(reinterpret_cast<char*>(b), bytes)) throw DataError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void ConvNet::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  nlohmann::json header = {{"config", cfg_.to_json()},
                           {"stats",
                            {{"time_mean", stats_.time_mean},
                             {"time_std", stats_.time_std},
                             {"metric_mean", stats_.metric_mean},
                             {"metric_std", stats_.metric_std}}}};
  const std::string text = header.dump();
  os.write("CSHAPNET", 8);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  detail::put_u64(os, params_.size());
  for (double v : params_) detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline ConvNet ConvNet::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, "CSHAPNET", 8) != 0) {
    throw DataError(path.string() + ": not a convnet checkpoint");
  }
  const auto version = detail::get_uint(is, 4);
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = detail::get_uint(is, 8);
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw DataError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }
  ConvNet net(ConvNetConfig::from_json(header.at("config")));
  const auto& st = header.at("stats");
  net.stats_ = {st.at("time_mean").get<double>(), st.at("time_std").get<double>(),
                st.at("metric_mean").get<double>(), st.at("metric_std").get<double>()};
  const auto count = detail::get_uint(is, 8);
  if (count != net.params_.size()) throw DataError(path.string() + ": parameter count mismatch");
  for (double& v : net.params_) v = std::bit_cast<double>(detail::get_uint(is, 8));
  return net;
}

struct TrainResult {
  ConvNet model;
  std::vector<double> loss_curve;  // mean training loss per epoch
};

// Mini-batch SGD with momentum on the cross-entropy loss.
inline TrainResult train_convnet(const std::vector<WindowInstance>& train, const ConvNetConfig& cfg) {
  cfg.validate();
  require(!train.empty(), "training set is empty");
  std::array<std::size_t, kNumClasses> counts{};
  for (const WindowInstance& w : train) {
    require(w.size() == cfg.window_size, "training window length " + std::to_string(w.size()) +
                                             " != configured window size " + std::to_string(cfg.window_size));
    ++counts[class_index(w.label)];
  }
  for (Condition c : kAllConditions) {
    require(counts[class_index(c)] > 0,
            "training set has no instances of class " + std::string(condition_name(c)));
  }

  TrainResult res{ConvNet(cfg), {}};
  ConvNet& net = res.model;
  net.init_random(mix_seed(cfg.training.seed, 1));
  net.set_stats(compute_channel_stats(train));

  std::vector<double> grad(net.parameters().size());
  std::vector<double> velocity(grad.size(), 0.0);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(mix_seed(cfg.training.seed, 2));
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.training.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.training.batch_size) {
      const std::size_t b = std::min(cfg.training.batch_size, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, b);
      labels.clear();
      for (std::size_t i : idx) labels.push_back(class_index(train[i].label));
      const auto input = net.make_input(train, idx);
      const double loss = net.loss_and_gradient(input, labels, grad);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch offset " +
                           std::to_string(start) + " (learning rate " +
                           format_double(cfg.training.learning_rate) + ")");
      }
      epoch_loss += loss * static_cast<double>(b);
      auto params = net.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = cfg.training.momentum * velocity[i] - cfg.training.learning_rate * grad[i];
        params[i] += velocity[i];
      }
    }
    res.loss_curve.push_back(epoch_loss / static_cast<double>(train.size()));
  }
  return res;
}

}  // namespace cshap
