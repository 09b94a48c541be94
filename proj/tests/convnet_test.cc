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

#include "cshap/convnet.hpp"

#include <filesystem>
#include <fstream>
#include <random>

#include "cshap/oracle.hpp"
#include "gtest/gtest.h"

namespace cshap {
namespace {

std::vector<WindowInstance> TwoLevelData(std::size_t per_class, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<WindowInstance> out;
  const double levels[kNumClasses] = {0.6, 0.8, 1.0};
  for (std::size_t i = 0; i < per_class * kNumClasses; ++i) {
    WindowInstance win;
    win.label = static_cast<Condition>(i % kNumClasses);
    win.origin = {"syn", 0, i};
    for (std::size_t t = 0; t < w; ++t) {
      win.time_channel.push_back(0.001 * static_cast<double>(t));
      win.metric_channel.push_back(levels[i % kNumClasses] + noise(rng));
    }
    out.push_back(std::move(win));
  }
  return out;
}

ConvNet::Matrix RandomInput(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  ConvNet::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

TEST(ConvNetConfigTest, PaperScaleValidatesWithoutTraining) {
  const ConvNetConfig paper = ConvNetConfig::paper_scale(400);
  EXPECT_NO_THROW(paper.validate());
  EXPECT_EQ(paper.channel_sizes.size(), 6u);
  // 256 channels x 400 positions into 4096 units dominates the count.
  EXPECT_GT(paper.parameter_count(), 256u * 400u * 4096u);
  ConvNetConfig five = paper;
  five.channel_sizes.pop_back();
  EXPECT_NO_THROW(five.validate());
}

TEST(ConvNetConfigTest, RejectsInvalidShapes) {
  ConvNetConfig c;
  c.kernel_size = 4;
  EXPECT_THROW(c.validate(), DataError);
  c = ConvNetConfig{};
  c.channel_sizes.clear();
  EXPECT_THROW(c.validate(), DataError);
  c = ConvNetConfig{};
  c.training.momentum = 1.0;
  EXPECT_THROW(c.validate(), DataError);
  const ConvNetConfig back = ConvNetConfig::from_json(ConvNetConfig{}.to_json());
  EXPECT_EQ(back.to_json(), ConvNetConfig{}.to_json());
}

TEST(ConvNetTest, ParameterCountMatchesLayout) {
  ConvNetConfig c;
  c.channel_sizes = {3};
  c.kernel_size = 3;
  c.fc_size = 4;
  c.window_size = 5;
  // conv 3*2*3+3, fc1 4*15+4, fc2 3*4+3
  EXPECT_EQ(c.parameter_count(), 21u + 64u + 15u);
  EXPECT_EQ(ConvNet(c).parameters().size(), 100u);
}

TEST(ConvNetTest, ZeroedOutputLayerIsUniform) {
  ConvNetConfig cfg;
  cfg.window_size = 50;
  ConvNet net(cfg);
  net.init_random(1);
  net.zero_output_layer();
  const auto data = TwoLevelData(2, 50, 1);
  for (const auto& w : data) {
    for (double p : net.predict_proba(w)) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  }
}

TEST(ConvNetTest, RejectsLengthMismatch) {
  ConvNetConfig cfg;
  cfg.window_size = 50;
  ConvNet net(cfg);
  const auto data = TwoLevelData(1, 49, 1);
  EXPECT_THROW(net.predict_proba(data[0]), DataError);
}

TEST(ConvNetTest, BatchedAndSinglePredictionsAgree) {
  ConvNetConfig cfg;
  cfg.window_size = 30;
  ConvNet net(cfg);
  net.init_random(4);
  const auto data = TwoLevelData(50, 30, 2);
  std::vector<Series> metrics;
  for (const auto& w : data) metrics.push_back(w.metric_channel);
  const auto batch = net.predict_batch(data[0].time_channel, metrics);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto single = net.predict_proba(data[i]);
    for (int c = 0; c < kNumClasses; ++c) EXPECT_NEAR(batch[i][c], single[c], 1e-12);
  }
}

TEST(GradientTest, MatchesFiniteDifferencesOnSmallNetworks) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ConvNetConfig cfg;
    cfg.channel_sizes = {3, 4};
    cfg.kernel_size = 3;
    cfg.fc_size = 6;
    cfg.window_size = 12;
    ConvNet net(cfg);
    net.init_random(seed);
    const auto input = RandomInput(2, 4 * 12, seed + 10);
    const std::vector<int> labels = {0, 1, 2, 1};
    const auto check = oracle::finite_difference_check(net, input, labels);
    EXPECT_EQ(check.checked + check.skipped_kinks, cfg.parameter_count());
    EXPECT_LT(check.skipped_kinks * 10, cfg.parameter_count());
    EXPECT_LT(check.relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(GradientTest, DeskConfigSampledParameters) {
  ConvNetConfig cfg;
  cfg.window_size = 100;
  ConvNet net(cfg);
  net.init_random(42);
  const auto input = RandomInput(2, 3 * 100, 43);
  const std::vector<int> labels = {2, 0, 1};
  const auto check = oracle::finite_difference_check(net, input, labels, 1e-3, 97);
  EXPECT_LT(check.relative_error, 1e-4);
  EXPECT_LT(check.skipped_kinks * 10, check.checked);
}

TEST(TrainTest, SeparableDataIsLearned) {
  ConvNetConfig cfg;
  cfg.window_size = 50;
  cfg.training.epochs = 20;
  cfg.training.batch_size = 16;
  cfg.training.seed = 5;
  const auto train = TwoLevelData(40, 50, 7);
  const TrainResult r = train_convnet(train, cfg);
  ASSERT_EQ(r.loss_curve.size(), 20u);
  EXPECT_LT(r.loss_curve.back(), r.loss_curve.front());
  EXPECT_GE(evaluate(r.model, train).accuracy, 0.99);
}

TEST(TrainTest, SameSeedSameParameters) {
  ConvNetConfig cfg;
  cfg.window_size = 30;
  cfg.training.epochs = 2;
  cfg.training.seed = 11;
  const auto train = TwoLevelData(10, 30, 3);
  const TrainResult a = train_convnet(train, cfg);
  const TrainResult b = train_convnet(train, cfg);
  const auto pa = a.model.parameters();
  const auto pb = b.model.parameters();
  EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin(), pb.end()));
}

TEST(TrainTest, FixedBatchLossDescendsWithSmallSteps) {
  ConvNetConfig cfg;
  cfg.channel_sizes = {4, 4};
  cfg.fc_size = 8;
  cfg.window_size = 20;
  ConvNet net(cfg);
  net.init_random(6);
  const auto input = RandomInput(2, 6 * 20, 60);
  const std::vector<int> labels = {0, 1, 2, 0, 1, 2};
  std::vector<double> grad(net.parameters().size());
  double prev = net.loss_and_gradient(input, labels, grad);
  for (int step = 0; step < 30; ++step) {
    auto p = net.parameters();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= 1e-3 * grad[i];
    const double now = net.loss_and_gradient(input, labels, grad);
    EXPECT_LE(now, prev + 1e-15) << "step " << step;
    prev = now;
  }
}

TEST(TrainTest, PreconditionsAndDivergence) {
  ConvNetConfig cfg;
  cfg.window_size = 30;
  cfg.training.epochs = 1;
  auto train = TwoLevelData(5, 30, 1);
  std::erase_if(train, [](const WindowInstance& w) { return w.label == Condition::kUnderVolt; });
  EXPECT_THROW(train_convnet(train, cfg), DataError);
  EXPECT_THROW(train_convnet(TwoLevelData(2, 31, 1), cfg), DataError);

  ConvNetConfig wild = cfg;
  wild.training.epochs = 30;
  wild.training.learning_rate = 1e12;
  EXPECT_THROW(train_convnet(TwoLevelData(10, 30, 1), wild), NumericError);
}

TEST(CheckpointTest, SaveLoadRoundTrip) {
  ConvNetConfig cfg;
  cfg.window_size = 30;
  cfg.training.epochs = 1;
  const auto data = TwoLevelData(5, 30, 2);
  const TrainResult r = train_convnet(data, cfg);
  const auto path = std::filesystem::temp_directory_path() / "cshap_convnet_test.bin";
  r.model.save(path);
  const ConvNet back = ConvNet::load(path);
  const auto pa = r.model.parameters();
  const auto pb = back.parameters();
  EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin(), pb.end()));
  for (const auto& w : data) EXPECT_EQ(back.predict_proba(w), r.model.predict_proba(w));

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  EXPECT_THROW(ConvNet::load(path), DataError);
  EXPECT_THROW(ConvNet::load(path.string() + ".missing"), DataError);
}

}  // namespace
}  // namespace cshap
