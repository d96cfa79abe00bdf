#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dasphys/config.hpp"
#include "dasphys/model.hpp"
#include "dasphys/signal.hpp"

namespace dasphys {

struct LabeledFrame {
  DasFrame frame;
  int label = 0;
};

// Two conv stages (3x3, leaky ReLU, 2x2 max pool) and one fully connected layer.
// With `global_pool` the FC layer sees the channel means of the second stage
// instead of the flattened feature map.
struct CnnConfig {
  std::size_t height = 64;
  std::size_t width = 128;
  std::size_t classes = 3;
  std::size_t channels1 = 8;
  std::size_t channels2 = 16;
  double leaky_slope = 0.01;
  bool global_pool = true;
  std::vector<double> class_weights;  // empty means uniform
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  double lr = 1e-3;
  bool duplicate_minority = false;

  void validate() const;
  std::vector<double> weights() const;
  static CnnConfig from_config(const KeyValueConfig& config);
  static std::vector<std::string> config_keys();
};

ModelBundle build_cnn(const CnnConfig& cfg, std::uint64_t seed);
CnnConfig cnn_config(const ModelBundle& model);

// Min-max scaling to [0, 1]; constant frames map to zeros.
std::vector<double> minmax_normalized(const DasFrame& frame);

// Logits [N, classes] for a batch of frames.
ad::Tensor cnn_logits(const ModelBundle& model, const std::vector<const DasFrame*>& frames);
int predict(const ModelBundle& model, const DasFrame& frame);
// First maximal index.
int argmax(std::span<const double> values);

// Copies samples of smaller classes in order until every class matches the largest.
std::vector<LabeledFrame> duplicate_minority(const std::vector<LabeledFrame>& dataset,
                                             std::size_t classes);

ModelBundle train_classifier(const std::vector<LabeledFrame>& dataset, const CnnConfig& cfg,
                             std::uint64_t seed);
// Continues from the model's weights at a tenth of cfg.lr.
ModelBundle finetune(const ModelBundle& model, const std::vector<LabeledFrame>& dataset,
                     const CnnConfig& cfg, std::uint64_t seed);

struct EvalReport {
  double accuracy = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]

  static EvalReport from_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                     std::size_t classes);
  void write_csv(std::ostream& out, const std::vector<std::string>& class_names) const;
};

EvalReport evaluate(const ModelBundle& model, const std::vector<LabeledFrame>& test_set);

}  // namespace dasphys
