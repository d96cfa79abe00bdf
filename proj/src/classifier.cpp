#include "dasphys/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "dasphys/error.hpp"
#include "dasphys/rng.hpp"

namespace dasphys {

namespace {

constexpr const char* kArchitecture = "cnn";
constexpr std::uint64_t weights_stream = 1;
constexpr std::uint64_t order_stream = 2;

std::size_t flat_features(const CnnConfig& cfg) {
  return cfg.global_pool ? cfg.channels2 : cfg.channels2 * (cfg.height / 4) * (cfg.width / 4);
}

ad::Tensor he_weights(Rng& rng, ad::Shape shape, std::size_t fan_in) {
  const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<double> values(ad::numel(shape));
  for (double& v : values) v = rng.normal(0.0, sigma);
  return ad::Tensor::from(std::move(shape), std::move(values), true);
}

nlohmann::json to_json(const CnnConfig& cfg) {
  return {{"height", cfg.height},     {"width", cfg.width},         {"classes", cfg.classes},
          {"channels1", cfg.channels1}, {"channels2", cfg.channels2}, {"leaky_slope", cfg.leaky_slope},
          {"global_pool", cfg.global_pool}};
}

void check_dataset(const std::vector<LabeledFrame>& dataset, const CnnConfig& cfg) {
  for (const auto& s : dataset) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= cfg.classes) {
      throw Error(ErrorKind::invalid_class, "label " + std::to_string(s.label) + " outside [0, " +
                                                std::to_string(cfg.classes) + ")");
    }
    if (s.frame.time_samples() != cfg.height || s.frame.channels() != cfg.width) {
      throw Error(ErrorKind::dimension, "classifier expects " + std::to_string(cfg.height) + "x" +
                                            std::to_string(cfg.width) + " frames, got " +
                                            std::to_string(s.frame.time_samples()) + "x" +
                                            std::to_string(s.frame.channels()));
    }
  }
}

void run_epochs(ModelBundle& model, const std::vector<LabeledFrame>& data, const CnnConfig& cfg,
                double lr, std::uint64_t seed) {
  if (cfg.epochs == 0 || data.empty()) return;
  const std::vector<double> weights = cfg.weights();
  auto params = model.tensors();
  ad::AdamState adam = ad::AdamState::for_parameters(params, {lr});
  Rng order_rng(derive_seed(seed, order_stream));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(cfg.batch_size, 1);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.index(i)]);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<const DasFrame*> frames;
      std::vector<int> labels;
      for (std::size_t k = start; k < end; ++k) {
        frames.push_back(&data[order[k]].frame);
        labels.push_back(data[order[k]].label);
      }
      for (auto& p : params) p.zero_grad();
      const ad::Tensor loss = ad::softmax_cross_entropy(cnn_logits(model, frames), labels, weights);
      if (!std::isfinite(loss.item())) {
        throw Error(ErrorKind::divergence, "classifier loss became non-finite at epoch " + std::to_string(epoch));
      }
      ad::backward(loss);
      ad::adam_step(params, adam);
    }
  }
}

}  // namespace

void CnnConfig::validate() const {
  if (classes < 2) throw Error(ErrorKind::config, "classifier needs at least 2 classes");
  if (channels1 == 0 || channels2 == 0) throw Error(ErrorKind::config, "classifier channel counts must be >= 1");
  if (height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0) {
    throw Error(ErrorKind::config, "classifier input " + std::to_string(height) + "x" + std::to_string(width) +
                                       " is not divisible by 4");
  }
  if (!class_weights.empty() && class_weights.size() != classes) {
    throw Error(ErrorKind::config, "class weight count " + std::to_string(class_weights.size()) +
                                       " differs from class count " + std::to_string(classes));
  }
  for (double w : class_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error(ErrorKind::config, "class weights must be > 0");
  }
  if (!(lr > 0.0)) throw Error(ErrorKind::config, "classifier lr must be > 0");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw Error(ErrorKind::config, "leaky slope must lie in [0, 1)");
}

std::vector<double> CnnConfig::weights() const {
  return class_weights.empty() ? std::vector<double>(classes, 1.0) : class_weights;
}

CnnConfig CnnConfig::from_config(const KeyValueConfig& config) {
  CnnConfig cfg;
  cfg.classes = config.count("clf.classes", cfg.classes);
  cfg.channels1 = config.count("clf.channels1", cfg.channels1);
  cfg.channels2 = config.count("clf.channels2", cfg.channels2);
  cfg.leaky_slope = config.number("clf.leaky_slope", cfg.leaky_slope);
  cfg.epochs = config.count("clf.epochs", cfg.epochs);
  cfg.batch_size = config.count("clf.batch_size", cfg.batch_size);
  cfg.lr = config.number("clf.lr", cfg.lr);
  cfg.duplicate_minority = config.text("clf.duplicate_minority", "false") == "true";
  cfg.global_pool = config.text("clf.global_pool", "true") == "true";
  if (config.contains("clf.class_weights")) {
    for (const auto& token : config.tokens("clf.class_weights")) {
      try {
        cfg.class_weights.push_back(std::stod(token));
      } catch (const std::exception&) {
        throw Error(ErrorKind::config, "clf.class_weights: '" + token + "' is not a number");
      }
    }
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> CnnConfig::config_keys() {
  return {"clf.classes", "clf.channels1", "clf.channels2", "clf.leaky_slope", "clf.epochs",
          "clf.batch_size", "clf.lr", "clf.duplicate_minority", "clf.global_pool", "clf.class_weights"};
}

ModelBundle build_cnn(const CnnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelBundle model{kArchitecture, to_json(cfg), {}};
  Rng rng(derive_seed(seed, weights_stream));
  model.parameters.push_back({"conv1.w", he_weights(rng, {cfg.channels1, 1, 3, 3}, 9)});
  model.parameters.push_back({"conv1.b", ad::Tensor::zeros({cfg.channels1}, true)});
  model.parameters.push_back({"conv2.w", he_weights(rng, {cfg.channels2, cfg.channels1, 3, 3}, cfg.channels1 * 9)});
  model.parameters.push_back({"conv2.b", ad::Tensor::zeros({cfg.channels2}, true)});
  model.parameters.push_back({"fc.w", he_weights(rng, {flat_features(cfg), cfg.classes}, flat_features(cfg))});
  model.parameters.push_back({"fc.b", ad::Tensor::zeros({1, cfg.classes}, true)});
  return model;
}

CnnConfig cnn_config(const ModelBundle& model) {
  if (model.architecture != kArchitecture) {
    throw Error(ErrorKind::config, "expected a cnn model, got '" + model.architecture + "'");
  }
  try {
    CnnConfig cfg;
    cfg.height = model.config.at("height").get<std::size_t>();
    cfg.width = model.config.at("width").get<std::size_t>();
    cfg.classes = model.config.at("classes").get<std::size_t>();
    cfg.channels1 = model.config.at("channels1").get<std::size_t>();
    cfg.channels2 = model.config.at("channels2").get<std::size_t>();
    cfg.leaky_slope = model.config.at("leaky_slope").get<double>();
    cfg.global_pool = model.config.at("global_pool").get<bool>();
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, std::string("cnn config: ") + e.what());
  }
}

std::vector<double> minmax_normalized(const DasFrame& frame) {
  const auto data = frame.data();
  std::vector<double> out(data.size(), 0.0);
  if (data.empty()) return out;
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = (data[i] - *lo) / range;
  return out;
}

ad::Tensor cnn_logits(const ModelBundle& model, const std::vector<const DasFrame*>& frames) {
  const CnnConfig cfg = cnn_config(model);
  std::vector<double> values;
  values.reserve(frames.size() * cfg.height * cfg.width);
  for (const DasFrame* f : frames) {
    if (f->time_samples() != cfg.height || f->channels() != cfg.width) {
      throw Error(ErrorKind::dimension, "classifier input shape mismatch");
    }
    const auto v = minmax_normalized(*f);
    values.insert(values.end(), v.begin(), v.end());
  }
  const std::size_t n = frames.size();
  ad::Tensor x = ad::Tensor::from({n, 1, cfg.height, cfg.width}, std::move(values));
  x = ad::maxpool2d(ad::leaky_relu(ad::conv2d(x, model.parameter("conv1.w"), model.parameter("conv1.b"), 1, 1),
                                   cfg.leaky_slope));
  x = ad::maxpool2d(ad::leaky_relu(ad::conv2d(x, model.parameter("conv2.w"), model.parameter("conv2.b"), 1, 1),
                                   cfg.leaky_slope));
  if (cfg.global_pool) x = ad::mean_axis(ad::mean_axis(x, 3), 2);
  x = ad::reshape(x, {n, flat_features(cfg)});
  const ad::Tensor bias = ad::broadcast_to(model.parameter("fc.b"), {n, cfg.classes});
  return ad::add(ad::matmul(x, model.parameter("fc.w")), bias);
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::dimension, "argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

int predict(const ModelBundle& model, const DasFrame& frame) {
  return argmax(cnn_logits(model, {&frame}).data());
}

std::vector<LabeledFrame> duplicate_minority(const std::vector<LabeledFrame>& dataset, std::size_t classes) {
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int label = dataset[i].label;
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw Error(ErrorKind::invalid_class, "label " + std::to_string(label) + " outside the class range");
    }
    members[static_cast<std::size_t>(label)].push_back(i);
  }
  std::size_t largest = 0;
  for (const auto& m : members) largest = std::max(largest, m.size());
  std::vector<LabeledFrame> out = dataset;
  for (const auto& m : members) {
    for (std::size_t k = m.size(); !m.empty() && k < largest; ++k) out.push_back(dataset[m[k % m.size()]]);
  }
  return out;
}

ModelBundle train_classifier(const std::vector<LabeledFrame>& dataset, const CnnConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_dataset(dataset, cfg);
  std::vector<std::size_t> counts(cfg.classes, 0);
  for (const auto& s : dataset) ++counts[static_cast<std::size_t>(s.label)];
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    if (counts[c] == 0) throw Error(ErrorKind::missing_class, "class " + std::to_string(c) + " has no training samples");
  }
  ModelBundle model = build_cnn(cfg, seed);
  if (cfg.duplicate_minority) {
    run_epochs(model, duplicate_minority(dataset, cfg.classes), cfg, cfg.lr, seed);
  } else {
    run_epochs(model, dataset, cfg, cfg.lr, seed);
  }
  return model;
}

ModelBundle finetune(const ModelBundle& model, const std::vector<LabeledFrame>& dataset, const CnnConfig& cfg,
                     std::uint64_t seed) {
  CnnConfig arch = cnn_config(model);
  arch.class_weights = cfg.class_weights;
  arch.epochs = cfg.epochs;
  arch.batch_size = cfg.batch_size;
  arch.lr = cfg.lr;
  arch.validate();
  check_dataset(dataset, arch);
  ModelBundle tuned = model.clone();
  run_epochs(tuned, cfg.duplicate_minority ? duplicate_minority(dataset, arch.classes) : dataset, arch, cfg.lr / 10.0,
             seed);
  return tuned;
}

EvalReport EvalReport::from_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                        std::size_t classes) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::dimension, "prediction and label counts differ");
  EvalReport r;
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (int c : {truth[i], predicted[i]}) {
      if (c < 0 || static_cast<std::size_t>(c) >= classes) {
        throw Error(ErrorKind::invalid_class, "class " + std::to_string(c) + " outside the class range");
      }
    }
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  std::size_t correct = 0;
  r.precision.assign(classes, 0.0);
  r.recall.assign(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    correct += r.confusion[c][c];
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      row += r.confusion[c][k];
      col += r.confusion[k][c];
    }
    // Classes never predicted (or never present) report 0.
    if (col) r.precision[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(col);
    if (row) r.recall[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(row);
  }
  r.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  return r;
}

void EvalReport::write_csv(std::ostream& out, const std::vector<std::string>& class_names) const {
  auto name = [&](std::size_t c) { return c < class_names.size() ? class_names[c] : std::to_string(c); };
  out << "class,precision,recall";
  for (std::size_t c = 0; c < confusion.size(); ++c) out << ",pred_" << name(c);
  out << '\n';
  for (std::size_t c = 0; c < confusion.size(); ++c) {
    out << name(c) << ',' << precision[c] << ',' << recall[c];
    for (std::size_t k : confusion[c]) out << ',' << k;
    out << '\n';
  }
  out << "accuracy," << accuracy << '\n';
}

EvalReport evaluate(const ModelBundle& model, const std::vector<LabeledFrame>& test_set) {
  const CnnConfig cfg = cnn_config(model);
  check_dataset(test_set, cfg);
  std::vector<int> truth, predicted;
  for (const auto& s : test_set) {
    truth.push_back(s.label);
    predicted.push_back(predict(model, s.frame));
  }
  return EvalReport::from_predictions(truth, predicted, cfg.classes);
}

}  // namespace dasphys
