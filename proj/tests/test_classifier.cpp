#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dasphys/classifier.hpp"
#include "helpers.hpp"

using namespace dasphys;

namespace {

constexpr std::size_t kSide = 8;

// Noise plus a bright column band whose position encodes the label. `clutter`
// adds a bright row at a random time, which the clean training set never shows.
DasFrame stripe_frame(int label, std::uint64_t seed, double amplitude, double clutter = 0.0) {
  Rng rng(seed);
  std::vector<double> v(kSide * kSide);
  const std::size_t band = 3 * static_cast<std::size_t>(label);
  const std::size_t row = rng.index(kSide);
  for (std::size_t t = 0; t < kSide; ++t)
    for (std::size_t s = 0; s < kSide; ++s) {
      double x = rng.normal();
      if (s >= band && s < band + 2) x += amplitude;
      if (t == row) x += clutter;
      v[t * kSide + s] = x;
    }
  return test::energy_frame(kSide, kSide, std::move(v));
}

std::vector<LabeledFrame> stripe_set(std::size_t classes, std::size_t per_class, std::uint64_t seed, double amplitude,
                                     double clutter = 0.0) {
  std::vector<LabeledFrame> out;
  for (std::size_t i = 0; i < classes * per_class; ++i) {
    const int label = static_cast<int>(i % classes);
    out.push_back({stripe_frame(label, derive_seed(seed, i), amplitude, clutter), label});
  }
  return out;
}

CnnConfig small_cnn(std::size_t classes, std::size_t epochs) {
  CnnConfig cfg;
  cfg.height = kSide;
  cfg.width = kSide;
  cfg.classes = classes;
  cfg.channels1 = 4;
  cfg.channels2 = 8;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.lr = 1e-2;
  return cfg;
}

double plain_cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels, std::size_t classes) {
  double total = 0.0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const double* row = logits.data() + n * classes;
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c]);
    total += std::log(z) - row[labels[n]];
  }
  return total / static_cast<double>(labels.size());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("separable two-class frames reach full training accuracy") {
  const auto train = stripe_set(2, 10, 1, 3.0);
  const auto model = train_classifier(train, small_cnn(2, 100), 3);
  CHECK(evaluate(model, train).accuracy == 1.0);
}

TEST_CASE("uniform class weights give plain cross-entropy") {
  const auto logits = test::normals(16, 5);
  const std::vector<int> labels{0, 3, 1, 2};
  const double plain = plain_cross_entropy(logits, labels, 4);
  for (double w : {1.0, 2.5}) {
    const std::vector<double> weights(4, w);
    const auto loss = ad::softmax_cross_entropy(ad::Tensor::from({4, 4}, logits), labels, weights);
    CHECK(std::abs(loss.item() - plain) <= 1e-12);
  }
}

TEST_CASE("classifier training is deterministic per seed") {
  const auto train = stripe_set(3, 4, 2, 2.0);
  const auto a = train_classifier(train, small_cnn(3, 3), 9), b = train_classifier(train, small_cnn(3, 3), 9);
  CHECK(a.same_weights(b));
  CHECK_FALSE(a.same_weights(train_classifier(train, small_cnn(3, 3), 10)));
}

TEST_CASE("a class without training samples is an error") {
  auto train = stripe_set(3, 4, 2, 2.0);
  std::erase_if(train, [](const LabeledFrame& s) { return s.label == 1; });
  CHECK(test::error_kind([&] { train_classifier(train, small_cnn(3, 1), 1); }) == ErrorKind::missing_class);
  train.push_back({stripe_frame(0, 1, 1.0), 3});
  CHECK(test::error_kind([&] { train_classifier(train, small_cnn(3, 1), 1); }) == ErrorKind::invalid_class);
}

TEST_CASE("classifier config validation") {
  auto cfg = small_cnn(1, 1);
  CHECK(test::error_kind([&] { cfg.validate(); }) == ErrorKind::config);
  cfg = small_cnn(2, 1);
  cfg.class_weights = {1.0, 0.0};
  CHECK(test::error_kind([&] { cfg.validate(); }) == ErrorKind::config);
  cfg.class_weights = {1.0};
  CHECK(test::error_kind([&] { cfg.validate(); }) == ErrorKind::config);
  cfg.class_weights = {};
  CHECK(cfg.weights() == std::vector<double>{1.0, 1.0});
}

TEST_CASE("evaluation metrics match a hand-tabulated fixture") {
  const std::vector<int> truth{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2};
  const std::vector<int> pred{0, 0, 1, 2, 1, 1, 1, 0, 2, 2, 1, 2};
  const auto r = EvalReport::from_predictions(truth, pred, 3);
  using Row = std::vector<std::size_t>;
  CHECK(r.confusion == std::vector<Row>{{2, 1, 1}, {1, 3, 0}, {0, 1, 3}});
  CHECK(r.accuracy == doctest::Approx(8.0 / 12.0));
  CHECK(r.precision[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.precision[1] == doctest::Approx(3.0 / 5.0));
  CHECK(r.precision[2] == doctest::Approx(3.0 / 4.0));
  CHECK(r.recall[0] == doctest::Approx(0.5));
  CHECK(r.recall[1] == doctest::Approx(0.75));
  CHECK(r.recall[2] == doctest::Approx(0.75));

  std::ostringstream s;
  r.write_csv(s, {"background", "sparse", "broadband"});
  CHECK(s.str().rfind("class,precision,recall,pred_background,pred_sparse,pred_broadband\n", 0) == 0);
  CHECK(s.str().find("sparse,0.6,0.75,1,3,0\n") != std::string::npos);
}

TEST_CASE("simple accuracy cases") {
  const std::vector<int> truth{0, 1, 1, 0, 1, 0, 0, 1, 1, 0};
  const auto perfect = EvalReport::from_predictions(truth, truth, 2);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.confusion == std::vector<std::vector<std::size_t>>{{5, 0}, {0, 5}});
  auto pred = truth;
  pred[0] = 1;
  pred[1] = 0;
  CHECK(EvalReport::from_predictions(truth, pred, 2).accuracy == doctest::Approx(0.8));
  CHECK(test::error_kind([&] { EvalReport::from_predictions(truth, {0}, 2); }) == ErrorKind::dimension);
}

TEST_CASE("evaluation report invariants on a trained model") {
  const auto model = train_classifier(stripe_set(3, 6, 4, 1.0), small_cnn(3, 10), 5);
  auto test_set = stripe_set(3, 7, 40, 1.0);
  test_set.push_back(test_set.front());
  const auto r = evaluate(model, test_set);
  std::vector<std::size_t> counts(3, 0);
  for (const auto& s : test_set) ++counts[static_cast<std::size_t>(s.label)];
  std::size_t trace = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::size_t{0}) == counts[c]);
    trace += r.confusion[c][c];
  }
  CHECK(r.accuracy == doctest::Approx(static_cast<double>(trace) / test_set.size()));

  // Order of the test samples does not matter.
  Rng rng(8);
  for (int k = 0; k < 3; ++k) {
    auto shuffled = test_set;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
    const auto p = evaluate(model, shuffled);
    CHECK(p.confusion == r.confusion);
    CHECK(p.accuracy == r.accuracy);
  }
}

TEST_CASE("argmax ignores positive logit rescaling and breaks ties to the first index") {
  const auto model = build_cnn(small_cnn(3, 0), 6);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const DasFrame f = stripe_frame(static_cast<int>(s % 3), 100 + s, 1.5);
    const auto logits = cnn_logits(model, {&f});
    std::vector<double> v(logits.data().begin(), logits.data().end());
    const int base = argmax(v);
    CHECK(base == predict(model, f));
    Rng rng(s);
    for (int k = 0; k < 5; ++k) {
      const double scale = std::exp(rng.uniform(-5.0, 5.0));
      std::vector<double> scaled = v;
      for (double& x : scaled) x *= scale;
      CHECK(argmax(scaled) == base);
    }
  }
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
  CHECK(test::error_kind([] { argmax(std::vector<double>{}); }) == ErrorKind::dimension);
}

TEST_CASE("min-max normalization") {
  const auto v = minmax_normalized(test::energy_frame(1, 4, {2.0, 4.0, 3.0, 6.0}));
  CHECK(v == std::vector<double>{0.0, 0.5, 0.25, 1.0});
  CHECK(minmax_normalized(test::energy_frame(1, 3, {5.0, 5.0, 5.0})) == std::vector<double>(3, 0.0));
}

TEST_CASE("duplicate_minority balances the classes") {
  auto data = stripe_set(3, 2, 1, 1.0);
  for (int i = 0; i < 4; ++i) data.push_back({stripe_frame(0, 50 + i, 1.0), 0});
  const auto balanced = duplicate_minority(data, 3);
  std::vector<std::size_t> counts(3, 0);
  for (const auto& s : balanced) ++counts[static_cast<std::size_t>(s.label)];
  CHECK(counts == std::vector<std::size_t>{6, 6, 6});
  // Original samples come first, copies follow in order.
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(balanced[i].frame == data[i].frame);
  CHECK(balanced[data.size()].frame == data[1].frame);
  CHECK(test::error_kind([&] { duplicate_minority({{data[0].frame, 5}}, 3); }) == ErrorKind::invalid_class);
}

TEST_CASE("finetune with zero epochs keeps the weights") {
  const auto model = train_classifier(stripe_set(2, 4, 3, 2.0), small_cnn(2, 2), 1);
  const auto tuned = finetune(model, stripe_set(2, 2, 30, 2.0), small_cnn(2, 0), 2);
  CHECK(tuned.same_weights(model));
  const auto moved = finetune(model, stripe_set(2, 2, 30, 2.0), small_cnn(2, 2), 2);
  CHECK_FALSE(moved.same_weights(model));
  CHECK(model.same_weights(train_classifier(stripe_set(2, 4, 3, 2.0), small_cnn(2, 2), 1)));
}

TEST_CASE("finetuning on the test distribution keeps its accuracy") {
  const auto train = stripe_set(3, 10, 11, 1.5);
  const auto test_set = stripe_set(3, 20, 12, 1.5);
  const auto model = train_classifier(train, small_cnn(3, 40), 13);
  const double before = evaluate(model, test_set).accuracy;
  const auto tuned = finetune(model, test_set, small_cnn(3, 5), 14);
  CHECK(evaluate(tuned, test_set).accuracy >= before - 0.02);
}

TEST_CASE("finetuning on a shifted distribution does not hurt it") {
  const auto model = train_classifier(stripe_set(3, 10, 21, 1.5), small_cnn(3, 40), 22);
  const auto shifted_small = stripe_set(3, 4, 23, 1.5, 6.0);
  const auto shifted_test = stripe_set(3, 20, 24, 1.5, 6.0);
  const double before = evaluate(model, shifted_test).accuracy;
  const auto tuned = finetune(model, shifted_small, small_cnn(3, 20), 25);
  CHECK(evaluate(tuned, shifted_test).accuracy >= before);
}

TEST_CASE("doubling a class weight does not lower that class's recall") {
  const auto train = stripe_set(2, 12, 31, 0.7);
  const auto validation = stripe_set(2, 30, 32, 0.7);
  std::vector<double> base, doubled;
  for (std::uint64_t s = 0; s < 5; ++s) {
    auto cfg = small_cnn(2, 15);
    cfg.class_weights = {1.0, 1.0};
    base.push_back(evaluate(train_classifier(train, cfg, 40 + s), validation).recall[0]);
    cfg.class_weights = {2.0, 1.0};
    doubled.push_back(evaluate(train_classifier(train, cfg, 40 + s), validation).recall[0]);
  }
  CHECK(median(doubled) >= median(base));
}

TEST_CASE("classifier frames must match the configured shape") {
  const auto model = build_cnn(small_cnn(2, 0), 1);
  const DasFrame wrong = test::energy_frame(4, 8, std::vector<double>(32, 1.0));
  CHECK(test::error_kind([&] { predict(model, wrong); }) == ErrorKind::dimension);
  CHECK(test::error_kind([&] { evaluate(model, {{wrong, 0}}); }) == ErrorKind::dimension);
}
