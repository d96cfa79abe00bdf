#include "acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "cli.hpp"
#include "dasphys/autodiff.hpp"
#include "dasphys/channel.hpp"
#include "dasphys/classifier.hpp"
#include "dasphys/datastore.hpp"
#include "dasphys/debackground.hpp"
#include "dasphys/error.hpp"
#include "dasphys/pign.hpp"
#include "dasphys/rng.hpp"
#include "dasphys/unet.hpp"

namespace dasphys::acceptance {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// Fixed seeds of the suite.
constexpr std::uint64_t suite_seed = 20240601;
constexpr double grad_tolerance = 1e-4;
constexpr double grad_eps = 1e-4;

// Weak-fault benchmark: one sparse-fault burst at 9 s of peak 15 dB above the
// background, noise window 5-8 s.
constexpr double bench_fault_time_s = 9.0;
constexpr double bench_fault_width_s = 0.5;
constexpr double bench_fault_peak_db = 15.0;

// Conveyor-fault strength for the classification benchmarks, as a gain on the
// product-form fault frame.
constexpr double conveyor_gain_lo = 3.0;
constexpr double conveyor_gain_hi = 5.0;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double frame_mean(const DasFrame& f) {
  const auto d = f.data();
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

std::vector<double> random_values(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

ad::Tensor random_tensor(Rng& rng, ad::Shape shape) {
  const std::size_t n = ad::numel(shape);
  return ad::Tensor::from(std::move(shape), random_values(rng, n));
}

// Values at least 0.05 away from zero, for kinked primitives.
ad::Tensor off_kink_tensor(Rng& rng, ad::Shape shape) {
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) {
    const double z = rng.normal();
    x = (z < 0 ? -1.0 : 1.0) * (0.05 + std::abs(z));
  }
  return ad::Tensor::from(std::move(shape), std::move(v));
}

ad::Tensor positive_tensor(Rng& rng, ad::Shape shape) {
  std::vector<double> v(ad::numel(shape));
  for (double& x : v) x = 0.5 + std::abs(rng.normal());
  return ad::Tensor::from(std::move(shape), std::move(v));
}

// Distinct values spaced 0.1 apart (plus small jitter), so no pooling window has a near tie.
ad::Tensor distinct_tensor(Rng& rng, ad::Shape shape) {
  const std::size_t n = ad::numel(shape);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 0.1 * static_cast<double>(order[i]) + 0.01 * rng.normal();
  return ad::Tensor::from(std::move(shape), std::move(v));
}

// Reduces any op output to a scalar with fixed random weights so that every
// output element contributes a distinct gradient.
ad::Tensor weighted_sum(const ad::Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(y, random_tensor(rng, y.shape())));
}

struct GradCase {
  std::string name;
  std::function<ad::Tensor(const ad::Tensor&)> f;
  ad::Tensor x;
};

std::vector<GradCase> primitive_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCase> cases;
  const std::uint64_t ws = derive_seed(seed, 99);
  auto add_case = [&](std::string name, ad::Tensor x, std::function<ad::Tensor(const ad::Tensor&)> op) {
    cases.push_back({std::move(name), [op, ws](const ad::Tensor& t) { return weighted_sum(op(t), ws); }, std::move(x)});
  };
  const ad::Tensor c34 = random_tensor(rng, {3, 4});
  const ad::Tensor p34 = positive_tensor(rng, {3, 4});
  add_case("add", random_tensor(rng, {3, 4}), [c34](const ad::Tensor& x) { return ad::add(x, c34); });
  add_case("sub.lhs", random_tensor(rng, {3, 4}), [c34](const ad::Tensor& x) { return ad::sub(x, c34); });
  add_case("sub.rhs", random_tensor(rng, {3, 4}), [c34](const ad::Tensor& x) { return ad::sub(c34, x); });
  add_case("mul", random_tensor(rng, {3, 4}), [c34](const ad::Tensor& x) { return ad::mul(x, c34); });
  add_case("div.num", random_tensor(rng, {3, 4}), [p34](const ad::Tensor& x) { return ad::div(x, p34); });
  add_case("div.den", positive_tensor(rng, {3, 4}), [c34](const ad::Tensor& x) { return ad::div(c34, x); });
  add_case("scale", random_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::scale(x, -1.7); });
  add_case("add_scalar", random_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::add_scalar(x, 0.3); });
  add_case("square", random_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::square(x); });
  add_case("sqrt", positive_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::sqrt(x); });
  add_case("tanh", random_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::tanh(x); });
  add_case("relu", off_kink_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::relu(x); });
  add_case("leaky_relu", off_kink_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::leaky_relu(x, 0.01); });
  add_case("sum", random_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::scale(ad::sum(ad::square(x)), 1.0); });
  add_case("mean", random_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::mean(ad::square(x)); });
  add_case("sum_axis", random_tensor(rng, {2, 3, 4}), [](const ad::Tensor& x) { return ad::sum_axis(x, 1); });
  add_case("mean_axis", random_tensor(rng, {2, 3, 4}), [](const ad::Tensor& x) { return ad::mean_axis(x, 2); });
  add_case("broadcast_to", random_tensor(rng, {3, 1}), [](const ad::Tensor& x) { return ad::broadcast_to(x, {3, 5}); });
  add_case("reshape", random_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::reshape(x, {2, 6}); });
  add_case("slice", random_tensor(rng, {4, 5}), [](const ad::Tensor& x) { return ad::slice(x, 1, 1, 3); });
  const ad::Tensor c24 = random_tensor(rng, {2, 4});
  add_case("concat", random_tensor(rng, {3, 4}), [c24](const ad::Tensor& x) { return ad::concat({c24, x, c24}, 0); });
  add_case("transpose", random_tensor(rng, {3, 4}), [](const ad::Tensor& x) { return ad::transpose(x); });
  const ad::Tensor c45 = random_tensor(rng, {4, 5});
  add_case("matmul.lhs", random_tensor(rng, {3, 4}), [c45](const ad::Tensor& x) { return ad::matmul(x, c45); });
  add_case("matmul.rhs", random_tensor(rng, {4, 5}), [c34](const ad::Tensor& x) { return ad::matmul(c34, x); });
  const ad::Tensor w = random_tensor(rng, {3, 2, 3, 3});
  const ad::Tensor b = random_tensor(rng, {3});
  const ad::Tensor xin = random_tensor(rng, {2, 2, 5, 5});
  add_case("conv2d.input", random_tensor(rng, {2, 2, 5, 5}),
           [w, b](const ad::Tensor& x) { return ad::conv2d(x, w, b, 1, 1); });
  add_case("conv2d.stride2", random_tensor(rng, {1, 2, 6, 6}),
           [w, b](const ad::Tensor& x) { return ad::conv2d(x, w, b, 2, 0); });
  add_case("conv2d.weight", random_tensor(rng, {3, 2, 3, 3}),
           [xin, b](const ad::Tensor& k) { return ad::conv2d(xin, k, b, 1, 1); });
  add_case("conv2d.bias", random_tensor(rng, {3}), [xin, w](const ad::Tensor& bb) { return ad::conv2d(xin, w, bb, 1, 1); });
  const ad::Tensor wt = random_tensor(rng, {2, 3, 2, 2});
  const ad::Tensor bt = random_tensor(rng, {3});
  const ad::Tensor xt = random_tensor(rng, {1, 2, 3, 3});
  add_case("conv_transpose2d.input", random_tensor(rng, {1, 2, 3, 3}),
           [wt, bt](const ad::Tensor& x) { return ad::conv_transpose2d(x, wt, bt, 2); });
  add_case("conv_transpose2d.weight", random_tensor(rng, {2, 3, 2, 2}),
           [xt, bt](const ad::Tensor& k) { return ad::conv_transpose2d(xt, k, bt, 2); });
  add_case("maxpool2d", distinct_tensor(rng, {1, 2, 4, 6}), [](const ad::Tensor& x) { return ad::maxpool2d(x); });
  const std::vector<int> labels = {0, 2, 1, 2};
  const std::vector<double> class_weights = {0.5, 1.0, 2.0};
  cases.push_back({"softmax_cross_entropy",
                   [labels, class_weights](const ad::Tensor& x) {
                     return ad::softmax_cross_entropy(x, labels, class_weights);
                   },
                   random_tensor(rng, {4, 3})});
  return cases;
}

GradCase unet_case(std::uint64_t seed, bool wrt_weights) {
  UNetConfig cfg;
  cfg.height = 8;
  cfg.width = 8;
  cfg.depth = 1;
  cfg.base_channels = 2;
  const ModelBundle model = build_unet(cfg, seed);
  Rng rng(derive_seed(seed, 7));
  const ad::Tensor input = random_tensor(rng, {1, 1, 8, 8});
  const std::uint64_t ws = derive_seed(seed, 8);
  if (!wrt_weights) {
    return {"unet.input", [model, ws](const ad::Tensor& x) { return weighted_sum(unet_forward(model, x), ws); }, input};
  }
  return {"unet.enc0.w",
          [model, input, ws](const ad::Tensor& w) {
            ModelBundle m = model;
            for (auto& p : m.parameters) {
              if (p.name == "enc0.w") p.value = w;
            }
            return weighted_sum(unet_forward(m, input), ws);
          },
          model.parameter("enc0.w").detach()};
}

CriterionResult run_a1(Context& ctx) {
  CriterionResult r{"A1", true, "", json::object(), 0.0};
  double worst_primitive = 0.0, worst_unet = 0.0;
  std::string worst_name;
  std::size_t checks = 0, failures = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const std::uint64_t seed = derive_seed(suite_seed, 100 + s);
    auto cases = primitive_cases(seed);
    cases.push_back(unet_case(seed, false));
    cases.push_back(unet_case(seed, true));
    for (const auto& c : cases) {
      const double err = ad::grad_check(c.f, c.x, grad_eps);
      ++checks;
      const bool is_unet = c.name.rfind("unet", 0) == 0;
      double& worst = is_unet ? worst_unet : worst_primitive;
      if (err > worst) worst = err;
      if (!(err < grad_tolerance)) {
        ++failures;
        worst_name = c.name + " (seed " + std::to_string(s) + ")";
        ctx.log() << "  A1 " << c.name << " seed " << s << " grad error " << err << "\n";
      }
    }
  }
  r.passed = failures == 0;
  r.metrics = {{"checks", checks}, {"failures", failures}, {"worst_primitive", worst_primitive}, {"worst_unet", worst_unet}};
  r.summary = std::to_string(checks - failures) + "/" + std::to_string(checks) + " grad checks < 1e-4; worst primitive " +
              fmt("%.2e", worst_primitive) + ", worst unet " + fmt("%.2e", worst_unet) +
              (failures ? "; first failure " + worst_name : "");
  return r;
}

CriterionResult run_a2(Context&) {
  CriterionResult r{"A2", true, "", json::object(), 0.0};
  constexpr double pi = std::numbers::pi;
  Rng rng(derive_seed(suite_seed, 200));
  std::size_t range_fail = 0, idem_fail = 0, period_fail = 0;
  double worst_period = 0.0;
  for (std::size_t i = 0; i < 100000; ++i) {
    double x;
    switch (i % 4) {
      case 0: x = rng.uniform(-1e3, 1e3); break;
      case 1: x = rng.uniform(-10.0, 10.0); break;
      case 2: x = pi * static_cast<double>(static_cast<long>(rng.index(41)) - 20); break;
      default: x = rng.normal() * 1e5; break;
    }
    const double w = wrap_phase(x);
    if (!(w >= -pi && w < pi)) ++range_fail;
    if (wrap_phase(w) != w) ++idem_fail;
    const double k = static_cast<double>(static_cast<long>(rng.index(21)) - 10);
    const double shifted = wrap_phase(x + 2.0 * pi * k);
    double d = std::abs(shifted - w);
    d = std::min(d, 2.0 * pi - d);
    // Tolerance scales with the magnitude of the argument (one ulp per 2 pi turn).
    const double tol = 1e-12 * (1.0 + std::abs(x) + std::abs(2.0 * pi * k));
    worst_period = std::max(worst_period, d / (1.0 + std::abs(x) + std::abs(2.0 * pi * k)));
    if (d > tol) ++period_fail;
  }

  std::size_t cont_fail = 0;
  double worst_cont = 0.0;
  for (std::size_t f = 0; f < 100; ++f) {
    const std::size_t T = 2 + rng.index(40), S = 1 + rng.index(20);
    const auto v = random_values(rng, T * S);
    double oracle = 0.0;
    for (std::size_t t = 1; t < T; ++t) {
      for (std::size_t s = 0; s < S; ++s) {
        const double d = v[t * S + s] - v[(t - 1) * S + s];
        oracle += d * d;
      }
    }
    oracle /= static_cast<double>((T - 1) * S);
    const double got = continuity_penalty(ad::Tensor::from({T, S}, v)).item();
    const double err = std::abs(got - oracle);
    worst_cont = std::max(worst_cont, err);
    if (err > 1e-12) ++cont_fail;
  }

  const std::size_t T = 20000;
  std::vector<double> same(2 * T), opposite(2 * T), independent(2 * T);
  for (std::size_t t = 0; t < T; ++t) {
    const double a = rng.normal(), b = rng.normal();
    same[2 * t] = a;
    same[2 * t + 1] = 3.0 * a + 1.0;
    opposite[2 * t] = a;
    opposite[2 * t + 1] = -2.0 * a;
    independent[2 * t] = a;
    independent[2 * t + 1] = b;
  }
  auto frame2 = [&](std::vector<double> v) {
    return DasFrame(T, 2, std::move(v), 0.01, ColumnAxis::space, 1.0, Units::phase_rad);
  };
  const double c_same = correlation_total(frame2(same));
  const double c_opp = correlation_total(frame2(opposite));
  const double c_ind = correlation_total(frame2(independent));
  const bool corr_ok = std::abs(c_same - 1.0) < 1e-9 && std::abs(c_opp + 1.0) < 1e-9 && std::abs(c_ind) < 0.05;

  r.passed = range_fail == 0 && idem_fail == 0 && period_fail == 0 && cont_fail == 0 && corr_ok;
  r.metrics = {{"wrap_range_failures", range_fail},       {"wrap_idempotence_failures", idem_fail},
               {"wrap_periodicity_failures", period_fail}, {"worst_relative_periodicity", worst_period},
               {"continuity_failures", cont_fail},         {"worst_continuity_error", worst_cont},
               {"correlation_identical", c_same},          {"correlation_negated", c_opp},
               {"correlation_independent", c_ind}};
  r.summary = "wrap fuzz 1e5 failures " + std::to_string(range_fail + idem_fail + period_fail) +
              "; continuity worst |err| " + fmt("%.1e", worst_cont) + "; correlation " + fmt("%.6f", c_same) + " / " +
              fmt("%.6f", c_opp) + " / " + fmt("%.4f", c_ind);
  return r;
}

CriterionResult run_a3(Context& ctx) {
  CriterionResult r{"A3", true, "", json::object(), 0.0};
  std::ostringstream summary;
  for (EventClass c : {EventClass::shake, EventClass::walk, EventClass::fault_sparse, EventClass::fault_broadband}) {
    const FrameGeometry g = is_phase_event(c) ? FrameGeometry::spatiotemporal_desk() : FrameGeometry::time_frequency_desk();
    const PignConfig cfg = PignConfig::for_geometry(g);
    const EventSpec spec = sample_event_spec(c, 1234, g);
    const TargetCurves targets = make_targets(spec, g, true);
    const auto t0 = Clock::now();
    const UntrainedResult u = train_untrained(targets, cfg, 99);
    const double secs = seconds_since(t0);
    const double err = relative_projection_error(u.frame, targets);
    const double drop = u.history.losses.front() / u.history.losses.back();
    const bool ok = err <= 0.10 && drop >= 10.0 && cfg.epochs <= 2000 && secs < 600.0;
    r.passed = r.passed && ok;
    const std::string name(to_string(c));
    r.metrics[name] = {{"relative_projection_error", err}, {"loss_drop", drop}, {"epochs", cfg.epochs}, {"seconds", secs}};
    summary << name << " err " << fmt("%.3f", err) << " drop " << fmt("%.0f", drop) << "x " << fmt("%.0f", secs) << "s; ";
    ctx.log() << "  A3 " << name << ": error " << err << ", loss drop " << drop << "x, " << secs << " s\n";
  }
  r.summary = summary.str();
  return r;
}

std::vector<TargetCurves> sparse_training_targets(const FrameGeometry& g) {
  std::vector<TargetCurves> ds;
  for (std::size_t i = 0; i < 64; ++i) {
    ds.push_back(make_targets(sample_event_spec(EventClass::fault_sparse, derive_seed(suite_seed + 4, i), g), g, false));
  }
  return ds;
}

CriterionResult run_a4(Context& ctx) {
  CriterionResult r{"A4", true, "", json::object(), 0.0};
  const FrameGeometry g = FrameGeometry::time_frequency_desk();
  const auto t0 = Clock::now();
  const ModelBundle& model = ctx.sparse_generator();
  const double train_secs = seconds_since(t0);
  const auto targets = sparse_training_targets(g);
  const auto events = generate_events(model, 16, derive_seed(suite_seed, 400));
  std::vector<double> rhos;
  for (const auto& e : events) {
    const auto curve = project(e.frame, Axis::frequency).values;
    double best = pearson(curve, e.targets.secondary.values);
    for (const auto& t : targets) best = std::max(best, pearson(curve, t.secondary.values));
    rhos.push_back(best);
  }
  std::size_t duplicates = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    for (std::size_t j = i + 1; j < events.size(); ++j) duplicates += events[i].frame == events[j].frame ? 1 : 0;
  }
  const double worst = *std::min_element(rhos.begin(), rhos.end());
  r.passed = worst > 0.6 && duplicates == 0 && train_secs < 1800.0;
  r.metrics = {{"min_rho", worst}, {"median_rho", median(rhos)}, {"duplicate_pairs", duplicates}, {"train_seconds", train_secs}};
  r.summary = "16 generated frames: min rho " + fmt("%.3f", worst) + ", median " + fmt("%.3f", median(rhos)) +
              "; duplicate pairs " + std::to_string(duplicates) + "; training " + fmt("%.0f", train_secs) + "s";
  return r;
}

struct BenchmarkCase {
  DasFrame input;
  BenchmarkFault fault;
};

std::vector<BenchmarkCase> weak_fault_benchmark(const BackgroundSite& site, std::uint64_t seed) {
  const FrameGeometry g = FrameGeometry::time_frequency_desk();
  const auto bgs = synthesize_backgrounds(site, 20, derive_seed(seed, 1));
  std::vector<BenchmarkCase> cases;
  for (std::size_t i = 0; i < 20; ++i) {
    const EventSpec spec = sample_event_spec(EventClass::fault_sparse, derive_seed(seed, 100 + i), g);
    BenchmarkFault f = benchmark_fault(std::get<SparseFaultEvent>(spec.event).frequency, g, bench_fault_time_s,
                                       bench_fault_width_s, bench_fault_peak_db);
    cases.push_back({mix(bgs[i], f.frame), std::move(f)});
  }
  return cases;
}

struct SnrOutcome {
  std::vector<double> gains;
  bool nonnegative = true;
};

SnrOutcome benchmark_snr(const ModelBundle& model, const std::vector<BenchmarkCase>& cases) {
  const NoiseWindow window(5.0, 8.0, bench_fault_time_s);
  SnrOutcome o;
  for (const auto& c : cases) {
    const DasFrame out = apply_debackground(model, c.input);
    for (double v : out.data()) o.nonnegative = o.nonnegative && v >= 0.0;
    o.gains.push_back(debackground_report(c.input, out, window, c.fault.fault_bins).snr_gain_db);
  }
  return o;
}

CriterionResult run_a5(Context& ctx) {
  CriterionResult r{"A5", true, "", json::object(), 0.0};
  const auto t0 = Clock::now();
  const ModelBundle& model = ctx.debackground_model();
  const auto cases = weak_fault_benchmark(BackgroundSite::site_a(), derive_seed(suite_seed, 500));
  const SnrOutcome o = benchmark_snr(model, cases);
  const double secs = seconds_since(t0);
  const double med = median(o.gains);
  r.passed = med >= 3.0 && o.nonnegative && secs < 900.0;
  r.metrics = {{"median_snr_gain_db", med}, {"min_snr_gain_db", *std::min_element(o.gains.begin(), o.gains.end())},
               {"outputs_nonnegative", o.nonnegative}, {"seconds", secs}};
  r.summary = "site-A weak fault: median SNR gain " + fmt("%.2f", med) + " dB over 20 frames; outputs >= 0: " +
              (o.nonnegative ? "yes" : "no") + "; " + fmt("%.0f", secs) + "s with training";
  return r;
}

CriterionResult run_a6(Context& ctx) {
  CriterionResult r{"A6", true, "", json::object(), 0.0};
  const ModelBundle& model = ctx.debackground_model();
  const auto bgs = synthesize_backgrounds(BackgroundSite::site_a(), 20, derive_seed(suite_seed, 600));
  double in = 0.0, out = 0.0;
  for (const auto& b : bgs) {
    in += frame_mean(b);
    out += frame_mean(apply_debackground(model, b));
  }
  const double ratio = out / in;
  r.passed = ratio <= 0.3;
  r.metrics = {{"energy_ratio", ratio}};
  r.summary = "20 site-A backgrounds: mean output energy " + fmt("%.4f", ratio) + " x input";
  return r;
}

// Three conveyor classes: normal background, background + sparse fault,
// background + broadband fault.
struct ConveyorSet {
  std::vector<LabeledFrame> raw;
  std::vector<LabeledFrame> cleaned;
};

ConveyorSet conveyor_set(const BackgroundSite& site, std::size_t per_class, std::uint64_t seed, const ModelBundle& debg) {
  const FrameGeometry g = FrameGeometry::time_frequency_desk();
  const auto bgs = synthesize_backgrounds(site, 3 * per_class, derive_seed(seed, 1));
  Rng gain_rng(derive_seed(seed, 2));
  ConveyorSet set;
  for (std::size_t i = 0; i < 3 * per_class; ++i) {
    const int label = static_cast<int>(i % 3);
    DasFrame frame = bgs[i];
    if (label != 0) {
      const EventClass c = label == 1 ? EventClass::fault_sparse : EventClass::fault_broadband;
      const EventSpec spec = sample_event_spec(c, derive_seed(seed, 100 + i), g);
      frame = mix(frame, fault_frame(spec, g, gain_rng.uniform(conveyor_gain_lo, conveyor_gain_hi)));
    }
    set.cleaned.push_back({apply_debackground(debg, frame), label});
    set.raw.push_back({std::move(frame), label});
  }
  return set;
}

CnnConfig benchmark_cnn() {
  CnnConfig cfg;
  cfg.epochs = 60;
  cfg.batch_size = 4;
  cfg.lr = 1e-2;
  return cfg;
}

CriterionResult run_a7(Context& ctx) {
  CriterionResult r{"A7", true, "", json::object(), 0.0};
  const ModelBundle& debg = ctx.debackground_model();
  std::vector<double> acc_initial, acc_debg;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const std::uint64_t seed = derive_seed(suite_seed, 700 + s);
    const ConveyorSet train = conveyor_set(BackgroundSite::site_a(), 15, derive_seed(seed, 1), debg);
    const ConveyorSet test = conveyor_set(BackgroundSite::site_a(), 30, derive_seed(seed, 2), debg);
    const ModelBundle a = train_classifier(train.raw, benchmark_cnn(), derive_seed(seed, 3));
    const ModelBundle b = train_classifier(train.cleaned, benchmark_cnn(), derive_seed(seed, 3));
    acc_initial.push_back(evaluate(a, test.raw).accuracy);
    acc_debg.push_back(evaluate(b, test.cleaned).accuracy);
    ctx.log() << "  A7 seed " << s << ": initial " << acc_initial.back() << ", debackground " << acc_debg.back() << "\n";
  }
  const double ma = median(acc_initial), mb = median(acc_debg);
  r.passed = mb >= ma + 0.03 && mb >= 0.85;
  r.metrics = {{"median_initial", ma}, {"median_debackground", mb}, {"initial", acc_initial}, {"debackground", acc_debg}};
  r.summary = "median accuracy initial " + fmt("%.3f", ma) + ", debackground " + fmt("%.3f", mb) + " over 10 seeds";
  return r;
}

CriterionResult run_a8(Context& ctx) {
  CriterionResult r{"A8", true, "", json::object(), 0.0};
  const ModelBundle& debg = ctx.debackground_model();
  const BackgroundSite site_b = BackgroundSite::site_b();
  const SnrOutcome snr = benchmark_snr(debg, weak_fault_benchmark(site_b, derive_seed(suite_seed, 800)));
  const double med = median(snr.gains);

  // Training data: site-B background only, clean or carrying PIGN-generated events.
  const std::size_t per_class = 15;
  const auto bgs = synthesize_backgrounds(site_b, 3 * per_class, derive_seed(suite_seed, 801));
  const auto sparse = generate(ctx.sparse_generator(), per_class, derive_seed(suite_seed, 802));
  const auto broadband = generate(ctx.broadband_generator(), per_class, derive_seed(suite_seed, 803));
  const auto sparse_scaled = scale_events(sparse, conveyor_gain_lo, conveyor_gain_hi, derive_seed(suite_seed, 804));
  const auto broadband_scaled = scale_events(broadband, conveyor_gain_lo, conveyor_gain_hi, derive_seed(suite_seed, 805));
  std::vector<LabeledFrame> train;
  for (std::size_t i = 0; i < per_class; ++i) {
    train.push_back({apply_debackground(debg, bgs[3 * i]), 0});
    train.push_back({apply_debackground(debg, mix(bgs[3 * i + 1], sparse_scaled[i])), 1});
    train.push_back({apply_debackground(debg, mix(bgs[3 * i + 2], broadband_scaled[i])), 2});
  }
  const ModelBundle clf = train_classifier(train, benchmark_cnn(), derive_seed(suite_seed, 806));
  const ConveyorSet test = conveyor_set(site_b, 30, derive_seed(suite_seed, 807), debg);
  const EvalReport report = evaluate(clf, test.cleaned);

  r.passed = med >= 2.0 && report.accuracy >= 0.80;
  r.metrics = {{"median_snr_gain_db", med}, {"accuracy", report.accuracy}, {"confusion", report.confusion}};
  r.summary = "site-B weak fault median SNR gain " + fmt("%.2f", med) + " dB; 3-class accuracy " +
              fmt("%.3f", report.accuracy) + " on 90 site-B mixtures";
  return r;
}

// --- A9 ---

std::map<std::string, std::vector<std::uint8_t>> tree_bytes(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = read_bytes(e.path());
  }
  return files;
}

bool run_pipeline(const fs::path& dir, std::ostream& log) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto p = [&](const char* name) { return (dir / name).string(); };
  {
    std::ofstream(p("pign.cfg")) << "pign.epochs = 3\npign.base_channels = 2\npign.depth = 2\n";
    std::ofstream(p("debg.cfg")) << "debg.epochs = 2\ndebg.base_channels = 2\ndebg.depth = 2\n";
    std::ofstream(p("clf.cfg")) << "clf.epochs = 2\nclf.channels1 = 2\nclf.channels2 = 4\n";
  }
  const std::vector<std::vector<std::string>> steps = {
      {"gen-targets", "--class", "fault-sparse", "--count", "3", "--seed", "5", "--out", p("targets")},
      {"gen-targets", "--class", "walk", "--count", "2", "--seed", "6", "--wrap", "--out", p("walk_targets")},
      {"pign", "train", "--mode", "untrained", "--targets", p("walk_targets"), "--config", p("pign.cfg"), "--seed", "7",
       "--out", p("walk_frames")},
      {"pign", "train", "--mode", "trained", "--targets", p("targets"), "--config", p("pign.cfg"), "--seed", "8",
       "--out", p("gen.dasm")},
      {"pign", "generate", "--model", p("gen.dasm"), "--count", "3", "--seed", "9", "--out", p("events")},
      {"background", "synth", "--site", "A", "--count", "3", "--seed", "10", "--out", p("bg")},
      {"debg", "train", "--backgrounds", p("bg"), "--events", p("events"), "--config", p("debg.cfg"), "--seed", "11",
       "--out", p("debg.dasm")},
      {"debg", "apply", "--model", p("debg.dasm"), "--in", p("events"), "--out", p("clean"), "--report",
       p("debg_report.csv")},
      {"clf", "train", "--data", p("bg"), p("events"), "--classes", "normal,fault-sparse", "--config", p("clf.cfg"),
       "--seed", "12", "--out", p("clf.dasm")},
      {"clf", "eval", "--model", p("clf.dasm"), "--data", p("bg"), p("events"), "--out", p("eval")},
      {"clf", "finetune", "--model", p("clf.dasm"), "--data", p("events"), "--config", p("clf.cfg"), "--seed", "13",
       "--out", p("clf_tuned.dasm")},
      {"report", "curves", "--in", p("events/frame_00000.dasf"), "--out", p("curves.svg")},
      {"report", "curves", "--in", p("events/frame_00000.dasf"), "--out", p("curves.csv")},
  };
  for (const auto& args : steps) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) {
      log << "  A9 step '" << args[0] << (args.size() > 1 ? " " + args[1] : "") << "' failed: " << out.str();
      return false;
    }
  }
  return true;
}

template <typename F>
bool throws_kind(F f, ErrorKind kind) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

CriterionResult run_a9(Context& ctx) {
  CriterionResult r{"A9", true, "", json::object(), 0.0};
  const fs::path root = ctx.out_dir() / "a9";
  const bool ran = run_pipeline(root / "run1", ctx.log()) && run_pipeline(root / "run2", ctx.log());
  bool identical = false;
  std::size_t file_count = 0;
  if (ran) {
    auto a = tree_bytes(root / "run1");
    auto b = tree_bytes(root / "run2");
    // Config files name their own directory nowhere, so whole trees compare directly.
    identical = a == b;
    file_count = a.size();
  }

  Rng rng(derive_seed(suite_seed, 900));
  bool roundtrips = true;
  for (const FrameGeometry& g : {FrameGeometry::time_frequency_desk(), FrameGeometry::spatiotemporal_desk()}) {
    const DasFrame f = DasFrame::from_geometry(g, random_values(rng, g.time_samples * g.channels));
    roundtrips = roundtrips && decode_frame(encode_frame(f)) == f;
  }
  UNetConfig ucfg;
  ucfg.height = 16;
  ucfg.width = 16;
  const ModelBundle unet = build_unet(ucfg, 3);
  const ModelBundle unet_back = decode_model(encode_model(unet));
  roundtrips = roundtrips && unet_back.same_weights(unet) && unet_back.fingerprint() == unet.fingerprint();
  const ModelBundle cnn = build_cnn(CnnConfig{}, 4);
  roundtrips = roundtrips && decode_model(encode_model(cnn)).same_weights(cnn);

  const fs::path ds = root / "dataset";
  fs::remove_all(ds);
  Manifest m;
  m.generator = "acceptance";
  m.generator_fingerprint = 42;
  std::vector<DasFrame> frames;
  for (int i = 0; i < 2; ++i) {
    const FrameGeometry g = FrameGeometry::time_frequency_desk();
    frames.push_back(DasFrame::from_geometry(g, random_values(rng, g.time_samples * g.channels)));
    m.entries.push_back({"", "normal", static_cast<std::uint64_t>(i), nullptr, nullptr});
  }
  write_dataset(ds, m, frames);
  const Dataset loaded = load_dataset(ds);
  roundtrips = roundtrips && loaded.frames == frames;

  auto frame_bytes = encode_frame(frames[0]);
  auto bad_magic = frame_bytes;
  bad_magic[0] = 'X';
  auto flipped = frame_bytes;
  flipped[100] ^= 0x01;
  auto truncated = frame_bytes;
  truncated.resize(truncated.size() / 2);
  auto model_bytes = encode_model(unet);
  model_bytes[model_bytes.size() - 20] ^= 0x10;
  bool rejected = throws_kind([&] { decode_frame(bad_magic); }, ErrorKind::format) &&
                  throws_kind([&] { decode_frame(flipped); }, ErrorKind::checksum) &&
                  throws_kind([&] { decode_frame(truncated); }, ErrorKind::format) &&
                  throws_kind([&] { decode_frame({}); }, ErrorKind::format) &&
                  throws_kind([&] { decode_model(model_bytes); }, ErrorKind::checksum);
  write_bytes(ds / "frame_00001.dasf", flipped);
  rejected = rejected && throws_kind([&] { read_manifest(ds); }, ErrorKind::integrity);
  fs::remove(ds / "frame_00001.dasf");
  rejected = rejected && throws_kind([&] { read_manifest(ds); }, ErrorKind::integrity);

  r.passed = ran && identical && roundtrips && rejected;
  r.metrics = {{"pipeline_ran", ran}, {"byte_identical", identical}, {"files_compared", file_count},
               {"roundtrips", roundtrips}, {"corruption_rejected", rejected}};
  r.summary = std::string("pipeline rerun ") + (identical ? "byte-identical" : "DIFFERS") + " over " +
              std::to_string(file_count) + " files; round-trips " + (roundtrips ? "exact" : "NOT exact") +
              "; corrupted files " + (rejected ? "rejected" : "NOT all rejected");
  return r;
}

}  // namespace

Context::Context(fs::path out_dir, std::ostream& log) : out_dir_(std::move(out_dir)), log_(log) {
  fs::create_directories(out_dir_);
}

const ModelBundle& Context::sparse_generator() {
  if (!sparse_) {
    const FrameGeometry g = FrameGeometry::time_frequency_desk();
    PignConfig cfg = PignConfig::for_geometry(g);
    cfg.epochs = 300;
    log_ << "  training fault-sparse generator (64 targets, 300 epochs)\n";
    sparse_ = train_trained(sparse_training_targets(g), cfg, derive_seed(suite_seed, 401)).model;
    save_model(out_dir_ / "sparse_generator.dasm", *sparse_);
  }
  return *sparse_;
}

const ModelBundle& Context::broadband_generator() {
  if (!broadband_) {
    const FrameGeometry g = FrameGeometry::time_frequency_desk();
    PignConfig cfg = PignConfig::for_geometry(g);
    cfg.epochs = 300;
    cfg.base_channels = 4;
    std::vector<TargetCurves> ds;
    for (std::size_t i = 0; i < 32; ++i) {
      ds.push_back(make_targets(sample_event_spec(EventClass::fault_broadband, derive_seed(suite_seed + 5, i), g), g, false));
    }
    log_ << "  training fault-broadband generator (32 targets, 300 epochs)\n";
    broadband_ = train_trained(ds, cfg, derive_seed(suite_seed, 402)).model;
    save_model(out_dir_ / "broadband_generator.dasm", *broadband_);
  }
  return *broadband_;
}

const ModelBundle& Context::debackground_model() {
  if (!debackground_) {
    // Events come from the generators; their training time is not part of the
    // debackground budget.
    const auto sparse = generate(sparse_generator(), 48, derive_seed(suite_seed, 501));
    const auto broadband = generate(broadband_generator(), 48, derive_seed(suite_seed, 502));
    std::vector<DasFrame> events;
    for (std::size_t i = 0; i < 48; ++i) {
      events.push_back(sparse[i]);
      events.push_back(broadband[i]);
    }
    const auto scaled = scale_events(events, 0.3, 1.5, derive_seed(suite_seed, 503));
    const auto bgs = synthesize_backgrounds(BackgroundSite::site_a(), 24, derive_seed(suite_seed, 504));
    const auto pairs = make_training_pairs(bgs, scaled, derive_seed(suite_seed, 505), 4);
    log_ << "  training debackground net (" << pairs.size() << " pairs, 100 epochs)\n";
    const auto t0 = Clock::now();
    auto trained = train_debackground(pairs, DebackgroundConfig{}, derive_seed(suite_seed, 506));
    log_ << "  debackground training took " << seconds_since(t0) << " s; pair MSE " << trained.history.losses.front()
         << " -> " << trained.final_mse << "\n";
    debackground_ = std::move(trained.model);
    save_model(out_dir_ / "debackground.dasm", *debackground_);
  }
  return *debackground_;
}

std::vector<std::string> criterion_ids() { return {"A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9"}; }

CriterionResult run_criterion(const std::string& id, Context& ctx) {
  static const std::map<std::string, CriterionResult (*)(Context&)> table = {
      {"A1", run_a1}, {"A2", run_a2}, {"A3", run_a3}, {"A4", run_a4}, {"A5", run_a5},
      {"A6", run_a6}, {"A7", run_a7}, {"A8", run_a8}, {"A9", run_a9}};
  const auto it = table.find(id);
  if (it == table.end()) throw Error(ErrorKind::usage, "unknown acceptance criterion '" + id + "'");
  const auto t0 = Clock::now();
  CriterionResult r;
  try {
    r = it->second(ctx);
  } catch (const std::exception& e) {
    r = {id, false, std::string("error: ") + e.what(), json::object(), 0.0};
  }
  r.seconds = seconds_since(t0);
  return r;
}

std::string result_line(const CriterionResult& r) {
  return r.id + (r.passed ? " PASS " : " FAIL ") + r.summary + " [" + fmt("%.1f", r.seconds) + " s]";
}

}  // namespace dasphys::acceptance
