#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dasphys/autodiff.hpp"
#include "dasphys/config.hpp"
#include "dasphys/model.hpp"
#include "dasphys/physics.hpp"
#include "dasphys/signal.hpp"

namespace dasphys {

struct PignLossWeights {
  double w_time = 1.0;
  double w_secondary = 1.0;
  double w_cont = 0.1;
  double w_corr = 0.01;
  double C_T = 0.0;  // target total correlation, in units of the unordered-pair sum

  void validate() const;
  bool operator==(const PignLossWeights& other) const = default;
};

struct TargetCurves {
  EventClass event_class = EventClass::shake;
  FeatureCurve temporal;
  FeatureCurve secondary;
  bool wrapped = false;
};

// Feature curves of an event on the geometry's grids. Both curves are brought
// to a common grand mean (the temporal one), since a single frame projects to
// the same overall mean along either axis: phase curves by an additive shift,
// energy curves by rescaling. Energy curves are rectified first. With `wrap`,
// phase curves are folded into [-pi, pi) after the shift.
TargetCurves make_targets(const EventSpec& spec, const FrameGeometry& geometry, bool wrap);

// Frames enter the losses as [T, S] tensors or [1, 1, T, S] network outputs.
ad::Tensor continuity_penalty(const ad::Tensor& frame);
// Differentiable sum of channel-pair Pearson coefficients.
ad::Tensor correlation_total_tensor(const ad::Tensor& frame);
ad::Tensor correlation_penalty(const ad::Tensor& frame, double C_T);

struct LossTerms {
  double time = 0.0;
  double secondary = 0.0;
  double continuity = 0.0;
  double correlation = 0.0;
  double total = 0.0;
};

ad::Tensor composite_loss(const ad::Tensor& output, const TargetCurves& targets,
                          const PignLossWeights& w, LossTerms* terms = nullptr);

// sqrt(curve_l2(projection, target) / sum(target^2)), worst of the two axes.
double relative_projection_error(const DasFrame& frame, const TargetCurves& targets);

// Correlation penalty is only meaningful for events whose channels share motion.
bool spatially_correlated(EventClass event_class);

struct PignConfig {
  FrameGeometry geometry = FrameGeometry::spatiotemporal_desk();
  std::size_t depth = 3;
  std::size_t base_channels = 8;
  double leaky_slope = 0.01;
  std::size_t epochs = 2000;
  double lr = 1e-3;
  PignLossWeights weights;
  double correlation_fraction = 0.95;  // C_T as a fraction of the pair count when unset

  // Defaults for a geometry; C_T follows correlation_fraction.
  static PignConfig for_geometry(const FrameGeometry& geometry);
  // Overrides from `pign.*` keys.
  static PignConfig from_config(const KeyValueConfig& config, const FrameGeometry& geometry);
  static std::vector<std::string> config_keys();
  void validate() const;
  // Weights actually used for a class (correlation term dropped where it does not apply).
  PignLossWeights weights_for(EventClass event_class) const;
};

struct TrainingHistory {
  std::vector<double> losses;  // loss at each epoch, before that epoch's update
  void write_csv(std::ostream& out) const;
};

struct UntrainedResult {
  DasFrame frame;
  ModelBundle model;
  TrainingHistory history;
};

// One fixed random input; the network weights are optimized on the composite loss.
UntrainedResult train_untrained(const TargetCurves& targets, const PignConfig& cfg,
                                std::uint64_t seed);

struct TrainedResult {
  ModelBundle model;
  TrainingHistory history;  // mean per-sample loss per epoch
};

// Input channels: fresh noise, temporal target repeated across columns,
// secondary target repeated across rows.
TrainedResult train_trained(const std::vector<TargetCurves>& dataset, const PignConfig& cfg,
                            std::uint64_t seed, const PhysicsRanges& ranges = {});

struct GeneratedEvent {
  EventSpec spec;
  TargetCurves targets;
  DasFrame frame;
};

// Samples fresh event specs of the model's class, conditions on their targets
// and feeds fresh noise. Phase frames are wrapped; energy frames rectified.
std::vector<GeneratedEvent> generate_events(const ModelBundle& model, std::size_t n,
                                            std::uint64_t seed);
std::vector<DasFrame> generate(const ModelBundle& model, std::size_t n, std::uint64_t seed);

// Final physical range screen applied to every network-produced frame.
DasFrame physics_screen(const DasFrame& frame);

ad::Tensor frame_tensor(const DasFrame& frame);
DasFrame tensor_frame(const ad::Tensor& t, const FrameGeometry& geometry);

}  // namespace dasphys
