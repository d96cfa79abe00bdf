#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "acceptance.hpp"
#include "dasphys/classifier.hpp"
#include "dasphys/datastore.hpp"
#include "dasphys/debackground.hpp"
#include "dasphys/error.hpp"
#include "dasphys/pign.hpp"
#include "dasphys/report.hpp"
#include "dasphys/rng.hpp"
#include "dasphys/serialize.hpp"

namespace dasphys::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* targets_file = "targets.json";
const std::vector<std::string> default_classes = {"normal", "fault-sparse", "fault-broadband"};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("DAS_PHYSIM_SEED")) {
    const std::string text = env;
    try {
      std::size_t used = 0;
      const std::uint64_t v = std::stoull(text, &used);
      if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::usage, "DAS_PHYSIM_SEED='" + text + "' is not an unsigned integer");
  }
  throw Error(ErrorKind::usage, "--seed is required (or set DAS_PHYSIM_SEED)");
}

KeyValueConfig load_config(const std::string& path, const std::vector<std::vector<std::string>>& key_sets) {
  if (path.empty()) return {};
  KeyValueConfig cfg = KeyValueConfig::load(path);
  std::vector<std::string> known;
  for (const auto& s : key_sets) known.insert(known.end(), s.begin(), s.end());
  cfg.require_known(known);
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

FrameGeometry geometry_for(EventClass c) {
  return is_phase_event(c) ? FrameGeometry::spatiotemporal_desk() : FrameGeometry::time_frequency_desk();
}

struct TargetSet {
  EventClass event_class = EventClass::shake;
  FrameGeometry geometry;
  PhysicsRanges ranges;
  bool wrap = false;
  std::vector<EventSpec> specs;
  std::vector<TargetCurves> targets;
};

TargetSet read_targets(const fs::path& dir) {
  const auto bytes = read_bytes(dir / targets_file);
  try {
    const json doc = json::parse(bytes.begin(), bytes.end());
    TargetSet t;
    t.event_class = parse_event_class(doc.at("class").get<std::string>());
    t.geometry = geometry_from_json(doc.at("geometry"));
    t.ranges = PhysicsRanges::from_config(KeyValueConfig::parse(doc.at("ranges").get<std::string>()));
    t.wrap = doc.at("wrap").get<bool>();
    for (const auto& e : doc.at("targets")) {
      t.specs.push_back(event_spec_from_json(e.at("spec")));
      TargetCurves c;
      c.event_class = t.event_class;
      c.temporal = curve_from_json(e.at("temporal"));
      c.secondary = curve_from_json(e.at("secondary"));
      c.wrapped = t.wrap && is_phase_event(t.event_class);
      t.targets.push_back(std::move(c));
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, (dir / targets_file).string() + ": " + e.what());
  }
}

std::vector<std::size_t> fault_bins_for(const ManifestEntry& entry, const FrameGeometry& g) {
  std::vector<std::size_t> bins;
  if (!entry.event.is_null()) {
    const EventSpec spec = event_spec_from_json(entry.event);
    if (spec.event_class() == EventClass::fault_sparse) {
      const auto curve = evaluate_event(spec, g).second.values;
      const double peak = *std::max_element(curve.begin(), curve.end());
      for (std::size_t b = 0; b < curve.size(); ++b) {
        if (curve[b] >= 0.5 * peak) bins.push_back(b);
      }
    }
  }
  if (bins.empty()) {
    for (std::size_t b = 0; b < g.channels; ++b) bins.push_back(b);
  }
  return bins;
}

std::vector<LabeledFrame> labeled_data(const std::vector<std::string>& dirs, const std::vector<std::string>& classes) {
  std::vector<LabeledFrame> data;
  for (const auto& dir : dirs) {
    const Dataset d = load_dataset(dir);
    for (std::size_t i = 0; i < d.frames.size(); ++i) {
      const std::string& label = d.manifest.entries[i].label;
      const auto it = std::find(classes.begin(), classes.end(), label);
      if (it == classes.end()) {
        throw Error(ErrorKind::invalid_class, dir + ": label '" + label + "' is not among the configured classes");
      }
      data.push_back({d.frames[i], static_cast<int>(it - classes.begin())});
    }
  }
  return data;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> model_classes(const ModelBundle& model) {
  if (model.config.contains("labels")) return model.config.at("labels").get<std::vector<std::string>>();
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cnn_config(model).classes; ++c) names.push_back(std::to_string(c));
  return names;
}

// Runs `task(i)` for i in [0, n) on up to `jobs` threads; results are indexed, so
// the outcome does not depend on scheduling. The first failure is rethrown.
template <typename Task>
void parallel_for(std::size_t n, std::size_t jobs, Task task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

struct Options {
  std::optional<std::uint64_t> seed;
  std::string event_class;
  std::size_t count = 0;
  std::string out;
  std::string mode;
  std::string targets;
  std::string config;
  std::string model;
  std::string site;
  std::string backgrounds;
  std::string events;
  std::string in;
  std::string report;
  std::vector<std::string> data;
  std::string classes;
  std::string suite;
  std::size_t jobs = 1;
  std::size_t events_per_background = 0;
  std::vector<double> gain_range = {1.0, 1.0};
  std::vector<double> noise_window = {5.0, 8.0};
  double signal_time = 9.0;
  bool wrap = false;
};

json cmd_gen_targets(const Options& o, std::ostream& err) {
  const EventClass c = parse_event_class(o.event_class);
  const FrameGeometry g = geometry_for(c);
  const KeyValueConfig config = load_config(o.config, {PhysicsRanges::config_keys()});
  const PhysicsRanges ranges = PhysicsRanges::from_config(config);
  const std::uint64_t seed = resolve_seed(o.seed);
  json list = json::array();
  for (std::size_t i = 0; i < o.count; ++i) {
    const EventSpec spec = sample_event_spec(c, derive_seed(seed, i), g, ranges);
    const TargetCurves t = make_targets(spec, g, o.wrap);
    list.push_back({{"spec", to_json(spec)}, {"temporal", to_json(t.temporal)}, {"secondary", to_json(t.secondary)}});
  }
  fs::create_directories(o.out);
  const json doc = {{"class", std::string(to_string(c))}, {"geometry", to_json(g)},
                    {"ranges", ranges.to_config().serialize()}, {"seed", seed},
                    {"wrap", o.wrap}, {"targets", list}};
  write_text(fs::path(o.out) / targets_file, doc.dump(2) + "\n");
  err << "wrote " << o.count << " " << to_string(c) << " targets\n";
  return {{"count", o.count}, {"class", std::string(to_string(c))}, {"out", o.out}};
}

json cmd_pign_train(const Options& o, std::ostream& err) {
  const TargetSet t = read_targets(o.targets);
  const KeyValueConfig config = load_config(o.config, {PignConfig::config_keys(), PhysicsRanges::config_keys()});
  const PignConfig cfg = PignConfig::from_config(config, t.geometry);
  const std::uint64_t seed = resolve_seed(o.seed);
  if (o.mode == "trained") {
    if (t.targets.empty()) throw Error(ErrorKind::insufficient_data, "trained mode needs at least one target");
    const TrainedResult r = train_trained(t.targets, cfg, seed, t.ranges);
    save_model(o.out, r.model);
    std::ofstream hist(o.out + ".history.csv");
    r.history.write_csv(hist);
    err << "trained generator on " << t.targets.size() << " targets\n";
    return {{"mode", "trained"},
            {"targets", t.targets.size()},
            {"final_loss", r.history.losses.empty() ? 0.0 : r.history.losses.back()},
            {"fingerprint", hex64(r.model.fingerprint())},
            {"out", o.out}};
  }
  if (o.mode != "untrained") throw Error(ErrorKind::usage, "--mode must be untrained or trained, got '" + o.mode + "'");
  std::vector<std::optional<UntrainedResult>> results(t.targets.size());
  parallel_for(t.targets.size(), o.jobs, [&](std::size_t i) {
    results[i] = train_untrained(t.targets[i], cfg, derive_seed(seed, i));
  });
  fs::create_directories(o.out);
  Manifest m;
  m.generator = "pign-untrained";
  std::vector<DasFrame> frames;
  double worst = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const UntrainedResult& r = *results[i];
    frames.push_back(r.frame);
    m.entries.push_back({"", std::string(to_string(t.event_class)), derive_seed(seed, i), to_json(t.specs[i]), nullptr});
    worst = std::max(worst, relative_projection_error(r.frame, t.targets[i]));
    char name[40];
    std::snprintf(name, sizeof name, "history_%05zu.csv", i);
    std::ofstream hist(fs::path(o.out) / name);
    r.history.write_csv(hist);
    if (i == 0) m.generator_fingerprint = r.model.fingerprint();
  }
  write_dataset(o.out, m, frames);
  err << "optimized " << frames.size() << " untrained generators\n";
  return {{"mode", "untrained"}, {"frames", frames.size()}, {"max_relative_projection_error", worst}, {"out", o.out}};
}

json cmd_pign_generate(const Options& o, std::ostream& err) {
  const ModelBundle model = load_model(o.model);
  const std::uint64_t seed = resolve_seed(o.seed);
  const auto events = generate_events(model, o.count, seed);
  Manifest m;
  m.generator = "pign-trained";
  m.generator_fingerprint = model.fingerprint();
  std::vector<DasFrame> frames;
  for (std::size_t i = 0; i < events.size(); ++i) {
    frames.push_back(events[i].frame);
    m.entries.push_back({"", std::string(to_string(events[i].spec.event_class())), events[i].spec.seed,
                         to_json(events[i].spec), nullptr});
  }
  write_dataset(o.out, m, frames);
  err << "generated " << frames.size() << " frames\n";
  return {{"count", frames.size()}, {"out", o.out}};
}

json cmd_background_synth(const Options& o, std::ostream& err) {
  const BackgroundSite site = BackgroundSite::named(o.site);
  const std::uint64_t seed = resolve_seed(o.seed);
  const json site_json = {{"site", site.name},
                          {"floor_sigma", site.floor_sigma},
                          {"floor_colour", site.floor_colour},
                          {"line_hz", site.line_hz},
                          {"line_amplitude", site.line_amplitude},
                          {"line_jitter_hz", site.line_jitter_hz},
                          {"amplitude_jitter", site.amplitude_jitter},
                          {"am_depth", site.am_depth},
                          {"am_rate_hz", site.am_rate_hz}};
  const std::string text = site_json.dump();
  Manifest m;
  m.generator = "background-site-" + site.name;
  m.generator_fingerprint = fnv1a(text.data(), text.size());
  const auto frames = synthesize_backgrounds(site, o.count, seed);
  for (std::size_t i = 0; i < frames.size(); ++i) m.entries.push_back({"", "normal", derive_seed(seed, i), nullptr, site_json});
  write_dataset(o.out, m, frames);
  err << "synthesized " << frames.size() << " site " << site.name << " backgrounds\n";
  return {{"count", frames.size()}, {"site", site.name}, {"out", o.out}};
}

json cmd_debg_train(const Options& o, std::ostream& err) {
  const KeyValueConfig config = load_config(o.config, {DebackgroundConfig::config_keys()});
  const DebackgroundConfig cfg = DebackgroundConfig::from_config(config);
  const std::uint64_t seed = resolve_seed(o.seed);
  if (o.gain_range.size() != 2) throw Error(ErrorKind::usage, "--gain-range takes two values");
  const Dataset bgs = load_dataset(o.backgrounds);
  const Dataset events = load_dataset(o.events);
  const auto scaled = scale_events(events.frames, o.gain_range[0], o.gain_range[1], derive_seed(seed, 1));
  const auto pairs = make_training_pairs(bgs.frames, scaled, derive_seed(seed, 2), o.events_per_background);
  const DebackgroundResult r = train_debackground(pairs, cfg, derive_seed(seed, 3));
  save_model(o.out, r.model);
  std::ofstream hist(o.out + ".history.csv");
  r.history.write_csv(hist);
  err << "trained debackground net on " << pairs.size() << " pairs\n";
  return {{"pairs", pairs.size()},
          {"initial_mse", r.history.losses.empty() ? 0.0 : r.history.losses.front()},
          {"final_mse", r.final_mse},
          {"fingerprint", hex64(r.model.fingerprint())},
          {"out", o.out}};
}

json cmd_debg_apply(const Options& o, std::ostream& err) {
  const ModelBundle model = load_model(o.model);
  const Dataset in = load_dataset(o.in);
  if (o.noise_window.size() != 2) throw Error(ErrorKind::usage, "--noise-window takes two values");
  const NoiseWindow window(o.noise_window[0], o.noise_window[1], o.signal_time);
  Manifest m = in.manifest;
  m.generator = "debackground";
  m.generator_fingerprint = model.fingerprint();
  std::vector<DasFrame> out;
  std::ostringstream csv;
  write_metrics_header(csv);
  double gain_sum = 0.0;
  for (std::size_t i = 0; i < in.frames.size(); ++i) {
    out.push_back(apply_debackground(model, in.frames[i]));
    const auto bins = fault_bins_for(in.manifest.entries[i], FrameGeometry::of(in.frames[i]));
    const DebackgroundMetrics metrics = debackground_report(in.frames[i], out.back(), window, bins);
    write_metrics_row(csv, in.manifest.entries[i].file, metrics);
    gain_sum += metrics.snr_gain_db;
  }
  write_dataset(o.out, m, out);
  if (!o.report.empty()) write_text(o.report, csv.str());
  err << "debackgrounded " << out.size() << " frames\n";
  return {{"frames", out.size()},
          {"mean_snr_gain_db", out.empty() ? 0.0 : gain_sum / static_cast<double>(out.size())},
          {"out", o.out}};
}

CnnConfig classifier_config(const Options& o, const std::vector<std::string>& classes) {
  const KeyValueConfig config = load_config(o.config, {CnnConfig::config_keys()});
  CnnConfig cfg = CnnConfig::from_config(config);
  if (!config.contains("clf.classes")) cfg.classes = classes.size();
  if (cfg.classes != classes.size()) {
    throw Error(ErrorKind::config, "clf.classes disagrees with the " + std::to_string(classes.size()) + " class names");
  }
  cfg.validate();
  return cfg;
}

json cmd_clf_train(const Options& o, std::ostream& err) {
  const std::vector<std::string> classes = o.classes.empty() ? default_classes : split_list(o.classes);
  CnnConfig cfg = classifier_config(o, classes);
  const auto data = labeled_data(o.data, classes);
  if (!data.empty()) {
    cfg.height = data.front().frame.time_samples();
    cfg.width = data.front().frame.channels();
  }
  ModelBundle model = train_classifier(data, cfg, resolve_seed(o.seed));
  model.config["labels"] = classes;
  save_model(o.out, model);
  const EvalReport train = evaluate(model, data);
  err << "trained classifier on " << data.size() << " frames\n";
  return {{"samples", data.size()}, {"train_accuracy", train.accuracy}, {"out", o.out}};
}

json cmd_clf_eval(const Options& o, std::ostream& err) {
  const ModelBundle model = load_model(o.model);
  const auto classes = model_classes(model);
  const auto data = labeled_data(o.data, classes);
  const EvalReport report = evaluate(model, data);
  fs::create_directories(o.out);
  std::ostringstream csv;
  report.write_csv(csv, classes);
  write_text(fs::path(o.out) / "report.csv", csv.str());
  write_text(fs::path(o.out) / "confusion.svg", confusion_svg(report, classes, "confusion matrix"));
  err << "evaluated " << data.size() << " frames\n";
  return {{"samples", data.size()}, {"accuracy", report.accuracy}, {"out", o.out}};
}

json cmd_clf_finetune(const Options& o, std::ostream& err) {
  const ModelBundle model = load_model(o.model);
  const auto classes = model_classes(model);
  const CnnConfig cfg = classifier_config(o, classes);
  const auto data = labeled_data(o.data, classes);
  const ModelBundle tuned = finetune(model, data, cfg, resolve_seed(o.seed));
  save_model(o.out, tuned);
  err << "fine-tuned classifier on " << data.size() << " frames\n";
  return {{"samples", data.size()}, {"accuracy", evaluate(tuned, data).accuracy}, {"out", o.out}};
}

json cmd_report_curves(const Options& o, std::ostream& err) {
  const DasFrame frame = read_frame(o.in);
  const std::string ext = fs::path(o.out).extension().string();
  if (ext == ".svg") {
    write_text(o.out, frame_curves_svg(frame));
  } else if (ext == ".csv") {
    std::ostringstream csv;
    write_frame_curves_csv(csv, frame);
    write_text(o.out, csv.str());
  } else {
    throw Error(ErrorKind::usage, "--out must end in .svg or .csv, got '" + o.out + "'");
  }
  err << "wrote feature curves\n";
  return {{"out", o.out}, {"samples", frame.time_samples()}, {"channels", frame.channels()}};
}

json cmd_bench(const Options& o, std::ostream& err) {
  std::vector<std::string> ids;
  if (o.suite == "all") {
    ids = acceptance::criterion_ids();
  } else {
    ids = split_list(o.suite);
    const auto known = acceptance::criterion_ids();
    for (const auto& id : ids) {
      if (std::find(known.begin(), known.end(), id) == known.end()) {
        throw Error(ErrorKind::usage, "unknown suite '" + id + "'");
      }
    }
  }
  fs::create_directories(o.out);
  acceptance::Context ctx(o.out, err);
  json results = json::array();
  std::size_t passed = 0;
  for (const auto& id : ids) {
    const auto r = acceptance::run_criterion(id, ctx);
    err << acceptance::result_line(r) << "\n";
    passed += r.passed ? 1 : 0;
    results.push_back({{"id", r.id}, {"passed", r.passed}, {"summary", r.summary}, {"seconds", r.seconds},
                       {"metrics", r.metrics}});
  }
  write_text(fs::path(o.out) / "acceptance.json", results.dump(2) + "\n");
  return {{"passed", passed}, {"failed", ids.size() - passed}, {"results", results}};
}

}  // namespace

int exit_code_for(const std::string& kind) {
  if (kind == "usage") return 2;
  if (kind == "config") return 3;
  if (kind == "io") return 4;
  if (kind == "format" || kind == "integrity" || kind == "checksum" || kind == "fingerprint") return 5;
  if (kind == "acceptance") return 6;
  return 1;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"DAS physics-informed generation, debackground and classification toolkit", "dasphys"};
  app.require_subcommand(1);
  Options o;
  std::string command;
  std::function<json(const Options&, std::ostream&)> handler;
  auto bind = [&](CLI::App* sub, std::string name, json (*fn)(const Options&, std::ostream&)) {
    sub->callback([&, name, fn] {
      command = name;
      handler = fn;
    });
  };
  auto seed_opt = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "seed (falls back to DAS_PHYSIM_SEED)"); };

  auto* gen = app.add_subcommand("gen-targets", "sample physics target curves");
  gen->add_option("--class", o.event_class, "shake|walk|fault-sparse|fault-broadband")->required();
  gen->add_option("--count", o.count, "number of targets")->required();
  gen->add_option("--out", o.out, "output directory")->required();
  gen->add_option("--config", o.config, "physics ranges config file");
  gen->add_flag("--wrap", o.wrap, "wrap phase targets into [-pi, pi)");
  seed_opt(gen);
  bind(gen, "gen-targets", cmd_gen_targets);

  auto* pign = app.add_subcommand("pign", "physics-informed generator");
  pign->require_subcommand(1);
  auto* ptrain = pign->add_subcommand("train", "train a generator");
  ptrain->add_option("--mode", o.mode, "untrained|trained")->required();
  ptrain->add_option("--targets", o.targets, "targets directory")->required();
  ptrain->add_option("--config", o.config, "pign config file");
  ptrain->add_option("--out", o.out, "model file (trained) or frame directory (untrained)")->required();
  ptrain->add_option("--jobs", o.jobs, "worker threads for untrained mode");
  seed_opt(ptrain);
  bind(ptrain, "pign train", cmd_pign_train);
  auto* pgen = pign->add_subcommand("generate", "generate frames from a trained generator");
  pgen->add_option("--model", o.model, "trained generator")->required();
  pgen->add_option("--count", o.count, "number of frames")->required();
  pgen->add_option("--out", o.out, "output directory")->required();
  seed_opt(pgen);
  bind(pgen, "pign generate", cmd_pign_generate);

  auto* bg = app.add_subcommand("background", "machinery background frames");
  bg->require_subcommand(1);
  auto* synth = bg->add_subcommand("synth", "synthesize background frames");
  synth->add_option("--site", o.site, "A|B")->required();
  synth->add_option("--count", o.count, "number of frames")->required();
  synth->add_option("--out", o.out, "output directory")->required();
  seed_opt(synth);
  bind(synth, "background synth", cmd_background_synth);

  auto* debg = app.add_subcommand("debg", "debackground network");
  debg->require_subcommand(1);
  auto* dtrain = debg->add_subcommand("train", "train on background + event mixtures");
  dtrain->add_option("--backgrounds", o.backgrounds, "background dataset")->required();
  dtrain->add_option("--events", o.events, "event dataset")->required();
  dtrain->add_option("--out", o.out, "model file")->required();
  dtrain->add_option("--config", o.config, "debg config file");
  dtrain->add_option("--events-per-background", o.events_per_background, "mixtures per background (0: events/backgrounds)");
  dtrain->add_option("--gain-range", o.gain_range, "event gain range lo hi")->expected(2);
  seed_opt(dtrain);
  bind(dtrain, "debg train", cmd_debg_train);
  auto* dapply = debg->add_subcommand("apply", "remove background from frames");
  dapply->add_option("--model", o.model, "debackground model")->required();
  dapply->add_option("--in", o.in, "input dataset")->required();
  dapply->add_option("--out", o.out, "output dataset")->required();
  dapply->add_option("--report", o.report, "metrics CSV");
  dapply->add_option("--noise-window", o.noise_window, "noise window start end (s)")->expected(2);
  dapply->add_option("--signal-time", o.signal_time, "signal instant (s)");
  bind(dapply, "debg apply", cmd_debg_apply);

  auto* clf = app.add_subcommand("clf", "event classifier");
  clf->require_subcommand(1);
  auto* ctrain = clf->add_subcommand("train", "train a classifier");
  ctrain->add_option("--data", o.data, "labeled datasets")->required();
  ctrain->add_option("--classes", o.classes, "comma-separated class names");
  ctrain->add_option("--config", o.config, "clf config file");
  ctrain->add_option("--out", o.out, "model file")->required();
  seed_opt(ctrain);
  bind(ctrain, "clf train", cmd_clf_train);
  auto* ceval = clf->add_subcommand("eval", "evaluate a classifier");
  ceval->add_option("--model", o.model, "classifier")->required();
  ceval->add_option("--data", o.data, "labeled datasets")->required();
  ceval->add_option("--out", o.out, "report directory")->required();
  bind(ceval, "clf eval", cmd_clf_eval);
  auto* ctune = clf->add_subcommand("finetune", "fine-tune a classifier");
  ctune->add_option("--model", o.model, "classifier")->required();
  ctune->add_option("--data", o.data, "labeled datasets")->required();
  ctune->add_option("--config", o.config, "clf config file");
  ctune->add_option("--out", o.out, "model file")->required();
  seed_opt(ctune);
  bind(ctune, "clf finetune", cmd_clf_finetune);

  auto* report = app.add_subcommand("report", "plots and tables");
  report->require_subcommand(1);
  auto* curves = report->add_subcommand("curves", "feature curves of a frame");
  curves->add_option("--in", o.in, "frame file")->required();
  curves->add_option("--out", o.out, "SVG or CSV path")->required();
  bind(curves, "report curves", cmd_report_curves);

  auto* bench = app.add_subcommand("bench", "benchmarks");
  bench->require_subcommand(1);
  auto* accept = bench->add_subcommand("acceptance", "run acceptance criteria");
  accept->add_option("--suite", o.suite, "A1..A9, comma-separated, or all")->required();
  accept->add_option("--out", o.out, "output directory")->required();
  bind(accept, "bench acceptance", cmd_bench);

  json result;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    result = handler(o, err);
    result["command"] = command;
    bool ok = true;
    if (command == "bench acceptance") ok = result.at("failed").get<std::size_t>() == 0;
    result["status"] = ok ? "ok" : "failed";
    out << result.dump() << std::endl;
    return ok ? 0 : exit_code_for("acceptance");
  } catch (const CLI::CallForHelp&) {
    out << app.help() << json{{"status", "ok"}, {"command", "help"}}.dump() << std::endl;
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All) << json{{"status", "ok"}, {"command", "help"}}.dump() << std::endl;
    return 0;
  } catch (const CLI::ParseError& e) {
    out << json{{"status", "error"}, {"kind", "usage"}, {"command", command}, {"message", e.what()}}.dump() << std::endl;
    return exit_code_for("usage");
  } catch (const Error& e) {
    const std::string kind(to_string(e.kind()));
    out << json{{"status", "error"}, {"kind", kind}, {"command", command}, {"message", e.what()}}.dump() << std::endl;
    return exit_code_for(kind);
  } catch (const std::exception& e) {
    out << json{{"status", "error"}, {"kind", "internal"}, {"command", command}, {"message", e.what()}}.dump()
        << std::endl;
    return 1;
  }
}

}  // namespace dasphys::cli
