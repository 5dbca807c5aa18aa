#pragma once

// PipelineConfig: every knob of every stage in one JSON document. Parsing is
// strict (unknown keys and wrong types are config errors) and serialization
// always materializes every default so echoed configs are self-describing.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pixinfo/augment.hpp"
#include "pixinfo/encoder.hpp"
#include "pixinfo/error.hpp"
#include "pixinfo/infometrics.hpp"
#include "pixinfo/matching.hpp"
#include "pixinfo/synthdata.hpp"
#include "pixinfo/train.hpp"

namespace pixinfo {

enum class WeightScheme { exponential, piecewise };
enum class CorrespondenceMode { oracle, encoder };

struct PipelineConfig {
  std::uint64_t seed = 7;
  unsigned workers = 1;

  struct Imaging {
    int iie_patch = 10;
    int iie_bins = 256;
    int mi_bins = 32;
    double log_base = natural_log_base;
  } imaging;

  struct Categories {
    double t_lm = 2.0;
    double t_mh = 4.0;
  } categories;

  struct Weights {
    WeightScheme scheme = WeightScheme::exponential;
    double gamma = 0.3;
    double d = 1.0;
  } weights;

  struct Augment {
    bool adaptive = true;
    AugmentParams fixed{0.4, 0.4};
    double alpha_hat = 1.0;
    AugmentSearch search;
    int draws = 16;
    int key_points = 16;
    int other_images = 8;
    int patch = 10;
    CorrespondenceMode correspondence = CorrespondenceMode::oracle;
    int warmup_steps = 100;
  } augment;

  EncoderArch encoder;

  struct Train {
    double tau = 0.1;
    int negatives = 32;
    int batch = 64;
    int steps = 1500;
    double step_size = 0.05;
    NegativePairing pairing = NegativePairing::positive;
  } train;

  SynthSpec synth;  // synth.seed is split from `seed` at run time

  struct Eval {
    int template_subject = 0;
    int train_subjects = 7;
    std::vector<double> radii = default_radii;
  } eval;

  struct Paths {
    std::string corpus;  // empty: <out>/corpus
  } paths;

  void validate() const;
};

namespace detail {

/// Walks a JSON object, consuming known keys and rejecting the rest.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) fail(ErrorKind::config, where_ + " must be a JSON object");
  }

  ~StrictObject() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(ErrorKind::config, "unknown key '" + where_ + it.key() + "'");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected integer");
        if constexpr (std::is_unsigned_v<T>)
          if (v.get<long long>() < 0) throw std::invalid_argument("expected non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("expected string");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      fail(ErrorKind::config, "'" + where_ + key + "': " + e.what());
    }
  }

  template <typename E>
  void read_enum(const char* key, E& out, std::initializer_list<std::pair<const char*, E>> names) {
    std::string s;
    read(key, s);
    if (s.empty()) return;
    for (const auto& [name, value] : names)
      if (s == name) {
        out = value;
        return;
      }
    fail(ErrorKind::config, "'" + where_ + key + "': unsupported value '" + s + "'");
  }

  StrictObject child(const char* key) {
    seen_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return StrictObject(j_.contains(key) ? j_.at(key) : empty, where_ + key + ".");
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline const char* to_string(WeightScheme s) { return s == WeightScheme::exponential ? "exponential" : "piecewise"; }
inline const char* to_string(CorrespondenceMode m) { return m == CorrespondenceMode::oracle ? "oracle" : "encoder"; }
inline const char* to_string(NegativePairing p) { return p == NegativePairing::positive ? "positive" : "anchor"; }
inline const char* to_string(BackgroundKind b) { return b == BackgroundKind::flat ? "flat" : "gradient"; }

inline nlohmann::json to_json(const SynthSpec& s) {
  return {{"size", s.size},
          {"subjects", s.subjects},
          {"polygons", s.polygons},
          {"textured_polygons", s.textured_polygons},
          {"ellipses", s.ellipses},
          {"background", to_string(s.background)},
          {"background_level", s.background_level},
          {"gradient_amplitude", s.gradient_amplitude},
          {"noise_sigma", s.noise_sigma},
          {"rotation_deg", s.rotation_deg},
          {"scale", s.scale},
          {"translation", s.translation},
          {"gain_jitter", s.gain_jitter},
          {"offset_jitter", s.offset_jitter},
          {"margin", s.margin},
          {"supersample", s.supersample}};
}

inline void read_synth(detail::StrictObject o, SynthSpec& s) {
  o.read("size", s.size);
  o.read("subjects", s.subjects);
  o.read("polygons", s.polygons);
  o.read("textured_polygons", s.textured_polygons);
  o.read("ellipses", s.ellipses);
  o.read_enum("background", s.background, {{"flat", BackgroundKind::flat}, {"gradient", BackgroundKind::gradient}});
  o.read("background_level", s.background_level);
  o.read("gradient_amplitude", s.gradient_amplitude);
  o.read("noise_sigma", s.noise_sigma);
  o.read("rotation_deg", s.rotation_deg);
  o.read("scale", s.scale);
  o.read("translation", s.translation);
  o.read("gain_jitter", s.gain_jitter);
  o.read("offset_jitter", s.offset_jitter);
  o.read("margin", s.margin);
  o.read("supersample", s.supersample);
}

inline nlohmann::json to_json(const AugmentParams& a) { return {{"a_br", a.a_br}, {"a_ct", a.a_ct}}; }

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {
      {"seed", c.seed},
      {"workers", c.workers},
      {"imaging",
       {{"iie_patch", c.imaging.iie_patch},
        {"iie_bins", c.imaging.iie_bins},
        {"mi_bins", c.imaging.mi_bins},
        {"log_base", c.imaging.log_base}}},
      {"categories", {{"t_lm", c.categories.t_lm}, {"t_mh", c.categories.t_mh}}},
      {"weights", {{"scheme", to_string(c.weights.scheme)}, {"gamma", c.weights.gamma}, {"d", c.weights.d}}},
      {"augment",
       {{"adaptive", c.augment.adaptive},
        {"fixed", to_json(c.augment.fixed)},
        {"alpha_hat", c.augment.alpha_hat},
        {"a_br_max", c.augment.search.a_br_max},
        {"a_ct_max", c.augment.search.a_ct_max},
        {"grid_steps", c.augment.search.steps},
        {"refinements", c.augment.search.refinements},
        {"draws", c.augment.draws},
        {"key_points", c.augment.key_points},
        {"other_images", c.augment.other_images},
        {"patch", c.augment.patch},
        {"correspondence", to_string(c.augment.correspondence)},
        {"warmup_steps", c.augment.warmup_steps}}},
      {"encoder", arch_to_json(c.encoder)},
      {"train",
       {{"tau", c.train.tau},
        {"negatives", c.train.negatives},
        {"batch", c.train.batch},
        {"steps", c.train.steps},
        {"step_size", c.train.step_size},
        {"pairing", to_string(c.train.pairing)}}},
      {"synth", to_json(c.synth)},
      {"eval",
       {{"template", c.eval.template_subject}, {"train_subjects", c.eval.train_subjects}, {"radii", c.eval.radii}}},
      {"paths", {{"corpus", c.paths.corpus}}},
  };
}

inline void PipelineConfig::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::config, what);
  };
  check(imaging.iie_patch >= 1, "imaging.iie_patch must be positive");
  check(imaging.iie_bins >= 2 && imaging.mi_bins >= 2, "histograms need at least 2 bins");
  check(imaging.log_base > 0.0 && imaging.log_base != 1.0, "imaging.log_base must be positive and not 1");
  check(categories.t_lm >= 0.0 && categories.t_lm < categories.t_mh, "categories need 0 <= t_lm < t_mh");
  check(weights.gamma >= 0.0 && weights.d >= 0.0, "weights.gamma and weights.d must be non-negative");
  check(augment.alpha_hat > 0.0, "augment.alpha_hat must be positive");
  check(augment.draws >= 1 && augment.key_points >= 1 && augment.other_images >= 1, "augment counts must be positive");
  check(augment.patch >= 1 && augment.warmup_steps >= 0, "augment.patch must be positive");
  check(encoder.input_side >= 1 && encoder.embedding_dim >= 1, "encoder sizes must be positive");
  check(!eval.radii.empty(), "eval.radii must not be empty");
  check(std::is_sorted(eval.radii.begin(), eval.radii.end()), "eval.radii must be ascending");
  check(eval.template_subject >= 0 && eval.template_subject < eval.train_subjects, "eval.template must be a training subject");
  check(eval.train_subjects >= 2, "eval.train_subjects must be at least 2");
  check(eval.train_subjects < synth.subjects, "eval.train_subjects must leave at least one held-out subject");
  check(workers >= 1, "workers must be at least 1");
  try {
    augment.fixed.validate();
    augment.search.validate();
    synth.validate();
    TrainConfig tc;
    tc.tau = train.tau;
    tc.negatives = train.negatives;
    tc.batch = train.batch;
    tc.steps = train.steps;
    tc.step_size = train.step_size;
    tc.validate();
    for (int w : encoder.hidden) check(w >= 1, "encoder.hidden widths must be positive");
  } catch (const Error& e) {
    fail(ErrorKind::config, e.what());
  }
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  {
    detail::StrictObject root(j, "");
    root.read("seed", c.seed);
    root.read("workers", c.workers);
    {
      auto o = root.child("imaging");
      o.read("iie_patch", c.imaging.iie_patch);
      o.read("iie_bins", c.imaging.iie_bins);
      o.read("mi_bins", c.imaging.mi_bins);
      o.read("log_base", c.imaging.log_base);
    }
    {
      auto o = root.child("categories");
      o.read("t_lm", c.categories.t_lm);
      o.read("t_mh", c.categories.t_mh);
    }
    {
      auto o = root.child("weights");
      o.read_enum("scheme", c.weights.scheme,
                  {{"exponential", WeightScheme::exponential}, {"piecewise", WeightScheme::piecewise}});
      o.read("gamma", c.weights.gamma);
      o.read("d", c.weights.d);
    }
    {
      auto o = root.child("augment");
      o.read("adaptive", c.augment.adaptive);
      {
        auto f = o.child("fixed");
        f.read("a_br", c.augment.fixed.a_br);
        f.read("a_ct", c.augment.fixed.a_ct);
      }
      o.read("alpha_hat", c.augment.alpha_hat);
      o.read("a_br_max", c.augment.search.a_br_max);
      o.read("a_ct_max", c.augment.search.a_ct_max);
      o.read("grid_steps", c.augment.search.steps);
      o.read("refinements", c.augment.search.refinements);
      o.read("draws", c.augment.draws);
      o.read("key_points", c.augment.key_points);
      o.read("other_images", c.augment.other_images);
      o.read("patch", c.augment.patch);
      o.read_enum("correspondence", c.augment.correspondence,
                  {{"oracle", CorrespondenceMode::oracle}, {"encoder", CorrespondenceMode::encoder}});
      o.read("warmup_steps", c.augment.warmup_steps);
    }
    {
      auto o = root.child("encoder");
      o.read("input_side", c.encoder.input_side);
      o.read("hidden", c.encoder.hidden);
      o.read("embedding_dim", c.encoder.embedding_dim);
    }
    {
      auto o = root.child("train");
      o.read("tau", c.train.tau);
      o.read("negatives", c.train.negatives);
      o.read("batch", c.train.batch);
      o.read("steps", c.train.steps);
      o.read("step_size", c.train.step_size);
      o.read_enum("pairing", c.train.pairing,
                  {{"positive", NegativePairing::positive}, {"anchor", NegativePairing::anchor}});
    }
    read_synth(root.child("synth"), c.synth);
    {
      auto o = root.child("eval");
      o.read("template", c.eval.template_subject);
      o.read("train_subjects", c.eval.train_subjects);
      o.read("radii", c.eval.radii);
    }
    {
      auto o = root.child("paths");
      o.read("corpus", c.paths.corpus);
    }
  }
  c.validate();
  return c;
}

inline PipelineConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace pixinfo
