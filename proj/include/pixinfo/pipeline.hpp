#pragma once

// Batch orchestration. Each stage reads the artifacts of earlier stages from
// the output directory, writes its own artifacts atomically, and records a
// run manifest (config echo, seed, content hashes of inputs and outputs).
//
// Layout under <out>:
//   corpus/corpus.json, corpus/images/subject_NNN.pgm
//   maps/subject_NNN.{entropy,category,weights}.bin, maps/subject_NNN.entropy.png
//   aug/params_{low,medium,high}.json
//   model/encoder_f.ckpt, model/encoder_fprime.ckpt, model/train_report.csv
//   match/predictions.json
//   eval/match_report.json
//   manifests/<command>.json

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pixinfo/augment.hpp"
#include "pixinfo/config.hpp"
#include "pixinfo/encoder.hpp"
#include "pixinfo/error.hpp"
#include "pixinfo/files.hpp"
#include "pixinfo/image_io.hpp"
#include "pixinfo/infometrics.hpp"
#include "pixinfo/log.hpp"
#include "pixinfo/matching.hpp"
#include "pixinfo/raster_io.hpp"
#include "pixinfo/synthdata.hpp"
#include "pixinfo/train.hpp"

namespace pixinfo {

namespace fs = std::filesystem;

/// Root-seed split points, one per stage.
namespace stage {
inline constexpr std::uint64_t synth = 1;
inline constexpr std::uint64_t key_points = 2;
inline constexpr std::uint64_t augment = 3;
inline constexpr std::uint64_t warmup = 4;
inline constexpr std::uint64_t train = 5;
}  // namespace stage

/// Git blob id: SHA-1 over "blob <size>\0" followed by the content.
inline std::string git_blob_hash(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::string subject_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subject_%03zu", i);
  return buf;
}

struct Corpus {
  std::vector<std::string> names;
  std::vector<GrayImage> images;
  std::vector<LandmarkSet> landmarks;
  std::vector<std::optional<Affine2>> transforms;  // image 0 -> image i, when known

  std::size_t size() const noexcept { return images.size(); }
};

/// Everything one command invocation needs; stages record what they read and wrote.
class RunContext {
 public:
  RunContext(PipelineConfig cfg, fs::path out, Logger log = Logger::from_env())
      : cfg_(std::move(cfg)), out_(std::move(out)), log_(log) {}

  const PipelineConfig& config() const noexcept { return cfg_; }
  const fs::path& out() const noexcept { return out_; }
  const Logger& log() const noexcept { return log_; }

  fs::path corpus_dir() const { return cfg_.paths.corpus.empty() ? out_ / "corpus" : fs::path(cfg_.paths.corpus); }

  std::string read(const fs::path& path) {
    std::string bytes = read_file(path);
    inputs_[display(path)] = git_blob_hash(bytes);
    return bytes;
  }

  void write(const fs::path& rel, std::string_view bytes) {
    write_file_atomic(out_ / rel, bytes);
    outputs_[rel.generic_string()] = git_blob_hash(bytes);
  }

  /// Writes manifests/<command>.json and clears the record.
  void finish(const std::string& command) {
    nlohmann::json m = {{"command", command},
                        {"seed", cfg_.seed},
                        {"config", to_json(cfg_)},
                        {"inputs", inputs_},
                        {"outputs", outputs_}};
    write_file_atomic(out_ / "manifests" / (command + ".json"), m.dump(2) + "\n");
    inputs_.clear();
    outputs_.clear();
  }

 private:
  std::string display(const fs::path& p) const {
    const auto rel = p.lexically_relative(out_);
    return (!rel.empty() && *rel.begin() != "..") ? rel.generic_string() : p.generic_string();
  }

  PipelineConfig cfg_;
  fs::path out_;
  Logger log_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

inline nlohmann::json to_json(const Affine2& a) { return {a.a00, a.a01, a.a10, a.a11, a.t0, a.t1}; }

inline Affine2 affine_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 6) fail(ErrorKind::data, "affine must be [a00, a01, a10, a11, t0, t1]");
  return {j[0], j[1], j[2], j[3], j[4], j[5]};
}

inline Corpus load_corpus(RunContext& ctx) {
  const fs::path dir = ctx.corpus_dir();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(ctx.read(dir / "corpus.json"));
    Corpus c;
    const double spacing = manifest.value("spacing", 1.0);
    for (const auto& s : manifest.at("subjects")) {
      c.names.push_back(s.at("name").get<std::string>());
      GrayImage img = read_image(dir / s.at("image").get<std::string>());
      ctx.read(dir / s.at("image").get<std::string>());
      img.set_spacing(spacing);
      c.images.push_back(std::move(img));
      c.landmarks.push_back(landmarks_from_json(s.at("landmarks"), spacing));
      c.transforms.push_back(s.contains("affine") ? std::optional(affine_from_json(s.at("affine"))) : std::nullopt);
    }
    if (c.size() < 2) fail(ErrorKind::data, "corpus needs at least two subjects");
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, "corpus manifest: " + std::string(e.what()));
  }
}

inline int train_subject_count(const RunContext& ctx, const Corpus& c) {
  const int n = ctx.config().eval.train_subjects;
  if (n >= static_cast<int>(c.size())) fail(ErrorKind::config, "eval.train_subjects leaves no held-out subjects");
  return n;
}

// ---- synth ---------------------------------------------------------------

inline SynthCorpus run_synth(RunContext& ctx) {
  SynthSpec spec = ctx.config().synth;
  spec.seed = derive_seed(ctx.config().seed, stage::synth);
  const SynthCorpus corpus = generate_corpus(spec);
  nlohmann::json subjects = nlohmann::json::array();
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    const std::string image = "images/" + subject_name(i) + ".pgm";
    ctx.write(fs::path("corpus") / image, encode_pgm(corpus.images[i]));
    subjects.push_back({{"name", subject_name(i)},
                        {"image", image},
                        {"landmarks", landmarks_to_json(corpus.landmarks[i])},
                        {"affine", to_json(corpus.subjects[i].transform)},
                        {"gain", corpus.subjects[i].gain},
                        {"offset", corpus.subjects[i].offset}});
  }
  nlohmann::json manifest = {{"spacing", 1.0}, {"spec", to_json(ctx.config().synth)}, {"subjects", subjects}};
  ctx.write("corpus/corpus.json", manifest.dump(1) + "\n");
  ctx.log().info("synth: wrote " + std::to_string(corpus.images.size()) + " subjects");
  ctx.finish("synth");
  return corpus;
}

// ---- maps ----------------------------------------------------------------

inline fs::path map_path(std::size_t i, const char* kind) { return fs::path("maps") / (subject_name(i) + "." + kind + ".bin"); }

inline void run_entropy_map(RunContext& ctx) {
  const Corpus corpus = load_corpus(ctx);
  const auto& im = ctx.config().imaging;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const EntropyMap em = entropy_map(corpus.images[i], im.iie_patch, im.iie_bins, im.log_base, ctx.config().workers);
    ctx.write(map_path(i, "entropy"), encode_entropy_map(em));
    ctx.write(fs::path("maps") / (subject_name(i) + ".entropy.png"), heatmap_png(em.width, em.height, em.values));
  }
  ctx.finish("entropy-map");
}

inline EntropyMap load_entropy_map(RunContext& ctx, std::size_t i) {
  return decode_entropy_map(ctx.read(ctx.out() / map_path(i, "entropy")));
}

inline std::size_t count_maps(const RunContext& ctx) {
  std::size_t n = 0;
  while (fs::exists(ctx.out() / map_path(n, "entropy"))) ++n;
  if (n == 0) fail(ErrorKind::data, "no entropy maps under " + (ctx.out() / "maps").string() + "; run entropy-map first");
  return n;
}

inline void run_categorize(RunContext& ctx) {
  const auto& c = ctx.config().categories;
  const std::size_t n = count_maps(ctx);
  for (std::size_t i = 0; i < n; ++i)
    ctx.write(map_path(i, "category"), encode_category_map(categorize(load_entropy_map(ctx, i), c.t_lm, c.t_mh)));
  ctx.finish("categorize");
}

inline WeightMap build_weight_map(const PipelineConfig& cfg, const EntropyMap& em) {
  return cfg.weights.scheme == WeightScheme::exponential ? exp_weight_map(em, cfg.weights.gamma)
                                                         : piecewise_weight_map(em, cfg.weights.d);
}

inline void run_weights(RunContext& ctx) {
  const std::size_t n = count_maps(ctx);
  for (std::size_t i = 0; i < n; ++i)
    ctx.write(map_path(i, "weights"), encode_weight_map(build_weight_map(ctx.config(), load_entropy_map(ctx, i))));
  ctx.finish("weights");
}

// ---- estimate-aug --------------------------------------------------------

struct GroupEstimate {
  Category group = Category::invalid;
  AugmentParams params;
  MiTarget target;
  AugEstimate estimate;
  std::vector<Pixel> key_points;
  bool fallback = false;  // no usable key points; fixed parameters used
};

inline nlohmann::json to_json(const GroupEstimate& g, const PipelineConfig& cfg) {
  nlohmann::json kp = nlohmann::json::array();
  for (Pixel p : g.key_points) kp.push_back({p.row, p.col});
  return {{"group", to_string(g.group)},
          {"a_br", g.params.a_br},
          {"a_ct", g.params.a_ct},
          {"t", g.estimate.t},
          {"target_mi", g.target.value},
          {"achieved_mi", g.estimate.achieved_mi},
          {"alpha_hat", g.target.alpha_hat},
          {"n_images", g.target.n_images},
          {"k_points", g.target.k_points},
          {"unreachable", g.estimate.unreachable},
          {"fallback", g.fallback},
          {"key_points", kp},
          {"config", to_json(cfg)}};
}

inline TrainConfig make_train_config(const PipelineConfig& cfg, const GroupAugment& aug, std::uint64_t seed, int steps) {
  TrainConfig tc;
  tc.tau = cfg.train.tau;
  tc.negatives = cfg.train.negatives;
  tc.batch = cfg.train.batch;
  tc.steps = steps;
  tc.step_size = cfg.train.step_size;
  tc.seed = seed;
  tc.augment = aug;
  tc.pairing = cfg.train.pairing;
  tc.arch = cfg.encoder;
  return tc;
}

/// Pipeline-level estimation over in-memory data: key points per group on
/// the first training image, target MI across the next `other_images`
/// training images, then the ray search over the key-point patch pool.
inline std::array<GroupEstimate, 3> estimate_group_params(const PipelineConfig& cfg, const Corpus& corpus,
                                                          int train_subjects, std::span<const PixelMaps> maps,
                                                          const Logger& log = Logger()) {
  const auto& ac = cfg.augment;
  const int n_other = std::min(ac.other_images, train_subjects - 1);
  std::vector<GrayImage> images(corpus.images.begin(), corpus.images.begin() + n_other + 1);
  const int margin = std::max(ac.patch, ac.correspondence == CorrespondenceMode::encoder ? cfg.encoder.input_side : 0);

  Correspondence corr;
  std::optional<Encoder> warm;
  std::vector<FeatureField> fields;
  if (ac.correspondence == CorrespondenceMode::oracle) {
    for (int i = 1; i <= n_other; ++i)
      if (!corpus.transforms[i])
        fail(ErrorKind::data, "oracle correspondence needs affine ground truth for " + corpus.names[i]);
    corr = [&corpus](Pixel p, std::size_t i) -> std::optional<Pixel> {
      const Pixel q = corpus.transforms[i]->apply(to_point(p)).rounded();
      if (!corpus.images[i].contains(q)) return std::nullopt;
      return q;
    };
  } else {
    // Warmup encoder: uniform sampling, fixed augmentation.
    std::vector<PixelMaps> uniform(maps.begin(), maps.begin() + train_subjects);
    for (auto& m : uniform) {
      for (std::size_t k = 0; k < m.weights.weights.size(); ++k)
        m.weights.weights[k] = m.categories.labels[k] == Category::invalid ? 0.0 : 1.0;
      m.weights.recompute_total();
    }
    const TrainConfig tc = make_train_config(cfg, GroupAugment::shared(ac.fixed), derive_seed(cfg.seed, stage::warmup),
                                             ac.warmup_steps);
    warm = train(std::span(corpus.images.data(), train_subjects), tc, uniform).encoder;
    for (int i = 1; i <= n_other; ++i) fields.push_back(feature_field(*warm, images[i], cfg.workers));
    corr = [&](Pixel p, std::size_t i) -> std::optional<Pixel> {
      return argmax_similarity(encode(*warm, extract_patch(images[0], p, warm->input_side())), fields[i - 1]);
    };
  }

  std::array<GroupEstimate, 3> out;
  for (std::size_t g = 0; g < 3; ++g) {
    const Category group = info_groups[g];
    GroupEstimate& ge = out[g];
    ge.group = group;
    std::vector<Pixel> candidates;
    const CategoryMap& cm = maps[0].categories;
    for (int r = 0; r < cm.height; ++r)
      for (int c = 0; c < cm.width; ++c) {
        const Pixel p{r, c};
        if (cm.at(p) != group || !in_valid_region(images[0], p, margin)) continue;
        bool ok = true;
        if (ac.correspondence == CorrespondenceMode::oracle)
          for (int i = 1; i <= n_other && ok; ++i) {
            const auto q = corr(p, i);
            ok = q && in_valid_region(images[i], *q, ac.patch);
          }
        if (ok) candidates.push_back(p);
      }
    // Partial Fisher-Yates; the first key_points entries are the draw.
    Rng rng(derive_seed(cfg.seed, {stage::key_points, g}));
    const std::size_t k = std::min<std::size_t>(ac.key_points, candidates.size());
    for (std::size_t i = 0; i < k; ++i) std::swap(candidates[i], candidates[i + rng.below(candidates.size() - i)]);
    ge.key_points.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
    if (ge.key_points.empty()) {
      log.warn(std::string("estimate-aug: no key points for group ") + to_string(group) + "; using fixed parameters");
      ge.params = ac.fixed;
      ge.fallback = true;
      ge.target.group = group;
      ge.target.alpha_hat = ac.alpha_hat;
      continue;
    }
    ge.target = estimate_target_mi(images, ge.key_points, corr, ac.patch, cfg.imaging.mi_bins, ac.alpha_hat, group,
                                   cfg.imaging.log_base);
    std::vector<Patch> pool;
    for (Pixel p : ge.key_points) pool.push_back(extract_patch(images[0], p, ac.patch));
    ge.estimate = estimate_aug_params(pool, ge.target, ac.search, ac.draws, derive_seed(cfg.seed, {stage::augment, g}),
                                      cfg.imaging.mi_bins, cfg.imaging.log_base, cfg.workers);
    ge.params = ge.estimate.params;
    log.info(std::string("estimate-aug: ") + to_string(group) + " t=" + std::to_string(ge.estimate.t) +
             " target=" + std::to_string(ge.target.value));
  }
  return out;
}

inline std::vector<PixelMaps> load_pixel_maps(RunContext& ctx, int count) {
  std::vector<PixelMaps> maps;
  for (int i = 0; i < count; ++i) {
    const fs::path w = ctx.out() / map_path(i, "weights"), c = ctx.out() / map_path(i, "category");
    if (!fs::exists(w) || !fs::exists(c))
      fail(ErrorKind::data, "missing maps for " + subject_name(i) + "; run categorize and weights first");
    maps.push_back({decode_weight_map(ctx.read(w)), decode_category_map(ctx.read(c))});
  }
  return maps;
}

inline std::array<GroupEstimate, 3> run_estimate_aug(RunContext& ctx) {
  const Corpus corpus = load_corpus(ctx);
  const int n_train = train_subject_count(ctx, corpus);
  const auto maps = load_pixel_maps(ctx, n_train);
  const auto est = estimate_group_params(ctx.config(), corpus, n_train, maps, ctx.log());
  for (const auto& g : est)
    ctx.write(fs::path("aug") / (std::string("params_") + to_string(g.group) + ".json"),
              to_json(g, ctx.config()).dump(2) + "\n");
  ctx.finish("estimate-aug");
  return est;
}

// ---- train ---------------------------------------------------------------

inline AugmentParams read_group_params(RunContext& ctx, Category g) {
  const fs::path p = ctx.out() / "aug" / (std::string("params_") + to_string(g) + ".json");
  if (!fs::exists(p)) fail(ErrorKind::data, "missing " + p.string() + "; run estimate-aug first");
  try {
    const auto j = nlohmann::json::parse(ctx.read(p));
    return {j.at("a_br").get<double>(), j.at("a_ct").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, p.string() + ": " + e.what());
  }
}

inline TrainReport run_train(RunContext& ctx) {
  const PipelineConfig& cfg = ctx.config();
  const Corpus corpus = load_corpus(ctx);
  const int n_train = train_subject_count(ctx, corpus);
  const auto maps = load_pixel_maps(ctx, n_train);
  GroupAugment aug = GroupAugment::shared(cfg.augment.fixed);
  if (cfg.augment.adaptive)
    aug = {read_group_params(ctx, Category::low), read_group_params(ctx, Category::medium),
           read_group_params(ctx, Category::high)};
  const TrainConfig tc = make_train_config(cfg, aug, derive_seed(cfg.seed, stage::train), cfg.train.steps);
  TrainReport report = train(std::span(corpus.images.data(), n_train), tc, maps);
  const std::string hash = git_blob_hash(to_json(cfg).dump());
  ctx.write("model/encoder_f.ckpt", encode_checkpoint(report.encoder, hash, tc.steps));
  ctx.write("model/encoder_fprime.ckpt", encode_checkpoint(report.positive_encoder, hash, tc.steps));
  ctx.write("model/train_report.csv", report_csv(report));
  if (!report.steps.empty())
    ctx.log().info("train: final loss " + std::to_string(report.steps.back().total));
  ctx.finish("train");
  return report;
}

// ---- match / eval --------------------------------------------------------

inline void run_match(RunContext& ctx) {
  const PipelineConfig& cfg = ctx.config();
  const Corpus corpus = load_corpus(ctx);
  const int n_train = train_subject_count(ctx, corpus);
  const Encoder enc = decode_checkpoint(ctx.read(ctx.out() / "model" / "encoder_f.ckpt"));
  const std::size_t t = static_cast<std::size_t>(cfg.eval.template_subject);
  nlohmann::json targets = nlohmann::json::array();
  for (std::size_t i = static_cast<std::size_t>(n_train); i < corpus.size(); ++i) {
    const LandmarkSet pred = match_landmarks(corpus.images[t], corpus.landmarks[t], corpus.images[i], enc, cfg.workers);
    targets.push_back({{"subject", corpus.names[i]}, {"index", i}, {"predicted", landmarks_to_json(pred)}});
  }
  nlohmann::json out = {{"template", corpus.names[t]}, {"targets", targets}};
  ctx.write("match/predictions.json", out.dump(1) + "\n");
  ctx.finish("match");
}

inline nlohmann::json to_json(const MatchReport& r) {
  nlohmann::json sdr = nlohmann::json::object();
  for (std::size_t i = 0; i < r.radii.size(); ++i) {
    char key[32];
    std::snprintf(key, sizeof key, "%g", r.radii[i]);
    sdr[key] = r.sdr[i];
  }
  nlohmann::json pred = nlohmann::json::array();
  for (const auto& p : r.predicted) pred.push_back({p.row, p.col});
  return {{"mre", r.mre}, {"sdr", sdr}, {"radii", r.radii}, {"radial_errors", r.radial_errors}, {"predicted", pred}};
}

/// MRE / SDR table in the usual landmark-detection layout.
inline std::string format_report_table(const MatchReport& r, const std::string& label = "held-out") {
  std::string out = "                MRE (mm)";
  char buf[64];
  for (double rad : r.radii) {
    std::snprintf(buf, sizeof buf, "  SDR %gmm", rad);
    out += buf;
  }
  out += "\n";
  std::snprintf(buf, sizeof buf, "%-16s%8.3f", label.c_str(), r.mre);
  out += buf;
  for (double s : r.sdr) {
    std::snprintf(buf, sizeof buf, "  %8.2f%%", 100.0 * s);
    out += buf;
  }
  return out + "\n";
}

inline MatchReport run_eval(RunContext& ctx) {
  const PipelineConfig& cfg = ctx.config();
  const Corpus corpus = load_corpus(ctx);
  const fs::path p = ctx.out() / "match" / "predictions.json";
  if (!fs::exists(p)) fail(ErrorKind::data, "missing " + p.string() + "; run match first");
  std::vector<MatchReport> per;
  nlohmann::json per_json = nlohmann::json::array();
  try {
    const auto preds = nlohmann::json::parse(ctx.read(p));
    for (const auto& t : preds.at("targets")) {
      const std::size_t i = t.at("index").get<std::size_t>();
      if (i >= corpus.size()) fail(ErrorKind::data, "prediction refers to unknown subject");
      const LandmarkSet pred = landmarks_from_json(t.at("predicted"), corpus.landmarks[i].spacing);
      per.push_back(compute_metrics(pred, corpus.landmarks[i], cfg.eval.radii));
      nlohmann::json j = to_json(per.back());
      j["subject"] = corpus.names[i];
      per_json.push_back(j);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, p.string() + ": " + e.what());
  }
  const MatchReport merged = merge_reports(per);
  nlohmann::json out = to_json(merged);
  out["per_target"] = per_json;
  ctx.write("eval/match_report.json", out.dump(1) + "\n");
  ctx.finish("eval");
  return merged;
}

inline MatchReport run_pipeline(RunContext& ctx) {
  run_synth(ctx);
  run_entropy_map(ctx);
  run_categorize(ctx);
  run_weights(ctx);
  if (ctx.config().augment.adaptive) run_estimate_aug(ctx);
  run_train(ctx);
  run_match(ctx);
  return run_eval(ctx);
}

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::numerical: return 4;
    default: return 3;
  }
}

}  // namespace pixinfo
