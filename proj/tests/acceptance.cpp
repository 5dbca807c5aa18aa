// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Usage: acceptance [criterion...]   (no arguments runs all twelve)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "pixinfo/pixinfo.hpp"
#include "support.hpp"

using namespace pixinfo;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Patch two_value_patch() {
  Patch p{10, {5, 5}, std::vector<double>(100, 0.1)};
  for (int i = 50; i < 100; ++i) p.data[i] = 0.9;
  return p;
}

// 1 --------------------------------------------------------------------------
Outcome entropy_analytics() {
  double worst = 0.0;
  for (double v : {0.0, 0.37, 1.0}) worst = std::max(worst, std::abs(iie(Patch{10, {5, 5}, std::vector<double>(100, v)}, 256)));
  worst = std::max(worst, std::abs(iie(two_value_patch(), 256) - std::log(2.0)));
  Patch distinct{10, {5, 5}, std::vector<double>(100)};
  for (int i = 0; i < 100; ++i) distinct.data[i] = (2 * i + 0.5) / 256.0;  // bins 0, 2, ..., 198
  worst = std::max(worst, std::abs(iie(distinct, 256) - std::log(100.0)));
  return {worst <= 1e-10, fmt("max abs error %.2e (tol 1e-10)", worst)};
}

// 2 --------------------------------------------------------------------------
Outcome mi_analytics() {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> noise(0.0, 0.1);
  double asym = 0.0, self = 0.0, min_mi = INFINITY, excess = -INFINITY;
  for (int i = 0; i < 10000; ++i) {
    const Patch p = oracle::random_patch(gen, 10);
    Patch q = oracle::random_patch(gen, 10);
    if (i % 2) {  // half the pairs are dependent
      for (std::size_t j = 0; j < q.data.size(); ++j) q.data[j] = std::clamp(p.data[j] + noise(gen), 0.0, 1.0);
    }
    const double pq = mutual_information(p, q, 32), qp = mutual_information(q, p, 32);
    asym = std::max(asym, std::abs(pq - qp));
    self = std::max(self, std::abs(mutual_information(p, p, 32) - iie(p, 32)));
    min_mi = std::min(min_mi, pq);
    excess = std::max(excess, pq - std::min(iie(p, 32), iie(q, 32)));
  }
  const bool ok = asym <= 1e-12 && self <= 1e-10 && min_mi >= 0.0 && excess <= 1e-9;
  return {ok, fmt("asymmetry %.1e, |self-MI - IIE| %.1e, min MI %.2e, max(MI - min H) %.2e", asym, self, min_mi, excess)};
}

// 3 --------------------------------------------------------------------------
// Chi-square over 100 regions of consecutive positive-weight pixels.
double sampling_chi_square(const WeightMap& wm, int draws, std::uint64_t seed, int regions, double* critical) {
  std::vector<int> region(wm.weights.size(), -1);
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < wm.weights.size(); ++i)
    if (wm.weights[i] > 0) support.push_back(i);
  std::vector<double> expected(regions, 0.0), observed(regions, 0.0);
  double total = 0.0;
  for (std::size_t i : support) total += wm.weights[i];
  for (std::size_t k = 0; k < support.size(); ++k) {
    region[support[k]] = static_cast<int>(k * regions / support.size());
    expected[region[support[k]]] += draws * wm.weights[support[k]] / total;
  }
  for (Pixel p : sample_pixels(wm, draws, seed)) {
    const int r = region[static_cast<std::size_t>(p.row) * wm.width + p.col];
    if (r < 0) return INFINITY;  // drew a zero-weight pixel
    observed[r] += 1;
  }
  *critical = oracle::chi_square_critical(regions - 1, 0.01);
  return oracle::chi_square(observed, expected);
}

Outcome sampling_fidelity() {
  SynthSpec spec;
  spec.seed = 3;
  const auto em = entropy_map(generate_corpus(spec).images[0], 10, 256);
  const std::pair<const char*, WeightMap> maps[] = {
      {"uniform", exp_weight_map(em, 0.0)}, {"exp 0.3", exp_weight_map(em, 0.3)}, {"piecewise 1", piecewise_weight_map(em, 1.0)}};
  bool ok = true;
  std::string detail;
  std::uint64_t seed = 100;
  for (const auto& [name, wm] : maps) {
    double crit = 0.0;
    const double x2 = sampling_chi_square(wm, 100000, seed++, 100, &crit);
    ok = ok && x2 < crit;
    detail += fmt("%s X2=%.1f ", name, x2);
  }
  return {ok, detail + fmt("(critical %.1f at alpha 0.01, 99 dof)", oracle::chi_square_critical(99, 0.01))};
}

// 4 --------------------------------------------------------------------------
Outcome gradient_correctness() {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<int> side(2, 5), width(3, 12), dim(2, 8), n(3, 8), layers(1, 2);
  std::uniform_real_distribution<double> tau(0.1, 1.0);
  double worst = 0.0;
  for (int c = 0; c < 10; ++c) {
    const int s = side(gen);
    std::vector<int> hidden(layers(gen));
    for (int& h : hidden) h = width(gen);
    const EncoderArch arch{s, hidden, dim(gen)};
    const Encoder f(arch, 10 + c), fp(arch, 100 + c);
    ContrastiveBatch batch;
    const int b = n(gen);
    batch.negatives = std::max(1, b - 1 - c % 3);
    for (int i = 0; i < b; ++i) {
      batch.anchors.push_back(oracle::random_patch(gen, s));
      batch.positives.push_back(oracle::random_patch(gen, s));
    }
    const auto pairing = c % 2 ? NegativePairing::anchor : NegativePairing::positive;
    worst = std::max(worst, loss_gradient_check(f, fp, batch, tau(gen), 1e-6, 50, c, pairing).max_relative_error);
  }
  return {worst <= 1e-4, fmt("max relative error %.2e over 10 configurations (tol 1e-4)", worst)};
}

// 5 --------------------------------------------------------------------------
Outcome estimator_identity_and_recovery() {
  std::mt19937_64 gen(5);
  std::vector<Patch> pool;
  for (int i = 0; i < 12; ++i) pool.push_back(oracle::random_patch(gen, 10));
  const AugmentSearch search;
  double identity_mi = 0.0;
  for (const auto& p : pool) identity_mi += iie(p, 32) / pool.size();
  const AugEstimate id = estimate_aug_params(pool, MiTarget{identity_mi}, search, 16, 9);
  const double m_star = pool_expected_mi(pool, search, 0.5, 1024, 32, 4242);
  const AugEstimate planted = estimate_aug_params(pool, MiTarget{m_star}, search, 16, 31);
  const bool ok = !id.unreachable && id.t <= 1.0 / search.steps && std::abs(planted.t - 0.5) <= 0.1;
  return {ok, fmt("identity t=%.4f (tol %.2f), planted t=%.4f (target 0.5 +/- 0.1)", id.t, 1.0 / search.steps, planted.t)};
}

// 6 --------------------------------------------------------------------------
Outcome mi_monotonicity() {
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const AugmentSearch search;
  const double ts[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  const int draws = 64;
  int violations = 0, beyond = 0;
  for (int i = 0; i < 50; ++i) {
    // Alternate noise patches and smooth ramps with noise.
    Patch p = oracle::random_patch(gen, 10);
    if (i % 2) {
      const double a = u(gen), b = u(gen);
      for (int k = 0; k < 100; ++k) p.data[k] = std::clamp(0.2 + 0.3 * a * (k / 10) / 9.0 + 0.3 * b * (k % 10) / 9.0 + 0.05 * p.data[k], 0.0, 1.0);
    }
    double prev_mean = 0.0, prev_se = 0.0;
    for (int j = 0; j < 5; ++j) {
      const AugmentParams a{ts[j] * search.a_br_max, ts[j] * search.a_ct_max};
      double s = 0.0, s2 = 0.0;
      for (int d = 0; d < draws; ++d) {
        const double m = mutual_information(p, apply_photometric(p, a, derive_seed(600 + i, d)), 32);
        s += m;
        s2 += m * m;
      }
      const double mean = s / draws, se = std::sqrt(std::max(0.0, s2 / draws - mean * mean) / (draws - 1));
      if (j > 0 && mean > prev_mean) {
        ++violations;
        if (mean - prev_mean > 2.0 * std::hypot(se, prev_se)) ++beyond;
      }
      prev_mean = mean;
      prev_se = se;
    }
  }
  return {beyond == 0, fmt("%d increases over 200 steps, %d beyond 2 standard errors", violations, beyond)};
}

// 7 --------------------------------------------------------------------------
Corpus corpus_from(const SynthCorpus& sc) {
  Corpus c;
  for (std::size_t i = 0; i < sc.images.size(); ++i) {
    c.names.push_back(subject_name(i));
    c.images.push_back(sc.images[i]);
    c.landmarks.push_back(sc.landmarks[i]);
    c.transforms.push_back(sc.subjects[i].transform);
  }
  return c;
}

Outcome group_ordering() {
  double t[3] = {0, 0, 0};
  const int seeds = 5;
  for (int s = 0; s < seeds; ++s) {
    PipelineConfig cfg;
    cfg.seed = 100 + s;
    SynthSpec spec = cfg.synth;
    spec.seed = derive_seed(cfg.seed, stage::synth);
    const Corpus c = corpus_from(generate_corpus(spec));
    std::vector<PixelMaps> maps;
    for (int i = 0; i < cfg.eval.train_subjects; ++i) {
      const auto em = entropy_map(c.images[i], cfg.imaging.iie_patch, cfg.imaging.iie_bins);
      maps.push_back({build_weight_map(cfg, em), categorize(em, cfg.categories.t_lm, cfg.categories.t_mh)});
    }
    const auto est = estimate_group_params(cfg, c, cfg.eval.train_subjects, maps, Logger(LogLevel::quiet));
    for (int g = 0; g < 3; ++g) t[g] += est[g].estimate.t / seeds;
  }
  return {t[2] <= t[0], fmt("mean t over seeds 100-104: low %.3f, medium %.3f, high %.3f (need high <= low)", t[0], t[1], t[2])};
}

// 8, 9 -----------------------------------------------------------------------
struct Ablation {
  static constexpr const char* names[4] = {"baseline", "entr", "aug", "entr+aug"};
  double mre[3][4];
};

const Ablation& ablation() {
  static const Ablation result = [] {
    Ablation a{};
    for (int s = 0; s < 3; ++s)
      for (int v = 0; v < 4; ++v) {
        PipelineConfig cfg;
        cfg.seed = 1 + s;  // shared by all four variants
        cfg.weights.gamma = (v & 1) ? 0.3 : 0.0;
        cfg.augment.adaptive = (v & 2) != 0;
        oracle::TempDir dir("ablation");
        RunContext ctx(cfg, dir.path, Logger(LogLevel::quiet));
        a.mre[s][v] = run_pipeline(ctx).mre;
      }
    return a;
  }();
  return result;
}

double mean_mre(const Ablation& a, int v) { return (a.mre[0][v] + a.mre[1][v] + a.mre[2][v]) / 3.0; }

Outcome end_to_end() {
  const Ablation& a = ablation();
  std::string per;
  for (int s = 0; s < 3; ++s)
    per += fmt("seed %d: %s %.3f / %s %.3f; ", s + 1, Ablation::names[0], a.mre[s][0], Ablation::names[3], a.mre[s][3]);
  const double ratio = mean_mre(a, 3) / mean_mre(a, 0);
  return {ratio <= 0.95, per + fmt("mean ratio %.3f (need <= 0.95)", ratio)};
}

Outcome ablation_consistency() {
  const Ablation& a = ablation();
  int combined_best = 0;
  for (int s = 0; s < 3; ++s) {
    int best = 0;
    for (int v = 1; v < 4; ++v)
      if (a.mre[s][v] < a.mre[s][best]) best = v;
    combined_best += best == 3;
  }
  const double base = mean_mre(a, 0), entr = mean_mre(a, 1), aug = mean_mre(a, 2), both = mean_mre(a, 3);
  const bool ok = entr < base && aug < base && combined_best >= 2;
  return {ok, fmt("mean MRE baseline %.3f, entr %.3f, aug %.3f, entr+aug %.3f; combined best in %d of 3 seeds", base, entr,
                  aug, both, combined_best)};
}

// 10 -------------------------------------------------------------------------
Outcome patch_size_effect() {
  const int n = 320;
  std::mt19937_64 gen(10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // 12-pixel cells, each with its own level and noise amplitude (flat to fully noisy).
  const int cell = 12, cells = (n + cell - 1) / cell;
  std::vector<double> level(cells * cells), amp(cells * cells);
  for (int i = 0; i < cells * cells; ++i) level[i] = 0.2 + 0.6 * u(gen), amp[i] = (i % 3 == 0) ? 0.0 : 0.4 * u(gen);
  std::vector<double> d(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const int i = (r / cell) * cells + c / cell;
      d[static_cast<std::size_t>(r) * n + c] = std::clamp(level[i] + amp[i] * (u(gen) - 0.5), 0.0, 1.0);
    }
  const GrayImage img(n, n, d);
  double var[3];
  const int ks[3] = {10, 32, 128};
  for (int i = 0; i < 3; ++i) {
    const auto em = entropy_map(img, ks[i], 256);
    double s = 0.0, s2 = 0.0;
    int m = 0;
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (em.valid({r, c})) s += em.at(r, c), s2 += em.at(r, c) * em.at(r, c), ++m;
    var[i] = (s2 - s * s / m) / (m - 1);
  }
  return {var[0] > var[1] && var[1] > var[2], fmt("IIE variance k=10 %.4f, k=32 %.4f, k=128 %.4f", var[0], var[1], var[2])};
}

// 11 -------------------------------------------------------------------------
Outcome metrics() {
  auto set = [](std::vector<Point2> p) { return LandmarkSet{std::move(p), 1.0}; };
  bool ok = true;
  const auto exact = compute_metrics(set({{10, 10}, {20, 30}}), set({{10, 10}, {20, 30}}));
  ok = ok && exact.mre == 0.0 && exact.sdr == std::vector<double>(exact.sdr.size(), 1.0);
  const auto off3 = compute_metrics(set({{13, 10}}), set({{10, 10}}));
  ok = ok && off3.mre == 3.0 && off3.sdr[0] == 0.0 && off3.sdr[2] == 1.0;
  const auto two = compute_metrics(set({{1, 0}, {0, 5}}), set({{0, 0}, {0, 0}}));
  ok = ok && two.mre == 3.0 && two.sdr[0] == 0.5 && two.sdr[3] == 0.5;

  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 8.0);
  int non_monotone = 0;
  for (int t = 0; t < 1000; ++t) {
    LandmarkSet p, q;
    for (int i = 0; i < 12; ++i) p.points.push_back({u(gen), u(gen)}), q.points.push_back({u(gen), u(gen)});
    const auto r = compute_metrics(p, q);
    for (std::size_t i = 1; i < r.sdr.size(); ++i) non_monotone += r.sdr[i] < r.sdr[i - 1];
  }
  return {ok && non_monotone == 0, fmt("hand cases %s; %d non-monotone SDR pairs over 1000 reports", ok ? "exact" : "WRONG", non_monotone)};
}

// 12 -------------------------------------------------------------------------
std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  return out;
}

Outcome determinism() {
  oracle::TempDir a("det_a"), b("det_b");
  RunContext ca(PipelineConfig{}, a.path, Logger(LogLevel::quiet)), cb(PipelineConfig{}, b.path, Logger(LogLevel::quiet));
  run_pipeline(ca);
  run_pipeline(cb);
  const auto ta = tree_bytes(a.path), tb = tree_bytes(b.path);
  int differ = ta.size() == tb.size() ? 0 : 1;
  for (const auto& [name, bytes] : ta) differ += !tb.count(name) || tb.at(name) != bytes;
  return {differ == 0, fmt("%zu artifacts, %d differ", ta.size(), differ)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const Criterion all[] = {
      {1, "entropy analytics", 1, entropy_analytics},
      {2, "MI analytics", 30, mi_analytics},
      {3, "sampling fidelity", 30, sampling_fidelity},
      {4, "gradient correctness", 60, gradient_correctness},
      {5, "estimator identity and recovery", 300, estimator_identity_and_recovery},
      {6, "MI monotonicity", 300, mi_monotonicity},
      {7, "group-intensity ordering", 600, group_ordering},
      {8, "end-to-end directional result", 1200, end_to_end},
      {9, "ablation consistency", 0, ablation_consistency},
      {10, "patch-size effect", 60, patch_size_effect},
      {11, "metrics", 0, metrics},
      {12, "determinism", 0, determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s == 0 || secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::string timing = fmt("%.2fs", secs);
    if (c.limit_s > 0) timing += fmt(" < %.0fs%s", c.limit_s, in_time ? "" : " EXCEEDED");
    std::printf("criterion %2d %s: %s [%s] %s\n", c.id, pass ? "PASS" : "FAIL", c.name, timing.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
