#include <gtest/gtest.h>

#include <random>

#include "pixinfo/infometrics.hpp"
#include "pixinfo/synthdata.hpp"

using namespace pixinfo;

namespace {

bool same_pixels(const GrayImage& a, const GrayImage& b) {
  return std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
}

}  // namespace

TEST(Synth, ZeroVariationGivesIdenticalSubjects) {
  SynthSpec spec;
  spec.rotation_deg = 0;
  spec.scale = 0;
  spec.translation = 0;
  spec.gain_jitter = 0;
  spec.offset_jitter = 0;
  spec.noise_sigma = 0;
  spec.subjects = 4;
  const auto c = generate_corpus(spec);
  for (std::size_t i = 1; i < c.images.size(); ++i) {
    EXPECT_TRUE(same_pixels(c.images[i], c.images[0]));
    EXPECT_TRUE(c.subjects[i].transform.is_identity());
    EXPECT_EQ(c.correspond({20, 30}, i), (Pixel{20, 30}));
  }
}

TEST(Synth, SameSeedIsBitwiseIdentical) {
  SynthSpec spec;
  spec.seed = 99;
  const auto a = generate_corpus(spec), b = generate_corpus(spec);
  for (std::size_t i = 0; i < a.images.size(); ++i) EXPECT_TRUE(same_pixels(a.images[i], b.images[i]));
  spec.seed = 100;
  EXPECT_FALSE(same_pixels(generate_corpus(spec).images[1], a.images[1]));
}

TEST(Synth, LandmarksFollowTheTransformAndStayInsideTheMargin) {
  SynthSpec spec;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    spec.seed = seed;
    const auto c = generate_corpus(spec);
    const double lo = 5 + 7, hi = spec.size - 1 - lo;  // floor(k/2) + encoder half-window
    for (std::size_t i = 0; i < c.images.size(); ++i)
      for (std::size_t l = 0; l < c.landmarks[i].size(); ++l) {
        const Point2 p = c.landmarks[i].points[l];
        EXPECT_TRUE(p.row >= lo && p.row <= hi && p.col >= lo && p.col <= hi);
        const Point2 mapped = c.subjects[i].transform.apply(c.landmarks[0].points[l]);
        EXPECT_LE(std::hypot(mapped.row - p.row, mapped.col - p.col), 0.5);
      }
  }
}

TEST(Synth, CorrespondenceRoundTrip) {
  SynthSpec spec;
  spec.seed = 5;
  const auto c = generate_corpus(spec);
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(10, 54);
  for (std::size_t i = 1; i < c.images.size(); ++i)
    for (int k = 0; k < 100; ++k) {
      const Point2 p{u(gen), u(gen)};
      const Point2 back = c.subjects[i].transform.inverse().apply(c.subjects[i].transform.apply(p));
      EXPECT_LE(std::hypot(back.row - p.row, back.col - p.col), 0.5);
    }
}

TEST(Synth, LandmarksAreInformative) {
  SynthSpec spec;
  int informative = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    spec.seed = seed;
    const auto c = generate_corpus(spec);
    for (std::size_t i = 0; i < c.images.size(); ++i) {
      const auto cm = categorize(entropy_map(c.images[i], 10, 256), 2, 4);
      for (const auto& p : c.landmarks[i].points) {
        const Category g = cm.at(p.rounded());
        informative += g == Category::medium || g == Category::high;
        ++total;
      }
    }
  }
  EXPECT_GE(informative, 0.9 * total) << informative << " of " << total;
}

TEST(Synth, BackgroundIsLowInfoAndBoundariesAreAboveIt) {
  SynthSpec spec;
  spec.seed = 3;
  spec.ellipses = 0;  // expose plain background away from the shapes
  const auto c = generate_corpus(spec);
  const auto em = entropy_map(c.images[0], 10, 256);
  // Background probes: windows whose 10x10 support avoids every shape.
  std::mt19937_64 gen(2);
  std::uniform_int_distribution<int> u(5, 58);
  int probes = 0;
  double background_sum = 0.0;
  for (int tries = 0; probes < 100 && tries < 100000; ++tries) {
    const Pixel p{u(gen), u(gen)};
    bool far = true;
    for (const auto& l : c.landmarks[0].points) far = far && std::hypot(l.row - p.row, l.col - p.col) > 16.0;
    if (!far) continue;
    EXPECT_LT(em.at(p), 2.0) << to_string(p);
    background_sum += em.at(p);
    ++probes;
  }
  ASSERT_EQ(probes, 100);
  double boundary_sum = 0.0;
  int n = 0;
  for (const auto& l : c.landmarks[0].points) boundary_sum += em.at(l.rounded()), ++n;
  EXPECT_GT(boundary_sum / n, background_sum / probes);
}

TEST(Synth, InvalidSpecsAreRejected) {
  SynthSpec spec;
  spec.subjects = 1;
  EXPECT_THROW(generate_corpus(spec), Error);
  spec = SynthSpec{};
  spec.size = 16;
  EXPECT_THROW(generate_corpus(spec), Error);
}
