#include <gtest/gtest.h>

#include <map>

#include "support.hpp"

using namespace ribsupp;

namespace {

PhantomSpec busy_spec(std::uint64_t seed) {
  PhantomSpec s;
  s.width = 256;
  s.height = 224;
  s.n_ribs = 8;
  s.seed = seed;
  s.background = BackgroundKind::low_frequency;
  s.background_amplitude = 1500;
  s.background_wavelength = 50;
  s.vessel_count = 5;
  s.vessel_contrast = 800;
  s.nodule_count = 2;
  s.nodule_contrast = 1500;
  return s;
}

}  // namespace

TEST(Phantom, RawIsSoftPlusBoneExactly) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const PhantomCase pc = generate_phantom(busy_spec(seed));
    for (std::size_t i = 0; i < pc.raw.size(); ++i)
      ASSERT_EQ(pc.raw.pixels()[i], pc.gt_soft.pixels()[i] + pc.gt_bone.pixels()[i]);
  }
}

TEST(Phantom, SeedDeterminism) {
  const PhantomCase a = generate_phantom(busy_spec(5)), b = generate_phantom(busy_spec(5));
  EXPECT_EQ(a.raw.data(), b.raw.data());
  EXPECT_EQ(a.gt_bone.data(), b.gt_bone.data());
  EXPECT_EQ(a.masks.to_label_image().labels, b.masks.to_label_image().labels);
  const PhantomCase c = generate_phantom(busy_spec(6));
  EXPECT_NE(a.gt_soft.data(), c.gt_soft.data());
  EXPECT_NE(a.masks.to_label_image().labels, c.masks.to_label_image().labels);
}

TEST(Phantom, LabelsAndCount) {
  const PhantomCase pc = generate_phantom(busy_spec(7));
  ASSERT_EQ(pc.masks.size(), 8u);
  for (std::size_t r = 0; r < pc.masks.size(); ++r) {
    EXPECT_EQ(pc.masks.masks[r].label, static_cast<int>(r) + 1);
    EXPECT_EQ(pc.ribs[r].label, static_cast<int>(r) + 1);
  }
  // odd labels on the left half, even on the right
  for (const RibArc& rib : pc.ribs) EXPECT_EQ(rib.center.x < 128, rib.label % 2 == 1);
  PhantomSpec odd = busy_spec(7);
  odd.n_ribs = 5;
  EXPECT_EQ(generate_phantom(odd).masks.size(), 5u);
}

TEST(Phantom, BoneFollowsDistanceProfile) {
  const PhantomSpec spec = busy_spec(8);
  const PhantomCase pc = generate_phantom(spec);
  for (std::size_t r = 0; r < pc.ribs.size(); ++r) {
    const RibArc& rib = pc.ribs[r];
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        if (!pc.masks.masks[r].bitmap(x, y)) continue;
        // independent distance: to the analytic annulus sector edges
        const Vec2 p{x + 0.5, y + 0.5};
        const double rho = std::hypot(p.x - rib.center.x, p.y - rib.center.y);
        double d = std::min(rib.radius + rib.half_width - rho, rho - (rib.radius - rib.half_width));
        auto end_dist = [&](double a) {
          const Vec2 u{std::cos(a), std::sin(a)};
          const Vec2 q0 = rib.center + (rib.radius - rib.half_width) * u;
          const Vec2 q1 = rib.center + (rib.radius + rib.half_width) * u;
          return project_to_segment(p, q0, q1).distance;
        };
        d = std::min({d, end_dist(rib.theta0), end_dist(rib.theta1)});
        const double expect = spec.rib_amplitude * rib_profile(d / rib.half_width);
        // the outline is a polygon with ~1 px chords; its sagitta bounds the gap
        const double chord_gap = 1.0 / (8 * (rib.radius - rib.half_width)) + 1e-9;
        const double slope = spec.rib_amplitude * std::numbers::pi / (2 * rib.half_width);
        EXPECT_NEAR(pc.gt_bone(x, y), expect, slope * chord_gap + 1.0 / 65536);
        EXPECT_EQ(pc.gt_bone(x, y), std::nearbyint(spec.rib_amplitude *
                                                    rib_profile(distance_to_contour(p, rib.contour) / rib.half_width) * 65536) / 65536);
      }
  }
}

TEST(Phantom, BoneZeroOutsideMasksAndOnOutline) {
  const PhantomCase pc = generate_phantom(busy_spec(9));
  const Bitmap u = pc.masks.union_bitmap(pc.spec.width, pc.spec.height);
  for (std::size_t i = 0; i < u.bits.size(); ++i)
    if (!u.bits[i]) ASSERT_EQ(pc.gt_bone.pixels()[i], 0.0);
  for (const RibArc& rib : pc.ribs)
    for (const Vec2& v : rib.contour.vertices())
      EXPECT_EQ(pc.spec.rib_amplitude * rib_profile(distance_to_contour(v, rib.contour) / rib.half_width), 0.0);
  EXPECT_EQ(rib_profile(0.0), 0.0);
  EXPECT_EQ(rib_profile(1.0), 1.0);
  EXPECT_EQ(rib_profile(3.0), 1.0);
}

TEST(Phantom, LevelSetsShareValues) {
  // bone depends on the pixel only through its distance to the outline
  const PhantomCase pc = generate_phantom(busy_spec(10));
  std::mt19937_64 rng(10);
  for (std::size_t r = 0; r < pc.ribs.size(); ++r) {
    const RibArc& rib = pc.ribs[r];
    std::map<double, double> by_distance;
    for (int y = 0; y < pc.spec.height; ++y)
      for (int x = 0; x < pc.spec.width; ++x) {
        if (!pc.masks.masks[r].bitmap(x, y)) continue;
        const double d = distance_to_contour({x + 0.5, y + 0.5}, rib.contour);
        auto [it, fresh] = by_distance.emplace(d, pc.gt_bone(x, y));
        if (!fresh) {
          EXPECT_EQ(it->second, pc.gt_bone(x, y));
        }
      }
    // the strip is mirror symmetric about its apex: a point and its mirror
    // image lie on the same level set and must get the same bone value
    double x0, y0, x1, y1;
    rib.contour.bounds(x0, y0, x1, y1);
    std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
    int pairs = 0;
    while (pairs < 1000) {
      const Vec2 p{ux(rng), uy(rng)};
      if (!rib.contour.contains(p)) continue;
      const Vec2 q{2 * rib.center.x - p.x, p.y};
      const double bp = std::nearbyint(pc.spec.rib_amplitude * rib_profile(distance_to_contour(p, rib.contour) / rib.half_width) * 65536);
      const double bq = std::nearbyint(pc.spec.rib_amplitude * rib_profile(distance_to_contour(q, rib.contour) / rib.half_width) * 65536);
      EXPECT_EQ(bp, bq);
      ++pairs;
    }
  }
}

TEST(Phantom, MasksAreCenterRasterization) {
  const PhantomCase pc = generate_phantom(busy_spec(11));
  for (std::size_t r = 0; r < pc.ribs.size(); ++r)
    for (int y = 0; y < pc.spec.height; ++y)
      for (int x = 0; x < pc.spec.width; ++x)
        ASSERT_EQ(pc.masks.masks[r].bitmap(x, y), point_in_polygon(pc.ribs[r].contour.vertices(), {x + 0.5, y + 0.5}));
}

TEST(Phantom, ZeroAmplitudeConstant) {
  PhantomSpec s;
  s.width = 128;
  s.height = 128;
  s.n_ribs = 4;
  s.rib_amplitude = 0;
  s.background_level = 1000;
  const PhantomCase pc = generate_phantom(s);
  for (std::size_t i = 0; i < pc.raw.size(); ++i) {
    ASSERT_EQ(pc.raw.pixels()[i], 1000.0);
    ASSERT_EQ(pc.gt_soft.pixels()[i], 1000.0);
    ASSERT_EQ(pc.gt_bone.pixels()[i], 0.0);
  }
  EXPECT_EQ(pc.masks.size(), 4u);
}

TEST(Phantom, TooManyRibsNamesAchievableMax) {
  PhantomSpec s;
  s.n_ribs = 60;
  try {
    generate_phantom(s);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    const auto pos = msg.find("achievable max is ");
    ASSERT_NE(pos, std::string::npos) << msg;
    const int max = std::stoi(msg.substr(pos + 18));
    s.n_ribs = max;
    EXPECT_EQ(generate_phantom(s).masks.size(), static_cast<std::size_t>(max));
    s.n_ribs = max + 2;
    EXPECT_THROW(generate_phantom(s), ConfigError);
  }
}

TEST(Phantom, BackgroundWavelengthRespected) {
  PhantomSpec s;
  s.width = 256;
  s.height = 256;
  s.n_ribs = 0;
  s.background = BackgroundKind::low_frequency;
  s.background_amplitude = 1000;
  s.background_wavelength = 64;
  const PhantomCase pc = generate_phantom(s);
  // |d/dx| <= amplitude * 2 pi / lambda for every wave
  const double bound = s.background_amplitude * 2 * std::numbers::pi / s.background_wavelength;
  double worst = 0, lo = 1e300, hi = -1e300;
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x + 1 < 256; ++x) {
      worst = std::max(worst, std::abs(pc.gt_soft(x + 1, y) - pc.gt_soft(x, y)));
      lo = std::min(lo, pc.gt_soft(x, y));
      hi = std::max(hi, pc.gt_soft(x, y));
    }
  EXPECT_LE(worst, bound);
  EXPECT_GE(lo, s.background_level - s.background_amplitude);
  EXPECT_LE(hi, s.background_level + s.background_amplitude);
  EXPECT_GT(hi - lo, 0.2 * s.background_amplitude);
}

TEST(Phantom, SpecJsonRoundTrip) {
  const PhantomSpec s = busy_spec(44);
  const nlohmann::json j = s;
  const PhantomSpec back = j.get<PhantomSpec>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(generate_phantom(back).raw.data(), generate_phantom(s).raw.data());
  EXPECT_THROW(nlohmann::json({{"ribs", 3}}).get<PhantomSpec>(), ConfigError);
  EXPECT_THROW(nlohmann::json({{"background", "wavy"}}).get<PhantomSpec>(), ConfigError);
  PhantomSpec bad;
  bad.width = 8;
  EXPECT_THROW(generate_phantom(bad), ConfigError);
}

TEST(DistanceToContour, Examples) {
  const Contour c = testing_support::square(0, 0, 10);
  EXPECT_EQ(distance_to_contour({10, 10}, c), 0.0);
  EXPECT_DOUBLE_EQ(distance_to_contour({5, 3}, c), 3.0);
  EXPECT_DOUBLE_EQ(distance_to_contour({13, 14}, c), 5.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 15);
  for (int i = 0; i < 200; ++i) {
    const Vec2 p{u(rng), u(rng)};
    EXPECT_NEAR(distance_to_contour(p, c), c.distance(p), 1e-12);
  }
}
