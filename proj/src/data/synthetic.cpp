#include "lcgan/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "lcgan/core/rng.hpp"

namespace lcgan::data {

namespace {

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;
using Glyph = std::vector<Stroke>;

constexpr double kPi = std::numbers::pi;

// Points on an ellipse from angle a0 to a1 (radians, y axis pointing down).
void arc(Stroke& s, double cx, double cy, double rx, double ry, double a0, double a1, int steps) {
  for (int i = 0; i <= steps; ++i) {
    const double a = a0 + (a1 - a0) * i / steps;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
}

// Stroke font in the unit square, x to the right and y downwards.
Glyph make_glyph(int digit) {
  Glyph g;
  Stroke s;
  switch (digit) {
    case 0:
      arc(s, 0.5, 0.5, 0.26, 0.37, 0, 2 * kPi, 28);
      break;
    case 1:
      s = {{0.36, 0.26}, {0.52, 0.12}, {0.52, 0.88}};
      break;
    case 2:
      arc(s, 0.5, 0.33, 0.23, 0.21, 1.05 * kPi, 2 * kPi + 0.45, 16);
      s.push_back({0.26, 0.88});
      s.push_back({0.78, 0.88});
      break;
    case 3:
      arc(s, 0.5, 0.3, 0.2, 0.18, 1.15 * kPi, 2.5 * kPi, 14);
      arc(s, 0.5, 0.68, 0.23, 0.2, 1.5 * kPi, 2.85 * kPi, 14);
      break;
    case 4:
      s = {{0.66, 0.88}, {0.66, 0.12}, {0.22, 0.64}, {0.8, 0.64}};
      break;
    case 5:
      s = {{0.74, 0.12}, {0.34, 0.12}, {0.3, 0.46}};
      arc(s, 0.5, 0.65, 0.23, 0.22, 1.25 * kPi, 2.8 * kPi, 16);
      break;
    case 6:
    case 9:
      s = {{0.7, 0.16}, {0.55, 0.12}, {0.4, 0.2}, {0.31, 0.38}, {0.28, 0.58}};
      arc(s, 0.5, 0.68, 0.22, 0.2, kPi, 3 * kPi, 20);
      if (digit == 9)
        for (auto& p : s) p = {1.0 - p.x, 1.0 - p.y};
      break;
    case 7:
      s = {{0.24, 0.13}, {0.76, 0.13}, {0.44, 0.88}};
      break;
    case 8: {
      arc(s, 0.5, 0.3, 0.19, 0.17, 0, 2 * kPi, 20);
      Stroke lower;
      arc(lower, 0.5, 0.68, 0.23, 0.2, 0, 2 * kPi, 20);
      g.push_back(std::move(lower));
      break;
    }
    default:
      throw InvalidArgument("synthetic digits cover classes 0..9, got " + std::to_string(digit));
  }
  g.push_back(std::move(s));
  return g;
}

const std::array<Glyph, 10>& font() {
  static const std::array<Glyph, 10> glyphs = [] {
    std::array<Glyph, 10> a;
    for (int d = 0; d < 10; ++d) a[static_cast<std::size_t>(d)] = make_glyph(d);
    return a;
  }();
  return glyphs;
}

double segment_distance(Pt p, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = p.x - a.x, wy = p.y - a.y;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0 ? std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0) : 0.0;
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

double glyph_distance(const Glyph& g, Pt p) {
  double best = 1e9;
  for (const auto& s : g)
    for (std::size_t i = 1; i < s.size(); ++i) best = std::min(best, segment_distance(p, s[i - 1], s[i]));
  return best;
}

// Maps image coordinates (unit square) back into glyph coordinates.
struct Placement {
  double scale = 1, angle = 0, shear = 0, tx = 0, ty = 0;

  Pt to_glyph(Pt p) const {
    double x = (p.x - 0.5 - tx) / scale, y = (p.y - 0.5 - ty) / scale;
    const double c = std::cos(-angle), s = std::sin(-angle);
    const double rx = c * x - s * y, ry = s * x + c * y;
    return {rx - shear * ry + 0.5, ry + 0.5};
  }
};

// Coverage in [0, 1] of a stroke of half-width hw at distance d, with a
// linear edge ramp `ramp` wide.
double coverage(double d, double hw, double ramp) { return std::clamp(0.5 + (hw - d) / ramp, 0.0, 1.0); }

double luminance(const std::array<double, 3>& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

std::array<double, 3> random_color(Rng& rng) {
  return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
}

std::vector<float> render_real(int digit, ImageShape shape, Rng& rng) {
  const Glyph& g = font()[static_cast<std::size_t>(digit)];
  Placement pl;
  pl.scale = rng.uniform(0.72, 0.92);
  pl.angle = rng.uniform(-0.22, 0.22);
  pl.shear = rng.uniform(-0.2, 0.2);
  pl.tx = rng.uniform(-0.05, 0.05);
  pl.ty = rng.uniform(-0.05, 0.05);
  const double hw = rng.uniform(0.05, 0.085);
  // Smooth displacement field for the elastic wobble.
  const double ax = rng.uniform(0.01, 0.035), ay = rng.uniform(0.01, 0.035);
  const double fx = rng.uniform(0.6, 1.6), fy = rng.uniform(0.6, 1.6);
  const double px = rng.uniform(0, 2 * kPi), py = rng.uniform(0, 2 * kPi);
  const double ramp = 1.6 / (shape.w * pl.scale);

  std::vector<float> out(shape.size());
  for (int y = 0; y < shape.h; ++y)
    for (int x = 0; x < shape.w; ++x) {
      Pt q = pl.to_glyph({(x + 0.5) / shape.w, (y + 0.5) / shape.h});
      q = {q.x + ax * std::sin(2 * kPi * fx * q.y + px), q.y + ay * std::sin(2 * kPi * fy * q.x + py)};
      const double v = 2.0 * coverage(glyph_distance(g, q), hw, ramp) - 1.0;
      float* dst = out.data() + (static_cast<std::size_t>(y) * shape.w + x) * shape.c;
      for (int c = 0; c < shape.c; ++c) dst[c] = static_cast<float>(v);
    }
  return out;
}

std::vector<float> render_simulated(int digit, ImageShape shape, Rng& rng) {
  const Glyph& g = font()[static_cast<std::size_t>(digit)];
  Placement pl;
  pl.scale = rng.uniform(0.78, 0.98);
  pl.angle = rng.uniform(-0.08, 0.08);
  pl.tx = rng.uniform(-0.04, 0.04);
  pl.ty = rng.uniform(-0.04, 0.04);
  const double hw = rng.uniform(0.05, 0.07);

  const auto bg = random_color(rng);
  auto fg = random_color(rng);
  while (std::fabs(luminance(fg) - luminance(bg)) < 0.3) fg = random_color(rng);
  const double gx = rng.uniform(-0.12, 0.12), gy = rng.uniform(-0.12, 0.12);

  // House-number style clutter: parts of neighbouring digits at the edges.
  struct Neighbour {
    const Glyph* glyph;
    Placement pl;
  };
  std::vector<Neighbour> neighbours;
  for (double side : {-1.0, 1.0})
    if (rng.uniform() < 0.5) {
      Placement n = pl;
      n.tx += side * rng.uniform(0.72, 0.85) * pl.scale;
      neighbours.push_back({&font()[rng.below(10)], n});
    }
  const double ramp = 1.0 / (shape.w * pl.scale);

  std::vector<float> out(shape.size());
  for (int y = 0; y < shape.h; ++y)
    for (int x = 0; x < shape.w; ++x) {
      const Pt p{(x + 0.5) / shape.w, (y + 0.5) / shape.h};
      double cov = coverage(glyph_distance(g, pl.to_glyph(p)), hw, ramp);
      for (const auto& n : neighbours) cov = std::max(cov, coverage(glyph_distance(*n.glyph, n.pl.to_glyph(p)), hw, ramp));
      const double shade = gx * (p.x - 0.5) + gy * (p.y - 0.5);
      float* dst = out.data() + (static_cast<std::size_t>(y) * shape.w + x) * shape.c;
      for (int c = 0; c < shape.c; ++c) {
        double v;
        if (shape.c == 1)
          v = (luminance(bg) + shade) * (1 - cov) + luminance(fg) * cov;
        else
          v = (bg[static_cast<std::size_t>(c % 3)] + shade) * (1 - cov) + fg[static_cast<std::size_t>(c % 3)] * cov;
        dst[c] = static_cast<float>(std::clamp(2.0 * v - 1.0, -1.0, 1.0));
      }
    }
  return out;
}

std::uint64_t item_seed(const DatasetManifest& m, int cls, int index) {
  const std::uint64_t tag = ((static_cast<std::uint64_t>(m.domain) * 4 + static_cast<std::uint64_t>(m.split)) << 40) |
                            (static_cast<std::uint64_t>(cls) << 32) | static_cast<std::uint32_t>(index);
  return mix_seed(mix_seed(m.seed) ^ tag);
}

}  // namespace

std::vector<float> render_digit(int digit, Domain domain, ImageShape shape, std::uint64_t seed) {
  if (digit < 0 || digit > 9) throw InvalidArgument("render_digit: digit must be in 0..9");
  Rng rng(seed);
  return domain == Domain::real ? render_real(digit, shape, rng) : render_simulated(digit, shape, rng);
}

Corpus build_synthetic_corpus(const DatasetManifest& m) {
  m.validate();
  if (m.source != Source::synthetic) throw ConfigError("source", "expected 'synthetic'");
  if (m.class_count > 10) throw ConfigError("class_count", "synthetic digits support at most 10 classes");
  if (m.item_count_per_class.empty()) throw ConfigError("item_count_per_class", "required for synthetic corpora");

  Corpus out(m.domain, m.class_count, m.image_shape);
  std::size_t total = 0;
  for (int n : m.item_count_per_class) total += static_cast<std::size_t>(n);
  out.reserve(m.horizontal_flip ? 2 * total : total);
  // Classes interleaved so that prefixes of the corpus stay roughly balanced.
  const int most = *std::max_element(m.item_count_per_class.begin(), m.item_count_per_class.end());
  for (int i = 0; i < most; ++i)
    for (int k = 0; k < m.class_count; ++k)
      if (i < m.item_count_per_class[static_cast<std::size_t>(k)])
        out.append(render_digit(k, m.domain, m.image_shape, item_seed(m, k, i)), k);
  if (m.horizontal_flip) append_mirrored_copies(out);
  return out;
}

}  // namespace lcgan::data
