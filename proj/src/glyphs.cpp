#include "ruleocr/glyphs.hpp"

#include <algorithm>
#include <cmath>

namespace ruleocr::glyphs {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kSide = ingest::kDigitSide;

struct Pt {
  double x, y;
};

using Stroke = std::vector<Pt>;  // polyline in the unit box, y pointing down

void add_arc(std::vector<Stroke>& strokes, double cx, double cy, double rx, double ry,
             double deg0, double deg1, int segments = 18) {
  Stroke s;
  s.reserve(segments + 1);
  for (int i = 0; i <= segments; ++i) {
    const double a = (deg0 + (deg1 - deg0) * i / segments) * kPi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  strokes.push_back(std::move(s));
}

void add_line(std::vector<Stroke>& strokes, Pt a, Pt b) {
  strokes.push_back({a, b});
}

// Angles are measured with y down, so 270 degrees is the top of an arc and
// 90 the bottom.
std::vector<Stroke> skeleton(Digit d, Rng& rng, const CorpusConfig& cfg) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.real01(); };
  const bool ambiguous = rng.real01() < cfg.ambiguous_prob;
  std::vector<Stroke> s;
  switch (d) {
    case 0:
      add_arc(s, 0.5, 0.5, u(0.20, 0.28), u(0.30, 0.40), 0, 360, 22);
      break;
    case 1: {
      const double top = u(0.08, 0.14), bot = u(0.84, 0.92);
      const double x_top = u(0.48, 0.56), x_bot = x_top + u(-0.06, 0.04);
      add_line(s, {x_top, top}, {x_bot, bot});
      if (ambiguous) {
        // long flag, close to a 7 missing its bar
        add_line(s, {x_top - u(0.16, 0.24), top + u(0.14, 0.24)}, {x_top, top});
      } else if (rng.real01() < 0.6) {
        add_line(s, {x_top - u(0.08, 0.15), top + u(0.08, 0.16)}, {x_top, top});
      }
      if (rng.real01() < 0.35)
        add_line(s, {x_bot - u(0.10, 0.16), bot}, {x_bot + u(0.10, 0.16), bot});
      break;
    }
    case 2: {
      const double cy = u(0.26, 0.33), rx = u(0.20, 0.26), ry = u(0.16, 0.22);
      const double end_deg = u(10, 40);
      add_arc(s, 0.5, cy, rx, ry, 180, 360 + end_deg);
      const double a = end_deg * kPi / 180.0;
      const Pt elbow{0.5 + rx * std::cos(a), cy + ry * std::sin(a)};
      const Pt corner{u(0.22, 0.30), u(0.84, 0.90)};
      add_line(s, elbow, corner);
      add_line(s, corner, {corner.x + u(0.42, 0.55), corner.y});
      break;
    }
    case 3: {
      const double sweep = ambiguous ? u(225, 250) : u(190, 225);
      add_arc(s, 0.47, u(0.27, 0.32), u(0.20, 0.25), u(0.17, 0.22), 210, 210 + sweep * 0.62);
      add_arc(s, 0.46, u(0.63, 0.70), u(0.22, 0.27), u(0.19, 0.24), -80, -80 + sweep);
      break;
    }
    case 4: {
      if (ambiguous) {
        // closed top: a 9-like loop over the vertical
        const Pt apex{u(0.52, 0.60), u(0.08, 0.14)};
        const Pt knee{u(0.26, 0.34), u(0.46, 0.56)};
        add_line(s, apex, knee);
        add_line(s, knee, {knee.x + u(0.30, 0.40), knee.y});
        add_line(s, {apex.x + u(0.02, 0.10), apex.y}, {u(0.58, 0.68), u(0.84, 0.92)});
      } else {
        const Pt apex{u(0.50, 0.60), u(0.08, 0.16)};
        const Pt knee{u(0.18, 0.28), u(0.50, 0.62)};
        add_line(s, apex, knee);
        add_line(s, knee, {knee.x + u(0.46, 0.60), knee.y});
        add_line(s, {u(0.58, 0.66), u(0.10, 0.22)}, {u(0.56, 0.66), u(0.84, 0.92)});
      }
      break;
    }
    case 5: {
      const double top = u(0.10, 0.16);
      const Pt left{u(0.28, 0.36), top};
      add_line(s, {left.x + u(0.32, 0.42), top}, left);
      const Pt mid{left.x + u(-0.04, 0.02), u(0.40, 0.48)};
      add_line(s, left, mid);
      const double sweep = ambiguous ? u(280, 320) : u(220, 270);
      add_arc(s, mid.x + u(0.16, 0.22), mid.y + u(0.16, 0.22), u(0.20, 0.26),
              u(0.18, 0.24), 230, 230 + sweep);
      break;
    }
    case 6: {
      add_arc(s, 0.54, u(0.38, 0.46), u(0.22, 0.28), u(0.30, 0.38), 300,
              300 - (ambiguous ? u(120, 150) : u(150, 185)));
      add_arc(s, 0.50, u(0.62, 0.70), u(0.16, 0.22), u(0.15, 0.21), 180, 540, 20);
      break;
    }
    case 7: {
      const double top = u(0.10, 0.16);
      const Pt l{ambiguous ? u(0.36, 0.44) : u(0.20, 0.28), top};
      const Pt r{u(0.70, 0.80), top};
      add_line(s, l, r);
      add_line(s, r, {u(0.34, 0.46), u(0.84, 0.92)});
      if (!ambiguous && rng.real01() < 0.3)
        add_line(s, {u(0.32, 0.40), u(0.48, 0.56)}, {u(0.58, 0.68), u(0.48, 0.56)});
      break;
    }
    case 8: {
      const double r1 = u(0.15, 0.21), r2 = u(0.18, 0.25);
      add_arc(s, 0.50, u(0.27, 0.32), r1 * (ambiguous ? u(0.75, 0.9) : 1.0), r1, -90, 270,
              20);
      add_arc(s, 0.49, u(0.64, 0.70), r2, r2 * u(0.85, 1.0), 90, 450, 20);
      break;
    }
    case 9: {
      const double cx = u(0.46, 0.52), cy = u(0.28, 0.34);
      const double rx = u(0.17, 0.23), ry = u(0.16, 0.21);
      const double sweep = ambiguous ? u(260, 310) : u(330, 360);
      add_arc(s, cx, cy, rx, ry, 0, sweep, 20);
      const Pt mid{cx + rx - u(0.02, 0.10), u(0.58, 0.70)};
      add_line(s, {cx + rx, cy}, mid);
      add_line(s, mid, {u(0.52, 0.64), u(0.84, 0.92)});
      break;
    }
    default: break;
  }
  // control-point jitter
  for (auto& stroke : s)
    for (auto& p : stroke) {
      p.x += rng.normal() * cfg.jitter;
      p.y += rng.normal() * cfg.jitter;
    }
  return s;
}

double dist_to_segment(double px, double py, Pt a, Pt b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double wx = px - a.x, wy = py - a.y;
  const double vv = vx * vx + vy * vy;
  double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

// Minimum distance from each pixel centre to any segment, restricted to the
// segments' padded bounding boxes; untouched pixels keep a large distance.
void rasterize_min_dist(const std::vector<Stroke>& strokes, double pad,
                        const double* warp_x, const double* warp_y,
                        std::array<double, kSide * kSide>& dist) {
  dist.fill(1e9);
  for (const auto& stroke : strokes) {
    for (std::size_t i = 0; i + 1 < stroke.size(); ++i) {
      const Pt a = stroke[i], b = stroke[i + 1];
      const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - pad)));
      const int x1 = std::min(kSide - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + pad)));
      const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - pad)));
      const int y1 = std::min(kSide - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + pad)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const std::size_t i_px = static_cast<std::size_t>(y) * kSide + x;
          const double d =
              dist_to_segment(x + warp_x[i_px], y + warp_y[i_px], a, b);
          dist[i_px] = std::min(dist[i_px], d);
        }
      }
    }
  }
}

}  // namespace

ingest::RawDigitImage render_digit(Digit d, Rng& rng, const CorpusConfig& cfg) {
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.real01(); };

  std::vector<Stroke> strokes = skeleton(d, rng, cfg);

  // affine about the box centre, then map the unit box to pixel coords
  const double ang = u(-cfg.rotate_deg, cfg.rotate_deg) * kPi / 180.0;
  const double shear = u(-cfg.shear, cfg.shear);
  const double sx = u(cfg.scale_lo, cfg.scale_hi), sy = u(cfg.scale_lo, cfg.scale_hi);
  const double tx = u(-cfg.translate, cfg.translate), ty = u(-cfg.translate, cfg.translate);
  const double ca = std::cos(ang), sa = std::sin(ang);
  for (auto& stroke : strokes) {
    for (auto& p : stroke) {
      double x = (p.x - 0.5) * sx, y = (p.y - 0.5) * sy;
      x += shear * y;
      const double xr = ca * x - sa * y, yr = sa * x + ca * y;
      p.x = (xr + 0.5 + tx) * (kSide - 6) + 3.0;  // 3 px margin
      p.y = (yr + 0.5 + ty) * (kSide - 6) + 3.0;
    }
  }

  // sinusoidal warp field sampled at pixel centres
  const double amp = u(cfg.warp_amp_lo, cfg.warp_amp_hi);
  const double fx = u(0.5, 1.5), fy = u(0.5, 1.5);
  const double phx = u(0, 2 * kPi), phy = u(0, 2 * kPi);
  static thread_local std::array<double, kSide * kSide> warp_x, warp_y, dist;
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * kSide + x;
      warp_x[i] = amp * std::sin(2 * kPi * fy * y / kSide + phx);
      warp_y[i] = amp * std::sin(2 * kPi * fx * x / kSide + phy);
    }
  }

  const double thickness = u(cfg.thickness_lo, cfg.thickness_hi);
  rasterize_min_dist(strokes, thickness / 2 + amp + 1.5, warp_x.data(), warp_y.data(),
                     dist);

  const double ink = u(cfg.ink_lo, cfg.ink_hi);
  std::array<double, kSide * kSide> img;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double cov = std::clamp(0.5 + (thickness / 2 - dist[i]), 0.0, 1.0);
    img[i] = ink * cov;
  }

  if (rng.real01() < cfg.occlusion_prob) {
    // erase a thin random band crossing the glyph area
    const Pt a{u(2, kSide - 3), u(2, kSide - 3)};
    const double dir = u(0, 2 * kPi), len = u(6, 16);
    const Pt b{a.x + len * std::cos(dir), a.y + len * std::sin(dir)};
    const double ot = u(1.0, 2.2);
    for (int y = 0; y < kSide; ++y) {
      for (int x = 0; x < kSide; ++x) {
        const double dd = dist_to_segment(x, y, a, b);
        const double cov = std::clamp(0.5 + (ot / 2 - dd), 0.0, 1.0);
        img[static_cast<std::size_t>(y) * kSide + x] *= 1.0 - cov;
      }
    }
  }

  const double sigma = u(cfg.noise_sigma_lo, cfg.noise_sigma_hi);
  ingest::RawDigitImage out;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img[i] + sigma * rng.normal();
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

Corpus generate_corpus(const CorpusConfig& cfg) {
  Corpus corpus;
  Rng rng(cfg.seed);
  auto fill = [&](std::vector<ingest::RawDigitImage>& images, std::vector<Digit>& labels,
                  int count) {
    images.reserve(static_cast<std::size_t>(count));
    labels.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const Digit d = static_cast<Digit>(rng.below(10));
      labels.push_back(d);
      images.push_back(render_digit(d, rng, cfg));
    }
  };
  fill(corpus.train_images, corpus.train_labels, cfg.train_count);
  fill(corpus.test_images, corpus.test_labels, cfg.test_count);
  return corpus;
}

}  // namespace ruleocr::glyphs
