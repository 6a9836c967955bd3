#include "favc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "favc/common.hpp"

namespace favc::svg {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string hex2(int v) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02x", std::clamp(v, 0, 255));
  return buf;
}

struct Doc {
  std::ostringstream os;
  Doc(double w, double h, const std::string& note) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w)
       << "\" height=\"" << num(h) << "\" viewBox=\"0 0 " << num(w) << " "
       << num(h) << "\">\n";
    if (!note.empty()) os << "<!-- " << note << " -->\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  }
  void text(double x, double y, const std::string& s, int size = 12,
            const std::string& anchor = "start") {
    os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\""
       << size << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor
       << "\">" << s << "</text>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill) {
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\""
       << num(w) << "\" height=\"" << num(h) << "\" fill=\"" << fill << "\"/>\n";
  }
  void circle(double x, double y, double r, const std::string& fill,
              const std::string& stroke = "") {
    os << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\""
       << num(r) << "\" fill=\"" << fill << "\"";
    if (!stroke.empty()) os << " stroke=\"" << stroke << "\"";
    os << "/>\n";
  }
  void polyline(const std::vector<std::pair<double, double>>& pts,
                const std::string& color, double width) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
       << num(width) << "\" points=\"";
    for (const auto& [x, y] : pts) os << num(x) << "," << num(y) << " ";
    os << "\"/>\n";
  }
  std::string finish() {
    os << "</svg>\n";
    return os.str();
  }
};

// shared color scale helper
struct Scale {
  double lo, hi;
  double operator()(double v) const {
    if (hi <= lo) return 0.5;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  }
};

void color_bar(Doc& d, double x, double y, double h, const Scale& s) {
  const int steps = 48;
  for (int i = 0; i < steps; ++i) {
    double t = 1.0 - static_cast<double>(i) / (steps - 1);
    d.rect(x, y + i * (h / steps), 14, h / steps + 0.5, color_map(t));
  }
  d.text(x + 18, y + 10, fmt_double(s.hi), 10);
  d.text(x + 18, y + h, fmt_double(s.lo), 10);
}

}  // namespace

std::string color_map(double t) {
  // compact viridis approximation via piecewise-linear control points
  static const double pts[7][3] = {{68, 1, 84},    {70, 50, 127},  {54, 92, 141},
                                   {39, 127, 143}, {31, 161, 135}, {74, 194, 109},
                                   {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0);
  double f = t * 6.0;
  int i = std::min(5, static_cast<int>(f));
  double u = f - i;
  int r = static_cast<int>(std::lround(pts[i][0] + u * (pts[i + 1][0] - pts[i][0])));
  int g = static_cast<int>(std::lround(pts[i][1] + u * (pts[i + 1][1] - pts[i][1])));
  int b = static_cast<int>(std::lround(pts[i][2] + u * (pts[i + 1][2] - pts[i][2])));
  return "#" + hex2(r) + hex2(g) + hex2(b);
}

std::string waveform_overlay(const std::vector<double>& truth,
                             const std::vector<double>& pred, int samples,
                             double fs, const std::vector<std::string>& names,
                             const std::string& title, const std::string& note) {
  const int channels = static_cast<int>(names.size());
  const double panel_h = 56, panel_w = 760, left = 60, top = 36;
  Doc d(left + panel_w + 20, top + channels * panel_h + 20, note);
  d.text(left, 20, title, 14);
  for (int c = 0; c < channels; ++c) {
    double y0 = top + c * panel_h;
    const double* yt = truth.data() + static_cast<int64_t>(c) * samples;
    const double* yp = pred.data() + static_cast<int64_t>(c) * samples;
    double lo = yt[0], hi = yt[0];
    for (int t = 0; t < samples; ++t) {
      lo = std::min({lo, yt[t], yp[t]});
      hi = std::max({hi, yt[t], yp[t]});
    }
    if (hi <= lo) hi = lo + 1.0;
    auto ymap = [&](double v) {
      return y0 + 4 + (panel_h - 12) * (1.0 - (v - lo) / (hi - lo));
    };
    std::vector<std::pair<double, double>> pt, pp;
    for (int t = 0; t < samples; ++t) {
      double x = left + panel_w * static_cast<double>(t) / (samples - 1);
      pt.push_back({x, ymap(yt[t])});
      pp.push_back({x, ymap(yp[t])});
    }
    d.polyline(pt, "#222222", 0.8);
    d.polyline(pp, "#d62728", 0.8);
    d.text(8, y0 + panel_h / 2, names[static_cast<size_t>(c)], 11);
  }
  d.text(left, top + channels * panel_h + 14,
         "black: recorded, red: generated; " + fmt_double(samples / fs) + " s", 11);
  return d.finish();
}

std::string heatmap_pair(const dsp::PsdEstimate& truth,
                         const dsp::PsdEstimate& pred, const std::string& title,
                         const std::string& note) {
  if (truth.freqs != pred.freqs || truth.channels != pred.channels)
    fail_shape("heatmap_pair: PSD grids do not match");
  const int C = truth.channels;
  const int F = truth.bins();
  const double cell_w = 6, cell_h = 14, left = 60, top = 48, gap = 50;
  double panel_w = F * cell_w;
  Doc d(left + 2 * panel_w + gap + 80, top + C * cell_h + 50, note);
  d.text(left, 20, title, 14);

  double lo = 1e300, hi = -1e300;
  auto scan = [&](const dsp::PsdEstimate& e) {
    for (double v : e.power) {
      double lv = std::log(v + kEps);
      lo = std::min(lo, lv);
      hi = std::max(hi, lv);
    }
  };
  scan(truth);
  scan(pred);
  Scale scale{lo, hi};

  auto draw = [&](const dsp::PsdEstimate& e, double x0, const std::string& label) {
    d.text(x0, top - 8, label, 12);
    for (int c = 0; c < C; ++c)
      for (int k = 0; k < F; ++k)
        d.rect(x0 + k * cell_w, top + c * cell_h, cell_w + 0.3, cell_h + 0.3,
               color_map(scale(std::log(e.row(c)[k] + kEps))));
  };
  draw(truth, left, "recorded");
  draw(pred, left + panel_w + gap, "generated");
  for (int c = 0; c < C; ++c)
    d.text(8, top + c * cell_h + cell_h - 3,
           "ch" + std::to_string(c), 9);
  d.text(left, top + C * cell_h + 16,
         fmt_double(truth.freqs.front()) + "-" + fmt_double(truth.freqs.back()) + " Hz, log power",
         11);
  color_bar(d, left + 2 * panel_w + gap + 16, top, C * cell_h, scale);
  return d.finish();
}

std::string scalp_maps(const std::vector<std::string>& method_names,
                       const std::vector<std::vector<double>>& bandpower_13,
                       const Montage& montage, const std::string& title,
                       const std::string& note) {
  if (method_names.size() != bandpower_13.size())
    fail_config("scalp_maps: one value set per method required");
  const double R = 90;            // head radius in px
  const int grid = 46;            // raster resolution
  const double panel = 2 * R + 40;
  const double top = 48;
  Doc d(40 + panel * method_names.size() + 80, top + panel + 40, note);
  d.text(24, 20, title, 14);

  double lo = 1e300, hi = -1e300;
  for (const auto& v : bandpower_13)
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  Scale scale{lo, hi};

  // positions of the 13 targets in the projected plane, normalized to the
  // head circle
  double pmax = 0;
  for (const auto& p : montage.pos2) pmax = std::max(pmax, std::hypot(p[0], p[1]));
  double h2 = 0.35 * pmax;  // RBF bandwidth
  for (size_t mth = 0; mth < method_names.size(); ++mth) {
    double cx = 40 + panel * mth + R + 20;
    double cy = top + R + 10;
    d.text(cx, top - 6, method_names[mth], 12, "middle");
    for (int iy = 0; iy < grid; ++iy)
      for (int ix = 0; ix < grid; ++ix) {
        double px = (2.0 * ix / (grid - 1) - 1.0);
        double py = (2.0 * iy / (grid - 1) - 1.0);
        if (px * px + py * py > 1.0) continue;
        // map unit disk to projected montage coordinates (y up = front)
        double qx = px * pmax;
        double qy = -py * pmax;
        double wsum = 0, vsum = 0;
        for (int t = 0; t < kNumTargets; ++t) {
          const auto& p = montage.pos2[static_cast<size_t>(montage.target_idx[static_cast<size_t>(t)])];
          double dx = qx - p[0], dy = qy - p[1];
          double w = std::exp(-(dx * dx + dy * dy) / (2 * h2 * h2));
          wsum += w;
          vsum += w * bandpower_13[mth][static_cast<size_t>(t)];
        }
        double cell = 2.0 * R / grid;
        d.rect(cx - R + ix * cell, cy - R + iy * cell, cell + 0.4, cell + 0.4,
               color_map(scale(vsum / (wsum + 1e-300))));
      }
    d.circle(cx, cy, R, "none", "#000000");
    // nose
    d.polyline({{cx - 8, cy - R + 2}, {cx, cy - R - 10}, {cx + 8, cy - R + 2}},
               "#000000", 1.0);
    for (int t = 0; t < kNumTargets; ++t) {
      const auto& p = montage.pos2[static_cast<size_t>(montage.target_idx[static_cast<size_t>(t)])];
      d.circle(cx + R * p[0] / pmax, cy - R * p[1] / pmax, 2.2, "#000000");
    }
  }
  color_bar(d, 40 + panel * method_names.size() + 20, top, 2 * R, scale);
  return d.finish();
}

std::string bar_chart(const std::vector<std::string>& groups,
                      const std::vector<std::pair<std::string, std::vector<double>>>& series,
                      const std::string& title, const std::string& note) {
  const double left = 60, top = 40, plot_w = 640, plot_h = 260;
  Doc d(left + plot_w + 160, top + plot_h + 70, note);
  d.text(left, 20, title, 14);
  double hi = 0;
  for (const auto& [name, vals] : series)
    for (double v : vals) hi = std::max(hi, v);
  if (hi <= 0) hi = 1;
  double group_w = plot_w / groups.size();
  double bar_w = group_w / (series.size() + 1.0);
  for (size_t g = 0; g < groups.size(); ++g) {
    for (size_t s = 0; s < series.size(); ++s) {
      double v = series[s].second[g];
      double h = plot_h * std::max(0.0, v) / hi;
      double x = left + g * group_w + (s + 0.5) * bar_w;
      d.rect(x, top + plot_h - h, bar_w * 0.9,
             h, color_map(static_cast<double>(s) / std::max<size_t>(1, series.size() - 1)));
    }
    d.text(left + g * group_w + group_w / 2, top + plot_h + 16, groups[g], 10, "middle");
  }
  for (size_t s = 0; s < series.size(); ++s) {
    double y = top + 16.0 * s;
    d.rect(left + plot_w + 16, y - 8, 10, 10,
           color_map(static_cast<double>(s) / std::max<size_t>(1, series.size() - 1)));
    d.text(left + plot_w + 32, y, series[s].first, 10);
  }
  d.text(left - 6, top + 8, fmt_double(hi), 10, "end");
  d.text(left - 6, top + plot_h, "0", 10, "end");
  return d.finish();
}

std::string line_chart(const std::vector<double>& xs,
                       const std::vector<std::pair<std::string, std::vector<double>>>& series,
                       const std::string& x_label, const std::string& title,
                       const std::string& note) {
  const double left = 70, top = 40, plot_w = 560, plot_h = 300;
  Doc d(left + plot_w + 170, top + plot_h + 70, note);
  d.text(left, 20, title, 14);
  double xlo = xs.front(), xhi = xs.back();
  if (xhi <= xlo) xhi = xlo + 1;
  double ylo = 1e300, yhi = -1e300;
  for (const auto& [name, vals] : series)
    for (double v : vals) {
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  if (yhi <= ylo) yhi = ylo + 1;
  double pad = 0.08 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;
  for (size_t s = 0; s < series.size(); ++s) {
    std::vector<std::pair<double, double>> pts;
    for (size_t i = 0; i < xs.size(); ++i) {
      double x = left + plot_w * (xs[i] - xlo) / (xhi - xlo);
      double y = top + plot_h * (1.0 - (series[s].second[i] - ylo) / (yhi - ylo));
      pts.push_back({x, y});
    }
    std::string color = color_map(static_cast<double>(s) / std::max<size_t>(1, series.size() - 1));
    d.polyline(pts, color, 1.6);
    for (const auto& [x, y] : pts) d.circle(x, y, 2.4, color);
    d.rect(left + plot_w + 16, top + 16.0 * s - 8, 10, 10, color);
    d.text(left + plot_w + 32, top + 16.0 * s, series[s].first, 10);
  }
  for (size_t i = 0; i < xs.size(); ++i)
    d.text(left + plot_w * (xs[i] - xlo) / (xhi - xlo), top + plot_h + 16,
           fmt_double(xs[i]), 10, "middle");
  d.text(left + plot_w / 2, top + plot_h + 34, x_label, 11, "middle");
  d.text(left - 8, top + 8, fmt_double(yhi), 10, "end");
  d.text(left - 8, top + plot_h, fmt_double(ylo), 10, "end");
  return d.finish();
}

}  // namespace favc::svg
