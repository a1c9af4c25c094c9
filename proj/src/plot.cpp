#include "crowdnav/plot.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "crowdnav/errors.hpp"

namespace crowdnav {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 320.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string open_svg(double w, double h, const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "viewBox=\"0 0 {:.0f} {:.0f}\" font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
      w, h, w, h, w / 2.0, title);
}

std::string axes(double y_max, const std::string& y_label, int ticks) {
  const double x0 = kLeft, y0 = kHeight - kBottom, x1 = kWidth - kRight, y1 = kTop;
  std::string s = fmt::format(
      "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\"/>\n"
      "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\"/>\n",
      x0, y0, x1, y0, x0, y0, x0, y1);
  for (int i = 0; i <= ticks; ++i) {
    const double v = y_max * i / ticks;
    const double y = y0 - (y0 - y1) * i / ticks;
    s += fmt::format(
        "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ccc\"/>\n"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.4g}</text>\n",
        x0, y, x1, y, x0 - 6, y + 4, v);
  }
  s += fmt::format(
      "<text x=\"16\" y=\"{:.1f}\" transform=\"rotate(-90 16 {:.1f})\" "
      "text-anchor=\"middle\">{}</text>\n",
      (y0 + y1) / 2, (y0 + y1) / 2, y_label);
  return s;
}

std::string bars(const std::array<double, kBucketCount>& values,
                 const std::array<double, kBucketCount>* whiskers, double y_max,
                 const std::string& fill) {
  const double x0 = kLeft, y0 = kHeight - kBottom, x1 = kWidth - kRight, y1 = kTop;
  const double slot = (x1 - x0) / kBucketCount;
  const double bar = slot * 0.5;
  std::string s;
  for (int b = 0; b < kBucketCount; ++b) {
    const double h = (y0 - y1) * std::clamp(values[b] / y_max, 0.0, 1.0);
    const double x = x0 + slot * b + (slot - bar) / 2;
    s += fmt::format(
        "<rect class=\"bar\" x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" "
        "fill=\"{}\"/>\n"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.2f}</text>\n"
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">rho {}</text>\n",
        x, y0 - h, bar, h, fill, x + bar / 2, y0 - h - 6, values[b], x + bar / 2, y0 + 18,
        xml_escape(bucket_label(static_cast<Bucket>(b))));
    if (whiskers != nullptr) {
      const double lo = (y0 - y1) * std::clamp((values[b] - (*whiskers)[b]) / y_max, 0.0, 1.0);
      const double hi = (y0 - y1) * std::clamp((values[b] + (*whiskers)[b]) / y_max, 0.0, 1.0);
      s += fmt::format(
          "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\"/>\n",
          x + bar / 2, y0 - lo, x + bar / 2, y0 - hi);
    }
  }
  s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">crowd density "
                   "(persons/m^2)</text>\n",
                   (x0 + x1) / 2, kHeight - 10);
  return s;
}

double nice_ceiling(double v) {
  if (!(v > 0.0)) return 1.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    if (m * p >= v) return m * p;
  }
  return 10.0 * p;
}

}  // namespace

std::string svg_success_plot(const EvalReport& report) {
  std::array<double, kBucketCount> v{};
  for (int b = 0; b < kBucketCount; ++b) v[b] = report.buckets[b].success_rate;
  return open_svg(kWidth, kHeight, "Success rate by crowd density") +
         axes(100.0, "success (%)", 5) + bars(v, nullptr, 100.0, "#4c78a8") + "</svg>\n";
}

std::string svg_time_plot(const EvalReport& report) {
  std::array<double, kBucketCount> v{}, w{};
  double top = 0.0;
  for (int b = 0; b < kBucketCount; ++b) {
    v[b] = report.buckets[b].mean_time;
    w[b] = report.buckets[b].std_time;
    top = std::max(top, v[b] + w[b]);
  }
  const double y_max = nice_ceiling(top);
  return open_svg(kWidth, kHeight, "Time to completion (reached episodes)") +
         axes(y_max, "time (s)", 5) + bars(v, &w, y_max, "#f58518") + "</svg>\n";
}

std::string svg_training_curves(const MetricsTable& m) {
  if (m.rows.empty()) throw ConfigError("metrics table has no rows to plot");
  const int xs = m.column("total_steps");
  const int succ = m.column("success_rate");
  const int rew = m.column("mean_reward");
  const double x_max = nice_ceiling(m.rows.back()[xs]);
  double r_lo = 0.0, r_hi = 0.0;
  for (const auto& row : m.rows) {
    r_lo = std::min(r_lo, row[rew]);
    r_hi = std::max(r_hi, row[rew]);
  }
  if (r_hi - r_lo < 1e-12) r_hi = r_lo + 1.0;

  const double x0 = kLeft, y0 = kHeight - kBottom, x1 = kWidth - kRight, y1 = kTop;
  auto px = [&](double x) { return x0 + (x1 - x0) * x / x_max; };
  std::string succ_pts, rew_pts;
  for (const auto& row : m.rows) {
    succ_pts += fmt::format("{:.1f},{:.1f} ", px(row[xs]), y0 - (y0 - y1) * row[succ]);
    rew_pts += fmt::format("{:.1f},{:.1f} ", px(row[xs]),
                           y0 - (y0 - y1) * (row[rew] - r_lo) / (r_hi - r_lo));
  }
  std::string s = open_svg(kWidth, kHeight, "Training curves") + axes(1.0, "success rate", 5);
  s += fmt::format("<polyline class=\"success\" fill=\"none\" stroke=\"#4c78a8\" "
                   "stroke-width=\"2\" points=\"{}\"/>\n",
                   succ_pts);
  s += fmt::format("<polyline class=\"reward\" fill=\"none\" stroke=\"#e45756\" "
                   "stroke-dasharray=\"4 3\" points=\"{}\"/>\n",
                   rew_pts);
  s += fmt::format(
      "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">environment steps (max {:.4g})"
      "</text>\n"
      "<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"#e45756\" text-anchor=\"end\">mean reward "
      "(dashed, {:.3g} .. {:.3g})</text>\n",
      (x0 + x1) / 2, kHeight - 10, x_max, x1, y1 - 6, r_lo, r_hi);
  return s + "</svg>\n";
}

std::string svg_episode_strip(const EpisodeLog& log, int stride) {
  if (log.steps.empty()) throw ConfigError("episode log has no steps");
  stride = std::max(1, stride);
  const RunConfig cfg = RunConfig::from_json(log.header.at("config"));
  EnvConfig env_cfg = cfg.env;
  const EpisodeSpec spec = spec_from_header(log.header);
  const CorridorWorld world = generate_corridor(spec.seed, env_cfg.world);

  std::vector<std::size_t> frames;
  for (std::size_t i = 0; i < log.steps.size(); i += stride) frames.push_back(i);
  if (frames.back() != log.steps.size() - 1) frames.push_back(log.steps.size() - 1);

  const double scale = 40.0;  // px per metre
  const double fw = world.length * scale + 20, fh = world.width * scale + 30;
  const int per_row = 3;
  const int rows = static_cast<int>((frames.size() + per_row - 1) / per_row);
  std::string s = open_svg(fw * per_row, fh * rows + 30,
                           fmt::format("Episode seed {} ({})", spec.seed,
                                       to_string(log.outcome.kind)));
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const nlohmann::json& st = log.steps[frames[f]];
    const double ox = fw * (f % per_row) + 10, oy = 30 + fh * (f / per_row) + 20;
    auto X = [&](double x) { return ox + x * scale; };
    auto Y = [&](double y) { return oy + (world.width - y) * scale; };
    s += fmt::format("<g class=\"frame\"><text x=\"{:.1f}\" y=\"{:.1f}\">t = {:.1f} s</text>\n",
                     ox, oy - 6, st.at("t").get<double>());
    for (const Segment& w : world.walls) {
      s += fmt::format(
          "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\" "
          "stroke-width=\"2\"/>\n",
          X(w.a.x), Y(w.a.y), X(w.b.x), Y(w.b.y));
    }
    s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"{:.1f}\" fill=\"none\" "
                     "stroke=\"green\" stroke-dasharray=\"3 2\"/>\n",
                     X(world.goal.x), Y(world.goal.y), env_cfg.termination.goal_radius * scale);
    for (const auto& p : st.at("pedestrians")) {
      s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"{:.1f}\" fill=\"#bbb\"/>\n",
                       X(p[0].get<double>()), Y(p[1].get<double>()),
                       env_cfg.dynamics.ped_radius * scale);
    }
    const auto& r = st.at("robot");
    const double rx = r.at("x").get<double>(), ry = r.at("y").get<double>();
    const double cam = r.at("camera").get<double>();
    s += fmt::format(
        "<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"{:.1f}\" fill=\"#4c78a8\"/>\n"
        "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"white\" "
        "stroke-width=\"2\"/></g>\n",
        X(rx), Y(ry), env_cfg.dynamics.robot_radius * scale, X(rx), Y(ry),
        X(rx + std::cos(cam) * env_cfg.dynamics.robot_radius),
        Y(ry + std::sin(cam) * env_cfg.dynamics.robot_radius));
  }
  return s + "</svg>\n";
}

}  // namespace crowdnav
