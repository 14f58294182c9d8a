#include "aggmogp/plot.hpp"

#include "aggmogp/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace aggmogp {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 610, kTop = 30, kBottom = 350;

struct Frame {
  double xmin, xmax, ymin, ymax;
  double left = kLeft, right = kRight, top = kTop, bottom = kBottom;

  double px(double x) const {
    return left + (x - xmin) / (xmax - xmin) * (right - left);
  }
  double py(double y) const {
    return bottom - (y - ymin) / (ymax - ymin) * (bottom - top);
  }
  std::string attributes() const {
    return " data-xmin=\"" + format_double(xmin) + "\" data-xmax=\"" +
           format_double(xmax) + "\" data-ymin=\"" + format_double(ymin) +
           "\" data-ymax=\"" + format_double(ymax) + "\" data-left=\"" +
           format_double(left) + "\" data-right=\"" + format_double(right) +
           "\" data-top=\"" + format_double(top) + "\" data-bottom=\"" +
           format_double(bottom) + "\"";
  }
};

void widen(double &lo, double &hi) {
  if (!(hi > lo)) {
    const double pad = std::max(std::abs(lo) * 0.05, 0.5);
    lo -= pad;
    hi += pad;
  }
}

std::string header() {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
    << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
    << kHeight << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return s.str();
}

std::string axes(const Frame &f, const std::string &xlabel,
                 const std::string &ylabel) {
  std::ostringstream s;
  s << "<g id=\"axes\" stroke=\"black\" fill=\"none\">\n"
    << "<line x1=\"" << f.left << "\" y1=\"" << f.bottom << "\" x2=\"" << f.right
    << "\" y2=\"" << f.bottom << "\"/>\n"
    << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left
    << "\" y2=\"" << f.bottom << "\"/>\n</g>\n"
    << "<g font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<text x=\"" << f.left << "\" y=\"" << f.bottom + 18 << "\">"
    << format_double(f.xmin) << "</text>\n"
    << "<text x=\"" << f.right << "\" y=\"" << f.bottom + 18
    << "\" text-anchor=\"end\">" << format_double(f.xmax) << "</text>\n"
    << "<text x=\"" << f.left - 6 << "\" y=\"" << f.bottom
    << "\" text-anchor=\"end\">" << format_double(f.ymin) << "</text>\n"
    << "<text x=\"" << f.left - 6 << "\" y=\"" << f.top + 10
    << "\" text-anchor=\"end\">" << format_double(f.ymax) << "</text>\n"
    << "<text x=\"" << (f.left + f.right) / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\">" << xlabel << "</text>\n"
    << "<text x=\"16\" y=\"" << (f.top + f.bottom) / 2
    << "\" transform=\"rotate(-90 16 " << (f.top + f.bottom) / 2
    << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n</g>\n";
  return s.str();
}

std::string polyline(const Frame &f, const std::vector<double> &x,
                     const std::vector<double> &y) {
  std::string pts;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(y[i]))
      continue;
    if (!pts.empty())
      pts += " ";
    pts += format_double(f.px(x[i])) + "," + format_double(f.py(y[i]));
  }
  return pts;
}

std::array<int, 3> colormap(double t) {
  // Piecewise-linear blue -> teal -> yellow ramp.
  t = std::clamp(t, 0.0, 1.0);
  const std::array<std::array<double, 3>, 3> stops = {
      {{68, 1, 84}, {33, 145, 140}, {253, 231, 37}}};
  const double u = t * 2.0;
  const int k = std::min(1, static_cast<int>(u));
  const double w = u - k;
  std::array<int, 3> rgb{};
  for (int c = 0; c < 3; ++c)
    rgb[static_cast<std::size_t>(c)] = static_cast<int>(std::lround(
        stops[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] * (1 - w) +
        stops[static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(c)] * w));
  return rgb;
}

} // namespace

std::string plot_trace_svg(const TraceSeries &trace) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i < trace.elbo.size(); ++i) {
    x.push_back(static_cast<double>(trace.iteration[i]));
    y.push_back(trace.elbo[i]);
  }
  Frame f{0, 1, 0, 1};
  bool any = false;
  for (std::size_t i = 0; i < y.size(); ++i)
    if (std::isfinite(y[i])) {
      if (!any) {
        f = {x[i], x[i], y[i], y[i]};
        any = true;
      }
      f.xmin = std::min(f.xmin, x[i]);
      f.xmax = std::max(f.xmax, x[i]);
      f.ymin = std::min(f.ymin, y[i]);
      f.ymax = std::max(f.ymax, y[i]);
    }
  widen(f.xmin, f.xmax);
  widen(f.ymin, f.ymax);
  std::string svg = header() + axes(f, "iteration", "ELBO");
  svg += "<g id=\"trace\"" + f.attributes() + ">\n<polyline fill=\"none\" "
         "stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"" +
         polyline(f, x, y) + "\"/>\n</g>\n</svg>\n";
  return svg;
}

std::string plot_band_svg(const GridTable &grid) {
  if (grid.dimension != 1)
    throw Error(ErrorCode::InvalidArgument, "band plot needs a 1-D grid");
  const auto n = static_cast<std::size_t>(grid.mean.size());
  if (n == 0)
    throw Error(ErrorCode::InvalidArgument, "empty grid");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i)
    order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grid.points(static_cast<Eigen::Index>(a), 0) <
           grid.points(static_cast<Eigen::Index>(b), 0);
  });
  std::vector<double> x, m, lo, hi;
  for (std::size_t i : order) {
    const auto k = static_cast<Eigen::Index>(i);
    const double half = 2.0 * std::sqrt(std::max(grid.variance[k], 0.0));
    x.push_back(grid.points(k, 0));
    m.push_back(grid.mean[k]);
    lo.push_back(grid.mean[k] - half);
    hi.push_back(grid.mean[k] + half);
  }
  Frame f{*std::min_element(x.begin(), x.end()), *std::max_element(x.begin(), x.end()),
          *std::min_element(lo.begin(), lo.end()), *std::max_element(hi.begin(), hi.end())};
  widen(f.xmin, f.xmax);
  widen(f.ymin, f.ymax);
  std::string band = polyline(f, x, hi);
  std::vector<double> rx(x.rbegin(), x.rend()), rlo(lo.rbegin(), lo.rend());
  band += " " + polyline(f, rx, rlo);
  std::string svg = header() + axes(f, "x", "value");
  svg += "<g id=\"band\"" + f.attributes() + ">\n";
  svg += "<polygon id=\"interval\" fill=\"#1f77b4\" fill-opacity=\"0.25\" "
         "stroke=\"none\" points=\"" + band + "\"/>\n";
  svg += "<polyline id=\"mean\" fill=\"none\" stroke=\"#1f77b4\" "
         "stroke-width=\"1.5\" points=\"" + polyline(f, x, m) + "\"/>\n";
  svg += "</g>\n</svg>\n";
  return svg;
}

std::string plot_heatmap_svg(const GridTable &grid) {
  if (grid.dimension != 2)
    throw Error(ErrorCode::InvalidArgument, "heatmap needs a 2-D grid");
  const auto n = grid.mean.size();
  if (n == 0)
    throw Error(ErrorCode::InvalidArgument, "empty grid");
  std::set<double> xs, ys;
  for (Eigen::Index i = 0; i < n; ++i) {
    xs.insert(grid.points(i, 0));
    ys.insert(grid.points(i, 1));
  }
  const double dx = xs.size() > 1 ? (*xs.rbegin() - *xs.begin()) / double(xs.size() - 1) : 1.0;
  const double dy = ys.size() > 1 ? (*ys.rbegin() - *ys.begin()) / double(ys.size() - 1) : 1.0;
  Frame f{*xs.begin() - dx / 2, *xs.rbegin() + dx / 2, *ys.begin() - dy / 2,
          *ys.rbegin() + dy / 2};
  // Square pixels keep the spatial aspect ratio.
  const double scale = std::min((kRight - kLeft) / (f.xmax - f.xmin),
                                (kBottom - kTop) / (f.ymax - f.ymin));
  f.right = f.left + scale * (f.xmax - f.xmin);
  f.top = f.bottom - scale * (f.ymax - f.ymin);
  const double vmin = grid.mean.minCoeff(), vmax = grid.mean.maxCoeff();
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  std::string svg = header();
  svg += "<g id=\"heatmap\"" + f.attributes() + " data-vmin=\"" +
         format_double(vmin) + "\" data-vmax=\"" + format_double(vmax) +
         "\" shape-rendering=\"crispEdges\">\n";
  char buf[256];
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = grid.points(i, 0), y = grid.points(i, 1);
    const auto c = colormap((grid.mean[i] - vmin) / span);
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.4f\" y=\"%.4f\" width=\"%.4f\" height=\"%.4f\" "
                  "fill=\"rgb(%d,%d,%d)\"/>\n",
                  f.px(x - dx / 2), f.py(y + dy / 2), scale * dx, scale * dy,
                  c[0], c[1], c[2]);
    svg += buf;
  }
  svg += "</g>\n";
  svg += axes(f, "x0", "x1");
  svg += "</svg>\n";
  return svg;
}

} // namespace aggmogp
