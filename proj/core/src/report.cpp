#include "memoir/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace memoir {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

/// Episodes per (mode, seed, tour), needed for progress fractions.
std::map<std::tuple<std::string, std::uint64_t, int>, int> tour_sizes(const std::vector<MetricsRow>& rows) {
  std::map<std::tuple<std::string, std::uint64_t, int>, int> sizes;
  for (const auto& r : rows) {
    if (!r.aggregate) ++sizes[{r.mode, r.seed, r.tour}];
  }
  return sizes;
}

const char* const kColors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"};

}  // namespace

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics.csv: empty");
  const std::vector<std::string> header = split(line);
  std::vector<MetricsRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("metrics.csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " cells");
    }
    MetricsRow row;
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string& h = header[i];
      const std::string& c = cells[i];
      if (h == "seed") {
        row.seed = std::stoull(c);
      } else if (h == "mode") {
        row.mode = c;
      } else if (h == "tour") {
        row.tour = std::stoi(c);
      } else if (h == "episode") {
        row.episode = c.empty() ? -1 : std::stoi(c);
      } else if (h == "kind") {
        row.aggregate = c == "tour";
      } else if (!c.empty()) {
        row.values[h] = std::stod(c);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double mean_metric(const std::vector<MetricsRow>& rows, const std::string& mode, std::uint64_t seed,
                   const std::string& metric, double lo, double hi) {
  const auto sizes = tour_sizes(rows);
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.aggregate || r.mode != mode || r.seed != seed) continue;
    const double frac = static_cast<double>(r.episode) / sizes.at({r.mode, r.seed, r.tour});
    if (frac < lo || frac >= hi) continue;
    sum += r.values.at(metric);
    ++n;
  }
  return n ? sum / n : std::nan("");
}

std::vector<std::uint64_t> seeds_in(const std::vector<MetricsRow>& rows) {
  std::set<std::uint64_t> s;
  for (const auto& r : rows) {
    if (!r.aggregate) s.insert(r.seed);
  }
  return {s.begin(), s.end()};
}

std::string ablation_summary(const std::vector<MetricsRow>& rows) {
  static const std::vector<std::string> metrics{"sr", "spl", "ndtw", "tndtw", "tl", "ne", "oa", "or", "ha", "hr"};
  std::ostringstream os;
  os << "| mode |";
  for (const auto& m : metrics) os << ' ' << m << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < metrics.size(); ++i) os << "---|";
  os << '\n';
  const auto seeds = seeds_in(rows);
  for (MemoryMode mode : kAllModes) {
    const std::string name = to_string(mode);
    os << "| " << name << " |";
    for (const auto& metric : metrics) {
      std::vector<double> per_seed;
      for (std::uint64_t seed : seeds) {
        double sum = 0.0;
        int n = 0;
        for (const auto& r : rows) {
          if (r.mode != name || r.seed != seed) continue;
          // T-nDTW exists only on aggregate rows; everything else is per episode.
          if ((metric == "tndtw") != r.aggregate) continue;
          auto it = r.values.find(metric);
          if (it == r.values.end()) continue;
          sum += it->second;
          ++n;
        }
        if (n) per_seed.push_back(sum / n);
      }
      if (per_seed.empty()) {
        os << " n/a |";
        continue;
      }
      double mean = 0.0;
      for (double v : per_seed) mean += v;
      mean /= static_cast<double>(per_seed.size());
      double var = 0.0;
      for (double v : per_seed) var += (v - mean) * (v - mean);
      const double sd = per_seed.size() > 1 ? std::sqrt(var / static_cast<double>(per_seed.size() - 1)) : 0.0;
      os << ' ' << fmt("%.4f", mean) << " ± " << fmt("%.4f", sd) << " |";
    }
    os << '\n';
  }
  return os.str();
}

std::string progress_svg(const std::vector<MetricsRow>& rows, const std::string& metric) {
  constexpr double width = 520.0;
  constexpr double height = 320.0;
  constexpr double left = 50.0;
  constexpr double right = 130.0;
  constexpr double top = 30.0;
  constexpr double bottom = 40.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const auto sizes = tour_sizes(rows);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\" font-family=\"sans-serif\">" << metric
     << " by tour progress decile</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
     << top + plot_h << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
     << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double y = top + plot_h * (1.0 - tick / 4.0);
    os << "<text x=\"" << left - 8 << "\" y=\"" << fmt("%.1f", y + 4) << "\" font-size=\"10\" text-anchor=\"end\""
       << " font-family=\"sans-serif\">" << fmt("%.2f", tick / 4.0) << "</text>\n";
  }
  for (int d = 0; d < 10; ++d) {
    const double x = left + plot_w * (d + 0.5) / 10.0;
    os << "<text x=\"" << fmt("%.1f", x) << "\" y=\"" << top + plot_h + 14
       << "\" font-size=\"10\" text-anchor=\"middle\" font-family=\"sans-serif\">" << d + 1 << "</text>\n";
  }

  int series = 0;
  for (MemoryMode mode : kAllModes) {
    const std::string name = to_string(mode);
    std::array<double, 10> sum{};
    std::array<int, 10> count{};
    for (const auto& r : rows) {
      if (r.aggregate || r.mode != name) continue;
      const int n = sizes.at({r.mode, r.seed, r.tour});
      const int decile = std::min(9, 10 * r.episode / n);
      sum[static_cast<std::size_t>(decile)] += r.values.at(metric);
      ++count[static_cast<std::size_t>(decile)];
    }
    if (std::all_of(count.begin(), count.end(), [](int c) { return c == 0; })) continue;
    const char* color = kColors[series % 5];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (std::size_t d = 0; d < 10; ++d) {
      if (!count[d]) continue;
      const double x = left + plot_w * (static_cast<double>(d) + 0.5) / 10.0;
      const double y = top + plot_h * (1.0 - sum[d] / count[d]);
      os << (first ? "" : " ") << fmt("%.2f", x) << ',' << fmt("%.2f", y);
      first = false;
    }
    os << "\"/>\n";
    const double ly = top + 14.0 * series;
    os << "<line x1=\"" << width - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << width - right + 28 << "\" y2=\""
       << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << width - right + 32 << "\" y=\"" << ly + 4
       << "\" font-size=\"10\" font-family=\"sans-serif\">" << name << "</text>\n";
    ++series;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace memoir
