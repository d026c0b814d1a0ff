#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "legmpc/experiments.h"

namespace legmpc {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << std::setprecision(10);
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace

void write_report_csv(const std::string& path, const ExperimentReport& report) {
  auto out = open_out(path);
  out << "# config_hash=" << report.config_hash << "\n";
  out << "controller,terrain,path,n,mean_cost,std_cost\n";
  for (const auto& c : report.cells) {
    out << c.controller << ',' << c.terrain << ',' << c.path << ',' << c.n << ',' << c.mean << ','
        << c.std << "\n";
  }
  close_out(out, path);
}

void write_runs_csv(const std::string& path, const ExperimentReport& report) {
  auto out = open_out(path);
  out << "# config_hash=" << report.config_hash << "\n";
  out << "controller,terrain,path,seed,cost,final_perpendicular,progress\n";
  for (const auto& r : report.runs) {
    out << r.controller << ',' << r.terrain << ',' << r.path << ',' << r.seed << ',' << r.cost
        << ',' << r.final_perpendicular << ',' << r.progress << "\n";
  }
  close_out(out, path);
}

void write_speed_csv(const std::string& path, const std::vector<SpeedRow>& rows,
                     const std::string& config_hash) {
  auto out = open_out(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "omega_nom,dd_mean,dd_std,mpc_mean,mpc_std,gap\n";
  for (const auto& r : rows) {
    out << r.omega_nom << ',' << r.dd.mean << ',' << r.dd.std << ',' << r.mpc.mean << ','
        << r.mpc.std << ',' << r.gap() << "\n";
  }
  close_out(out, path);
}

void write_matrix_csv(const std::string& path, const CostMatrix& m, const std::string& config_hash) {
  auto out = open_out(path);
  out << "# config_hash=" << config_hash << "\n";
  out << "controller";
  for (const auto& c : m.cols) out << ',' << c << "_mean," << c << "_std";
  out << "\n";
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    out << m.rows[i];
    for (const auto& cell : m.cells[i]) out << ',' << cell.mean << ',' << cell.std;
    out << "\n";
  }
  close_out(out, path);
}

void write_loss_csv(const std::string& path, const std::vector<EpochStats>& curve) {
  auto out = open_out(path);
  out << "epoch,train_loss,val_loss\n";
  for (const auto& e : curve) out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << "\n";
  close_out(out, path);
}

namespace {

struct Svg {
  std::ostringstream body;
  double w = 640, h = 400, left = 70, right = 20, top = 30, bottom = 60;

  double px(double t) const { return left + t * (w - left - right); }
  double py(double t) const { return h - bottom - t * (h - top - bottom); }

  void text(double x, double y, const std::string& s, const char* anchor = "middle") {
    body << "<text x='" << x << "' y='" << y << "' font-size='12' text-anchor='" << anchor
         << "'>" << s << "</text>\n";
  }
  void axes(double ymin, double ymax, const std::string& ylabel) {
    body << "<line x1='" << left << "' y1='" << py(0) << "' x2='" << px(1) << "' y2='" << py(0)
         << "' stroke='black'/>\n";
    body << "<line x1='" << left << "' y1='" << py(0) << "' x2='" << left << "' y2='" << py(1)
         << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = ymin + (ymax - ymin) * i / 4.0;
      std::ostringstream s;
      s << std::setprecision(4) << v;
      text(left - 6, py(i / 4.0) + 4, s.str(), "end");
    }
    text(16, top - 10, ylabel, "start");
  }
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << body.str() << "</svg>\n";
  }
};

std::pair<double, double> range_of(const std::vector<double>& v) {
  double lo = 0.0, hi = 1.0;
  if (!v.empty()) {
    lo = std::min(0.0, *std::min_element(v.begin(), v.end()));
    hi = *std::max_element(v.begin(), v.end());
    if (hi <= lo) hi = lo + 1.0;
  }
  return {lo, hi};
}

}  // namespace

void write_speed_svg(const std::string& path, const std::vector<SpeedRow>& rows) {
  Svg svg;
  std::vector<double> ys;
  for (const auto& r : rows) {
    ys.push_back(r.dd.mean + r.dd.std);
    ys.push_back(r.mpc.mean + r.mpc.std);
    ys.push_back(r.dd.mean - r.dd.std);
    ys.push_back(r.mpc.mean - r.mpc.std);
  }
  const auto [lo, hi] = range_of(ys);
  svg.axes(lo, hi, "mean cost");
  const std::size_t n = rows.size();
  const char* colours[2] = {"#c0392b", "#2471a3"};
  for (std::size_t i = 0; i < n; ++i) {
    const double cx = svg.px((i + 0.5) / n);
    const CellSummary* cells[2] = {&rows[i].dd, &rows[i].mpc};
    for (int k = 0; k < 2; ++k) {
      const double x = cx + (k == 0 ? -12 : 12);
      const double y = svg.py((cells[k]->mean - lo) / (hi - lo));
      const double y0 = svg.py((cells[k]->mean - cells[k]->std - lo) / (hi - lo));
      const double y1 = svg.py((cells[k]->mean + cells[k]->std - lo) / (hi - lo));
      svg.body << "<line x1='" << x << "' y1='" << y0 << "' x2='" << x << "' y2='" << y1
               << "' stroke='" << colours[k] << "'/>\n";
      svg.body << "<circle cx='" << x << "' cy='" << y << "' r='4' fill='" << colours[k] << "'/>\n";
    }
    std::ostringstream s;
    s << rows[i].omega_nom;
    svg.text(cx, svg.py(0) + 18, s.str());
  }
  svg.text(svg.px(0.5), svg.h - 15, "nominal leg speed (rad/s)   red: DD   blue: MPC");
  svg.save(path);
}

void write_bar_svg(const std::string& path, const ExperimentReport& report) {
  Svg svg;
  svg.w = std::max(640.0, 40.0 * report.cells.size() + 100);
  std::vector<double> ys;
  for (const auto& c : report.cells) ys.push_back(c.mean + c.std);
  const auto [lo, hi] = range_of(ys);
  svg.axes(lo, hi, "mean cost");
  const std::size_t n = report.cells.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = report.cells[i];
    const double x = svg.px((i + 0.15) / n);
    const double bw = 0.7 * (svg.px(1) - svg.px(0)) / n;
    const double y = svg.py((c.mean - lo) / (hi - lo));
    const double y_zero = svg.py((0.0 - lo) / (hi - lo));
    svg.body << "<rect x='" << x << "' y='" << std::min(y, y_zero) << "' width='" << bw
             << "' height='" << std::abs(y_zero - y) << "' fill='#5d6d7e'/>\n";
    svg.body << "<text x='" << x + bw / 2 << "' y='" << svg.py(0) + 14
             << "' font-size='9' text-anchor='end' transform='rotate(-35 " << x + bw / 2 << ' '
             << svg.py(0) + 14 << ")'>" << c.controller << '/' << c.terrain << "</text>\n";
  }
  svg.save(path);
}

std::uint32_t file_crc(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot read '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return crc32(std::string_view(bytes));
}

}  // namespace legmpc
