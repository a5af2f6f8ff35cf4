#include "pushlab/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pushlab/jsonio.hpp"

namespace pushlab::report {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string num6(double v) { return fmt("%.6f", v); }
std::string mm2(double v) { return fmt("%.2f", v * 1e3); }  // meters -> mm, two decimals

void svg_circle(std::ostringstream& out, const Vec2& c, double r, const char* style) {
  out << "  <circle cx=\"" << mm2(c.x()) << "\" cy=\"" << mm2(-c.y()) << "\" r=\"" << mm2(r)
      << "\" " << style << "/>\n";
}

}  // namespace

std::string metrics_csv(const std::vector<eval::MetricsReport>& reports) {
  std::ostringstream out;
  out << "model,object,trans_pct,pos_mm,rot_deg\n";
  for (const auto& rep : reports)
    for (std::size_t i = 0; i < rep.objects.size(); ++i) {
      const auto& o = rep.objects[i];
      out << rep.model << ',' << (i + 1) << ',' << num6(o.trans_pct) << ',' << num6(o.pos_mm)
          << ',' << num6(o.rot_deg) << '\n';
    }
  return out.str();
}

nlohmann::json metrics_json(const eval::MetricsReport& rep) {
  nlohmann::json objects = nlohmann::json::array();
  for (std::size_t i = 0; i < rep.objects.size(); ++i) {
    const auto& o = rep.objects[i];
    objects.push_back({{"object", i + 1},
                       {"trans_pct", o.trans_pct},
                       {"pos_mm", o.pos_mm},
                       {"rot_deg", o.rot_deg},
                       {"n_total", o.n_total},
                       {"n_trans", o.n_trans}});
  }
  return {{"model", rep.model},
          {"horizon", rep.horizon},
          {"trans_denominator", "ground-truth displacement of the object from its initial pose"},
          {"objects", objects}};
}

nlohmann::json control_json(const eval::ControlReport& rep) {
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto& ep : rep.episodes)
    episodes.push_back({{"index", ep.index},
                        {"hard", ep.hard},
                        {"success", ep.success},
                        {"actions_used", ep.actions_used},
                        {"final_distance_mm", ep.final_distance * 1e3},
                        {"goal", {ep.goal.position.x(), ep.goal.position.y()}},
                        {"tolerance", ep.goal.tolerance},
                        {"radii", ep.radii},
                        {"disk1_path", matrix_to_json(ep.disk1_path)},
                        {"disk2_path", matrix_to_json(ep.disk2_path)}});
  return {{"model", rep.model},
          {"world", rep.world},
          {"n_easy", rep.n_easy},
          {"n_hard", rep.n_hard},
          {"easy_success", rep.easy_success},
          {"hard_success", rep.hard_success},
          {"episodes", episodes}};
}

eval::MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  eval::MetricsReport rep;
  j.at("model").get_to(rep.model);
  j.at("horizon").get_to(rep.horizon);
  for (const auto& e : j.at("objects")) {
    eval::ObjectMetrics o;
    e.at("trans_pct").get_to(o.trans_pct);
    e.at("pos_mm").get_to(o.pos_mm);
    e.at("rot_deg").get_to(o.rot_deg);
    e.at("n_total").get_to(o.n_total);
    e.at("n_trans").get_to(o.n_trans);
    rep.objects.push_back(o);
  }
  return rep;
}

eval::ControlReport control_report_from_json(const nlohmann::json& j) {
  eval::ControlReport rep;
  j.at("model").get_to(rep.model);
  j.at("world").get_to(rep.world);
  j.at("n_easy").get_to(rep.n_easy);
  j.at("n_hard").get_to(rep.n_hard);
  j.at("easy_success").get_to(rep.easy_success);
  j.at("hard_success").get_to(rep.hard_success);
  for (const auto& e : j.at("episodes")) {
    eval::EpisodeOutcome ep;
    e.at("index").get_to(ep.index);
    e.at("hard").get_to(ep.hard);
    e.at("success").get_to(ep.success);
    e.at("actions_used").get_to(ep.actions_used);
    ep.final_distance = e.at("final_distance_mm").get<double>() * 1e-3;
    ep.goal.position = Vec2(e.at("goal")[0].get<double>(), e.at("goal")[1].get<double>());
    e.at("tolerance").get_to(ep.goal.tolerance);
    e.at("radii").get_to(ep.radii);
    ep.disk1_path = matrix_from_json(e.at("disk1_path"), 2);
    ep.disk2_path = matrix_from_json(e.at("disk2_path"), 2);
    rep.episodes.push_back(std::move(ep));
  }
  return rep;
}

std::string episode_svg(const eval::EpisodeOutcome& ep) {
  require(ep.disk1_path.rows() >= 1 && ep.disk2_path.rows() == ep.disk1_path.rows() &&
              ep.radii.size() >= 2,
          "episode svg: incomplete episode outcome");
  const int last = static_cast<int>(ep.disk1_path.rows()) - 1;

  double xmin = ep.goal.position.x(), xmax = xmin;
  double ymin = ep.goal.position.y(), ymax = ymin;
  auto grow = [&](double x, double y) {
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  };
  for (int r = 0; r <= last; ++r) {
    grow(ep.disk1_path(r, 0), ep.disk1_path(r, 1));
    grow(ep.disk2_path(r, 0), ep.disk2_path(r, 1));
  }
  const double pad = *std::max_element(ep.radii.begin(), ep.radii.end()) + ep.goal.tolerance +
                     0.01;
  xmin -= pad, xmax += pad, ymin -= pad, ymax += pad;

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << mm2(xmin) << " " << mm2(-ymax)
      << " " << mm2(xmax - xmin) << " " << mm2(ymax - ymin) << "\">\n";
  out << "  <!-- millimeters, y up -->\n";

  const char* initial1 =
      "fill=\"none\" stroke=\"#7a9cc6\" stroke-width=\"1\" stroke-dasharray=\"4 3\"";
  const char* initial2 =
      "fill=\"none\" stroke=\"#c6897a\" stroke-width=\"1\" stroke-dasharray=\"4 3\"";
  svg_circle(out, ep.disk1_path.row(0).transpose(), ep.radii[0], initial1);
  svg_circle(out, ep.disk2_path.row(0).transpose(), ep.radii[1], initial2);

  svg_circle(out, ep.goal.position, ep.goal.tolerance,
             "fill=\"none\" stroke=\"#3aa053\" stroke-width=\"1.5\"");
  svg_circle(out, ep.goal.position, 0.001, "fill=\"#3aa053\" stroke=\"none\"");

  out << "  <polyline fill=\"none\" stroke=\"#c6897a\" stroke-width=\"1.5\" points=\"";
  for (int r = 0; r <= last; ++r) {
    if (r) out << ' ';
    out << mm2(ep.disk2_path(r, 0)) << ',' << mm2(-ep.disk2_path(r, 1));
  }
  out << "\"/>\n";

  svg_circle(out, ep.disk1_path.row(last).transpose(), ep.radii[0],
             "fill=\"none\" stroke=\"#2f5d8f\" stroke-width=\"2\"");
  svg_circle(out, ep.disk2_path.row(last).transpose(), ep.radii[1],
             "fill=\"none\" stroke=\"#9c4a36\" stroke-width=\"2\"");
  out << "</svg>\n";
  return out.str();
}

std::string episode_filename(const eval::EpisodeOutcome& ep) {
  return "episode_" + std::to_string(ep.index) + (ep.hard ? "_hard" : "_easy") + ".svg";
}

std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "hash: cannot open " + path);
  std::uint64_t h = 14695981039346656037ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (in.eof()) break;
  }
  return h;
}

std::string fnv1a_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "report: cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  require(out.good(), "report: write failed for " + path);
}

}  // namespace pushlab::report
