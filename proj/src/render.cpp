#include "dynaslide/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace dynaslide {

namespace {

std::string_view id_prefix(Role r) {
  switch (r) {
    case Role::title: return "title";
    case Role::caption: return "caption";
    case Role::table_body: return "table";
    case Role::chart_body: return "chart";
    case Role::summary: return "summary";
    case Role::unlabeled: return "shape";
  }
  return "shape";
}

ElementType type_for(Role r) {
  if (r == Role::table_body) return ElementType::table;
  if (r == Role::chart_body) return ElementType::chart;
  return ElementType::textBox;
}

SlideElement& checked_slot(SlideDocument& s, std::size_t slot, std::initializer_list<Role> roles) {
  if (slot >= s.elements.size()) throw Error(ErrorKind::UnknownRole, "no slot " + std::to_string(slot));
  SlideElement& e = s.elements[slot];
  if (std::find(roles.begin(), roles.end(), e.role) == roles.end()) {
    throw Error(ErrorKind::RoleMismatch, "slot '" + e.id + "' has role " + std::string(to_string(e.role)));
  }
  if (!e.text.empty() || !std::holds_alternative<std::monostate>(e.payload)) {
    throw Error(ErrorKind::SlotOccupied, e.id);
  }
  return e;
}

}  // namespace

SlideDocument create_slide(const TemplatePack& pack, int theme_id, int subtemplate_id) {
  const Subtemplate& sub = pack.subtemplate(subtemplate_id);
  if (sub.theme_id != theme_id) {
    throw Error(ErrorKind::UnknownSubtemplate, "subtemplate " + std::to_string(subtemplate_id) +
                                                   " does not belong to theme " + std::to_string(theme_id));
  }
  SlideDocument s;
  s.theme_id = theme_id;
  s.subtemplate_id = subtemplate_id;
  std::map<Role, int> seen;
  for (const auto& slot : sub.slots) {
    SlideElement e;
    e.id = std::string(id_prefix(slot.role)) + "-" + std::to_string(++seen[slot.role]);
    e.type = type_for(slot.role);
    e.role = slot.role;
    e.layout = slot.layout;
    s.elements.push_back(std::move(e));
  }
  return s;
}

std::size_t slot_of(const SlideDocument& s, Role role, std::size_t nth) {
  for (std::size_t i = 0; i < s.elements.size(); ++i) {
    if (s.elements[i].role == role && nth-- == 0) return i;
  }
  throw Error(ErrorKind::UnknownRole, std::string(to_string(role)));
}

SlideDocument add_title(SlideDocument s, std::string text, std::size_t slot) {
  checked_slot(s, slot, {Role::title}).text = std::move(text);
  return s;
}

SlideDocument add_text(SlideDocument s, std::string text, std::size_t slot) {
  checked_slot(s, slot, {Role::caption, Role::summary}).text = std::move(text);
  return s;
}

SlideDocument add_table(SlideDocument s, AnalyticalTable table, std::size_t slot) {
  validate_table(table);
  checked_slot(s, slot, {Role::table_body}).payload = std::move(table);
  return s;
}

namespace {

SlideDocument add_chart(SlideDocument s, ChartSpec chart, std::size_t slot, ChartType type) {
  if (chart.categories.empty() || chart.series.empty()) throw Error(ErrorKind::EmptySeries, "chart has no data");
  validate_chart(chart);
  chart.chart_type = type;
  checked_slot(s, slot, {Role::chart_body}).payload = std::move(chart);
  return s;
}

}  // namespace

SlideDocument add_line_chart(SlideDocument s, ChartSpec chart, std::size_t slot) {
  return add_chart(std::move(s), std::move(chart), slot, ChartType::line);
}

SlideDocument add_bar_chart(SlideDocument s, ChartSpec chart, std::size_t slot) {
  return add_chart(std::move(s), std::move(chart), slot, ChartType::bar);
}

TableGeometry fit_table(const AnalyticalTable& t, const Rect& rect) {
  TableGeometry g;
  const int rows = static_cast<int>(t.rows()) + 1;
  const int cols = static_cast<int>(t.cols());
  g.row_height = std::max(1, rect.height / std::max(1, rows));
  // The index column gets a 1.5x share for its longer labels.
  const double share = static_cast<double>(rect.width) / (cols + 1.5);
  g.index_col_width = static_cast<int>(std::floor(share * 1.5));
  g.col_width = cols > 0 ? (rect.width - g.index_col_width) / cols : 0;
  g.font_size = std::clamp(g.row_height * 6 / 10, 6, 18);
  return g;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

const char* const kPalette[] = {"#4472c4", "#ed7d31", "#a5a5a5", "#ffc000", "#5b9bd5", "#70ad47"};

}  // namespace

std::string render_chart_svg(const ChartSpec& spec, const Rect& rect) {
  if (spec.categories.empty() || spec.series.empty()) throw Error(ErrorKind::EmptySeries, "nothing to plot");
  validate_chart(spec);
  const double w = rect.width, h = rect.height;
  const double left = 60, right = 20, top = 30, bottom = 50;
  const double plot_w = std::max(1.0, w - left - right);
  const double plot_h = std::max(1.0, h - top - bottom);
  double lo = 0.0, hi = 0.0;
  for (const auto& s : spec.series) {
    for (const auto& v : s.values) {
      if (!v) continue;
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
  }
  if (hi == lo) hi = lo + 1.0;
  auto y_of = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };
  const double band = plot_w / static_cast<double>(spec.categories.size());

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(rect.width) +
         "\" height=\"" + std::to_string(rect.height) + "\" viewBox=\"0 0 " + std::to_string(rect.width) + " " +
         std::to_string(rect.height) + "\">\n";
  out += "<g class=\"axes\" stroke=\"#333333\">";
  out += "<line x1=\"" + num(left) + "\" y1=\"" + num(top) + "\" x2=\"" + num(left) + "\" y2=\"" +
         num(top + plot_h) + "\"/>";
  out += "<line x1=\"" + num(left) + "\" y1=\"" + num(y_of(0.0)) + "\" x2=\"" + num(left + plot_w) + "\" y2=\"" +
         num(y_of(0.0)) + "\"/>";
  out += "</g>\n";

  out += "<g class=\"categories\" font-size=\"11\" text-anchor=\"middle\">";
  for (std::size_t i = 0; i < spec.categories.size(); ++i) {
    out += "<text x=\"" + num(left + band * (static_cast<double>(i) + 0.5)) + "\" y=\"" + num(top + plot_h + 16) +
           "\">" + xml_escape(spec.categories[i]) + "</text>";
  }
  out += "</g>\n";

  const std::size_t n = spec.series.size();
  for (std::size_t s = 0; s < n; ++s) {
    const auto& series = spec.series[s];
    const char* color = kPalette[s % 6];
    out += "<g class=\"series\" fill=\"" + std::string(color) + "\">";
    if (spec.chart_type == ChartType::bar) {
      const double bar_w = band * 0.8 / static_cast<double>(n);
      for (std::size_t i = 0; i < series.values.size(); ++i) {
        if (!series.values[i]) continue;
        const double v = *series.values[i];
        const double y0 = y_of(std::max(v, 0.0));
        const double y1 = y_of(std::min(v, 0.0));
        out += "<rect x=\"" + num(left + band * static_cast<double>(i) + band * 0.1 + bar_w * static_cast<double>(s)) +
               "\" y=\"" + num(y0) + "\" width=\"" + num(bar_w) + "\" height=\"" + num(y1 - y0) + "\"/>";
      }
    } else {
      std::string points;
      for (std::size_t i = 0; i < series.values.size(); ++i) {
        if (!series.values[i]) continue;
        if (!points.empty()) points += ' ';
        points += num(left + band * (static_cast<double>(i) + 0.5)) + "," + num(y_of(*series.values[i]));
      }
      out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + points +
             "\"/>";
    }
    out += "</g>\n";
  }

  out += "<g class=\"legend\" font-size=\"11\">";
  for (std::size_t s = 0; s < n; ++s) {
    const double x = left + 150.0 * static_cast<double>(s);
    out += "<circle cx=\"" + num(x + 5) + "\" cy=\"" + num(top - 14) + "\" r=\"5\" fill=\"" +
           std::string(kPalette[s % 6]) + "\"/>";
    out += "<text x=\"" + num(x + 14) + "\" y=\"" + num(top - 10) + "\">" + xml_escape(spec.series[s].name) +
           "</text>";
  }
  out += "</g>\n</svg>\n";
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void fill(SlideElement& e, const Content& c) {
  if (const auto* text = std::get_if<std::string>(&c)) {
    if (e.type != ElementType::textBox) throw Error(ErrorKind::RoleMismatch, "text into " + e.id);
    e.text = *text;
  } else if (const auto* t = std::get_if<AnalyticalTable>(&c)) {
    if (e.role != Role::table_body) throw Error(ErrorKind::RoleMismatch, "table into " + e.id);
    e.payload = *t;
  } else {
    if (e.role != Role::chart_body) throw Error(ErrorKind::RoleMismatch, "chart into " + e.id);
    e.payload = std::get<ChartSpec>(c);
  }
}

}  // namespace

SlideDocument repopulate(const SlideDocument& source, const std::map<Role, Content>& by_role) {
  SlideDocument out = source;
  for (const auto& [role, content] : by_role) {
    bool found = false;
    for (auto& e : out.elements) {
      if (e.role != role) continue;
      fill(e, content);
      found = true;
    }
    if (!found) throw Error(ErrorKind::UnknownRole, std::string(to_string(role)));
  }
  return out;
}

SlideDocument repopulate(const SlideDocument& source, const std::map<std::string, Content>& by_id) {
  SlideDocument out = source;
  for (const auto& [id, content] : by_id) {
    auto it = std::find_if(out.elements.begin(), out.elements.end(), [&](const SlideElement& e) { return e.id == id; });
    if (it == out.elements.end()) throw Error(ErrorKind::UnknownRole, "no element '" + id + "'");
    fill(*it, content);
  }
  return out;
}

SlideDocument strip_content(SlideDocument s) {
  for (auto& e : s.elements) {
    e.text.clear();
    e.payload = std::monostate{};
  }
  return s;
}

}  // namespace dynaslide
