#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <sstream>

#include "dynaslide/render.hpp"
#include "dynaslide/stats.hpp"

using namespace dynaslide;
namespace pt = boost::property_tree;

namespace {

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorKind::IoError;
}

pt::ptree parse_svg(const std::string& text) {
  std::istringstream in(text);
  pt::ptree tree;
  pt::read_xml(in, tree);
  return tree;
}

// Every element with the given tag anywhere below node.
void collect(const pt::ptree& node, const std::string& tag, std::vector<const pt::ptree*>& out) {
  for (const auto& [name, child] : node) {
    if (name == tag) out.push_back(&child);
    collect(child, tag, out);
  }
}

std::vector<const pt::ptree*> find_all(const pt::ptree& tree, const std::string& tag) {
  std::vector<const pt::ptree*> out;
  collect(tree, tag, out);
  return out;
}

AnalyticalTable year_table() {
  AnalyticalTable t;
  t.structure = Structure::CF;
  t.index_header = "Year";
  t.row_headers = {"2021", "2022", "2023", "2024"};
  t.col_headers = {"Trade Volume"};
  t.col_canon = {"trade volume"};
  t.cells = {{10.0}, {20.0}, {15.0}, {30.0}};
  return t;
}

// Theme and sub-template of the first pack layout with a table and a chart.
std::pair<int, int> table_chart_layout() {
  for (const auto& sub : default_pack().subtemplates) {
    bool table = false, chart = false;
    for (const auto& s : sub.slots) {
      table = table || s.role == Role::table_body;
      chart = chart || s.role == Role::chart_body;
    }
    if (table && chart) return {sub.theme_id, sub.id};
  }
  return {0, 0};
}

SlideDocument filled_slide() {
  const auto [theme, sub] = table_chart_layout();
  SlideDocument s = create_slide(default_pack(), theme, sub);
  s = add_title(std::move(s), "Title", slot_of(s, Role::title));
  for (std::size_t i = 0; i < s.elements.size(); ++i) {
    if (s.elements[i].role == Role::caption) s = add_text(std::move(s), "Caption", i);
  }
  s = add_table(std::move(s), year_table(), slot_of(s, Role::table_body));
  s = add_line_chart(std::move(s), chart_from_table(year_table(), ChartType::line), slot_of(s, Role::chart_body));
  s = add_text(std::move(s), "Summary", slot_of(s, Role::summary));
  return s;
}

}  // namespace

TEST(Slides, ScaffoldFollowsSubtemplate) {
  const auto& pack = default_pack();
  for (const auto& sub : pack.subtemplates) {
    const SlideDocument s = create_slide(pack, sub.theme_id, sub.id);
    ASSERT_EQ(s.elements.size(), sub.slots.size());
    for (std::size_t i = 0; i < s.elements.size(); ++i) {
      EXPECT_EQ(s.elements[i].role, sub.slots[i].role);
      EXPECT_EQ(s.elements[i].layout, sub.slots[i].layout);
      EXPECT_TRUE(s.elements[i].text.empty());
    }
  }
  const auto& sub = pack.subtemplates.front();
  EXPECT_EQ(kind_of([&] { create_slide(pack, sub.theme_id % 6 + 1, sub.id); }), ErrorKind::UnknownSubtemplate);
  EXPECT_EQ(kind_of([&] { create_slide(pack, 1, 9999); }), ErrorKind::UnknownSubtemplate);
}

TEST(Slides, AddersCheckRolesAndOccupancy) {
  SlideDocument s = filled_slide();
  EXPECT_NO_THROW(validate_slide(s));
  EXPECT_EQ(s.chart()->chart_type, ChartType::line);
  EXPECT_EQ(*s.table(), year_table());
  const auto [theme, sub] = table_chart_layout();
  SlideDocument empty = create_slide(default_pack(), theme, sub);
  EXPECT_EQ(kind_of([&] { add_title(empty, "x", slot_of(empty, Role::summary)); }), ErrorKind::RoleMismatch);
  EXPECT_EQ(kind_of([&] { add_title(s, "again", slot_of(s, Role::title)); }), ErrorKind::SlotOccupied);
  EXPECT_EQ(kind_of([&] { add_text(empty, "x", 999); }), ErrorKind::UnknownRole);
  EXPECT_EQ(kind_of([&] { add_bar_chart(empty, ChartSpec{}, slot_of(empty, Role::chart_body)); }),
            ErrorKind::EmptySeries);
}

TEST(Slides, RepopulateKeepsLayout) {
  const SlideDocument s = filled_slide();
  AnalyticalTable t2 = year_table();
  t2.cells[0][0] = 99.0;
  const SlideDocument r = repopulate(
      s, std::map<Role, Content>{{Role::title, std::string("New title")}, {Role::table_body, t2},
                                 {Role::chart_body, chart_from_table(t2, ChartType::line)}});
  EXPECT_EQ(strip_content(r), strip_content(s));
  EXPECT_EQ(r.find_role(Role::title)->text, "New title");
  EXPECT_EQ(*r.table(), t2);
  EXPECT_EQ(r.find_role(Role::summary)->text, "Summary");
  const SlideDocument by_id = repopulate(s, std::map<std::string, Content>{{"summary-1", std::string("S2")}});
  EXPECT_EQ(by_id.find_role(Role::summary)->text, "S2");
  EXPECT_EQ(kind_of([&] { repopulate(s, std::map<std::string, Content>{{"nope-1", std::string("x")}}); }),
            ErrorKind::UnknownRole);
  EXPECT_EQ(kind_of([&] { repopulate(s, std::map<Role, Content>{{Role::title, year_table()}}); }),
            ErrorKind::RoleMismatch);
}

TEST(Slides, StripContentClearsEverything) {
  const SlideDocument s = strip_content(filled_slide());
  for (const auto& e : s.elements) {
    EXPECT_TRUE(e.text.empty());
    EXPECT_TRUE(std::holds_alternative<std::monostate>(e.payload));
  }
}

TEST(Geometry, TableFitsRect) {
  const Rect rect{0, 0, 600, 400};
  const auto g = fit_table(year_table(), rect);
  EXPECT_EQ(g.row_height, 80);
  EXPECT_EQ(g.index_col_width, 360);
  EXPECT_EQ(g.col_width, 240);
  EXPECT_EQ(g.font_size, 18);
  AnalyticalTable big = year_table();
  big.row_headers.resize(60, "x");
  big.cells.resize(60, {1.0});
  const auto small = fit_table(big, rect);
  EXPECT_LE(small.row_height * 61, rect.height);
  EXPECT_EQ(small.font_size, 6);
}

TEST(Svg, BarChartHasOneRectPerValue) {
  ChartSpec c{ChartType::bar, {"a", "b"}, {{"s1", {1.0, 2.0}}, {"s2", {3.0, 4.0}}}};
  const std::string svg = render_chart_svg(c, {0, 0, 640, 360});
  const auto tree = parse_svg(svg);
  EXPECT_EQ(tree.get<int>("svg.<xmlattr>.width"), 640);
  EXPECT_EQ(find_all(tree, "rect").size(), 4u);
  EXPECT_EQ(find_all(tree, "polyline").size(), 0u);
}

TEST(Svg, LinePointsFollowValues) {
  ChartSpec c{ChartType::line, {"2021", "2022", "2023", "2024"}, {{"up", {1.0, 2.0, 3.0, 5.0}}}};
  const auto tree = parse_svg(render_chart_svg(c, {0, 0, 800, 400}));
  const auto lines = find_all(tree, "polyline");
  ASSERT_EQ(lines.size(), 1u);
  std::istringstream pts(lines[0]->get<std::string>("<xmlattr>.points"));
  std::vector<std::pair<double, double>> xy;
  std::string pair;
  while (pts >> pair) {
    const auto comma = pair.find(',');
    xy.emplace_back(std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1)));
  }
  ASSERT_EQ(xy.size(), 4u);
  for (std::size_t i = 1; i < xy.size(); ++i) {
    EXPECT_GT(xy[i].first, xy[i - 1].first);
    EXPECT_LT(xy[i].second, xy[i - 1].second);  // SVG y grows downward
    EXPECT_GE(xy[i].second, 0.0);
    EXPECT_LE(xy[i].second, 400.0);
  }
  EXPECT_EQ(find_all(tree, "rect").size(), 0u);
}

TEST(Svg, EscapesTextAndRejectsEmpty) {
  ChartSpec c{ChartType::bar, {"<a&b>"}, {{"O'Neil \"x\"", {1.0}}}};
  const auto tree = parse_svg(render_chart_svg(c, {0, 0, 300, 200}));
  std::vector<std::string> texts;
  for (const auto* t : find_all(tree, "text")) texts.push_back(t->data());
  EXPECT_NE(std::find(texts.begin(), texts.end(), "<a&b>"), texts.end());
  EXPECT_NE(std::find(texts.begin(), texts.end(), "O'Neil \"x\""), texts.end());
  EXPECT_EQ(kind_of([] { render_chart_svg(ChartSpec{}, {0, 0, 10, 10}); }), ErrorKind::EmptySeries);
}
