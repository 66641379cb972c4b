#pragma once

// Slide assembly on fixed sub-template layouts, SVG chart rendering and
// layout-preserving re-population.

#include <map>
#include <string>
#include <variant>

#include "dynaslide/model.hpp"
#include "dynaslide/templates.hpp"

namespace dynaslide {

// Empty scaffold: one element per sub-template slot, ids "<kind>-<n>".
// UnknownSubtemplate for ids outside the pack or a theme mismatch.
SlideDocument create_slide(const TemplatePack& pack, int theme_id, int subtemplate_id);

// Position of the nth element with the given role; UnknownRole if absent.
std::size_t slot_of(const SlideDocument& s, Role role, std::size_t nth = 0);

// Each fills one empty slot in place. RoleMismatch / SlotOccupied.
SlideDocument add_title(SlideDocument s, std::string text, std::size_t slot);
SlideDocument add_text(SlideDocument s, std::string text, std::size_t slot);  // caption or summary
SlideDocument add_table(SlideDocument s, AnalyticalTable table, std::size_t slot);
SlideDocument add_line_chart(SlideDocument s, ChartSpec chart, std::size_t slot);
SlideDocument add_bar_chart(SlideDocument s, ChartSpec chart, std::size_t slot);

struct TableGeometry {
  int row_height = 0;
  int index_col_width = 0;
  int col_width = 0;
  int font_size = 0;
};

// Row/column sizes that fit the header row, index column and cells into rect.
TableGeometry fit_table(const AnalyticalTable& t, const Rect& rect);

// SVG 1.1 document sized to rect. EmptySeries when there is nothing to plot.
std::string render_chart_svg(const ChartSpec& spec, const Rect& rect);

using Content = std::variant<std::string, AnalyticalTable, ChartSpec>;

// Replaces text / payload of the addressed elements; ids, roles, order and
// layout stay untouched. UnknownRole when a key matches no element,
// RoleMismatch when the content kind does not fit the element.
SlideDocument repopulate(const SlideDocument& source, const std::map<Role, Content>& by_role);
SlideDocument repopulate(const SlideDocument& source, const std::map<std::string, Content>& by_id);

// Text and payload cleared: what layout-preservation checks compare.
SlideDocument strip_content(SlideDocument s);

}  // namespace dynaslide
