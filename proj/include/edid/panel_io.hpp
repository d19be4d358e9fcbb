#pragma once

#include <iosfwd>
#include <string>

#include "edid/simulate.hpp"

namespace edid {

// Panels serialize as CSV: optional leading '#' comment lines (manifest),
// then a header row y1,...,yT, then one row per observation. Values are
// printed with 17 significant digits so the round trip is bit exact.
void write_panel_csv(std::ostream& os, const Panel& panel,
                     const std::string& manifest_comment = "");
void write_panel_csv_file(const std::string& path, const Panel& panel,
                          const std::string& manifest_comment = "");

// expected_T < 0 accepts any width; otherwise a width mismatch is an error.
Panel read_panel_csv(std::istream& is, int expected_T = -1);
Panel read_panel_csv_file(const std::string& path, int expected_T = -1);

} // namespace edid
