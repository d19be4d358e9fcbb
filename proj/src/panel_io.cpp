#include "edid/panel_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "edid/errors.hpp"

namespace edid {

namespace {

[[noreturn]] void fail_line(size_t line_no, const std::string& what) {
    std::ostringstream os;
    os << "panel csv: line " << line_no << ": " << what;
    throw ValidationError(os.str());
}

} // namespace

void write_panel_csv(std::ostream& os, const Panel& panel,
                     const std::string& manifest_comment) {
    if (!manifest_comment.empty())
        os << "# " << manifest_comment << "\n";
    const int T = panel.T();
    for (int t = 1; t <= T; ++t)
        os << (t > 1 ? "," : "") << "y" << t;
    os << "\n";
    char buf[32];
    for (int i = 0; i < panel.n(); ++i) {
        for (int t = 0; t < T; ++t) {
            const int len = std::snprintf(buf, sizeof(buf), "%.17g", panel.y(i, t));
            if (t > 0)
                os << ",";
            os.write(buf, len);
        }
        os << "\n";
    }
}

void write_panel_csv_file(const std::string& path, const Panel& panel,
                          const std::string& manifest_comment) {
    std::ofstream out(path);
    if (!out)
        throw ValidationError("panel csv: cannot open '" + path + "' for writing");
    write_panel_csv(out, panel, manifest_comment);
    if (!out)
        throw ValidationError("panel csv: write to '" + path + "' failed");
}

Panel read_panel_csv(std::istream& is, int expected_T) {
    std::string line;
    size_t line_no = 0;

    // skip comments, read header
    int T = -1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        std::stringstream header(line);
        std::string col;
        int t = 0;
        while (std::getline(header, col, ',')) {
            ++t;
            std::ostringstream expect;
            expect << "y" << t;
            if (col != expect.str())
                fail_line(line_no, "bad header column '" + col + "', expected '" +
                                       expect.str() + "'");
        }
        T = t;
        break;
    }
    if (T <= 0)
        fail_line(line_no, "missing header row");
    if (expected_T >= 0 && T != expected_T) {
        std::ostringstream os;
        os << "header has T = " << T << " but the model expects T = " << expected_T;
        fail_line(line_no, os.str());
    }

    std::vector<double> values;
    size_t n_rows = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line[0] == '#')
            fail_line(line_no, "comment lines are only allowed before the header");
        const char* p = line.data();
        const char* end = line.data() + line.size();
        int t = 0;
        while (true) {
            double v = 0.0;
            const auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc{})
                fail_line(line_no, "cannot parse number in column " + std::to_string(t + 1));
            values.push_back(v);
            ++t;
            if (next == end)
                break;
            if (*next != ',')
                fail_line(line_no, "expected ',' after column " + std::to_string(t));
            p = next + 1;
            if (p == end)
                fail_line(line_no, "trailing comma");
        }
        if (t != T)
            fail_line(line_no, "expected " + std::to_string(T) + " columns, got " +
                                   std::to_string(t));
        ++n_rows;
    }
    if (n_rows == 0)
        throw ValidationError("panel csv: no observation rows");

    Panel panel;
    panel.y.resize(static_cast<Eigen::Index>(n_rows), T);
    for (size_t i = 0; i < n_rows; ++i)
        for (int t = 0; t < T; ++t)
            panel.y(static_cast<Eigen::Index>(i), t) = values[i * T + t];
    return panel;
}

Panel read_panel_csv_file(const std::string& path, int expected_T) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("panel csv: cannot open '" + path + "'");
    return read_panel_csv(in, expected_T);
}

} // namespace edid
