#pragma once

// Report rows shaped like the evaluation table: one line per point, and per
// epsilon a Robust?/Par./Seq. cell group. Text render plus long-form CSV.

#include <array>
#include <charconv>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "relucheck/common.hpp"

namespace relucheck {

enum class RobustCell { Yes, No, Timeout };

struct ReportCell {
    RobustCell robust = RobustCell::Timeout;
    std::optional<double> par_s; // wall seconds, parallel run
    std::optional<double> seq_s; // wall seconds, workers=1 baseline
};

struct ReportRow {
    std::string point;
    std::map<double, ReportCell> cells; // keyed by epsilon
};

enum class ReportFormat { Text, Csv };

struct RenderedTable {
    std::string text;
    std::vector<std::string> warnings;
};

// Shortest decimal form, at most 3 fractional digits; whole seconds render
// without a decimal point.
inline std::string format_seconds(double s) {
    double rounded = s;
    if (is_finite(s)) {
        rounded = std::round(s * 1000.0) / 1000.0;
        if (rounded == 0.0) rounded = 0.0; // normalize -0
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), rounded);
    return std::string(buf, res.ptr);
}

inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string robust_cell_name(RobustCell c) {
    switch (c) {
    case RobustCell::Yes: return "Yes";
    case RobustCell::No: return "No";
    default: return "Timeout";
    }
}

namespace detail {

inline std::string pad_left(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}
inline std::string pad_right(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

} // namespace detail

// Renders the table. Every row must carry exactly the given epsilon cells.
// Cells that break epsilon-monotonicity (robust at a smaller epsilon but not
// at a larger one) produce a warning, not a failure.
inline RenderedTable emit_table(const std::vector<ReportRow>& rows,
                                const std::vector<double>& epsilons, ReportFormat format) {
    RenderedTable out;
    for (const ReportRow& row : rows) {
        if (row.cells.size() != epsilons.size())
            throw InputError("row '" + row.point + "' has an inconsistent epsilon set");
        for (double eps : epsilons)
            if (!row.cells.count(eps))
                throw InputError("row '" + row.point + "' misses eps=" + format_number(eps));
        bool robust_seen = false;
        for (const auto& [eps, cell] : row.cells) {
            if (cell.robust == RobustCell::Yes) robust_seen = true;
            else if (robust_seen && cell.robust == RobustCell::No)
                out.warnings.push_back("row '" + row.point +
                                       "' breaks epsilon-monotonicity at eps=" +
                                       format_number(eps));
        }
    }

    std::ostringstream os;
    if (format == ReportFormat::Csv) {
        os << "point,eps,robust,par_s,seq_s\n";
        for (const ReportRow& row : rows)
            for (double eps : epsilons) {
                const ReportCell& c = row.cells.at(eps);
                os << row.point << ',' << format_number(eps) << ',';
                switch (c.robust) {
                case RobustCell::Yes: os << "yes"; break;
                case RobustCell::No: os << "no"; break;
                default: os << "timeout"; break;
                }
                os << ',' << (c.par_s ? format_seconds(*c.par_s) : "-");
                os << ',' << (c.seq_s ? format_seconds(*c.seq_s) : "-");
                os << '\n';
            }
        out.text = os.str();
        return out;
    }

    using detail::pad_left;
    using detail::pad_right;
    std::size_t w_point = 5; // "Point"
    for (const ReportRow& row : rows) w_point = std::max(w_point, row.point.size());
    std::vector<std::size_t> w_rob(epsilons.size(), 7); // "Robust?"
    std::vector<std::size_t> w_par(epsilons.size(), 4); // "Par."
    std::vector<std::size_t> w_seq(epsilons.size(), 4); // "Seq."
    auto cell_strings = [](const ReportCell& c) {
        return std::array<std::string, 3>{robust_cell_name(c.robust),
                                          c.par_s ? format_seconds(*c.par_s) : "-",
                                          c.seq_s ? format_seconds(*c.seq_s) : "-"};
    };
    for (const ReportRow& row : rows)
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
            const auto s = cell_strings(row.cells.at(epsilons[e]));
            w_rob[e] = std::max(w_rob[e], s[0].size());
            w_par[e] = std::max(w_par[e], s[1].size());
            w_seq[e] = std::max(w_seq[e], s[2].size());
        }

    os << pad_right("Point", w_point);
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        const std::size_t gw = w_rob[e] + 1 + w_par[e] + 1 + w_seq[e];
        const bool last = e + 1 == epsilons.size();
        const std::string head = "eps=" + format_number(epsilons[e]);
        os << " | " << (last ? head : pad_right(head, gw));
    }
    os << '\n';
    os << std::string(w_point, ' ');
    for (std::size_t e = 0; e < epsilons.size(); ++e)
        os << " | " << pad_right("Robust?", w_rob[e]) << ' ' << pad_left("Par.", w_par[e])
           << ' ' << pad_left("Seq.", w_seq[e]);
    os << '\n';
    os << std::string(w_point, '-');
    for (std::size_t e = 0; e < epsilons.size(); ++e)
        os << "-+-" << std::string(w_rob[e] + 1 + w_par[e] + 1 + w_seq[e], '-');
    os << '\n';
    for (const ReportRow& row : rows) {
        os << pad_right(row.point, w_point);
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
            const auto s = cell_strings(row.cells.at(epsilons[e]));
            os << " | " << pad_right(s[0], w_rob[e]) << ' ' << pad_left(s[1], w_par[e])
               << ' ' << pad_left(s[2], w_seq[e]);
        }
        os << '\n';
    }
    out.text = os.str();
    return out;
}

struct ParsedTable {
    std::vector<ReportRow> rows;
    std::vector<double> epsilons;
};

// Inverse of the CSV render, for downstream tooling and round-trip tests.
inline ParsedTable parse_table_csv(const std::string& text) {
    ParsedTable out;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "point,eps,robust,par_s,seq_s")
        throw InputError("bad csv header");
    std::map<std::string, std::size_t> row_index;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        fields.push_back(cur);
        if (fields.size() != 5) throw InputError("bad csv row: " + line);
        const double eps = std::stod(fields[1]);
        ReportCell cell;
        if (fields[2] == "yes") cell.robust = RobustCell::Yes;
        else if (fields[2] == "no") cell.robust = RobustCell::No;
        else if (fields[2] == "timeout") cell.robust = RobustCell::Timeout;
        else throw InputError("bad robust cell: " + fields[2]);
        if (fields[3] != "-") cell.par_s = std::stod(fields[3]);
        if (fields[4] != "-") cell.seq_s = std::stod(fields[4]);
        auto it = row_index.find(fields[0]);
        if (it == row_index.end()) {
            row_index.emplace(fields[0], out.rows.size());
            out.rows.push_back({fields[0], {}});
            it = row_index.find(fields[0]);
        }
        out.rows[it->second].cells[eps] = cell;
        bool known = false;
        for (double e : out.epsilons)
            if (e == eps) known = true;
        if (!known) out.epsilons.push_back(eps);
    }
    return out;
}

} // namespace relucheck
