#pragma once

// Shared test fixtures.

#include <vector>

#include "relucheck/report.hpp"

namespace testsupport {

// The published evaluation rows: five input points, three epsilon columns,
// robust?/parallel/sequential seconds.
inline std::vector<relucheck::ReportRow> evaluation_table_rows() {
    using relucheck::ReportCell;
    using relucheck::ReportRow;
    using relucheck::RobustCell;
    auto cell = [](RobustCell r, double par, double seq) {
        ReportCell c;
        c.robust = r;
        c.par_s = par;
        c.seq_s = seq;
        return c;
    };
    const RobustCell Y = RobustCell::Yes, N = RobustCell::No;
    std::vector<ReportRow> rows(5);
    rows[0] = {"1",
               {{0.01, cell(N, 5, 5)},
                {0.02, cell(N, 785, 7548)},
                {0.03, cell(Y, 9145, 38161)}}};
    rows[1] = {"2",
               {{0.01, cell(Y, 277, 1272)},
                {0.02, cell(Y, 248, 989)},
                {0.03, cell(Y, 191, 747)}}};
    rows[2] = {"3",
               {{0.01, cell(Y, 103, 460)},
                {0.02, cell(Y, 134, 480)},
                {0.03, cell(Y, 93, 400)}}};
    rows[3] = {"4",
               {{0.01, cell(N, 17, 17)},
                {0.02, cell(Y, 249, 774)},
                {0.03, cell(Y, 132, 512)}}};
    rows[4] = {"5",
               {{0.01, cell(Y, 333, 1479)},
                {0.02, cell(Y, 259, 1115)},
                {0.03, cell(Y, 230, 934)}}};
    return rows;
}

inline std::vector<double> evaluation_table_epsilons() { return {0.01, 0.02, 0.03}; }

} // namespace testsupport
