// Command-line front end: parses a network and a property spec file, runs
// the verification batch and emits per-property verdicts plus optional
// Robust?/Par./Seq. tables.

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relucheck/relucheck.hpp"

namespace {

using namespace relucheck;

struct RunConfig {
    std::string network_path;
    std::string spec_path;
    std::size_t workers = 1;
    double timeout = 60.0; // seconds, per property disjunct
    Norm norm = Norm::Linf;
    double margin = 1e-6;
    ReportFormat format = ReportFormat::Text;
    bool seq_baseline = false;
    std::string report_path;
    std::string mode = "verify";
};

// 0 all robust, 1 any violated, 2 any timeout (none violated), 3 input error.
struct ExitTracker {
    bool violated = false;
    bool timed_out = false;

    void observe(PropertyVerdict::Outcome o) {
        if (o == PropertyVerdict::Outcome::Violated) violated = true;
        if (o == PropertyVerdict::Outcome::Timeout ||
            o == PropertyVerdict::Outcome::ValidationFailure)
            timed_out = true;
    }
    int code() const { return violated ? 1 : (timed_out ? 2 : 0); }
};

std::string vec_str(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += format_number(v[i]);
    }
    return s + "]";
}

const char* kind_name(PropertyKind k) {
    switch (k) {
    case PropertyKind::LocalLabel: return "local-label";
    case PropertyKind::LocalConfidence: return "local-conf";
    default: return "global";
    }
}

std::string stats_str(const SearchStats& st, double seconds) {
    std::ostringstream os;
    os << "splits=" << st.splits << " lp_calls=" << st.lp_calls
       << " phases_fixed=" << st.phases_fixed << " time=" << format_seconds(seconds);
    return os.str();
}

void print_verdict(std::ostream& os, const RobustnessSpec& spec, const Network& net,
                   const PropertyVerdict& pv, double seconds) {
    switch (pv.outcome) {
    case PropertyVerdict::Outcome::Robust:
        os << "ROBUST kind=" << kind_name(spec.kind) << " delta=" << format_number(spec.delta);
        if (spec.kind != PropertyKind::LocalLabel)
            os << " eps=" << format_number(spec.epsilon);
        os << ' ' << stats_str(pv.stats, seconds) << '\n';
        break;
    case PropertyVerdict::Outcome::Violated: {
        const ViolationReport& r = *pv.violation;
        os << "VIOLATED ";
        if (r.points.size() == 1) {
            os << "x=" << vec_str(r.points[0]);
        } else {
            for (std::size_t c = 0; c < r.points.size(); ++c)
                os << (c ? " " : "") << 'x' << c + 1 << '=' << vec_str(r.points[c]);
        }
        os << " label=" << net.labels()[r.label] << " gap=" << format_number(r.gap) << ' '
           << stats_str(pv.stats, seconds) << '\n';
        break;
    }
    case PropertyVerdict::Outcome::Timeout:
        os << "TIMEOUT kind=" << kind_name(spec.kind) << " delta=" << format_number(spec.delta)
           << ' ' << stats_str(pv.stats, seconds) << '\n';
        break;
    case PropertyVerdict::Outcome::ValidationFailure:
        os << "VALIDATION-FAILURE kind=" << kind_name(spec.kind) << ' '
           << stats_str(pv.stats, seconds) << " diag: " << pv.diagnostic << '\n';
        break;
    }
}

void print_verdict_csv(std::ostream& os, int line_no, const RobustnessSpec& spec,
                       const Network& net, const PropertyVerdict& pv, double seconds) {
    const char* verdict = "timeout";
    if (pv.outcome == PropertyVerdict::Outcome::Robust) verdict = "robust";
    else if (pv.outcome == PropertyVerdict::Outcome::Violated) verdict = "violated";
    else if (pv.outcome == PropertyVerdict::Outcome::ValidationFailure)
        verdict = "validation-failure";
    os << line_no << ',' << kind_name(spec.kind) << ',' << verdict << ','
       << format_number(spec.delta) << ','
       << (spec.kind == PropertyKind::LocalLabel ? "-" : format_number(spec.epsilon)) << ',';
    if (pv.violation)
        os << net.labels()[pv.violation->label] << ',' << format_number(pv.violation->gap);
    else
        os << "-,-";
    os << ',' << pv.stats.splits << ',' << pv.stats.lp_calls << ',' << format_seconds(seconds)
       << '\n';
}

int run(const RunConfig& cfg) {
    auto net = std::make_shared<const Network>(parse_network_file(cfg.network_path));
    std::ifstream spec_in(cfg.spec_path);
    if (!spec_in) throw InputError("cannot open spec file '" + cfg.spec_path + "'");
    const std::vector<SpecLine> lines = parse_property_lines(spec_in, cfg.norm);

    Budget budget;
    budget.timeout_seconds = cfg.timeout;
    SolveOptions options;
    options.tol.margin = cfg.margin;

    std::ofstream report_file;
    std::ostream* report_os = &std::cout;
    if (!cfg.report_path.empty()) {
        report_file.open(cfg.report_path);
        if (!report_file)
            throw InputError("cannot open report file '" + cfg.report_path + "'");
        report_os = &report_file;
    }

    ExitTracker exit_tracker;
    PhaseCache cache;

    auto timed_verify = [&](const RobustnessSpec& spec, std::size_t workers) {
        const auto t0 = std::chrono::steady_clock::now();
        PropertyVerdict pv = verify_parallel(net, spec, workers, budget, options, &cache);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return std::make_pair(std::move(pv), secs);
    };

    if (cfg.mode == "report-table") {
        // Rows from local-conf lines, grouped by x0 in order of appearance.
        std::vector<std::vector<double>> points;
        std::vector<ReportRow> rows;
        std::vector<double> epsilons;
        for (const SpecLine& sl : lines) {
            const auto* spec = std::get_if<RobustnessSpec>(&sl.payload);
            if (!spec || spec->kind != PropertyKind::LocalConfidence) continue;
            std::size_t idx = points.size();
            for (std::size_t i = 0; i < points.size(); ++i)
                if (points[i] == spec->x0) idx = i;
            if (idx == points.size()) {
                points.push_back(spec->x0);
                rows.push_back({std::to_string(points.size()), {}});
            }
            bool known = false;
            for (double e : epsilons)
                if (e == spec->epsilon) known = true;
            if (!known) epsilons.push_back(spec->epsilon);

            auto [pv, par_secs] = timed_verify(*spec, cfg.workers);
            exit_tracker.observe(pv.outcome);
            ReportCell cell;
            cell.robust = pv.outcome == PropertyVerdict::Outcome::Robust ? RobustCell::Yes
                          : pv.outcome == PropertyVerdict::Outcome::Violated
                              ? RobustCell::No
                              : RobustCell::Timeout;
            cell.par_s = par_secs;
            if (cfg.seq_baseline) {
                auto [pv_seq, seq_secs] = timed_verify(*spec, 1);
                cell.seq_s = seq_secs;
                if (pv_seq.outcome != pv.outcome)
                    std::cerr << "warning: line " << sl.line_no
                              << ": sequential baseline verdict differs\n";
            }
            rows[idx].cells[spec->epsilon] = cell;
        }
        std::sort(epsilons.begin(), epsilons.end());
        const RenderedTable table = emit_table(rows, epsilons, cfg.format);
        *report_os << table.text;
        for (const std::string& w : table.warnings) std::cerr << "warning: " << w << '\n';
        return exit_tracker.code();
    }

    if (cfg.format == ReportFormat::Csv && cfg.mode == "verify")
        *report_os << "line,kind,verdict,delta,eps,label,gap,splits,lp_calls,time_s\n";

    for (const SpecLine& sl : lines) {
        if (const auto* spec = std::get_if<RobustnessSpec>(&sl.payload)) {
            if (cfg.mode == "max-delta") continue;
            auto [pv, secs] = timed_verify(*spec, cfg.workers);
            exit_tracker.observe(pv.outcome);
            if (cfg.format == ReportFormat::Csv)
                print_verdict_csv(*report_os, sl.line_no, *spec, *net, pv, secs);
            else
                print_verdict(*report_os, *spec, *net, pv, secs);
        } else {
            const MaxDeltaRequest& req = std::get<MaxDeltaRequest>(sl.payload);
            const auto t0 = std::chrono::steady_clock::now();
            const MaxDeltaResult res =
                max_delta_search(net, req.x0, req.kind, req.epsilon, req.norm, req.precision,
                                 req.delta_hi, budget, options);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (res.timeout_flagged) exit_tracker.timed_out = true;
            *report_os << "MAX-DELTA delta_star=" << format_number(res.delta_star)
                       << " robust_at_star=" << (res.robust_at_star ? "yes" : "no")
                       << " timeout_flagged=" << (res.timeout_flagged ? "yes" : "no")
                       << " probes=" << res.probes << " time=" << format_seconds(secs) << '\n';
        }
    }
    return exit_tracker.code();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"relucheck: adversarial-robustness verifier for feedforward ReLU classifiers"};
    RunConfig cfg;
    std::string norm = "linf", format = "text";
    app.add_option("--net", cfg.network_path, "network file (relunet v1 format)")->required();
    app.add_option("--spec", cfg.spec_path, "property spec file, one query per line")
        ->required();
    app.add_option("--workers", cfg.workers, "worker threads for disjunct solving");
    app.add_option("--timeout", cfg.timeout, "per-property timeout in seconds");
    app.add_option("--norm", norm, "default norm: linf or l1");
    app.add_option("--margin", cfg.margin, "strict-inequality margin gamma");
    app.add_option("--format", format, "report format: text or csv");
    app.add_flag("--seq-baseline", cfg.seq_baseline,
                 "rerun with workers=1 to fill the Seq. column");
    app.add_option("--report", cfg.report_path, "write the report here instead of stdout");
    app.add_option("--mode", cfg.mode, "verify, max-delta or report-table");

    try {
        app.parse(argc, argv);
        if (norm == "linf") cfg.norm = relucheck::Norm::Linf;
        else if (norm == "l1") cfg.norm = relucheck::Norm::L1;
        else throw relucheck::InputError("unknown norm '" + norm + "'");
        if (format == "text") cfg.format = relucheck::ReportFormat::Text;
        else if (format == "csv") cfg.format = relucheck::ReportFormat::Csv;
        else throw relucheck::InputError("unknown format '" + format + "'");
        if (cfg.mode != "verify" && cfg.mode != "max-delta" && cfg.mode != "report-table")
            throw relucheck::InputError("unknown mode '" + cfg.mode + "'");
        if (cfg.workers < 1) throw relucheck::InputError("workers must be >= 1");
        if (cfg.timeout <= 0) throw relucheck::InputError("timeout must be positive");
        if (cfg.margin <= 0) throw relucheck::InputError("margin must be positive");
        return run(cfg);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
