#pragma once

// Text formats: the network file consumed by the CLI and the property spec
// file, one query per line.

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "relucheck/network.hpp"
#include "relucheck/properties.hpp"
#include "relucheck/report.hpp"

namespace relucheck {

namespace detail {

inline double parse_double(const std::string& tok, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw InputError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    }
}

inline std::vector<double> parse_csv_doubles(const std::string& tok, int line_no) {
    std::vector<double> out;
    std::string cur;
    std::istringstream is(tok);
    while (std::getline(is, cur, ','))
        out.push_back(parse_double(cur, line_no));
    if (out.empty())
        throw InputError("line " + std::to_string(line_no) + ": empty vector");
    return out;
}

inline bool skip_line(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true; // blank
}

} // namespace detail

// Network text format:
//   relunet v1
//   n0 n1 ... nk          (layer sizes, n0 = input dimension)
//   one line per node of each layer: w1 ... w_nin b
// Lines starting with '#' are comments. All layers are ReLU except the last.
inline Network parse_network(std::istream& in) {
    std::string line;
    int line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!detail::skip_line(line)) return true;
        }
        return false;
    };

    if (!next_line()) throw InputError("empty network file");
    {
        std::istringstream is(line);
        std::string magic, version;
        is >> magic >> version;
        if (magic != "relunet" || version != "v1")
            throw InputError("line " + std::to_string(line_no) +
                             ": expected header 'relunet v1'");
    }
    if (!next_line())
        throw InputError("line " + std::to_string(line_no) + ": missing layer sizes");
    std::vector<std::size_t> sizes;
    {
        std::istringstream is(line);
        std::string tok;
        while (is >> tok) {
            const double v = detail::parse_double(tok, line_no);
            if (v < 1 || v != std::floor(v))
                throw InputError("line " + std::to_string(line_no) +
                                 ": layer sizes must be positive integers");
            sizes.push_back(static_cast<std::size_t>(v));
        }
    }
    if (sizes.size() < 2)
        throw InputError("line " + std::to_string(line_no) +
                         ": need at least input and output sizes");

    std::vector<Layer> layers;
    for (std::size_t k = 1; k < sizes.size(); ++k) {
        Layer layer;
        layer.activation = k + 1 == sizes.size() ? Activation::Identity : Activation::ReLU;
        for (std::size_t i = 0; i < sizes[k]; ++i) {
            if (!next_line())
                throw InputError("line " + std::to_string(line_no + 1) +
                                 ": unexpected end of file in layer " + std::to_string(k));
            std::istringstream is(line);
            std::vector<double> nums;
            std::string tok;
            while (is >> tok) nums.push_back(detail::parse_double(tok, line_no));
            if (nums.size() != sizes[k - 1] + 1)
                throw InputError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(sizes[k - 1]) + " weights plus a bias, got " +
                                 std::to_string(nums.size()) + " values");
            layer.biases.push_back(nums.back());
            nums.pop_back();
            layer.weights.push_back(std::move(nums));
        }
        layers.push_back(std::move(layer));
    }
    return Network(std::move(layers), sizes.front());
}

inline Network parse_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open network file '" + path + "'");
    return parse_network(in);
}

inline std::string serialize_network(const Network& net) {
    std::ostringstream os;
    os << "relunet v1\n" << net.input_dim();
    for (const Layer& l : net.layers()) os << ' ' << l.out_size();
    os << '\n';
    for (const Layer& l : net.layers())
        for (std::size_t i = 0; i < l.out_size(); ++i) {
            for (double w : l.weights[i]) os << format_number(w) << ' ';
            os << format_number(l.biases[i]) << '\n';
        }
    return os.str();
}

struct MaxDeltaRequest {
    std::vector<double> x0;
    PropertyKind kind = PropertyKind::LocalLabel;
    std::optional<double> epsilon;
    Norm norm = Norm::Linf;
    double precision = 0.0;
    double delta_hi = 0.0;
};

struct SpecLine {
    int line_no = 0;
    std::variant<RobustnessSpec, MaxDeltaRequest> payload;
};

// Property spec file: one query per line.
//   local-label x0=<csv> delta=<f> [norm=<linf|l1>]
//   local-conf  x0=<csv> delta=<f> eps=<f> [norm=...]
//   global      lo=<csv> hi=<csv> delta=<f> eps=<f> [norm=...]
//   max-delta   x0=<csv> kind=<label|conf> [eps=<f>] [norm=...] prec=<f> hi=<f>
inline std::vector<SpecLine> parse_property_lines(std::istream& in,
                                                  Norm default_norm = Norm::Linf) {
    std::vector<SpecLine> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::skip_line(line)) continue;
        std::istringstream is(line);
        std::string kind;
        is >> kind;
        std::map<std::string, std::string> kv;
        std::string tok;
        while (is >> tok) {
            const auto pos = tok.find('=');
            if (pos == std::string::npos)
                throw InputError("line " + std::to_string(line_no) + ": expected key=value, got '" +
                                 tok + "'");
            kv[tok.substr(0, pos)] = tok.substr(pos + 1);
        }
        auto require = [&](const std::string& key) -> std::string {
            auto it = kv.find(key);
            if (it == kv.end())
                throw InputError("line " + std::to_string(line_no) + ": missing " + key + "=");
            return it->second;
        };
        auto take_norm = [&]() {
            auto it = kv.find("norm");
            if (it == kv.end()) return default_norm;
            if (it->second == "linf") return Norm::Linf;
            if (it->second == "l1") return Norm::L1;
            throw InputError("line " + std::to_string(line_no) + ": unknown norm '" +
                             it->second + "'");
        };

        if (kind == "local-label" || kind == "local-conf") {
            RobustnessSpec spec;
            spec.kind = kind == "local-label" ? PropertyKind::LocalLabel
                                              : PropertyKind::LocalConfidence;
            spec.x0 = detail::parse_csv_doubles(require("x0"), line_no);
            spec.delta = detail::parse_double(require("delta"), line_no);
            if (spec.kind == PropertyKind::LocalConfidence)
                spec.epsilon = detail::parse_double(require("eps"), line_no);
            spec.norm = take_norm();
            out.push_back({line_no, spec});
        } else if (kind == "global") {
            RobustnessSpec spec;
            spec.kind = PropertyKind::GlobalConfidence;
            spec.domain = Box(detail::parse_csv_doubles(require("lo"), line_no),
                              detail::parse_csv_doubles(require("hi"), line_no));
            spec.delta = detail::parse_double(require("delta"), line_no);
            spec.epsilon = detail::parse_double(require("eps"), line_no);
            spec.norm = take_norm();
            out.push_back({line_no, spec});
        } else if (kind == "max-delta") {
            MaxDeltaRequest req;
            req.x0 = detail::parse_csv_doubles(require("x0"), line_no);
            const std::string k = require("kind");
            if (k == "label") req.kind = PropertyKind::LocalLabel;
            else if (k == "conf") req.kind = PropertyKind::LocalConfidence;
            else
                throw InputError("line " + std::to_string(line_no) + ": unknown kind '" + k +
                                 "'");
            if (kv.count("eps")) req.epsilon = detail::parse_double(kv["eps"], line_no);
            if (req.kind == PropertyKind::LocalConfidence && !req.epsilon)
                throw InputError("line " + std::to_string(line_no) +
                                 ": kind=conf requires eps=");
            req.norm = take_norm();
            req.precision = detail::parse_double(require("prec"), line_no);
            req.delta_hi = detail::parse_double(require("hi"), line_no);
            out.push_back({line_no, req});
        } else {
            throw InputError("line " + std::to_string(line_no) + ": unknown query kind '" +
                             kind + "'");
        }
    }
    return out;
}

} // namespace relucheck
