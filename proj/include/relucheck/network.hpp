#pragma once

// Immutable feedforward ReLU classifiers: concrete evaluation, classification
// and interval (box) forward propagation used for ReLU phase analysis.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relucheck/common.hpp"

namespace relucheck {

enum class Activation { ReLU, Identity };

struct Layer {
    // weights[i] is the input-weight row of output node i.
    std::vector<std::vector<double>> weights;
    std::vector<double> biases;
    Activation activation = Activation::ReLU;

    std::size_t out_size() const { return weights.size(); }
    std::size_t in_size() const { return weights.empty() ? 0 : weights.front().size(); }
};

// Axis-aligned input region. Entries may be +-inf where a later norm
// constraint bounds them.
struct Box {
    std::vector<double> lower;
    std::vector<double> upper;

    Box() = default;
    Box(std::vector<double> lo, std::vector<double> hi)
        : lower(std::move(lo)), upper(std::move(hi)) {
        if (lower.size() != upper.size())
            throw InputError("box bound vectors differ in length");
        for (std::size_t i = 0; i < lower.size(); ++i) {
            if (std::isnan(lower[i]) || std::isnan(upper[i]))
                throw InputError("box bound is NaN");
            if (lower[i] > upper[i])
                throw InputError("box lower bound exceeds upper bound at dim " +
                                 std::to_string(i));
        }
    }

    static Box ball(const std::vector<double>& center, double radius) {
        std::vector<double> lo(center.size()), hi(center.size());
        for (std::size_t i = 0; i < center.size(); ++i) {
            lo[i] = center[i] - radius;
            hi[i] = center[i] + radius;
        }
        return Box(std::move(lo), std::move(hi));
    }

    std::size_t dim() const { return lower.size(); }
    double width(std::size_t i) const { return upper[i] - lower[i]; }

    bool contains(const std::vector<double>& x) const {
        if (x.size() != dim()) return false;
        for (std::size_t i = 0; i < dim(); ++i)
            if (x[i] < lower[i] || x[i] > upper[i]) return false;
        return true;
    }
    bool contains(const Box& other) const {
        if (other.dim() != dim()) return false;
        for (std::size_t i = 0; i < dim(); ++i)
            if (other.lower[i] < lower[i] || other.upper[i] > upper[i]) return false;
        return true;
    }

    Box inflated(double by) const {
        Box b = *this;
        for (std::size_t i = 0; i < dim(); ++i) {
            b.lower[i] -= by;
            b.upper[i] += by;
        }
        return b;
    }

    Box clamped_to(const Box& outer) const {
        Box b = *this;
        for (std::size_t i = 0; i < dim(); ++i) {
            b.lower[i] = std::max(b.lower[i], outer.lower[i]);
            b.upper[i] = std::min(b.upper[i], outer.upper[i]);
        }
        return b;
    }
};

enum class PhaseStatus { Active, Inactive, Undetermined };

inline PhaseStatus phase_of(double pre_lo, double pre_hi) {
    if (pre_lo >= 0.0) return PhaseStatus::Active;
    if (pre_hi <= 0.0) return PhaseStatus::Inactive;
    return PhaseStatus::Undetermined;
}
inline PhaseStatus phase_of(const Interval& pre) { return phase_of(pre.lo, pre.hi); }

// Layered classifier. Hidden layers are ReLU, the last layer is identity
// (outputs are raw confidences). Immutable after construction and safe to
// share across threads.
class Network {
public:
    Network(std::vector<Layer> layers, std::size_t input_dim,
            std::vector<std::string> labels = {})
        : layers_(std::move(layers)), input_dim_(input_dim), labels_(std::move(labels)) {
        if (layers_.empty()) throw InputError("network needs at least one layer");
        if (input_dim_ == 0) throw InputError("input dimension must be positive");
        std::size_t prev = input_dim_;
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            const Layer& l = layers_[k];
            if (l.out_size() == 0) throw InputError("layer " + std::to_string(k) + " is empty");
            if (l.biases.size() != l.out_size())
                throw InputError("layer " + std::to_string(k) + " bias length mismatch");
            for (const auto& row : l.weights) {
                if (row.size() != prev)
                    throw InputError("layer " + std::to_string(k) + " weight row length " +
                                     std::to_string(row.size()) + ", expected " +
                                     std::to_string(prev));
                for (double w : row)
                    if (!is_finite(w)) throw InputError("non-finite weight");
            }
            for (double b : l.biases)
                if (!is_finite(b)) throw InputError("non-finite bias");
            const bool last = (k + 1 == layers_.size());
            if (last && l.activation != Activation::Identity)
                throw InputError("last layer must have identity activation");
            if (!last && l.activation != Activation::ReLU)
                throw InputError("hidden layers must have ReLU activation");
            prev = l.out_size();
        }
        if (labels_.empty()) {
            labels_.reserve(prev);
            for (std::size_t i = 0; i < prev; ++i) labels_.push_back(std::to_string(i));
        }
        if (labels_.size() != prev)
            throw InputError("label count does not match output size");
    }

    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return layers_.back().out_size(); }
    const std::vector<Layer>& layers() const { return layers_; }
    const std::vector<std::string>& labels() const { return labels_; }

    std::size_t relu_count() const {
        std::size_t n = 0;
        for (const Layer& l : layers_)
            if (l.activation == Activation::ReLU) n += l.out_size();
        return n;
    }

private:
    std::vector<Layer> layers_;
    std::size_t input_dim_;
    std::vector<std::string> labels_;
};

namespace detail {
inline std::vector<double> affine(const Layer& l, const std::vector<double>& in) {
    std::vector<double> out(l.out_size());
    for (std::size_t i = 0; i < l.out_size(); ++i) {
        double acc = l.biases[i];
        const auto& row = l.weights[i];
        for (std::size_t j = 0; j < row.size(); ++j) acc += row[j] * in[j];
        out[i] = acc;
    }
    return out;
}
} // namespace detail

inline std::vector<double> evaluate(const Network& net, const std::vector<double>& x) {
    if (x.size() != net.input_dim())
        throw InputError("input has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(net.input_dim()));
    for (double v : x)
        if (!is_finite(v)) throw InputError("non-finite input entry");
    std::vector<double> cur = x;
    for (const Layer& l : net.layers()) {
        cur = detail::affine(l, cur);
        if (l.activation == Activation::ReLU)
            for (double& v : cur) v = std::max(0.0, v);
    }
    return cur;
}

inline double confidence(const Network& net, const std::vector<double>& x, std::size_t label) {
    if (label >= net.output_dim())
        throw InputError("unknown label index " + std::to_string(label));
    return evaluate(net, x)[label];
}

// The unique label whose confidence strictly dominates all others, or nullopt
// when the maximum is tied.
inline std::optional<std::size_t> classify(const Network& net, const std::vector<double>& x) {
    const std::vector<double> out = evaluate(net, x);
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i] > out[best]) best = i;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (i != best && out[i] == out[best]) return std::nullopt;
    return best;
}

struct LayerBounds {
    std::vector<Interval> pre;
    std::vector<Interval> post;
};

struct IntervalResult {
    std::vector<LayerBounds> layers; // one entry per network layer
    const std::vector<Interval>& outputs() const { return layers.back().post; }
};

// Sound layer-by-layer interval propagation; sign-split affine map, then the
// ReLU clamps both ends at zero. Every x in the box yields node values inside
// the returned intervals. Runs once per box; no iterative refinement here.
inline IntervalResult interval_evaluate(const Network& net, const Box& box) {
    if (box.dim() != net.input_dim())
        throw InputError("box dimension does not match network input");
    IntervalResult res;
    std::vector<Interval> cur(box.dim());
    for (std::size_t i = 0; i < box.dim(); ++i) cur[i] = {box.lower[i], box.upper[i]};
    for (const Layer& l : net.layers()) {
        LayerBounds lb;
        lb.pre.resize(l.out_size());
        for (std::size_t i = 0; i < l.out_size(); ++i) {
            double lo = l.biases[i], hi = l.biases[i];
            const auto& row = l.weights[i];
            for (std::size_t j = 0; j < row.size(); ++j) {
                const double w = row[j];
                if (w == 0.0) continue; // avoid 0 * inf
                if (w > 0) {
                    lo += w * cur[j].lo;
                    hi += w * cur[j].hi;
                } else {
                    lo += w * cur[j].hi;
                    hi += w * cur[j].lo;
                }
            }
            lb.pre[i] = {lo, hi};
        }
        lb.post = lb.pre;
        if (l.activation == Activation::ReLU)
            for (Interval& iv : lb.post) {
                iv.lo = std::max(iv.lo, 0.0);
                iv.hi = std::max(iv.hi, 0.0);
            }
        cur = lb.post;
        res.layers.push_back(std::move(lb));
    }
    return res;
}

} // namespace relucheck
