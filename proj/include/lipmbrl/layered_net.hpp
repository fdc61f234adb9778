#pragma once

// Small fully connected networks: affine layers with optional ReLU, forward
// evaluation, backpropagation of a weighted squared loss, and weight
// projection onto per-layer Lipschitz caps.

#include "lipmbrl/core_mdp.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lipmbrl {

enum class Activation { none, relu };

/// Norm under which a layer's Lipschitz constant is measured.
enum class NormP { one, two, inf };

inline NormP parse_norm(const std::string& s) {
    if (s == "1") return NormP::one;
    if (s == "2") return NormP::two;
    if (s == "inf" || s == "infinity") return NormP::inf;
    throw std::invalid_argument("unsupported norm '" + s + "' (expected 1, 2 or inf)");
}

inline const char* norm_name(NormP p) {
    switch (p) {
        case NormP::one: return "1";
        case NormP::two: return "2";
        case NormP::inf: return "inf";
    }
    return "?";
}

/// x -> act(W x + b).
struct Layer {
    Matrix weight;
    Vector bias;
    Activation activation = Activation::none;
};

class LayeredNet {
public:
    LayeredNet() = default;
    explicit LayeredNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
        if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const Layer& l = layers_[i];
            if (l.bias.size() != l.weight.rows())
                throw std::invalid_argument("layer " + std::to_string(i) + ": bias size differs from output size");
            if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
                throw std::invalid_argument("layer " + std::to_string(i) + ": input size breaks the dimension chain");
            if (!l.weight.allFinite() || !l.bias.allFinite())
                throw std::invalid_argument("layer " + std::to_string(i) + " has non-finite parameters");
        }
    }

    /// Dense net with ReLU on every hidden layer and a linear output.
    /// Weights are uniform in [-0.5, 0.5] / sqrt(fan_in); biases start at zero.
    static LayeredNet random_mlp(const std::vector<Index>& widths, std::mt19937_64& rng) {
        if (widths.size() < 2) throw std::invalid_argument("mlp needs input and output widths");
        std::uniform_real_distribution<double> unit(-0.5, 0.5);
        std::vector<Layer> layers;
        for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
            Layer l;
            l.weight = Matrix(widths[i + 1], widths[i]);
            const double scale = 1.0 / std::sqrt(static_cast<double>(widths[i]));
            for (Index r = 0; r < l.weight.rows(); ++r)
                for (Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = unit(rng) * scale;
            l.bias = Vector::Zero(widths[i + 1]);
            l.activation = i + 2 < widths.size() ? Activation::relu : Activation::none;
            layers.push_back(std::move(l));
        }
        return LayeredNet(std::move(layers));
    }

    Index input_dim() const { return layers_.front().weight.cols(); }
    Index output_dim() const { return layers_.back().weight.rows(); }
    const std::vector<Layer>& layers() const noexcept { return layers_; }
    std::vector<Layer>& layers() noexcept { return layers_; }

    Vector forward(const Vector& x) const {
        if (x.size() != input_dim()) throw std::invalid_argument("input dimension mismatch");
        Vector h = x;
        for (const Layer& l : layers_) {
            h = l.weight * h + l.bias;
            if (l.activation == Activation::relu) h = h.cwiseMax(0.0);
        }
        return h;
    }

    double operator()(double x) const {
        Vector in(1);
        in[0] = x;
        return forward(in)[0];
    }

    Index parameter_count() const {
        Index n = 0;
        for (const Layer& l : layers_) n += l.weight.size() + l.bias.size();
        return n;
    }

    /// Parameters flattened layer by layer: weight (column-major) then bias.
    Vector parameters() const {
        Vector p(parameter_count());
        Index o = 0;
        for (const Layer& l : layers_) {
            p.segment(o, l.weight.size()) = l.weight.reshaped();
            o += l.weight.size();
            p.segment(o, l.bias.size()) = l.bias;
            o += l.bias.size();
        }
        return p;
    }

    void set_parameters(const Vector& p) {
        if (p.size() != parameter_count()) throw std::invalid_argument("parameter vector size mismatch");
        Index o = 0;
        for (Layer& l : layers_) {
            l.weight.reshaped() = p.segment(o, l.weight.size());
            o += l.weight.size();
            l.bias = p.segment(o, l.bias.size());
            o += l.bias.size();
        }
    }

private:
    std::vector<Layer> layers_;
};

/// A scalar regression sample (input, target).
struct Sample {
    double x;
    double y;
};

/// sum_i w_i (y_i - f(x_i))^2 / 2 for a scalar-in, scalar-out net.
inline double weighted_squared_loss(const LayeredNet& net, const std::vector<Sample>& data, const Vector& w) {
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double r = data[i].y - net(data[i].x);
        loss += 0.5 * w[static_cast<Index>(i)] * r * r;
    }
    return loss;
}

/// Gradient of weighted_squared_loss with respect to parameters(), by backpropagation.
inline Vector weighted_squared_loss_gradient(const LayeredNet& net, const std::vector<Sample>& data, const Vector& w) {
    const auto& layers = net.layers();
    const std::size_t L = layers.size();
    std::vector<Matrix> gw(L);
    std::vector<Vector> gb(L);
    for (std::size_t l = 0; l < L; ++l) {
        gw[l] = Matrix::Zero(layers[l].weight.rows(), layers[l].weight.cols());
        gb[l] = Vector::Zero(layers[l].bias.size());
    }
    std::vector<Vector> inputs(L), pre(L);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double wi = w[static_cast<Index>(i)];
        if (wi == 0.0) continue;
        Vector h(1);
        h[0] = data[i].x;
        for (std::size_t l = 0; l < L; ++l) {
            inputs[l] = h;
            pre[l] = layers[l].weight * h + layers[l].bias;
            h = layers[l].activation == Activation::relu ? Vector(pre[l].cwiseMax(0.0)) : pre[l];
        }
        // dLoss/dOutput = -w (y - f(x)).
        Vector delta(1);
        delta[0] = -wi * (data[i].y - h[0]);
        for (std::size_t l = L; l-- > 0;) {
            if (layers[l].activation == Activation::relu)
                delta = (pre[l].array() > 0.0).select(delta, 0.0);
            gw[l].noalias() += delta * inputs[l].transpose();
            gb[l] += delta;
            if (l > 0) delta = layers[l].weight.transpose() * delta;
        }
    }
    Vector g(net.parameter_count());
    Index o = 0;
    for (std::size_t l = 0; l < L; ++l) {
        g.segment(o, gw[l].size()) = gw[l].reshaped();
        o += gw[l].size();
        g.segment(o, gb[l].size()) = gb[l];
        o += gb[l].size();
    }
    return g;
}

/// How weight matrices are brought under a cap k.
enum class ConstraintMode {
    /// Rescale to the cap measured by the layer's Lipschitz norm.
    project,
    /// Clip each weight entry into [-k, k].
    clip,
};

/// Row-norm bound on the constant of x -> W x: sum_j ||W_j||_inf (p=1), sqrt(sum_j ||W_j||_2^2) (p=2),
/// max_j ||W_j||_1 (p=inf), where W_j is the j-th row.
inline double matrix_lipschitz(const Matrix& w, NormP p) {
    switch (p) {
        case NormP::one: return w.rowwise().lpNorm<Eigen::Infinity>().sum();
        case NormP::two: return std::sqrt(w.squaredNorm());
        case NormP::inf: return w.rowwise().lpNorm<1>().maxCoeff();
    }
    throw std::invalid_argument("unsupported norm");
}

/// Brings W under cap k. For p=inf each row whose L1 norm exceeds k is scaled
/// down to exactly k; for p=1 and p=2 the norm couples all rows, so the whole
/// matrix is scaled uniformly. Matrices within the cap (up to rounding) are
/// untouched, which makes the projection idempotent.
inline void project_weight(Matrix& w, double cap, NormP p, ConstraintMode mode = ConstraintMode::project) {
    if (!(cap > 0.0)) throw std::invalid_argument("weight cap must be positive");
    if (std::isinf(cap)) return;
    if (mode == ConstraintMode::clip) {
        w = w.cwiseMax(-cap).cwiseMin(cap);
        return;
    }
    if (p == NormP::inf) {
        for (Index r = 0; r < w.rows(); ++r) {
            const double n1 = w.row(r).lpNorm<1>();
            if (n1 > cap * (1.0 + 1e-13)) w.row(r) *= cap / n1;
        }
        return;
    }
    const double norm = matrix_lipschitz(w, p);
    if (norm > cap * (1.0 + 1e-13)) w *= cap / norm;
}

inline void project_network(LayeredNet& net, double cap, NormP p, ConstraintMode mode = ConstraintMode::project) {
    for (Layer& l : net.layers()) project_weight(l.weight, cap, p, mode);
}

}  // namespace lipmbrl
