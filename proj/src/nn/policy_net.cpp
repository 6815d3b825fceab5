// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#include "nn/policy_net.hpp"

#include <cmath>
#include <string>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace propcredit::nn {

namespace {

constexpr double kTimeScale = 100.0;
constexpr double kTimeMaxPeriod = 1000.0;

template <class S>
S sigmoid(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

std::vector<int> layer_widths(const Architecture& arch) {
    std::vector<int> widths{arch.input_dim()};
    widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
    widths.push_back(arch.output_dim());
    return widths;
}

}  // namespace

ParamLayout layout_of(const Architecture& arch) {
    PROPCREDIT_REQUIRE(arch.data_dim >= 1 && arch.time_pairs >= 0 && arch.num_conditions >= 0 && arch.cond_dim >= 0,
                       "invalid architecture dimensions");
    for (int h : arch.hidden) PROPCREDIT_REQUIRE(h >= 1, "hidden widths must be positive");
    ParamLayout l;
    std::size_t offset = static_cast<std::size_t>(arch.num_conditions + 1) * static_cast<std::size_t>(arch.cond_dim);
    const auto widths = layer_widths(arch);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        l.rows.push_back(widths[i + 1]);
        l.cols.push_back(widths[i]);
        l.weight.push_back(offset);
        offset += static_cast<std::size_t>(widths[i + 1]) * static_cast<std::size_t>(widths[i]);
        l.bias.push_back(offset);
        offset += static_cast<std::size_t>(widths[i + 1]);
    }
    return l;
}

std::size_t Architecture::parameter_count() const {
    const auto l = layout_of(*this);
    return l.bias.back() + static_cast<std::size_t>(l.rows.back());
}

PolicyParams::PolicyParams(Architecture arch, std::vector<double> values)
    : m_arch(std::move(arch)), m_values(std::move(values)) {
    if (m_values.size() != m_arch.parameter_count()) {
        throw_invalid("parameter vector has " + std::to_string(m_values.size()) + " entries, architecture needs " +
                      std::to_string(m_arch.parameter_count()));
    }
    for (double v : m_values) {
        if (!std::isfinite(v)) throw_invalid("parameters must be finite");
    }
}

PolicyParams PolicyParams::zeros(const Architecture& arch) {
    return PolicyParams(arch, std::vector<double>(arch.parameter_count(), 0.0));
}

PolicyParams PolicyParams::initialize(const Architecture& arch, std::uint64_t seed) {
    const auto l = layout_of(arch);
    std::vector<double> v(arch.parameter_count(), 0.0);
    CounterRng rng(seed, make_stream(StreamTag::Init, 0));
    for (std::size_t i = 0; i < l.weight.front(); ++i) v[i] = rng.normal();
    for (std::size_t layer = 0; layer < l.weight.size(); ++layer) {
        const bool last = layer + 1 == l.weight.size();
        const double scale = (last ? 0.1 : 1.0) / std::sqrt(static_cast<double>(l.cols[layer]));
        const std::size_t n = static_cast<std::size_t>(l.rows[layer]) * static_cast<std::size_t>(l.cols[layer]);
        for (std::size_t i = 0; i < n; ++i) v[l.weight[layer] + i] = scale * rng.normal();
    }
    return PolicyParams(arch, std::move(v));
}

void time_features(int pairs, double t, std::span<double> out) {
    for (int j = 0; j < pairs; ++j) {
        const double freq = kTimeScale * std::pow(kTimeMaxPeriod, -static_cast<double>(j) / pairs);
        out[static_cast<std::size_t>(2 * j)] = std::sin(freq * t);
        out[static_cast<std::size_t>(2 * j + 1)] = std::cos(freq * t);
    }
}

template <class S>
Matrix<S> predict_batch(const Architecture& arch, std::span<const S> params, const Matrix<S>& x,
                        std::span<const double> times, std::span<const int> conds, ForwardCache<S>* cache) {
    const auto l = layout_of(arch);
    const Eigen::Index n = x.cols();
    PROPCREDIT_REQUIRE(params.size() == arch.parameter_count(), "parameter vector does not match architecture");
    PROPCREDIT_REQUIRE(x.rows() == arch.data_dim, "input rows must equal data_dim");
    PROPCREDIT_REQUIRE(static_cast<Eigen::Index>(times.size()) == n && static_cast<Eigen::Index>(conds.size()) == n,
                       "times/conds must have one entry per column");

    Matrix<S> input(arch.input_dim(), n);
    input.topRows(arch.data_dim) = x;
    std::vector<double> feats(static_cast<std::size_t>(2 * arch.time_pairs));
    const int cond_row0 = arch.data_dim + 2 * arch.time_pairs;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = times[static_cast<std::size_t>(i)];
        PROPCREDIT_REQUIRE(t >= 0.0 && t <= 1.0, "time must lie in [0, 1]");
        time_features(arch.time_pairs, t, feats);
        for (int j = 0; j < 2 * arch.time_pairs; ++j) input(arch.data_dim + j, i) = static_cast<S>(feats[static_cast<std::size_t>(j)]);
        const int c = conds[static_cast<std::size_t>(i)];
        PROPCREDIT_REQUIRE(c >= 0 && c <= arch.num_conditions, "condition id out of range");
        for (int j = 0; j < arch.cond_dim; ++j) {
            input(cond_row0 + j, i) = params[static_cast<std::size_t>(c * arch.cond_dim + j)];
        }
    }

    using Map = Eigen::Map<const Matrix<S>>;
    using VecMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>;
    const std::size_t layers = l.weight.size();
    if (cache) {
        cache->pre.assign(layers - 1, Matrix<S>());
        cache->post.assign(layers - 1, Matrix<S>());
        cache->cond.assign(conds.begin(), conds.end());
    }
    Matrix<S> h = input;
    for (std::size_t k = 0; k < layers; ++k) {
        Map W(params.data() + l.weight[k], l.rows[k], l.cols[k]);
        VecMap b(params.data() + l.bias[k], l.rows[k]);
        Matrix<S> z = W * h;
        z.colwise() += b;
        if (k + 1 == layers) {
            h = std::move(z);
            break;
        }
        Matrix<S> a = z.unaryExpr([](S v) { return v * sigmoid(v); });
        if (cache) {
            cache->pre[k] = std::move(z);
            cache->post[k] = a;
        }
        h = std::move(a);
    }
    if (cache) cache->input = std::move(input);
    return h;
}

template Matrix<double> predict_batch<double>(const Architecture&, std::span<const double>, const Matrix<double>&,
                                              std::span<const double>, std::span<const int>, ForwardCache<double>*);
template Matrix<float> predict_batch<float>(const Architecture&, std::span<const float>, const Matrix<float>&,
                                            std::span<const double>, std::span<const int>, ForwardCache<float>*);

std::vector<double> predict(const PolicyParams& params, std::span<const double> x, double t, int cond) {
    const auto& arch = params.arch();
    PROPCREDIT_REQUIRE(static_cast<int>(x.size()) == arch.data_dim, "input size must equal data_dim");
    Matrix<double> in = Eigen::Map<const Matrix<double>>(x.data(), arch.data_dim, 1);
    const double times[1] = {t};
    const int conds[1] = {cond};
    const Matrix<double> out = predict_batch<double>(arch, params.values(), in, times, conds);
    std::vector<double> result(out.data(), out.data() + out.size());
    for (double v : result) {
        if (!std::isfinite(v)) throw_numerical("network produced a non-finite prediction");
    }
    return result;
}

void backward(const Architecture& arch, std::span<const double> params, const ForwardCache<double>& cache,
              const Matrix<double>& upstream, std::span<double> grad) {
    const auto l = layout_of(arch);
    PROPCREDIT_REQUIRE(grad.size() == params.size(), "gradient buffer does not match parameters");
    PROPCREDIT_REQUIRE(upstream.rows() == arch.output_dim() && upstream.cols() == cache.input.cols(),
                       "upstream gradient shape mismatch");
    using Map = Eigen::Map<const Matrix<double>>;
    using MutMap = Eigen::Map<Matrix<double>>;
    using MutVec = Eigen::Map<Eigen::VectorXd>;

    const std::size_t layers = l.weight.size();
    Matrix<double> g = upstream;
    for (std::size_t k = layers; k-- > 0;) {
        if (k + 1 < layers) {
            const auto& z = cache.pre[k];
            g.array() *= z.unaryExpr([](double v) {
                const double s = sigmoid(v);
                return s * (1.0 + v * (1.0 - s));
            }).array();
        }
        const Matrix<double>& in = k == 0 ? cache.input : cache.post[k - 1];
        MutMap dW(grad.data() + l.weight[k], l.rows[k], l.cols[k]);
        MutVec db(grad.data() + l.bias[k], l.rows[k]);
        dW.noalias() += g * in.transpose();
        db += g.rowwise().sum();
        Map W(params.data() + l.weight[k], l.rows[k], l.cols[k]);
        g = W.transpose() * g;
    }
    if (arch.cond_dim == 0) return;
    const int cond_row0 = arch.data_dim + 2 * arch.time_pairs;
    for (Eigen::Index i = 0; i < g.cols(); ++i) {
        const int c = cache.cond[static_cast<std::size_t>(i)];
        for (int j = 0; j < arch.cond_dim; ++j) {
            grad[static_cast<std::size_t>(c * arch.cond_dim + j)] += g(cond_row0 + j, i);
        }
    }
}

}  // namespace propcredit::nn
