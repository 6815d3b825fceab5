// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

namespace propcredit::nn {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

/// Shape of the conditional predictor. Input features are the data vector,
/// `time_pairs` sin/cos pairs of the normalized time, and a learned condition
/// embedding; row `num_conditions` of the embedding table is the null
/// condition used for guidance.
struct Architecture {
    int data_dim = 2;
    int time_pairs = 8;
    int num_conditions = 10;
    int cond_dim = 8;
    std::vector<int> hidden{64, 64, 64};

    int input_dim() const { return data_dim + 2 * time_pairs + cond_dim; }
    int output_dim() const { return data_dim; }
    int null_condition() const { return num_conditions; }
    std::size_t parameter_count() const;

    bool operator==(const Architecture&) const = default;
};

/// Offsets of each block in the flat parameter vector.
struct ParamLayout {
    std::size_t cond_table = 0;
    std::vector<std::size_t> weight;  // (out x in), column-major
    std::vector<std::size_t> bias;
    std::vector<int> rows;
    std::vector<int> cols;
};

ParamLayout layout_of(const Architecture& arch);

/// Flat parameter vector plus its architecture.
class PolicyParams {
public:
    PolicyParams() = default;
    PolicyParams(Architecture arch, std::vector<double> values);

    static PolicyParams zeros(const Architecture& arch);
    /// Scaled-normal initialization from a seed; output layer starts small.
    static PolicyParams initialize(const Architecture& arch, std::uint64_t seed);

    const Architecture& arch() const { return m_arch; }
    std::span<const double> values() const { return m_values; }
    std::span<double> values() { return m_values; }
    const std::vector<double>& vector() const { return m_values; }
    std::size_t size() const { return m_values.size(); }

    /// Element-wise cast for reduced-precision evaluation.
    std::vector<float> as_float() const { return {m_values.begin(), m_values.end()}; }

    bool operator==(const PolicyParams&) const = default;

private:
    Architecture m_arch;
    std::vector<double> m_values;
};

template <class S>
struct ForwardCache {
    Matrix<S> input;
    std::vector<Matrix<S>> pre;   // pre-activation per hidden layer
    std::vector<Matrix<S>> post;  // activation per hidden layer
    std::vector<int> cond;
};

/// sin/cos features of t (double precision, cast by the caller).
void time_features(int pairs, double t, std::span<double> out);

/// Batched forward pass. x is (data_dim x n); times and conds have n entries.
/// A null condition is encoded as arch.null_condition().
template <class S>
Matrix<S> predict_batch(const Architecture& arch, std::span<const S> params, const Matrix<S>& x,
                        std::span<const double> times, std::span<const int> conds, ForwardCache<S>* cache = nullptr);

/// Single-input convenience wrapper. Throws Numerical on non-finite output.
std::vector<double> predict(const PolicyParams& params, std::span<const double> x, double t, int cond);

/// Accumulates d(loss)/d(params) into grad given d(loss)/d(output) (data_dim x n).
void backward(const Architecture& arch, std::span<const double> params, const ForwardCache<double>& cache,
              const Matrix<double>& upstream, std::span<double> grad);

}  // namespace propcredit::nn
