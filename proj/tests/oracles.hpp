/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
#ifndef KTRACE_TESTS_ORACLES_HPP_
#define KTRACE_TESTS_ORACLES_HPP_

#include <cmath>
#include <span>
#include <vector>

#include <ktrace/regression.hpp>

namespace ktrace::testing {

/// Pairwise AUC: every (positive, negative) pair, ties worth one half.
inline double pairwise_auc(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!labels[i])
            continue;
        for (std::size_t j = 0; j < probs.size(); ++j) {
            if (labels[j])
                continue;
            pairs += 1.0;
            if (probs[i] > probs[j])
                wins += 1.0;
            else if (probs[i] == probs[j])
                wins += 0.5;
        }
    }
    return wins / pairs;
}

/// Norm-wise relative difference between the analytic gradient and central
/// finite differences of penalized_nll.
inline double gradient_relative_error(std::span<const SparseVector> phi, std::span<const std::uint8_t> labels,
                                      std::vector<double> w, double l2, std::span<const std::uint32_t> unpenalized,
                                      double step = 1e-5) {
    const auto analytic = nll_and_gradient(phi, labels, w, l2, unpenalized).gradient;
    double diff = 0.0, norm_a = 0.0, norm_n = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double keep = w[i];
        w[i] = keep + step;
        const double up = penalized_nll(phi, labels, w, l2, unpenalized);
        w[i] = keep - step;
        const double down = penalized_nll(phi, labels, w, l2, unpenalized);
        w[i] = keep;
        const double numeric = (up - down) / (2.0 * step);
        diff += (numeric - analytic[i]) * (numeric - analytic[i]);
        norm_a += analytic[i] * analytic[i];
        norm_n += numeric * numeric;
    }
    const double denom = std::max({std::sqrt(norm_a), std::sqrt(norm_n), 1e-12});
    return std::sqrt(diff) / denom;
}

}// namespace ktrace::testing

#endif// KTRACE_TESTS_ORACLES_HPP_
