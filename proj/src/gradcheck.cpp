// SPDX-License-Identifier: Apache-2.0

#include "drnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace drnet {

double finite_diff_check(const ScalarFn& f, std::vector<Tensor> inputs, const FiniteDiffOptions& options) {
    std::vector<bool> previous_flags;
    for (Tensor& t : inputs) {
        previous_flags.push_back(t.requires_grad());
        t.set_requires_grad(true);
        t.zero_grad();
    }

    std::vector<std::vector<float>> analytic;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = f(inputs);
        tape.backward(loss);
        for (Tensor& t : inputs) {
            analytic.emplace_back(t.grad_buffer().begin(), t.grad_buffer().end());
        }
    }

    auto evaluate = [&]() { return static_cast<double>(f(inputs).item()); };

    std::mt19937_64 rng(options.seed);
    double worst = 0.0;
    for (size_t k = 0; k < inputs.size(); ++k) {
        Tensor& t = inputs[k];
        std::vector<int64_t> entries(static_cast<size_t>(t.numel()));
        std::iota(entries.begin(), entries.end(), 0);
        if (options.max_entries_per_input > 0 &&
            static_cast<int64_t>(entries.size()) > options.max_entries_per_input) {
            std::shuffle(entries.begin(), entries.end(), rng);
            entries.resize(static_cast<size_t>(options.max_entries_per_input));
        }
        auto data = t.mutable_data();
        for (int64_t e : entries) {
            const size_t i = static_cast<size_t>(e);
            const float original = data[i];
            data[i] = static_cast<float>(original + options.eps);
            const double plus = evaluate();
            data[i] = static_cast<float>(original - options.eps);
            const double minus = evaluate();
            data[i] = original;
            // Use the step actually representable in float.
            const double step = static_cast<double>(static_cast<float>(original + options.eps)) -
                                static_cast<double>(static_cast<float>(original - options.eps));
            const double numeric = (plus - minus) / step;
            const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }

    for (size_t k = 0; k < inputs.size(); ++k) {
        inputs[k].zero_grad();
        inputs[k].set_requires_grad(previous_flags[k]);
    }
    return worst;
}

}  // namespace drnet
