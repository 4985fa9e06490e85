#pragma once

// Independent long double re-implementation of the network maths, used as a
// reference by the tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "volcal/mlp.hpp"

namespace oracle {

inline long double selu(long double x) {
    const long double lambda = 1.0507009873554804934193349852946L;
    const long double alpha = 1.6732632423543772848170429916717L;
    return x > 0 ? lambda * x : lambda * alpha * std::expm1(x);
}

inline long double head(volcal::OutputActivation a, long double x) {
    switch (a) {
        case volcal::OutputActivation::sigmoid: return 1.0L / (1.0L + std::exp(-x));
        case volcal::OutputActivation::hard_sigmoid: return std::clamp(0.2L * x + 0.5L, 0.0L, 1.0L);
        case volcal::OutputActivation::identity: return x;
    }
    return x;
}

inline std::vector<long double> forward(const volcal::MlpSpec& spec, const volcal::MlpWeights& w,
                                        const std::vector<long double>& x) {
    std::vector<long double> a = x;
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const auto& layer = w.layers[l];
        std::vector<long double> z(layer.b.size());
        for (std::size_t o = 0; o < z.size(); ++o) {
            long double s = layer.b[o];
            for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(layer.w(o, i)) * a[i];
            z[o] = l + 1 == w.layers.size() ? head(spec.output, s) : selu(s);
        }
        a = std::move(z);
    }
    return a;
}

inline long double loss(const volcal::MlpSpec& spec, const volcal::MlpWeights& w, const volcal::Matrix& x,
                        const volcal::Matrix& y) {
    long double sum = 0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<long double> in(x.row(r).begin(), x.row(r).end());
        const auto out = forward(spec, w, in);
        for (std::size_t c = 0; c < out.size(); ++c) {
            const long double d = out[c] - y(r, c);
            sum += d * d;
        }
    }
    return sum / static_cast<long double>(y.size());
}

}  // namespace oracle
