// SPDX-License-Identifier: Apache-2.0
#include "dim/trustlab.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dim/chacha20.hpp"

namespace dim {

void PlatformDistribution::validate() const {
    if (classes.empty()) throw std::invalid_argument("distribution: no classes");
    double sum = 0.0;
    for (const auto& c : classes) {
        if (!(c.p > 0.0) || !std::isfinite(c.p)) {
            throw std::invalid_argument("distribution: probabilities must be positive");
        }
        sum += c.p;
    }
    if (std::fabs(sum - 1.0) > 1e-12) {
        throw std::invalid_argument("distribution: probabilities must sum to 1");
    }
}

PlatformDistribution PlatformDistribution::from_probs(std::span<const double> probs) {
    PlatformDistribution d;
    d.classes.reserve(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) {
        d.classes.push_back({"y" + std::to_string(i), probs[i]});
    }
    d.validate();
    return d;
}

double trust_entropy(const PlatformDistribution& dist) {
    dist.validate();
    double collision = 0.0;
    for (const auto& c : dist.classes) collision += c.p * c.p;
    double h = -std::log2(collision);
    return h == 0.0 ? 0.0 : h; // never -0.0
}

double reject_prob(double h_t) {
    if (h_t < 0.0 || !std::isfinite(h_t)) {
        throw std::invalid_argument("reject_prob: entropy must be non-negative");
    }
    return 1.0 - std::exp2(-h_t);
}

double simulate_protocol(const PlatformDistribution& dist, uint64_t trials, uint64_t seed) {
    dist.validate();
    if (trials < 1) throw std::invalid_argument("simulate_protocol: trials must be >= 1");
    std::vector<double> cum(dist.classes.size());
    double acc = 0.0;
    for (size_t i = 0; i < dist.classes.size(); ++i) {
        acc += dist.classes[i].p;
        cum[i] = acc;
    }
    cum.back() = 1.0;
    ChaCha20Rng rng(seed);
    auto draw = [&]() -> size_t {
        double u = rng.next_unit();
        return size_t(std::lower_bound(cum.begin(), cum.end(), u,
                                       [](double c, double x) { return c <= x; }) -
                      cum.begin());
    };
    uint64_t rejects = 0;
    for (uint64_t t = 0; t < trials; ++t) {
        size_t prover = draw();
        size_t verifier = draw();
        if (prover != verifier) ++rejects;
    }
    return double(rejects) / double(trials);
}

double decay_bound(double eps, double lambda, int layers) {
    if (eps < 0.0) throw std::invalid_argument("decay_bound: eps must be >= 0");
    if (lambda < 0.0) throw std::invalid_argument("decay_bound: lambda must be >= 0");
    if (layers < 1) throw std::invalid_argument("decay_bound: layers must be >= 1");
    if (lambda == 0.0) return eps * double(layers);
    return eps * (std::pow(1.0 + lambda, double(layers)) - 1.0) / lambda;
}

double decay_bound_layers(std::span<const double> eps, std::span<const double> lambda) {
    if (eps.empty() || eps.size() != lambda.size()) {
        throw std::invalid_argument("decay_bound_layers: eps/lambda length mismatch");
    }
    size_t n = eps.size();
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (eps[i] < 0.0 || lambda[i] < 0.0) {
            throw std::invalid_argument("decay_bound_layers: negative parameter");
        }
        double amp = 1.0;
        for (size_t j = i + 1; j < n; ++j) amp *= 1.0 + lambda[j];
        total += eps[i] * amp;
    }
    return total;
}

BigUint::BigUint(uint64_t v) {
    while (v != 0) {
        limbs_.push_back(uint32_t(v));
        v >>= 32;
    }
}

void BigUint::mul_small(uint64_t m) {
    if (m == 0 || limbs_.empty()) {
        limbs_.clear();
        return;
    }
    // m fits in 32 bits for the Catalan recurrence factors; handle 64 anyway
    uint64_t lo = m & 0xffffffffu, hi = m >> 32;
    std::vector<uint32_t> out(limbs_.size() + 2, 0);
    auto add_at = [&](size_t idx, uint64_t v) {
        while (v != 0) {
            uint64_t s = uint64_t(out[idx]) + (v & 0xffffffffu);
            out[idx] = uint32_t(s);
            v = (v >> 32) + (s >> 32);
            ++idx;
        }
    };
    for (size_t i = 0; i < limbs_.size(); ++i) {
        add_at(i, uint64_t(limbs_[i]) * lo);
        if (hi != 0) add_at(i + 1, uint64_t(limbs_[i]) * hi);
    }
    while (!out.empty() && out.back() == 0) out.pop_back();
    limbs_ = std::move(out);
}

void BigUint::div_small_exact(uint64_t d) {
    if (d == 0) throw std::invalid_argument("BigUint: division by zero");
    uint64_t rem = 0;
    for (size_t i = limbs_.size(); i-- > 0;) {
        uint64_t cur = (rem << 32) | limbs_[i];
        limbs_[i] = uint32_t(cur / d);
        rem = cur % d;
    }
    if (rem != 0) throw std::logic_error("BigUint: inexact division");
    while (!limbs_.empty() && limbs_.back() == 0) limbs_.pop_back();
}

std::string BigUint::to_string() const {
    if (limbs_.empty()) return "0";
    std::vector<uint32_t> work = limbs_;
    std::string digits;
    while (!work.empty()) {
        uint64_t rem = 0;
        for (size_t i = work.size(); i-- > 0;) {
            uint64_t cur = (rem << 32) | work[i];
            work[i] = uint32_t(cur / 1000000000ull);
            rem = cur % 1000000000ull;
        }
        while (!work.empty() && work.back() == 0) work.pop_back();
        for (int i = 0; i < 9; ++i) {
            digits.push_back(char('0' + rem % 10));
            rem /= 10;
        }
    }
    while (digits.size() > 1 && digits.back() == '0') digits.pop_back();
    return std::string(digits.rbegin(), digits.rend());
}

double BigUint::to_double() const {
    double v = 0.0;
    for (size_t i = limbs_.size(); i-- > 0;) v = v * 0x1.0p32 + double(limbs_[i]);
    return v;
}

bool BigUint::fits_u64() const { return limbs_.size() <= 2; }

uint64_t BigUint::as_u64() const {
    if (!fits_u64()) throw std::overflow_error("BigUint: value exceeds u64");
    uint64_t v = 0;
    for (size_t i = limbs_.size(); i-- > 0;) v = (v << 32) | limbs_[i];
    return v;
}

BigUint reduction_tree_count(int d) {
    if (d < 2) throw std::invalid_argument("reduction_tree_count: d must be >= 2");
    // C(0) = 1; C(k+1) = C(k) * 2(2k+1) / (k+2)
    BigUint c(1);
    int n = d - 1;
    for (int k = 0; k < n; ++k) {
        c.mul_small(2ull * (2ull * uint64_t(k) + 1));
        c.div_small_exact(uint64_t(k) + 2);
    }
    return c;
}

} // namespace dim
