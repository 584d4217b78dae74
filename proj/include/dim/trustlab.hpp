// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dim {

/// Probability-weighted output classes induced by a platform population.
struct PlatformDistribution {
    struct Class {
        std::string id;
        double p = 0.0;
    };
    std::vector<Class> classes;

    /// Probabilities must be positive and sum to 1 within 1e-12.
    void validate() const;

    static PlatformDistribution from_probs(std::span<const double> probs);
};

/// Renyi collision entropy in bits: -log2(sum p^2). Zero iff one class.
double trust_entropy(const PlatformDistribution& dist);

/// Honest-party rejection probability 1 - 2^(-h_t). Throws on negative input.
double reject_prob(double h_t);

/// Monte Carlo cross-check: prover and verifier draw output classes
/// independently; returns the fraction of trials where they differ.
double simulate_protocol(const PlatformDistribution& dist, uint64_t trials, uint64_t seed);

/// Uniform residual-growth bound eps * ((1+lambda)^L - 1) / lambda;
/// lambda == 0 uses the limit eps * L. Throws on negative eps/lambda or L < 1.
double decay_bound(double eps, double lambda, int layers);

/// Per-layer form: sum_i eps_i * prod_{j>i} (1 + lambda_j).
double decay_bound_layers(std::span<const double> eps, std::span<const double> lambda);

/// Unsigned big integer, wide enough for Catalan counts at any depth.
class BigUint {
  public:
    BigUint() = default;
    explicit BigUint(uint64_t v);

    void mul_small(uint64_t m);
    /// Exact division; the remainder must be zero.
    void div_small_exact(uint64_t d);

    std::string to_string() const;
    double to_double() const;
    bool fits_u64() const;
    uint64_t as_u64() const;

  private:
    std::vector<uint32_t> limbs_; // little-endian base 2^32, no leading zeros
};

/// Number of distinct binary reduction trees for a d-term sum: the Catalan
/// number C(d-1), computed exactly. Throws for d < 2.
BigUint reduction_tree_count(int d);

} // namespace dim
