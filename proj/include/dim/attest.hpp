// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "dim/blake3.hpp"
#include "dim/engine.hpp"

namespace dim {

/// (H(model), H(input), H(output)) plus bond and challenge period. The bond
/// and period are carried as data only; no enforcement lives here.
struct Attestation {
    Digest model_id;
    Digest input_hash;
    Digest output_hash;
    uint64_t bond = 0;
    uint64_t challenge_period = 0;

    /// Wire format: three 32-byte digests, u64 bond, u64 period, little-endian.
    std::array<uint8_t, 112> encode() const;
    static Attestation decode(std::span<const uint8_t> bytes);

    std::string to_text() const;

    friend bool operator==(const Attestation&, const Attestation&) = default;
};

/// Normative byte encodings: model file bytes, prompt IDs u32-LE, output IDs u32-LE.
Digest prompt_hash(std::span<const uint32_t> prompt_ids);

Attestation make_attestation(std::span<const uint8_t> model_bytes,
                             std::span<const uint32_t> prompt_ids,
                             const GenerationResult& result, uint64_t bond,
                             uint64_t challenge_period);

struct VerifyOutcome {
    enum class Stage { model, input, output };
    bool confirmed = false;
    Stage refuted_stage = Stage::model; // meaningful when !confirmed
    Digest expected;                    // digest claimed by the attestation
    Digest found;                       // digest computed by the verifier

    std::string to_text() const;
};

/// Checks H(model bytes), then H(prompt), then re-runs greedy generation once
/// and checks H(output). Stops at the first mismatch; the Confirmed path
/// performs exactly one re-execution. Model parse failures propagate as
/// ParseError, not as a verdict.
VerifyOutcome verify_by_reexecution(const Attestation& att, std::span<const uint8_t> model_bytes,
                                    std::span<const uint32_t> prompt_ids, size_t max_new,
                                    EngineOptions opts = {});

enum class DisputeWinner { attester, challenger };

struct DisputeResult {
    DisputeWinner winner;
    VerifyOutcome outcome;
};

/// One challenger re-executes; the challenger wins iff any stage refutes.
DisputeResult dispute_game(const Attestation& att, std::span<const uint8_t> model_bytes,
                           std::span<const uint32_t> prompt_ids, size_t max_new,
                           EngineOptions opts = {});

} // namespace dim
