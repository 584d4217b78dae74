// SPDX-License-Identifier: Apache-2.0
#include "dim/attest.hpp"

#include "dim/serial.hpp"

namespace dim {

namespace {

void put_u64(uint8_t* out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out[i] = uint8_t(v >> (8 * i));
}

uint64_t get_u64(const uint8_t* in) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(in[i]) << (8 * i);
    return v;
}

const char* stage_name(VerifyOutcome::Stage s) {
    switch (s) {
        case VerifyOutcome::Stage::model: return "model";
        case VerifyOutcome::Stage::input: return "input";
        case VerifyOutcome::Stage::output: return "output";
    }
    return "?";
}

} // namespace

std::array<uint8_t, 112> Attestation::encode() const {
    std::array<uint8_t, 112> out{};
    std::copy(model_id.bytes.begin(), model_id.bytes.end(), out.begin());
    std::copy(input_hash.bytes.begin(), input_hash.bytes.end(), out.begin() + 32);
    std::copy(output_hash.bytes.begin(), output_hash.bytes.end(), out.begin() + 64);
    put_u64(out.data() + 96, bond);
    put_u64(out.data() + 104, challenge_period);
    return out;
}

Attestation Attestation::decode(std::span<const uint8_t> bytes) {
    if (bytes.size() != 112) {
        throw ParseError(ParseError::Kind::truncated, "attestation: expected 112 bytes");
    }
    Attestation a;
    std::copy(bytes.begin(), bytes.begin() + 32, a.model_id.bytes.begin());
    std::copy(bytes.begin() + 32, bytes.begin() + 64, a.input_hash.bytes.begin());
    std::copy(bytes.begin() + 64, bytes.begin() + 96, a.output_hash.bytes.begin());
    a.bond = get_u64(bytes.data() + 96);
    a.challenge_period = get_u64(bytes.data() + 104);
    return a;
}

std::string Attestation::to_text() const {
    std::string s;
    s += "model_id=" + model_id.hex() + "\n";
    s += "input_hash=" + input_hash.hex() + "\n";
    s += "output_hash=" + output_hash.hex() + "\n";
    s += "bond=" + std::to_string(bond) + "\n";
    s += "challenge_period=" + std::to_string(challenge_period) + "\n";
    return s;
}

Digest prompt_hash(std::span<const uint32_t> prompt_ids) {
    return hash_token_ids(prompt_ids);
}

Attestation make_attestation(std::span<const uint8_t> model_bytes,
                             std::span<const uint32_t> prompt_ids,
                             const GenerationResult& result, uint64_t bond,
                             uint64_t challenge_period) {
    Attestation a;
    a.model_id = blake3(model_bytes);
    a.input_hash = prompt_hash(prompt_ids);
    a.output_hash = result.output_hash;
    a.bond = bond;
    a.challenge_period = challenge_period;
    return a;
}

std::string VerifyOutcome::to_text() const {
    if (confirmed) return "Confirmed";
    std::string s = "Refuted(";
    s += stage_name(refuted_stage);
    s += ") expected=" + expected.hex() + " found=" + found.hex();
    return s;
}

VerifyOutcome verify_by_reexecution(const Attestation& att, std::span<const uint8_t> model_bytes,
                                    std::span<const uint32_t> prompt_ids, size_t max_new,
                                    EngineOptions opts) {
    VerifyOutcome out;
    Digest model_found = blake3(model_bytes);
    if (model_found != att.model_id) {
        out.refuted_stage = VerifyOutcome::Stage::model;
        out.expected = att.model_id;
        out.found = model_found;
        return out;
    }
    Digest input_found = prompt_hash(prompt_ids);
    if (input_found != att.input_hash) {
        out.refuted_stage = VerifyOutcome::Stage::input;
        out.expected = att.input_hash;
        out.found = input_found;
        return out;
    }
    ModelFile model = deserialize(model_bytes); // ParseError propagates
    GenerationResult rerun = generate_greedy(model, prompt_ids, max_new, opts);
    if (rerun.output_hash != att.output_hash) {
        out.refuted_stage = VerifyOutcome::Stage::output;
        out.expected = att.output_hash;
        out.found = rerun.output_hash;
        return out;
    }
    out.confirmed = true;
    return out;
}

DisputeResult dispute_game(const Attestation& att, std::span<const uint8_t> model_bytes,
                           std::span<const uint32_t> prompt_ids, size_t max_new,
                           EngineOptions opts) {
    VerifyOutcome outcome = verify_by_reexecution(att, model_bytes, prompt_ids, max_new, opts);
    return DisputeResult{outcome.confirmed ? DisputeWinner::attester : DisputeWinner::challenger,
                         outcome};
}

} // namespace dim
