// SPDX-License-Identifier: Apache-2.0
//
// dim: deterministic integer inference engine, divergence lab, and
// attestation tool in one binary. Every command is reproducible from its
// flags; all randomness flows through explicit --seed values.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dim/attest.hpp"
#include "dim/blake3.hpp"
#include "dim/chacha20.hpp"
#include "dim/engine.hpp"
#include "dim/floatref.hpp"
#include "dim/kernels.hpp"
#include "dim/model.hpp"
#include "dim/q16.hpp"
#include "dim/rope.hpp"
#include "dim/trustlab.hpp"

namespace {

using namespace dim;

// Line-delimited manifest: printed to stdout and optionally copied to --out.
class Manifest {
  public:
    void set(const std::string& key, const std::string& value) {
        lines_.push_back(key + "=" + value);
    }
    void set(const std::string& key, uint64_t v) { set(key, std::to_string(v)); }

    void emit(const std::string& out_path) const {
        for (const auto& l : lines_) std::cout << l << "\n";
        if (!out_path.empty()) {
            std::ofstream f(out_path, std::ios::trunc);
            if (!f) throw std::runtime_error("cannot open " + out_path);
            for (const auto& l : lines_) f << l << "\n";
        }
    }

  private:
    std::vector<std::string> lines_;
};

std::vector<uint32_t> parse_prompt(const std::string& prompt_csv, const std::string& bytes_str) {
    std::vector<uint32_t> ids;
    if (!bytes_str.empty()) {
        for (unsigned char c : bytes_str) ids.push_back(uint32_t(c));
        return ids;
    }
    std::stringstream ss(prompt_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        ids.push_back(uint32_t(std::stoul(item)));
    }
    if (ids.empty()) throw std::invalid_argument("prompt: no token ids given");
    return ids;
}

std::vector<double> parse_dist(const std::string& csv) {
    std::vector<double> probs;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        probs.push_back(std::stod(item));
    }
    return probs;
}

std::string join_u32(std::span<const uint32_t> v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

struct PromptFlags {
    std::string prompt_csv;
    std::string bytes_str;
};

void add_prompt_flags(CLI::App* cmd, PromptFlags& p) {
    auto* a = cmd->add_option("--prompt", p.prompt_csv, "comma-separated token IDs");
    auto* b = cmd->add_option("--bytes", p.bytes_str, "prompt as raw bytes mapped to IDs 0-255");
    a->excludes(b);
}

int cmd_gen(uint64_t seed, const ModelConfig& cfg, double attn_gain, double body_gain,
            const std::string& out_path, const std::string& rope_out,
            const std::string& manifest_out) {
    ModelFile m = attn_gain > 0.0 ? gen_lab_model(seed, cfg, attn_gain, body_gain)
                                  : gen_toy_model(seed, cfg);
    save_model(m, out_path);
    if (!rope_out.empty()) {
        save_rope_tables(build_rope_tables(cfg.rope_theta, cfg.d_head(), cfg.max_ctx), rope_out);
    }
    Manifest man;
    man.set("command", "gen");
    man.set("seed", seed);
    man.set("layers", cfg.n_layers);
    man.set("dmodel", cfg.d_model);
    man.set("heads", cfg.n_heads);
    man.set("ffn", cfg.d_ffn);
    man.set("vocab", cfg.vocab);
    man.set("ctx", cfg.max_ctx);
    if (attn_gain > 0.0) {
        man.set("attn_gain", std::to_string(attn_gain));
        man.set("body_gain", std::to_string(body_gain));
    }
    man.set("out", out_path);
    man.set("weight_hash", m.weight_hash.hex());
    man.emit(manifest_out);
    return 0;
}

int cmd_infer(const std::string& model_path, const PromptFlags& pf, size_t max_new,
              const std::string& mode, double temp, int threads, size_t chunk,
              const std::string& rope_path, const std::string& manifest_out) {
    ModelFile model = load_model(model_path);
    std::vector<uint32_t> prompt = parse_prompt(pf.prompt_csv, pf.bytes_str);
    if (!pf.bytes_str.empty() && model.config.vocab < 256) {
        throw std::invalid_argument("--bytes requires vocab >= 256");
    }
    EngineOptions opts;
    opts.threads = threads;
    opts.chunk = chunk;
    std::optional<RopeTables> imported;
    if (!rope_path.empty()) imported = load_rope_tables(rope_path);

    auto t0 = std::chrono::steady_clock::now();
    GenerationResult res;
    if (mode == "greedy") {
        res = generate_greedy(model, prompt, max_new, opts, imported ? &*imported : nullptr);
    } else if (mode == "sample") {
        res = generate_sampled(model, prompt, max_new, q16_from_real(temp), opts);
    } else {
        throw std::invalid_argument("mode must be greedy or sample");
    }
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  std::chrono::steady_clock::now() - t0)
                  .count();

    Manifest man;
    man.set("command", "infer");
    man.set("model", model_path);
    man.set("model_hash", model.weight_hash.hex());
    man.set("prompt", join_u32(prompt));
    man.set("max_new", uint64_t(max_new));
    man.set("mode", mode == "sample" ? "sample:" + std::to_string(temp) : mode);
    man.set("threads", uint64_t(threads));
    man.set("chunk", uint64_t(chunk));
    man.set("tokens", join_u32(res.token_ids));
    man.set("output_hash", res.output_hash.hex());
    man.set("elapsed_ms", uint64_t(ms));
    man.emit(manifest_out);
    return 0;
}

int cmd_attest(const std::string& model_path, const PromptFlags& pf, size_t max_new,
               uint64_t bond, uint64_t period, int threads, size_t chunk,
               const std::string& att_out, const std::string& manifest_out) {
    ModelFile model = load_model(model_path);
    std::vector<uint32_t> prompt = parse_prompt(pf.prompt_csv, pf.bytes_str);
    EngineOptions opts;
    opts.threads = threads;
    opts.chunk = chunk;
    GenerationResult res = generate_greedy(model, prompt, max_new, opts);
    Attestation att = make_attestation(model.bytes, prompt, res, bond, period);
    auto wire = att.encode();
    std::ofstream f(att_out, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + att_out);
    f.write(reinterpret_cast<const char*>(wire.data()), std::streamsize(wire.size()));
    if (!f) throw std::runtime_error("write failed: " + att_out);

    Manifest man;
    man.set("command", "attest");
    man.set("model", model_path);
    man.set("prompt", join_u32(prompt));
    man.set("max_new", uint64_t(max_new));
    man.set("model_id", att.model_id.hex());
    man.set("input_hash", att.input_hash.hex());
    man.set("output_hash", att.output_hash.hex());
    man.set("bond", att.bond);
    man.set("challenge_period", att.challenge_period);
    man.set("out", att_out);
    man.emit(manifest_out);
    return 0;
}

Attestation load_attestation(const std::string& path) {
    return Attestation::decode(read_file_bytes(path));
}

int cmd_verify(const std::string& att_path, const std::string& model_path, const PromptFlags& pf,
               size_t max_new, int threads, size_t chunk, const std::string& manifest_out) {
    Attestation att = load_attestation(att_path);
    std::vector<uint8_t> model_bytes = read_file_bytes(model_path);
    std::vector<uint32_t> prompt = parse_prompt(pf.prompt_csv, pf.bytes_str);
    EngineOptions opts;
    opts.threads = threads;
    opts.chunk = chunk;
    VerifyOutcome out = verify_by_reexecution(att, model_bytes, prompt, max_new, opts);
    Manifest man;
    man.set("command", "verify");
    man.set("attestation", att_path);
    man.set("model", model_path);
    man.set("verdict", out.to_text());
    man.emit(manifest_out);
    return out.confirmed ? 0 : 1;
}

int cmd_dispute(const std::string& att_path, const std::string& model_path, const PromptFlags& pf,
                size_t max_new, const std::string& manifest_out) {
    Attestation att = load_attestation(att_path);
    std::vector<uint8_t> model_bytes = read_file_bytes(model_path);
    std::vector<uint32_t> prompt = parse_prompt(pf.prompt_csv, pf.bytes_str);
    DisputeResult res = dispute_game(att, model_bytes, prompt, max_new);
    Manifest man;
    man.set("command", "dispute");
    man.set("attestation", att_path);
    man.set("winner", res.winner == DisputeWinner::attester ? "AttesterWins" : "ChallengerWins");
    man.set("detail", res.outcome.to_text());
    man.emit(manifest_out);
    return res.winner == DisputeWinner::attester ? 0 : 1;
}

int cmd_diverge(const std::string& model_path, const PromptFlags& pf, size_t horizon, int lanes_a,
                int lanes_b, const std::string& backend, bool layer_l2,
                const std::string& manifest_out) {
    ModelFile model = load_model(model_path);
    std::vector<uint32_t> prompt = parse_prompt(pf.prompt_csv, pf.bytes_str);
    Manifest man;
    man.set("command", "diverge");
    man.set("model", model_path);
    man.set("model_hash", model.weight_hash.hex());
    man.set("prompt", join_u32(prompt));
    man.set("horizon", uint64_t(horizon));
    man.set("backend", backend);
    man.set("lanes_a", uint64_t(lanes_a));
    man.set("lanes_b", uint64_t(lanes_b));

    std::vector<uint32_t> ta, tb;
    if (backend == "float") {
        FloatModel fm = FloatModel::from(model);
        ta = float_generate(fm, prompt, horizon, LaneConfig{lanes_a}).token_ids;
        tb = float_generate(fm, prompt, horizon, LaneConfig{lanes_b}).token_ids;
        if (layer_l2) {
            auto l2 =
                measure_layer_divergence(fm, prompt, LaneConfig{lanes_a}, LaneConfig{lanes_b});
            for (size_t l = 0; l < l2.size(); ++l) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.6e", l2[l]);
                man.set("layer," + std::to_string(l), buf);
            }
        }
    } else if (backend == "int") {
        // lane values select thread counts here; the output must not move
        EngineOptions oa, ob;
        oa.threads = lanes_a;
        ob.threads = lanes_b;
        ta = generate_greedy(model, prompt, horizon, oa).token_ids;
        tb = generate_greedy(model, prompt, horizon, ob).token_ids;
        man.set("output_hash_a", hash_token_ids(ta).hex());
        man.set("output_hash_b", hash_token_ids(tb).hex());
    } else {
        throw std::invalid_argument("backend must be float or int");
    }
    std::optional<size_t> first;
    for (size_t i = 0; i < std::min(ta.size(), tb.size()); ++i) {
        man.set("token," + std::to_string(i), std::to_string(ta[i]) + "," + std::to_string(tb[i]));
        if (ta[i] != tb[i]) {
            first = i;
            break;
        }
    }
    man.set("first_divergence", first ? std::to_string(*first) : "none");
    man.emit(manifest_out);
    return 0;
}

int cmd_theorem9() {
    const float v[4] = {1.0f, 0x1p-24f, 0x1p-24f, 0x1p-24f};
    float s1 = fsum_lanes(std::span<const float>(v, 4), LaneConfig{1});
    float s2 = fsum_lanes(std::span<const float>(v, 4), LaneConfig{2});
    std::printf("lanes=1 %.10f\n", double(s1));
    std::printf("lanes=2 %.10f\n", double(s2));
    return 0;
}

int cmd_entropy(const std::string& dist_csv, uint64_t trials, uint64_t seed,
                const std::string& manifest_out) {
    auto probs = parse_dist(dist_csv);
    PlatformDistribution dist = PlatformDistribution::from_probs(probs);
    double h = trust_entropy(dist);
    double rej = reject_prob(h);
    Manifest man;
    man.set("command", "entropy");
    man.set("dist", dist_csv);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", h);
    man.set("H_T", buf);
    std::snprintf(buf, sizeof(buf), "%.3f", rej);
    man.set("reject", buf);
    if (trials > 0) {
        double emp = simulate_protocol(dist, trials, seed);
        man.set("trials", trials);
        man.set("seed", seed);
        std::snprintf(buf, sizeof(buf), "%.6f", emp);
        man.set("empirical_reject", buf);
    }
    man.emit(manifest_out);
    return 0;
}

int cmd_decay(double eps, double lambda, int layers, const std::string& manifest_out) {
    double bound = decay_bound(eps, lambda, layers);
    Manifest man;
    man.set("command", "decay");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", bound);
    man.set("bound", buf);
    man.emit(manifest_out);
    return 0;
}

int cmd_catalan(int d, const std::string& manifest_out) {
    Manifest man;
    man.set("command", "catalan");
    man.set("d", uint64_t(d));
    man.set("trees", reduction_tree_count(d).to_string());
    man.emit(manifest_out);
    return 0;
}

int cmd_selftest() {
    int failures = 0;
    auto check = [&](const char* name, bool ok) {
        std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", name);
        if (!ok) ++failures;
    };
    check("blake3 empty vector",
          blake3(nullptr, 0).hex() ==
              "af1349b9f5f9a1a6a0404dea36dcc9499bcb25c9adc112b7cc9a93cae41f3262");
    {
        std::array<uint32_t, 8> key;
        for (int i = 0; i < 8; ++i) {
            key[i] = uint32_t(4 * i) | uint32_t(4 * i + 1) << 8 | uint32_t(4 * i + 2) << 16 |
                     uint32_t(4 * i + 3) << 24;
        }
        std::array<uint8_t, 64> blk;
        chacha20_block(key, {0x09000000u, 0x4a000000u, 0}, 1, blk);
        check("chacha20 rfc block", blk[0] == 0x10 && blk[1] == 0xf1 && blk[2] == 0xe7 &&
                                        blk[3] == 0xe4 && blk[63] == 0x4e);
    }
    check("q16 ratio 1/127", q16_from_ratio(1, 127).raw == 516);
    check("inv_sqrt(4) exact", inv_sqrt_q16(q16{4 * kQ16One}).raw == kQ16One / 2);
    check("exp lut endpoints",
          exp_neg_lut(q16{0}).raw == kQ16One && exp_neg_lut(q16{8 * kQ16One}).raw == 22);
    check("sigmoid symmetry",
          sigmoid_q16(q16{12345}).raw + sigmoid_q16(q16{-12345}).raw == kQ16One);
    {
        const float v[4] = {1.0f, 0x1p-24f, 0x1p-24f, 0x1p-24f};
        float s1 = fsum_lanes(std::span<const float>(v, 4), LaneConfig{1});
        float s2 = fsum_lanes(std::span<const float>(v, 4), LaneConfig{2});
        check("reduction-order witness", s1 == 1.0f && s2 == 1.0f + 0x1p-23f);
    }
    check("catalan counts", reduction_tree_count(3).to_string() == "2" &&
                                reduction_tree_count(4).to_string() == "5" &&
                                reduction_tree_count(20).to_string() == "1767263190");
    {
        auto t = build_rope_tables(10000.0, 4, 4);
        check("rope identity row", t.cos_at(0, 0) == kQ16One && t.sin_at(0, 0) == 0);
    }
    std::printf("%s\n", failures == 0 ? "selftest: all checks passed" : "selftest: FAILURES");
    return failures == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic integer transformer inference + verification lab"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a deterministic toy model");
    uint64_t seed = 0;
    ModelConfig cfg;
    cfg.n_layers = 16;
    cfg.d_model = 64;
    cfg.n_heads = 4;
    cfg.d_ffn = 128;
    cfg.vocab = 256;
    cfg.max_ctx = 512;
    std::string out_path, rope_out, manifest_out;
    gen->add_option("--seed", seed, "generator seed")->required();
    gen->add_option("--layers", cfg.n_layers, "transformer layers");
    gen->add_option("--dmodel", cfg.d_model, "embedding width");
    gen->add_option("--heads", cfg.n_heads, "attention heads");
    gen->add_option("--ffn", cfg.d_ffn, "feed-forward width");
    gen->add_option("--vocab", cfg.vocab, "vocabulary size");
    gen->add_option("--ctx", cfg.max_ctx, "maximum context length");
    gen->add_option("--theta", cfg.rope_theta, "rotary base frequency");
    double attn_gain = 0.0, body_gain = 1.2;
    gen->add_option("--attn-gain", attn_gain,
                    "build a divergence-lab model with this score-projection gain");
    gen->add_option("--body-gain", body_gain, "lab model gain for the remaining weights");
    gen->add_option("--out", out_path, "model file path")->required();
    gen->add_option("--rope-out", rope_out, "also export the rotary tables");
    gen->add_option("--manifest", manifest_out, "write the manifest here too");

    // infer
    auto* infer = app.add_subcommand("infer", "run deterministic generation");
    std::string model_path, mode = "greedy", rope_path;
    PromptFlags infer_prompt;
    size_t max_new = 8, chunk = 0;
    int threads = 1;
    double temp = 1.0;
    infer->add_option("--model", model_path, "model file")->required();
    add_prompt_flags(infer, infer_prompt);
    infer->add_option("--max-new", max_new, "tokens to generate");
    infer->add_option("--mode", mode, "greedy | sample");
    infer->add_option("--temp", temp, "sampling temperature (real)");
    infer->add_option("--threads", threads, "head-level worker threads");
    infer->add_option("--chunk", chunk, "matvec chunk size (0 = plain kernel)");
    infer->add_option("--rope-tables", rope_path, "import rotary tables from file");
    infer->add_option("--out", manifest_out, "write the manifest here too");

    // attest
    auto* attest = app.add_subcommand("attest", "generate and attest an inference");
    std::string att_path;
    uint64_t bond = 0, period = 0;
    PromptFlags attest_prompt;
    attest->add_option("--model", model_path, "model file")->required();
    add_prompt_flags(attest, attest_prompt);
    attest->add_option("--max-new", max_new, "tokens to generate");
    attest->add_option("--bond", bond, "economic bond (carried as data)");
    attest->add_option("--period", period, "challenge period in blocks (data)");
    attest->add_option("--threads", threads, "head-level worker threads");
    attest->add_option("--chunk", chunk, "matvec chunk size");
    attest->add_option("--out", att_path, "attestation file")->required();
    attest->add_option("--manifest", manifest_out, "write the manifest here too");

    // verify
    auto* verify = app.add_subcommand("verify", "verify an attestation by re-execution");
    PromptFlags verify_prompt;
    verify->add_option("--att", att_path, "attestation file")->required();
    verify->add_option("--model", model_path, "candidate model file")->required();
    add_prompt_flags(verify, verify_prompt);
    verify->add_option("--max-new", max_new, "tokens the attester generated");
    verify->add_option("--threads", threads, "head-level worker threads");
    verify->add_option("--chunk", chunk, "matvec chunk size");
    verify->add_option("--manifest", manifest_out, "write the manifest here too");

    // dispute
    auto* dispute = app.add_subcommand("dispute", "simulate one challenger re-execution");
    PromptFlags dispute_prompt;
    dispute->add_option("--att", att_path, "attestation file")->required();
    dispute->add_option("--model", model_path, "honest model file")->required();
    add_prompt_flags(dispute, dispute_prompt);
    dispute->add_option("--max-new", max_new, "tokens the attester generated");
    dispute->add_option("--manifest", manifest_out, "write the manifest here too");

    // diverge
    auto* diverge = app.add_subcommand("diverge", "reduction-order divergence experiment");
    PromptFlags diverge_prompt;
    size_t horizon = 256;
    int lanes_a = 2, lanes_b = 8;
    std::string backend = "float";
    bool layer_l2 = false;
    diverge->add_option("--model", model_path, "model file")->required();
    add_prompt_flags(diverge, diverge_prompt);
    diverge->add_option("--horizon", horizon, "maximum generated tokens");
    diverge->add_option("--lanes-a", lanes_a, "lane config A (1|2|4|8)");
    diverge->add_option("--lanes-b", lanes_b, "lane config B (1|2|4|8)");
    diverge->add_option("--backend", backend, "float | int");
    diverge->add_flag("--layer-l2", layer_l2, "also report per-layer L2 divergence");
    diverge->add_option("--manifest", manifest_out, "write the manifest here too");

    // theorem9
    app.add_subcommand("theorem9", "print the two reduction-order sums");

    // entropy
    auto* entropy = app.add_subcommand("entropy", "trust entropy and rejection probability");
    std::string dist_csv;
    uint64_t trials = 0, sim_seed = 0;
    entropy->add_option("--dist", dist_csv, "comma-separated class probabilities")->required();
    entropy->add_option("--trials", trials, "Monte Carlo trials (0 = closed form only)");
    entropy->add_option("--seed", sim_seed, "simulation seed");
    entropy->add_option("--manifest", manifest_out, "write the manifest here too");

    // decay
    auto* decay = app.add_subcommand("decay", "compositional divergence bound");
    double d_eps = 0.0, d_lambda = 0.0;
    int d_layers = 1;
    decay->add_option("--eps", d_eps, "per-layer divergence")->required();
    decay->add_option("--lambda", d_lambda, "sub-layer Lipschitz constant")->required();
    decay->add_option("--layers", d_layers, "layer count")->required();
    decay->add_option("--manifest", manifest_out, "write the manifest here too");

    // catalan
    auto* catalan = app.add_subcommand("catalan", "count binary reduction trees");
    int cat_d = 2;
    catalan->add_option("--d", cat_d, "dot-product dimension")->required();
    catalan->add_option("--manifest", manifest_out, "write the manifest here too");

    // selftest
    app.add_subcommand("selftest", "fast internal battery");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen(seed, cfg, attn_gain, body_gain, out_path, rope_out, manifest_out);
        }
        if (infer->parsed()) {
            return cmd_infer(model_path, infer_prompt, max_new, mode, temp, threads, chunk,
                             rope_path, manifest_out);
        }
        if (attest->parsed()) {
            return cmd_attest(model_path, attest_prompt, max_new, bond, period, threads, chunk,
                              att_path, manifest_out);
        }
        if (verify->parsed()) {
            return cmd_verify(att_path, model_path, verify_prompt, max_new, threads, chunk,
                              manifest_out);
        }
        if (dispute->parsed()) {
            return cmd_dispute(att_path, model_path, dispute_prompt, max_new, manifest_out);
        }
        if (diverge->parsed()) {
            return cmd_diverge(model_path, diverge_prompt, horizon, lanes_a, lanes_b, backend,
                               layer_l2, manifest_out);
        }
        if (app.get_subcommand("theorem9")->parsed()) return cmd_theorem9();
        if (entropy->parsed()) return cmd_entropy(dist_csv, trials, sim_seed, manifest_out);
        if (decay->parsed()) return cmd_decay(d_eps, d_lambda, d_layers, manifest_out);
        if (catalan->parsed()) return cmd_catalan(cat_d, manifest_out);
        if (app.get_subcommand("selftest")->parsed()) return cmd_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
