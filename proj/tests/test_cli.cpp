// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <string>

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

std::string cli_path() {
    const char* p = std::getenv("DIM_CLI");
    REQUIRE(p != nullptr);
    return p;
}

std::string tmp_dir() {
    static std::string dir = [] {
        char templ[] = "/tmp/dim_cli_test_XXXXXX";
        REQUIRE(mkdtemp(templ) != nullptr);
        return std::string(templ);
    }();
    return dir;
}

RunResult run(const std::string& args) {
    std::string cmd = cli_path() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::string out;
    char buf[512];
    while (fgets(buf, sizeof(buf), pipe)) out += buf;
    int status = pclose(pipe);
    return {WEXITSTATUS(status), out};
}

std::string grep_value(const std::string& text, const std::string& key) {
    size_t pos = text.find(key + "=");
    if (pos == std::string::npos) return "";
    pos += key.size() + 1;
    size_t end = text.find('\n', pos);
    return text.substr(pos, end - pos);
}

} // namespace

TEST_CASE("gen is idempotent and infer hashes are flag-stable") {
    std::string model = tmp_dir() + "/m.dim";
    auto g1 = run("gen --seed 11 --layers 2 --dmodel 16 --heads 2 --ffn 32 --vocab 256 "
                  "--ctx 64 --out " + model);
    REQUIRE(g1.exit_code == 0);
    auto g2 = run("gen --seed 11 --layers 2 --dmodel 16 --heads 2 --ffn 32 --vocab 256 "
                  "--ctx 64 --out " + model);
    CHECK(grep_value(g1.out, "weight_hash") == grep_value(g2.out, "weight_hash"));

    auto base = run("infer --model " + model + " --prompt 1,2,3 --max-new 8");
    REQUIRE(base.exit_code == 0);
    std::string h = grep_value(base.out, "output_hash");
    REQUIRE(!h.empty());

    // 7 consecutive runs, one unique hash
    for (int i = 0; i < 7; ++i) {
        auto r = run("infer --model " + model + " --prompt 1,2,3 --max-new 8");
        REQUIRE(r.exit_code == 0);
        REQUIRE(grep_value(r.out, "output_hash") == h);
    }
    // thread count and chunk size do not move the hash
    for (std::string flags : {std::string("--threads 8"), std::string("--chunk 7"),
                              std::string("--threads 2 --chunk 16")}) {
        auto r = run("infer --model " + model + " --prompt 1,2,3 --max-new 8 " + flags);
        REQUIRE(r.exit_code == 0);
        REQUIRE(grep_value(r.out, "output_hash") == h);
    }
    // --bytes maps characters to ids
    auto bytes_run = run("infer --model " + model + " --bytes AB --max-new 4");
    CHECK(bytes_run.exit_code == 0);
    CHECK(grep_value(bytes_run.out, "prompt") == "65,66");
}

TEST_CASE("usage and domain errors exit with 2") {
    CHECK(run("gen --seed 1").exit_code == 2); // missing --out
    CHECK(run("nonsense").exit_code == 2);
    std::string model = tmp_dir() + "/m2.dim";
    REQUIRE(run("gen --seed 3 --layers 1 --dmodel 8 --heads 2 --ffn 8 --vocab 16 --ctx 32 "
                "--out " + model).exit_code == 0);
    CHECK(run("infer --model " + model + " --prompt 99 --max-new 2").exit_code == 2);
    CHECK(run("infer --model /nonexistent --prompt 1 --max-new 2").exit_code == 2);
    CHECK(run("infer --model " + model + " --prompt 1 --max-new 2 --mode sample --temp 0")
              .exit_code == 2);
}

TEST_CASE("attest, verify, and dispute round-trip with correct exit codes") {
    std::string model = tmp_dir() + "/m3.dim";
    std::string att = tmp_dir() + "/a.att";
    REQUIRE(run("gen --seed 21 --layers 2 --dmodel 16 --heads 2 --ffn 32 --vocab 32 --ctx 64 "
                "--out " + model).exit_code == 0);
    auto a = run("attest --model " + model + " --prompt 1,2 --max-new 6 --bond 777 "
                 "--period 55 --out " + att);
    REQUIRE(a.exit_code == 0);
    CHECK(grep_value(a.out, "bond") == "777");

    auto v = run("verify --att " + att + " --model " + model + " --prompt 1,2 --max-new 6");
    CHECK(v.exit_code == 0);
    CHECK(v.out.find("Confirmed") != std::string::npos);

    auto d = run("dispute --att " + att + " --model " + model + " --prompt 1,2 --max-new 6");
    CHECK(d.exit_code == 0);
    CHECK(d.out.find("AttesterWins") != std::string::npos);

    // flip one byte of the stored output hash: Refuted(output), exit 1
    {
        FILE* f = fopen(att.c_str(), "r+b");
        REQUIRE(f != nullptr);
        fseek(f, 64, SEEK_SET);
        int c = fgetc(f);
        fseek(f, 64, SEEK_SET);
        fputc(c ^ 1, f);
        fclose(f);
    }
    auto bad = run("verify --att " + att + " --model " + model + " --prompt 1,2 --max-new 6");
    CHECK(bad.exit_code == 1);
    CHECK(bad.out.find("Refuted(output)") != std::string::npos);

    auto lose = run("dispute --att " + att + " --model " + model + " --prompt 1,2 --max-new 6");
    CHECK(lose.exit_code == 1);
    CHECK(lose.out.find("ChallengerWins") != std::string::npos);

    // wrong model file: Refuted(model), exit 1
    std::string other = tmp_dir() + "/m4.dim";
    REQUIRE(run("gen --seed 22 --layers 2 --dmodel 16 --heads 2 --ffn 32 --vocab 32 --ctx 64 "
                "--out " + other).exit_code == 0);
    std::string att2 = tmp_dir() + "/b.att";
    REQUIRE(run("attest --model " + model + " --prompt 1,2 --max-new 6 --out " + att2)
                .exit_code == 0);
    auto wrong = run("verify --att " + att2 + " --model " + other + " --prompt 1,2 --max-new 6");
    CHECK(wrong.exit_code == 1);
    CHECK(wrong.out.find("Refuted(model)") != std::string::npos);
}

TEST_CASE("metric commands print the documented values") {
    auto t9 = run("theorem9");
    CHECK(t9.exit_code == 0);
    CHECK(t9.out.find("lanes=1 1.0000000000") != std::string::npos);
    CHECK(t9.out.find("lanes=2 1.0000001192") != std::string::npos);

    auto e = run("entropy --dist 0.5,0.5");
    CHECK(e.exit_code == 0);
    CHECK(grep_value(e.out, "H_T") == "1.000");
    CHECK(grep_value(e.out, "reject") == "0.500");

    auto e1 = run("entropy --dist 1.0");
    CHECK(grep_value(e1.out, "H_T") == "0.000");
    CHECK(grep_value(e1.out, "reject") == "0.000");

    auto d = run("decay --eps 1e-5 --lambda 0.3 --layers 32");
    CHECK(d.exit_code == 0);
    double bound = std::stod(grep_value(d.out, "bound"));
    CHECK(bound >= 0.146);
    CHECK(bound <= 0.149);

    auto c = run("catalan --d 20");
    CHECK(grep_value(c.out, "trees") == "1767263190");

    CHECK(run("selftest").exit_code == 0);
}

TEST_CASE("int-backend divergence reports none and identical hashes") {
    std::string model = tmp_dir() + "/m5.dim";
    REQUIRE(run("gen --seed 31 --layers 2 --dmodel 16 --heads 2 --ffn 32 --vocab 32 --ctx 64 "
                "--out " + model).exit_code == 0);
    auto r = run("diverge --model " + model +
                 " --prompt 1,2 --horizon 16 --lanes-a 2 --lanes-b 8 --backend int");
    CHECK(r.exit_code == 0);
    CHECK(grep_value(r.out, "first_divergence") == "none");
    CHECK(grep_value(r.out, "output_hash_a") == grep_value(r.out, "output_hash_b"));

    auto f = run("diverge --model " + model +
                 " --prompt 1,2 --horizon 16 --lanes-a 4 --lanes-b 4 --backend float");
    CHECK(f.exit_code == 0);
    CHECK(grep_value(f.out, "first_divergence") == "none");
}
