// End-to-end checks of the absa binary: each subcommand is exercised against the
// fixture corpora with a deliberately tiny encoder so the whole file runs in seconds.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = ABSA_CLI_PATH;
const std::string kFixtures = ABSA_FIXTURE_DIR;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: " << path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path scratch_root() {
    static const fs::path root = [] {
        fs::path p = fs::temp_directory_path() / "absa_cli_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

RunResult run(const std::string& args) {
    static int counter = 0;
    const fs::path out_file = scratch_root() / ("stdout_" + std::to_string(counter));
    const fs::path err_file = scratch_root() / ("stderr_" + std::to_string(counter));
    ++counter;
    const std::string cmd =
        kCli + " " + args + " > " + out_file.string() + " 2> " + err_file.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

long line_count(const std::string& text) {
    long n = 0;
    for (char c : text) {
        if (c == '\n') ++n;
    }
    return n;
}

// Ingest of the haad fixture pair, run once and shared read-only by later tests.
const fs::path& ingest_dir() {
    static const fs::path dir = [] {
        const fs::path d = scratch_root() / "ingest";
        RunResult r = run("ingest --dataset haad --input " + kFixtures +
                          "/haad_mini_train.xml --input " + kFixtures +
                          "/haad_mini_test.xml --output " + d.string());
        REQUIRE_MESSAGE(r.exit_code == 0, r.err);
        return d;
    }();
    return dir;
}

std::string tiny_train_config(const fs::path& output) {
    json cfg;
    cfg["dataset"] = "haad";
    cfg["mode"] = "pair";
    cfg["split"] = "official";
    cfg["seed"] = 3;
    cfg["epochs"] = 1;
    cfg["batch_size"] = 4;
    cfg["lr"] = 1e-3;
    cfg["dropout"] = 0.0;
    cfg["hidden_dropout"] = 0.0;
    cfg["input"] = (ingest_dir() / "instances.jsonl").string();
    cfg["vocab"] = kFixtures + "/vocab_mini.txt";
    cfg["max_seq_len"] = 16;
    cfg["encoder_layers"] = 2;
    cfg["encoder_heads"] = 2;
    cfg["encoder_hidden"] = 8;
    cfg["encoder_ffn"] = 16;
    cfg["encoder_max_position"] = 16;
    const fs::path path = output / "train_cfg.json";
    fs::create_directories(output);
    std::ofstream(path) << cfg.dump(2);
    return path.string();
}

// A one-epoch training run whose checkpoint feeds the eval/predict tests.
const fs::path& train_dir() {
    static const fs::path dir = [] {
        const fs::path d = scratch_root() / "train";
        const std::string cfg = tiny_train_config(d);
        RunResult r =
            run("train --config " + cfg + " --output " + d.string());
        REQUIRE_MESSAGE(r.exit_code == 0, r.err);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("ingest writes the full artifact set deterministically") {
    const fs::path& dir = ingest_dir();
    for (const char* name : {"instances.jsonl", "train.jsonl", "test.jsonl", "stats.txt",
                             "stats.json", "parse_report.json", "run_manifest.json"}) {
        CHECK_MESSAGE(fs::exists(dir / name), name);
    }
    CHECK(line_count(slurp(dir / "instances.jsonl")) == 14);
    CHECK(line_count(slurp(dir / "train.jsonl")) == 9);
    CHECK(line_count(slurp(dir / "test.jsonl")) == 5);
    CHECK_FALSE(fs::exists(dir / "dev.jsonl"));  // as-parsed split has no dev rows

    auto pr = json::parse(slurp(dir / "parse_report.json"));
    CHECK(pr.at("offset_mismatches").size() == 1);
    CHECK(pr.at("sentences_seen").get<int>() == 11);

    auto manifest = json::parse(slurp(dir / "run_manifest.json"));
    CHECK(manifest.at("command") == "ingest");
    CHECK(manifest.at("inputs").size() == 2);
    for (const auto& input : manifest.at("inputs")) {
        CHECK(input.at("digest").get<std::string>().size() == 16);
    }

    // Byte-identical on rerun.
    const fs::path again = scratch_root() / "ingest_again";
    RunResult r = run("ingest --dataset haad --input " + kFixtures +
                      "/haad_mini_train.xml --input " + kFixtures +
                      "/haad_mini_test.xml --output " + again.string());
    REQUIRE(r.exit_code == 0);
    CHECK(slurp(again / "instances.jsonl") == slurp(dir / "instances.jsonl"));
    CHECK(slurp(again / "stats.json") == slurp(dir / "stats.json"));
}

TEST_CASE("ingest resplit carves a dev set when asked") {
    const fs::path dir = scratch_root() / "ingest_official";
    RunResult r = run("ingest --dataset haad --input " + kFixtures +
                      "/haad_mini_train.xml --input " + kFixtures +
                      "/haad_mini_test.xml --output " + dir.string() +
                      " --split official --seed 42");
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    CHECK(line_count(slurp(dir / "train.jsonl")) == 7);
    CHECK(line_count(slurp(dir / "dev.jsonl")) == 2);
    CHECK(line_count(slurp(dir / "test.jsonl")) == 5);
}

TEST_CASE("ingest failure modes exit nonzero with a reason") {
    RunResult bad_dataset = run("ingest --dataset tweets --input " + kFixtures +
                                "/haad_mini_train.xml --output " +
                                (scratch_root() / "x1").string());
    CHECK(bad_dataset.exit_code != 0);
    CHECK(bad_dataset.err.find("unknown dataset") != std::string::npos);

    RunResult missing = run("ingest --dataset haad --input /nonexistent/haad.xml --output " +
                            (scratch_root() / "x2").string());
    CHECK(missing.exit_code != 0);
    CHECK(missing.err.find("/nonexistent/haad.xml") != std::string::npos);

    const fs::path broken = scratch_root() / "broken.xml";
    std::ofstream(broken) << "<Dataset><Sentence id='s1'>";
    RunResult malformed = run("ingest --dataset haad --input " + broken.string() +
                              " --output " + (scratch_root() / "x3").string());
    CHECK(malformed.exit_code != 0);
}

TEST_CASE("baseline reproduces the fixture accuracy") {
    const fs::path dir = scratch_root() / "baseline";
    RunResult r = run("baseline --train " + (ingest_dir() / "train.jsonl").string() +
                      " --test " + (ingest_dir() / "test.jsonl").string() + " --output " +
                      dir.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    CHECK(r.out.find("0.8000") != std::string::npos);
    CHECK(r.out.find("baseline-majority") != std::string::npos);

    auto report = json::parse(slurp(dir / "report.json"));
    CHECK(report.at("kind") == "eval_report");
    CHECK(report.at("model") == "baseline-majority");
    CHECK(report.at("input_mode") == "none");
    CHECK(report.at("test_accuracy").get<double>() == doctest::Approx(0.8));
    CHECK(fs::exists(dir / "baseline_model.json"));
    CHECK(fs::exists(dir / "run_manifest.json"));
}

TEST_CASE("train writes checkpoint, report, curve, and manifest") {
    const fs::path& dir = train_dir();
    for (const char* name :
         {"report.json", "report.txt", "dev_curve.csv", "run_manifest.json"}) {
        CHECK_MESSAGE(fs::exists(dir / name), name);
    }
    CHECK(fs::exists(dir / "checkpoint" / "manifest.json"));
    CHECK(fs::exists(dir / "checkpoint" / "weights.bin"));

    auto report = json::parse(slurp(dir / "report.json"));
    CHECK(report.at("model") == "bert-pair");
    CHECK(report.at("dataset") == "haad");
    CHECK(report.at("dev_curve").size() == 1);
    CHECK(report.at("total").get<int>() == 5);

    auto manifest = json::parse(slurp(dir / "run_manifest.json"));
    CHECK(manifest.at("command") == "train");
    CHECK(manifest.at("config").at("epochs").get<int>() == 1);
    CHECK(manifest.at("config").at("batch_size").get<int>() == 4);
    CHECK(manifest.at("seed").get<int>() == 3);
    // Artifacts are recorded in the manifest and all exist.
    for (const auto& out : manifest.at("outputs")) {
        CHECK(fs::exists(out.get<std::string>()));
    }
}

TEST_CASE("flags override config file values") {
    const fs::path dir = scratch_root() / "train_override";
    const std::string cfg = tiny_train_config(dir);
    RunResult r = run("train --config " + cfg + " --epochs 2 --seed 9 --output " +
                      dir.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    auto manifest = json::parse(slurp(dir / "run_manifest.json"));
    CHECK(manifest.at("config").at("epochs").get<int>() == 2);  // flag beat the file's 1
    CHECK(manifest.at("seed").get<int>() == 9);
    CHECK(line_count(slurp(dir / "dev_curve.csv")) == 3);  // header + 2 epochs
}

TEST_CASE("unknown config keys are rejected with the valid list") {
    const fs::path dir = scratch_root() / "badkey";
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << R"({"dataset": "haad", "learning_rate": 0.1})";
    RunResult r = run("train --config " + (dir / "cfg.json").string() + " --output " +
                      dir.string());
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("learning_rate") != std::string::npos);
    CHECK(r.err.find("valid keys") != std::string::npos);
    CHECK(r.err.find("lr") != std::string::npos);
}

TEST_CASE("train without required settings exits nonzero") {
    RunResult r = run("train --dataset haad --output " + (scratch_root() / "x4").string());
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("missing required setting") != std::string::npos);
}

TEST_CASE("eval reloads the checkpoint and scores a file") {
    const fs::path dir = scratch_root() / "eval";
    RunResult r = run("eval --checkpoint " + (train_dir() / "checkpoint").string() +
                      " --input " + (ingest_dir() / "test.jsonl").string() + " --vocab " +
                      kFixtures + "/vocab_mini.txt --mode pair --output " + dir.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    auto report = json::parse(slurp(dir / "report.json"));
    CHECK(report.at("model") == "bert-pair");
    CHECK(report.at("total").get<int>() == 5);
    CHECK(report.at("split_mode") == "file");
    const double acc = report.at("test_accuracy").get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);

    // Scoring the same file twice gives the same report body.
    const fs::path dir2 = scratch_root() / "eval_again";
    RunResult r2 = run("eval --checkpoint " + (train_dir() / "checkpoint").string() +
                       " --input " + (ingest_dir() / "test.jsonl").string() + " --vocab " +
                       kFixtures + "/vocab_mini.txt --mode pair --output " + dir2.string());
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir / "report.json") == slurp(dir2 / "report.json"));
}

TEST_CASE("eval with a missing checkpoint directory fails") {
    RunResult r = run("eval --checkpoint /nonexistent/ckpt --input " +
                      (ingest_dir() / "test.jsonl").string() + " --vocab " + kFixtures +
                      "/vocab_mini.txt --output " + (scratch_root() / "x5").string());
    CHECK(r.exit_code != 0);
    CHECK(r.err.find("/nonexistent/ckpt") != std::string::npos);
}

TEST_CASE("predict labels ad-hoc cases") {
    const fs::path dir = scratch_root() / "predict";
    fs::create_directories(dir);
    json cases = json::array();
    cases.push_back({{"sentence", "القصة ممتازة والشخصيات جميلة"}, {"aspect", "القصة"}});
    cases.push_back({{"sentence", "القصة ممتازة والشخصيات جميلة"}, {"aspect", "الشخصيات"}});
    std::ofstream(dir / "cases.json") << cases.dump(2);

    RunResult r = run("predict --checkpoint " + (train_dir() / "checkpoint").string() +
                      " --input " + (dir / "cases.json").string() + " --vocab " + kFixtures +
                      "/vocab_mini.txt --mode pair --output " + dir.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    CHECK(line_count(r.out) == 2);
    CHECK(r.out.find("positive=") != std::string::npos);
    CHECK(r.out.find("conflict=") != std::string::npos);

    auto preds = json::parse(slurp(dir / "predictions.json"));
    REQUIRE(preds.size() == 2);
    for (const auto& p : preds) {
        double sum = 0.0;
        for (const auto& [label, prob] : p.at("probabilities").items()) {
            sum += prob.get<double>();
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("compare writes both arms plus the side-by-side table") {
    const fs::path dir = scratch_root() / "compare";
    const std::string cfg = tiny_train_config(dir);
    RunResult r = run("compare --config " + cfg + " --output " + dir.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    CHECK(r.out.find("fine-tuned") != std::string::npos);
    CHECK(r.out.find("frozen") != std::string::npos);

    auto tuned = json::parse(slurp(dir / "report_finetuned.json"));
    auto frozen = json::parse(slurp(dir / "report_frozen.json"));
    CHECK(tuned.at("fine_tune").get<bool>());
    CHECK_FALSE(frozen.at("fine_tune").get<bool>());
    CHECK(tuned.at("fingerprint") == frozen.at("fingerprint"));
    CHECK(fs::exists(dir / "comparison.txt"));
}

TEST_CASE("report consolidates runs into one table") {
    const fs::path bl = scratch_root() / "baseline_for_report";
    RunResult rb = run("baseline --train " + (ingest_dir() / "train.jsonl").string() +
                       " --test " + (ingest_dir() / "test.jsonl").string() + " --output " +
                       bl.string());
    REQUIRE(rb.exit_code == 0);

    const fs::path dir = scratch_root() / "report";
    RunResult r = run("report " + (bl / "report.json").string() + " " +
                      (train_dir() / "report.json").string() + " --curves --output " +
                      dir.string());
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    CHECK(r.out.find("baseline-majority") != std::string::npos);
    CHECK(r.out.find("bert-pair") != std::string::npos);
    CHECK(r.out.find("haad") != std::string::npos);

    auto summary = json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("columns").size() == 1);
    CHECK(summary.at("rows").size() == 2);

    // --curves writes one csv for the run that has a dev curve.
    bool found_curve = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("curve_", 0) == 0) {
            found_curve = true;
            CHECK(slurp(entry.path()).rfind("epoch,accuracy\n", 0) == 0);
        }
    }
    CHECK(found_curve);

    // Feeding the same report twice drops the duplicate with a warning.
    const fs::path dup = scratch_root() / "report_dup";
    RunResult rd = run("report " + (train_dir() / "report.json").string() + " " +
                       (train_dir() / "report.json").string() + " --output " +
                       dup.string());
    REQUIRE(rd.exit_code == 0);
    CHECK(rd.err.find("duplicate report dropped") != std::string::npos);
}
