// End-to-end runs of the command-line binary. Each test shells out to the
// built executable (path injected at compile time) against synthetic data.

#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>
#include <cocoanet/core/jsonutil.hpp>
#include <cocoanet/core/rng.hpp>
#include <cocoanet/data/image.hpp>
#include <cocoanet/data/manifest.hpp>

using namespace cocoanet;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

RunResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path() / "cocoanet_test_cli_io";
    fs::create_directories(dir);
    const fs::path out = dir / ("out" + std::to_string(counter) + ".txt");
    const fs::path err = dir / ("err" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd = std::string(COCOANET_CLI_PATH) + " " + args + " >" +
                            out.string() + " 2>" + err.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = (raw >= 0 && WIFEXITED(raw)) ? WEXITSTATUS(raw) : -1;
    r.out = slurp_file(out);
    r.err = slurp_file(err);
    return r;
}

// Two-class color dataset, shared across the CLI cases.
const fs::path& dataset_root() {
    static const fs::path root = [] {
        const fs::path r = fs::temp_directory_path() / "cocoanet_test_cli_data";
        fs::remove_all(r);
        fs::create_directories(r / "greenleaf");
        fs::create_directories(r / "redleaf");
        Rng noise(4242);
        for (int i = 0; i < 12; ++i) {
            for (const bool green : {true, false}) {
                Image img;
                img.width = 250;
                img.height = 250;
                img.rgb.resize(250 * 250 * 3);
                for (std::size_t p = 0; p < img.rgb.size(); p += 3) {
                    const int jit = static_cast<int>(noise.bounded(41)) - 20;
                    img.rgb[p] = static_cast<std::uint8_t>(green ? 50 : 190 + jit);
                    img.rgb[p + 1] = static_cast<std::uint8_t>(green ? 190 + jit : 50);
                    img.rgb[p + 2] = 60;
                }
                char name[16];
                std::snprintf(name, sizeof name, "%02d.png", i);
                encode_png(r / (green ? "greenleaf" : "redleaf") / name, img);
            }
        }
        return r;
    }();
    return root;
}

// Transformer small enough that two epochs take a blink.
fs::path tiny_config(const fs::path& out_dir) {
    jsonutil::json j = {
        {"model",
         {{"family", "vit"},
          {"num_classes", 2},
          {"ff_dropout", 0.0},
          {"vit",
           {{"patch_size", 32},
            {"depth", 1},
            {"embed_dim", 32},
            {"heads", 2},
            {"mlp_hidden", 16},
            {"head", "linear"},
            {"attn_dropout", 0.0}}}}},
        {"train",
         {{"lr", 0.005}, {"epochs", 2}, {"batch_size", 8}, {"seed", 7},
          {"early_stop_patience", 5}}},
        {"data",
         {{"root", dataset_root().string()},
          {"augmentation", {{"enabled", false}}}}},
        {"output", {{"dir", out_dir.string()}}}};
    const fs::path file = fs::temp_directory_path() / "cocoanet_test_cli_cfg.json";
    std::ofstream os(file);
    os << j.dump(2);
    return file;
}

// The train run feeding the eval/predict/info cases below.
const fs::path& trained_run_dir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "cocoanet_test_cli_run";
        fs::remove_all(d);
        const RunResult r = run_cli("train --config " + tiny_config(d).string());
        REQUIRE(r.exit_code == 0);
        return d;
    }();
    return dir;
}

} // namespace

TEST_CASE("cli: no arguments and bad subcommands exit with usage errors") {
    REQUIRE(run_cli("").exit_code == 2);
    REQUIRE(run_cli("frobnicate").exit_code == 2);
    REQUIRE(run_cli("train").exit_code == 2); // needs --config or --model
    REQUIRE(run_cli("--help").exit_code == 0);
    REQUIRE_THAT(run_cli("--help").out,
                 Catch::Matchers::ContainsSubstring("cocoa leaf disease"));
}

TEST_CASE("cli split writes a manifest and prints the table") {
    const fs::path manifest =
        fs::temp_directory_path() / "cocoanet_test_cli_split" / "manifest.json";
    fs::remove_all(manifest.parent_path());
    const RunResult r = run_cli("split --data " + dataset_root().string() + " --out " +
                                manifest.string() + " --seed 11 --ratios 0.5 0.25 0.25");
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(manifest));

    // 12 images per class at 0.5/0.25/0.25 is 6/3/3.
    std::istringstream lines(r.out);
    std::string header, g, red, total;
    std::getline(lines, header);
    std::getline(lines, g);
    std::getline(lines, red);
    std::getline(lines, total);
    REQUIRE_THAT(header, Catch::Matchers::ContainsSubstring("class"));
    REQUIRE_THAT(g, Catch::Matchers::ContainsSubstring("greenleaf"));
    std::istringstream gs(g);
    std::string name;
    std::size_t tr, va, te, tot;
    gs >> name >> tr >> va >> te >> tot;
    REQUIRE(tr == 6);
    REQUIRE(va == 3);
    REQUIRE(te == 3);
    REQUIRE(tot == 12);
    REQUIRE_THAT(total, Catch::Matchers::ContainsSubstring("total"));

    // The manifest file itself round trips.
    const DatasetManifest m = DatasetManifest::load(manifest);
    REQUIRE(m.seed == 11);
    REQUIRE(m.class_names == std::vector<std::string>{"greenleaf", "redleaf"});

    // Bad ratio arity is a usage error.
    REQUIRE(run_cli("split --data " + dataset_root().string() + " --out " +
                    manifest.string() + " --ratios 0.8 0.2")
                .exit_code == 2);
    // Nonexistent dataset root is an input error.
    REQUIRE(run_cli("split --data /nonexistent/nowhere --out " + manifest.string())
                .exit_code == 2);
}

TEST_CASE("cli train produces checkpoints, reports, and logs") {
    const fs::path dir = trained_run_dir();
    for (const char* f : {"resolved_config.json", "history.json", "manifest.json",
                          "best.ckpt", "last.ckpt", "report.json", "report.csv",
                          "report.txt"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(dir / f));
    }

    const auto history = jsonutil::json::parse(slurp_file(dir / "history.json"));
    REQUIRE(history.is_array());
    REQUIRE(history.size() == 2);
    REQUIRE(history[0]["epoch"] == 0);
    REQUIRE(history[0].contains("val_macro_f1"));

    const auto resolved = jsonutil::json::parse(slurp_file(dir / "resolved_config.json"));
    REQUIRE(resolved["model"]["family"] == "vit");
    REQUIRE(resolved["train"]["epochs"] == 2);
    REQUIRE(resolved["data"]["manifest"] == (dir / "manifest.json").string());

    // The manifest was persisted with computed channel means.
    const DatasetManifest m = DatasetManifest::load(dir / "manifest.json");
    REQUIRE(m.channel_means[0] > 0.0);
    REQUIRE(m.channel_means[1] > 0.0);

    // The test-split report went to stdout too.
    const auto report = jsonutil::json::parse(slurp_file(dir / "report.json"));
    REQUIRE(report["split"] == "test");
    REQUIRE(report["classes"].size() == 2);
}

TEST_CASE("cli eval reproduces a report from the written checkpoint") {
    const fs::path dir = trained_run_dir();
    const fs::path report_dir = fs::temp_directory_path() / "cocoanet_test_cli_evalrep";
    fs::remove_all(report_dir);
    const RunResult r = run_cli("eval --checkpoint " + (dir / "best.ckpt").string() +
                                " --data " + dataset_root().string() + " --manifest " +
                                (dir / "manifest.json").string() +
                                " --split test --report " + report_dir.string());
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);
    REQUIRE_THAT(r.out, Catch::Matchers::ContainsSubstring("Accuracy:"));
    REQUIRE_THAT(r.out, Catch::Matchers::ContainsSubstring("greenleaf"));
    REQUIRE(fs::exists(report_dir / "report.json"));

    // Evaluating the same checkpoint on the same split twice is bit-stable:
    // the reports agree exactly.
    const auto a = jsonutil::json::parse(slurp_file(report_dir / "report.json"));
    const auto b = jsonutil::json::parse(slurp_file(dir / "report.json"));
    REQUIRE(a["accuracy"] == b["accuracy"]);
    REQUIRE(a["classes"] == b["classes"]);
    REQUIRE(a["confusion"] == b["confusion"]);

    // A missing checkpoint is an input error.
    REQUIRE(run_cli("eval --checkpoint /nonexistent.ckpt --data " +
                    dataset_root().string() + " --manifest " +
                    (dir / "manifest.json").string())
                .exit_code == 2);
    // As is a split with no samples... (train/val/test all exist here, so use
    // a bogus name instead).
    REQUIRE(run_cli("eval --checkpoint " + (dir / "best.ckpt").string() + " --data " +
                    dataset_root().string() + " --manifest " +
                    (dir / "manifest.json").string() + " --split holdout")
                .exit_code == 2);
}

TEST_CASE("cli predict labels images with class names from the checkpoint") {
    const fs::path dir = trained_run_dir();
    const fs::path img = dataset_root() / "greenleaf" / "00.png";
    const RunResult r =
        run_cli("predict --checkpoint " + (dir / "best.ckpt").string() + " " + img.string());
    CAPTURE(r.err);
    REQUIRE(r.exit_code == 0);

    // stdout: "<path>\t<label>\t<prob>"
    std::istringstream os(r.out);
    std::string path, label, prob_s;
    os >> path >> label >> prob_s;
    REQUIRE(path == img.string());
    REQUIRE((label == "greenleaf" || label == "redleaf"));
    const double prob = std::stod(prob_s);
    REQUIRE(prob > 0.0);
    REQUIRE(prob <= 1.0);
    // stderr carries the full distribution.
    REQUIRE_THAT(r.err, Catch::Matchers::ContainsSubstring("greenleaf"));
    REQUIRE_THAT(r.err, Catch::Matchers::ContainsSubstring("redleaf"));

    REQUIRE(run_cli("predict --checkpoint " + (dir / "best.ckpt").string() +
                    " /nonexistent.png")
                .exit_code == 2);
}

TEST_CASE("cli info describes checkpoints and manifests") {
    const fs::path dir = trained_run_dir();
    const RunResult ck = run_cli("info --checkpoint " + (dir / "best.ckpt").string());
    REQUIRE(ck.exit_code == 0);
    REQUIRE_THAT(ck.out, Catch::Matchers::ContainsSubstring("architecture:"));
    REQUIRE_THAT(ck.out, Catch::Matchers::ContainsSubstring("\"family\":\"vit\""));
    REQUIRE_THAT(ck.out, Catch::Matchers::ContainsSubstring("optimizer_state: no"));
    REQUIRE_THAT(ck.out, Catch::Matchers::ContainsSubstring("classes: greenleaf, redleaf"));

    const RunResult last = run_cli("info --checkpoint " + (dir / "last.ckpt").string());
    REQUIRE_THAT(last.out, Catch::Matchers::ContainsSubstring("optimizer_state: yes"));

    const RunResult mf = run_cli("info --manifest " + (dir / "manifest.json").string());
    REQUIRE(mf.exit_code == 0);
    REQUIRE_THAT(mf.out, Catch::Matchers::ContainsSubstring("seed: 7"));
    REQUIRE_THAT(mf.out, Catch::Matchers::ContainsSubstring("total"));

    REQUIRE(run_cli("info").exit_code == 2);
}

TEST_CASE("cli train rejects a family flag that contradicts the config") {
    const fs::path dir = fs::temp_directory_path() / "cocoanet_test_cli_conflict";
    const RunResult r = run_cli("train --config " + tiny_config(dir).string() +
                                " --model resnet50");
    REQUIRE(r.exit_code == 2);
    REQUIRE_THAT(r.err, Catch::Matchers::ContainsSubstring("disagrees"));
}

TEST_CASE("cli train rejects a broken config with a usage exit") {
    const fs::path bad = fs::temp_directory_path() / "cocoanet_test_cli_bad.json";
    std::ofstream(bad) << "{\"model\": {\"family\": \"warpdrive\"}}";
    REQUIRE(run_cli("train --config " + bad.string()).exit_code == 2);
    std::ofstream(bad) << "not json";
    REQUIRE(run_cli("train --config " + bad.string()).exit_code == 2);
}
