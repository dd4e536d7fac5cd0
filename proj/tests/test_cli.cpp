#include "doctest.h"

#include "edgestereo/dataio.hpp"
#include "edgestereo/eval.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
    static const fs::path dir = [] {
        const fs::path p = fs::temp_directory_path() / "edgestereo_cli_test";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

// Runs the CLI with `args`, returns its exit status; stdout goes to `out`.
int run(const std::string& args, std::string* out = nullptr) {
    const fs::path log = work_dir() / "stdout.txt";
    const std::string cmd = std::string(EDGESTEREO_CLI) + " " + args + " > " + log.string() + " 2> " +
                            (work_dir() / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    if (out != nullptr) {
        std::ifstream in(log);
        std::stringstream ss;
        ss << in.rdbuf();
        *out = ss.str();
    }
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double report_value(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(name + " ", 0) == 0) return std::stod(line.substr(line.find(':') + 1));
    }
    FAIL("metric " << name << " missing from report");
    return 0.0;
}

std::string p(const fs::path& path) { return path.string(); }

} // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("sgm --no-such-flag 1") == 2);
    CHECK(run("--help") == 0);
    CHECK(run("sgm --left missing.png --right missing.png --output out.pfm") == 3);
    CHECK(run("gen --output " + p(work_dir() / "x") + " --sgm-p1 500") == 4);
    CHECK(run("gradcheck --gradcheck-op no_such_op") == 4);
}

TEST_CASE("gradcheck all with the default seed") {
    std::string out;
    CHECK(run("gradcheck", &out) == 0);
    CHECK(out.find("FAIL") == std::string::npos);
    CHECK(out.find("edge_aware_smoothness") != std::string::npos);
}

TEST_CASE("gen is reproducible and sgm meets the baseline bound") {
    const fs::path a = work_dir() / "gen_a", b = work_dir() / "gen_b";
    CHECK(run("gen --output " + p(a) + " --count 2 --height 48 --width 64 --seed 5") == 0);
    CHECK(run("gen --output " + p(b) + " --count 2 --height 48 --width 64 --seed 5") == 0);
    for (const char* f : {"left.pgm", "right.pgm", "disparity.png", "edges.pgm"}) {
        CHECK(edgestereo::io::read_file(a / "sample_0000" / f) == edgestereo::io::read_file(b / "sample_0000" / f));
    }
    const fs::path s = a / "sample_0000";
    std::string out;
    const std::string sgm = "sgm --left " + p(s / "left.pgm") + " --right " + p(s / "right.pgm") + " --gt " +
                            p(s / "disparity.png") + " --sgm-max-disp 16 --output ";
    CHECK(run(sgm + p(work_dir() / "sgm1.pfm") + " --preview " + p(work_dir() / "sgm.png"), &out) == 0);
    CHECK(report_value(out, "1px") <= 10.0);
    CHECK(run(sgm + p(work_dir() / "sgm2.pfm")) == 0);
    CHECK(edgestereo::io::read_file(work_dir() / "sgm1.pfm") == edgestereo::io::read_file(work_dir() / "sgm2.pfm"));
}

TEST_CASE("eval with predictions equal to ground truth") {
    const fs::path gt = work_dir() / "eval_gt";
    CHECK(run("gen --output " + p(gt) + " --count 2 --height 32 --width 32") == 0);
    std::string out;
    const fs::path report = work_dir() / "report.kv";
    CHECK(run("eval --pred-dir " + p(gt) + " --gt-dir " + p(gt) + " --eval-metrics epe,d1,boundary_epe,ods,ois --output " +
                  p(report),
              &out) == 0);
    CHECK(report_value(out, "epe") == 0.0);
    std::ifstream in(report);
    const auto kv = edgestereo::eval::read_kv_report(in);
    CHECK(kv.at("epe") == 0.0);
    CHECK(kv.at("d1") == 0.0);
    CHECK(kv.at("ods") == 1.0);
    CHECK(run("eval --pred-dir " + p(gt) + " --gt-dir " + p(gt) + " --eval-metrics bogus") == 4);
}

TEST_CASE("train then infer, reproducibly") {
    const fs::path data = work_dir() / "train_data";
    CHECK(run("gen --output " + p(data) + " --count 2 --height 16 --width 64") == 0);
    const std::string cfg_path = p(work_dir() / "train.cfg");
    std::ofstream(cfg_path) << "train.iterations = 2\ntrain.batch_size = 2\ntrain.base_lr = 0.0001\n";
    const std::string train = "train --config " + cfg_path + " --data-dir " + p(data) + " --stage 1 --log " +
                              p(work_dir() / "log.csv") + " --checkpoint-out ";
    CHECK(run(train + p(work_dir() / "c1.ckpt")) == 0);
    CHECK(run(train + p(work_dir() / "c2.ckpt")) == 0);
    CHECK(edgestereo::io::read_file(work_dir() / "c1.ckpt") == edgestereo::io::read_file(work_dir() / "c2.ckpt"));
    std::ifstream log(work_dir() / "log.csv");
    std::string header;
    std::getline(log, header);
    CHECK(header == "iter,lr,L_edge,total");
    CHECK(run("train --data-dir " + p(data) + " --stage 2 --train-iterations 1 --checkpoint " +
              p(work_dir() / "c1.ckpt") + " --checkpoint-out " + p(work_dir() / "c3.ckpt")) == 0);
    const fs::path s = data / "sample_0000";
    CHECK(run("infer --checkpoint " + p(work_dir() / "c3.ckpt") + " --left " + p(s / "left.pgm") + " --right " +
              p(s / "right.pgm") + " --output " + p(work_dir() / "pred.pfm") + " --edges " +
              p(work_dir() / "pred_edges.pgm")) == 0);
    CHECK(fs::exists(work_dir() / "pred.pfm"));
    CHECK(fs::exists(work_dir() / "pred_edges.pgm"));
    CHECK(run("infer --checkpoint " + p(work_dir() / "log.csv") + " --left " + p(s / "left.pgm") + " --right " +
              p(s / "right.pgm") + " --output " + p(work_dir() / "bad.pfm")) == 3);
}

} // TEST_SUITE
