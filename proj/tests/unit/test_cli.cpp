#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "driftreg/config.hpp"
#include "driftreg/io.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Run cli(const std::string& args, const fs::path& dir) {
    const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + DRIFTREG_CLI_PATH + "\" " + args + " >\"" + o.string() + "\" 2>\"" +
                            e.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    return r;
}

// Small phantom pair written by the CLI itself.
fs::path make_phantom_dir(const fs::path& dir) {
    driftreg::write_text_file(dir / "phantom.json", R"({"size": 16, "max_displacement": 2.0})");
    const Run r = cli("phantom --config \"" + (dir / "phantom.json").string() + "\" --out \"" + (dir / "ph").string() + "\"", dir);
    REQUIRE(r.code == 0);
    return dir / "ph";
}

json without_timings(json j) {
    j.erase("timings");
    j["config"].erase("out");
    return j;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
    const auto dir = test::scratch("cli_usage");
    CHECK(cli("", dir).code == 1);
    CHECK(cli("frobnicate", dir).code == 1);
    CHECK(cli("register --iterations 0", dir).code == 1);
    CHECK(cli("eval onlyone.nii", dir).code == 1);
    CHECK(cli("--help", dir).code == 0);
}

TEST_CASE("phantom writes its artifacts") {
    const auto dir = test::scratch("cli_phantom");
    const fs::path ph = make_phantom_dir(dir);
    for (const char* f : {"fixed", "moving", "gt", "labels_fixed", "labels_moving"}) {
        CHECK(fs::exists(ph / (std::string(f) + ".vol")));
        CHECK(fs::exists(ph / (std::string(f) + ".json")));
    }
    CHECK(driftreg::load_field(ph / "gt.vol").dims() == driftreg::Dims{16, 16, 16});
    driftreg::write_text_file(dir / "bad.json", R"({"size": 16, "wobble": 1})");
    CHECK(cli("phantom --config \"" + (dir / "bad.json").string() + "\" --out \"" + (dir / "x").string() + "\"", dir)
              .code == 1);
}

TEST_CASE("register") {
    const auto dir = test::scratch("cli_register");
    const fs::path ph = make_phantom_dir(dir);
    const std::string inputs = "\"" + (ph / "fixed.vol").string() + "\" \"" + (ph / "moving.vol").string() + "\"";

    const Run a = cli("register " + inputs + " --iterations 20 --out \"" + (dir / "a").string() + "\"", dir);
    CAPTURE(a.err);
    REQUIRE(a.code == 0);
    for (const char* f : {"result.json", "dvf_mf.vol", "dvf_fm.vol", "warped.vol"}) CHECK(fs::exists(dir / "a" / f));
    const json ra = json::parse(slurp(dir / "a" / "result.json"));
    CHECK(ra.at("loss_trace").size() == 20);
    CHECK(ra.at("config").at("flags").at("ic") == true);
    CHECK(ra.at("metrics").contains("ncc"));
    CHECK(ra.at("timings").contains("elapsed_s"));

    const Run b = cli("register " + inputs + " --iterations 20 --out \"" + (dir / "b").string() + "\"", dir);
    REQUIRE(b.code == 0);
    const json rb = json::parse(slurp(dir / "b" / "result.json"));
    CHECK(without_timings(ra) == without_timings(rb));
    CHECK(slurp(dir / "a" / "dvf_mf.vol") == slurp(dir / "b" / "dvf_mf.vol"));

    driftreg::write_text_file(dir / "direct.json", R"({"mode": "direct", "iterations": 5})");
    const Run d = cli("register " + inputs + " --config \"" + (dir / "direct.json").string() + "\" --out \"" +
                          (dir / "d").string() + "\"",
                      dir);
    CHECK(d.code == 0);
    CHECK_FALSE(fs::exists(dir / "d" / "dvf_fm.vol"));
}

TEST_CASE("register failures") {
    const auto dir = test::scratch("cli_register_fail");
    const fs::path ph = make_phantom_dir(dir);
    driftreg::save_volume(driftreg::Volume(driftreg::Dims{16, 16, 8}), dir / "small.vol");
    const Run mismatch = cli("register \"" + (ph / "fixed.vol").string() + "\" \"" + (dir / "small.vol").string() +
                                 "\" --iterations 2 --out \"" + (dir / "o").string() + "\"",
                             dir);
    CHECK(mismatch.code == 1);
    CHECK(mismatch.err.find("16x16x16") != std::string::npos);
    CHECK(mismatch.err.find("16x16x8") != std::string::npos);

    const Run missing = cli("register \"" + (dir / "none.nii").string() + "\" \"" + (ph / "fixed.vol").string() +
                                "\" --out \"" + (dir / "o").string() + "\"",
                            dir);
    CHECK(missing.code == 2);

    driftreg::write_text_file(dir / "typo.json", R"({"iteratons": 5})");
    CHECK(cli("register \"" + (ph / "fixed.vol").string() + "\" \"" + (ph / "moving.vol").string() + "\" --config \"" +
                  (dir / "typo.json").string() + "\" --out \"" + (dir / "o").string() + "\"",
              dir)
              .code == 1);

    driftreg::write_text_file(dir / "boom.json",
                              R"({"mode": "direct", "optimizer": {"kind": "sgd", "lr": 1e300}, "weights": {"beta": 1e300}})");
    CHECK(cli("register \"" + (ph / "fixed.vol").string() + "\" \"" + (ph / "moving.vol").string() + "\" --config \"" +
                  (dir / "boom.json").string() + "\" --iterations 20 --out \"" + (dir / "o").string() + "\"",
              dir)
              .code == 3);
}

TEST_CASE("eval") {
    const auto dir = test::scratch("cli_eval");
    const fs::path ph = make_phantom_dir(dir);
    const std::string f = "\"" + (ph / "fixed.vol").string() + "\"";

    const Run same = cli("eval " + f + " " + f + " --out \"" + (dir / "e").string() + "\"", dir);
    REQUIRE(same.code == 0);
    const json j = json::parse(same.out);
    CHECK(j.at("values").at("ssim").get<double>() == doctest::Approx(1.0));
    CHECK(j.at("values").at("pcc").get<double>() == doctest::Approx(1.0));
    CHECK(j.at("values").at("mse").get<double>() == 0.0);
    CHECK(j.at("values").at("dice").get<double>() == 1.0);
    CHECK(j.at("notes").size() == 1);
    CHECK(json::parse(slurp(dir / "e" / "metrics.json")) == j);

    const Run inter = cli("eval " + f + " \"" + (ph / "moving.vol").string() + "\" --intermodal --labels-fixed \"" +
                              (ph / "labels_fixed.vol").string() + "\" --labels-registered \"" +
                              (ph / "labels_moving.vol").string() + "\"",
                          dir);
    REQUIRE(inter.code == 0);
    const json ji = json::parse(inter.out);
    std::set<std::string> keys;
    for (const auto& [k, v] : ji.at("values").items()) keys.insert(k);
    CHECK(keys == std::set<std::string>{"dice", "kld", "pcc"});
    CHECK(ji.at("notes").empty());

    CHECK(cli("eval " + f + " \"" + (dir / "missing.vol").string() + "\"", dir).code == 2);
}

TEST_CASE("gradcheck") {
    const auto dir = test::scratch("cli_gradcheck");
    const Run r = cli("gradcheck --sizes 6 --instances 2", dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("ncc") != std::string::npos);
}

TEST_CASE("compare-optimizers") {
    const auto dir = test::scratch("cli_compare");
    driftreg::write_text_file(dir / "cmp.json",
                              R"({"phantom": {"size": 16, "max_displacement": 2.0}, "seeds": 2, "iterations": 30})");
    const std::string base = "compare-optimizers --config \"" + (dir / "cmp.json").string() + "\" --out ";
    REQUIRE(cli(base + "\"" + (dir / "a").string() + "\"", dir).code == 0);
    REQUIRE(cli(base + "\"" + (dir / "b").string() + "\"", dir).code == 0);
    const std::string csv = slurp(dir / "a" / "compare.csv");
    std::istringstream lines(csv);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line))
        if (!line.empty()) rows.push_back(line);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == "optimizer,lr,seeds,ncc_mean,ncc_sd,dice_mean,dice_sd,epe_mean,epe_sd");
    CHECK(rows[1].rfind("sgd,", 0) == 0);
    CHECK(rows[4].rfind("adamw,", 0) == 0);
    CHECK(csv == slurp(dir / "b" / "compare.csv"));
    CHECK(fs::exists(dir / "a" / "compare.json"));
}
