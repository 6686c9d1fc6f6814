#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <json.hpp>

#include "test_util.hpp"
#include "voleval/case_table.hpp"
#include "voleval/cli.hpp"
#include "voleval/linattn.hpp"
#include "voleval/nifti.hpp"
#include "voleval/phantom.hpp"

using namespace voleval;
using testutil::slurp;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int rc = cli::run(args, out, err);
  return {rc, out.str(), err.str()};
}

void write_mask(const fs::path& p, const Dims& d, const Spacing& s, std::initializer_list<int> bits) {
  fs::create_directories(p.parent_path());
  write_nifti(BinaryMask(d, s, std::vector<std::uint8_t>(bits.begin(), bits.end())).to_grid(), p);
}

void write_two_case_fixture(const fs::path& root) {
  write_mask(root / "pred/fixture_a.nii", {3, 3, 1}, {}, {1, 1, 1, 1, 1, 1, 0, 0, 0});
  write_mask(root / "gt/fixture_a.nii.gz", {3, 3, 1}, {}, {1, 1, 0, 0, 0, 1, 1, 0, 0});
  write_mask(root / "pred/fixture_b.nii.gz", {1, 1, 5}, {1, 1, 2}, {1, 0, 0, 0, 0});
  write_mask(root / "gt/fixture_b.nii", {1, 1, 5}, {1, 1, 2}, {0, 0, 0, 0, 1});
}

constexpr int kOk = 0, kUsage = 2, kIo = 3, kCheck = 4, kPartial = 5, kNoPairs = 6, kBad = 7;

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) { ::setenv(name, value, 1); }
  ~ScopedEnv() { ::unsetenv(name_); }

 private:
  const char* name_;
};

}  // namespace

TEST_CASE("mask stems") {
  CHECK(cli::mask_stem("a/b/case1.nii") == "case1");
  CHECK(cli::mask_stem("case1.nii.gz") == "case1");
  CHECK(cli::mask_stem("x.y.nii") == "x.y");
  CHECK(cli::mask_stem("notes.txt").empty());
  CHECK(cli::mask_stem(".nii").empty());
}

TEST_CASE("eval of the two-case fixture matches the golden table") {
  TempDir tmp;
  write_two_case_fixture(tmp.path());
  const auto r = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out",
                      (tmp / "cases.csv").string()});
  INFO(r.err);
  CHECK(r.code == kOk);
  CHECK(r.out.empty());
  CHECK(slurp(tmp / "cases.csv") == slurp(fs::path(VOLEVAL_GOLDEN_DIR) / "two_case.csv"));
  const auto summary = nlohmann::json::parse(slurp(tmp / "cases.summary.json"));
  CHECK(summary["groups"][0]["cases"] == 2);
  CHECK(summary["groups"][0]["metrics"]["dice"]["mean"] == doctest::Approx(0.3));
}

TEST_CASE("eval where prediction equals reference") {
  TempDir tmp;
  for (const char* side : {"pred", "gt"}) {
    write_mask(tmp / side / "c1.nii", {3, 3, 1}, {}, {1, 1, 1, 1, 1, 1, 0, 0, 0});
    write_mask(tmp / side / "c2.nii", {2, 2, 1}, {}, {0, 1, 1, 0});
  }
  const auto r = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out", "-",
                      "--summary", (tmp / "s.json").string()});
  CHECK(r.code == kOk);
  CHECK(r.out.rfind(std::string(kCaseCsvHeader) + "\nc1,1,1,1,1,0,0,", 0) == 0);
  const auto s = nlohmann::json::parse(slurp(tmp / "s.json"));
  CHECK(s["groups"][0]["metrics"]["dice"]["mean"] == 1.0);
  CHECK(s["groups"][0]["metrics"]["hd95_mm"]["mean"] == 0.0);
}

TEST_CASE("eval with no pairs writes nothing") {
  TempDir tmp;
  fs::create_directories(tmp / "pred");
  fs::create_directories(tmp / "gt");
  const auto r = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out",
                      (tmp / "cases.csv").string()});
  CHECK(r.code == kNoPairs);
  CHECK_FALSE(fs::exists(tmp / "cases.csv"));
  CHECK_FALSE(fs::exists(tmp / "cases.summary.json"));

  const auto missing = run({"eval", (tmp / "nope").string(), (tmp / "gt").string(), "--out", "-"});
  CHECK(missing.code == kIo);
}

TEST_CASE("eval reports per-case failures and still writes the good cases") {
  TempDir tmp;
  write_two_case_fixture(tmp.path());
  write_mask(tmp / "pred/shape.nii", {2, 2, 1}, {}, {1, 0, 0, 0});
  write_mask(tmp / "gt/shape.nii", {2, 1, 1}, {}, {1, 0});
  write_mask(tmp / "pred/lonely.nii", {2, 1, 1}, {}, {1, 0});
  testutil::write_text(tmp / "gt/broken.nii", "not a volume");
  write_mask(tmp / "pred/broken.nii", {2, 1, 1}, {}, {1, 0});
  const auto r = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out",
                      (tmp / "cases.csv").string(), "--jobs", "3"});
  CHECK(r.code == kPartial);
  CHECK(r.err.find("shape: shape mismatch") != std::string::npos);
  CHECK(r.err.find("lonely: no reference file") != std::string::npos);
  CHECK(r.err.find("error: broken:") != std::string::npos);
  CHECK(slurp(tmp / "cases.csv") == slurp(fs::path(VOLEVAL_GOLDEN_DIR) / "two_case.csv"));
}

TEST_CASE("non-binary inputs are thresholded with a warning") {
  TempDir tmp;
  fs::create_directories(tmp / "pred");
  write_nifti(VolumeGrid({4, 1, 1}, {}, {0.25, 0.75, 0.5, 0.875}, DType::float32), tmp / "pred/p.nii");
  write_mask(tmp / "gt/p.nii", {4, 1, 1}, {}, {0, 1, 0, 1});
  auto r = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out", "-"});
  CHECK(r.code == kOk);
  CHECK(r.err.find("warning: p: p.nii is not binary; thresholding at 0.5") != std::string::npos);
  CHECK(r.out.find("\np,1,1,") != std::string::npos);
  r = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out", "-", "--threshold", "0.3"});
  CHECK(r.out.find("\np,0.8,") != std::string::npos);
  r = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out", "-", "--threshold", "nan"});
  CHECK(r.code == kUsage);
}

TEST_CASE("manifest input with groups and pairing keys") {
  TempDir tmp;
  write_two_case_fixture(tmp.path());
  testutil::write_text(tmp / "m.csv",
                       "case_id,pred_path,gt_path,group,pair_key\n"
                       "a1,pred/fixture_a.nii,gt/fixture_a.nii.gz,site1,p1\n"
                       "a2,gt/fixture_a.nii.gz,gt/fixture_a.nii.gz,site2,p1\n"
                       "b1,pred/fixture_b.nii.gz,gt/fixture_b.nii,site1,p2\n"
                       "b2,gt/fixture_b.nii,gt/fixture_b.nii,site2,p2\n");
  const auto r = run({"eval", "--manifest", (tmp / "m.csv").string(), "--out", "-", "--summary",
                      (tmp / "s.json").string()});
  INFO(r.err);
  CHECK(r.code == kOk);
  const auto s = nlohmann::json::parse(slurp(tmp / "s.json"));
  REQUIRE(s["groups"].size() == 2);
  CHECK(s["deltas"][0]["from"] == "site1");
  CHECK(s["deltas"][0]["dice_delta"] == doctest::Approx(0.7));
  CHECK(s["deltas"][0]["paired_cases"] == 2);
  CHECK(s["deltas"][0]["paired_t_test"]["df"] == 1.0);

  testutil::write_text(tmp / "dup.csv",
                       "case_id,pred_path,gt_path,group\na,pred/fixture_a.nii,gt/fixture_a.nii.gz,g\n"
                       "a,pred/fixture_a.nii,gt/fixture_a.nii.gz,g\n");
  CHECK(run({"eval", "--manifest", (tmp / "dup.csv").string(), "--out", "-"}).code == kBad);
  CHECK(run({"eval", "--manifest", (tmp / "m.csv").string(), (tmp / "pred").string(), "--out", "-"}).code ==
        kUsage);
  CHECK(run({"eval", "--out", "-"}).code == kUsage);
}

TEST_CASE("parallel evaluation is byte-identical to serial") {
  TempDir tmp;
  write_phantom_dataset(tmp.path(), 6, 99);
  const auto serial = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out",
                           (tmp / "s.csv").string(), "--jobs", "1"});
  const auto parallel = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out",
                             (tmp / "p.csv").string(), "--jobs", "4"});
  CHECK(serial.code == kOk);
  CHECK(parallel.code == kOk);
  CHECK(slurp(tmp / "s.csv") == slurp(tmp / "p.csv"));
  CHECK(slurp(tmp / "s.summary.json") == slurp(tmp / "p.summary.json"));
}

TEST_CASE("worker memory cap") {
  TempDir tmp;
  write_phantom_dataset(tmp.path(), 2, 5);
  {
    ScopedEnv cap(cli::kMemoryCapEnv, "1");
    const auto r = run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out", "-"});
    CHECK(r.code == kPartial);
    CHECK(r.err.find("worker cap is 1 MiB") != std::string::npos);
    CHECK(r.out.empty());
  }
  {
    ScopedEnv cap(cli::kMemoryCapEnv, "64");
    CHECK(run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out", "-"}).code == kOk);
  }
  {
    ScopedEnv cap(cli::kMemoryCapEnv, "lots");
    CHECK(run({"eval", (tmp / "pred").string(), (tmp / "gt").string(), "--out", "-"}).code == kUsage);
  }
  CHECK(cli::case_memory_estimate(1000) > 1000 * 16);
}

TEST_CASE("agree") {
  TempDir tmp;
  for (const char* side : {"a", "b"}) write_mask(tmp / side / "same.nii", {3, 1, 1}, {}, {1, 0, 1});
  write_mask(tmp / "a/k.nii", {10, 1, 1}, {}, {1, 1, 1, 1, 0, 0, 0, 0, 1, 0});
  write_mask(tmp / "b/k.nii", {10, 1, 1}, {}, {1, 1, 1, 1, 0, 0, 0, 0, 0, 1});
  write_mask(tmp / "a/neg.nii", {4, 1, 1}, {}, {1, 0, 1, 0});
  write_mask(tmp / "b/neg.nii", {4, 1, 1}, {}, {0, 1, 0, 1});
  const auto r = run({"agree", (tmp / "a").string(), (tmp / "b").string(), "--out",
                      (tmp / "agree.csv").string()});
  CHECK(r.code == kOk);
  CHECK(slurp(tmp / "agree.csv") == "case_id,dice,kappa\nk,0.8,0.6\nneg,0,-1\nsame,1,1\n");
  const auto s = nlohmann::json::parse(slurp(tmp / "agree.summary.json"));
  CHECK(s["cases"] == 3);
  CHECK(s["kappa"]["mean"] == doctest::Approx(0.2));
  CHECK(s["dice"]["median"] == doctest::Approx(0.8));
}

TEST_CASE("bounds curve") {
  auto r = run({"bounds", "--curve", "0.94", "0.96", "0.02", "--out", "-"});
  CHECK(r.code == kOk);
  CHECK(r.out ==
        "dice,vpe_lower,vpe_upper,abs_lower,abs_upper\n"
        "0.94,-0.113208,0.12766,0.113208,0.12766\n"
        "0.96,-0.0769231,0.0833333,0.0769231,0.0833333\n");
  CHECK(run({"bounds", "--curve", "0.5", "1", "0", "--out", "-"}).code == kUsage);
  CHECK(run({"bounds", "--curve", "0.5", "1", "-0.1", "--out", "-"}).code == kUsage);
  CHECK(run({"bounds", "--curve", "0", "1", "0.1", "--out", "-"}).code == kUsage);
  CHECK(run({"bounds", "--out", "-"}).code == kUsage);
  CHECK(run({"bounds", "--curve", "0.5", "1", "--out", "-"}).code == kUsage);
}

TEST_CASE("bounds audit") {
  TempDir tmp;
  const std::string header = std::string(kCaseCsvHeader) + "\n";
  testutil::write_text(tmp / "ok.csv", header + "a,0.6,0.428571,0.5,0.75,1,0.4,0.006,0.004,0.5\n"
                                                "b,0,0,0,0,8,8,0.002,0.002,0\n"
                                                "c,0,0,0,,,,0.006,0,\n");
  auto r = run({"bounds", "--audit", (tmp / "ok.csv").string(), "--out", "-"});
  CHECK(r.code == kOk);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["rows"] == 3);
  CHECK(j["checked"] == 1);
  CHECK(j["violation_count"] == 0);

  testutil::write_text(tmp / "bad.csv", header + "x,0.9,0.818182,,,,,1.5,1,0.5\n");
  r = run({"bounds", "--audit", (tmp / "bad.csv").string(), "--out", (tmp / "report.json").string()});
  CHECK(r.code == kCheck);
  j = nlohmann::json::parse(slurp(tmp / "report.json"));
  CHECK(j["violations"][0]["case_id"] == "x");

  testutil::write_text(tmp / "junk.csv", "hello\n");
  CHECK(run({"bounds", "--audit", (tmp / "junk.csv").string(), "--out", "-"}).code == kBad);
  CHECK(run({"bounds", "--audit", (tmp / "none.csv").string(), "--out", "-"}).code == kIo);
  CHECK(run({"bounds", "--audit", (tmp / "ok.csv").string(), "--curve", "0.5", "1", "0.1", "--out", "-"})
            .code == kUsage);
}

TEST_CASE("attn-check") {
  auto r = run({"attn-check", "--trials", "2", "--out", "-"});
  CHECK(r.code == kOk);
  CHECK(r.out.rfind("check,max_error,tolerance,status\nrow_stochastic,", 0) == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  r = run({"attn-check", "--n", "1", "--d", "1", "--trials", "2"});
  CHECK(r.code == kOk);
  CHECK(r.out.empty());
  r = run({"attn-check", "--trials", "2", "--inject-fault"});
  CHECK(r.code == kCheck);
  CHECK(r.err.find("attn-check: gradient failed") != std::string::npos);
  CHECK(run({"attn-check", "--n", "5000"}).code == kUsage);
  CHECK(run({"attn-check", "--n", "0"}).code == kUsage);
}

TEST_CASE("attn-bench") {
  const auto r = run({"attn-bench", "--n-list", "64,128", "--quad-n-list", "32,64", "--d", "4",
                      "--repeats", "3", "--out", "-"});
  CHECK(r.code == kOk);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "n,d,variant,median_seconds,flops");
  int rows = 0;
  int footers = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("#slope,", 0) == 0) {
      ++footers;
      continue;
    }
    const auto f = split_csv_line(line);
    REQUIRE(f.size() == 5);
    const auto variant = f[2] == "linear" ? attn::Variant::linear : attn::Variant::quadratic;
    CHECK(std::stoull(f[4]) == attn::attention_cost(std::stoull(f[0]), std::stoull(f[1]), variant));
    ++rows;
  }
  CHECK(rows == 4);
  CHECK(footers == 2);
  CHECK(run({"attn-bench", "--n-list", "0", "--out", "-"}).code == kUsage);
  CHECK(run({"attn-bench", "--repeats", "2", "--out", "-"}).code == kUsage);
}

TEST_CASE("volume regression") {
  TempDir tmp;
  auto table = [&](const std::string& name, const std::vector<std::pair<double, double>>& vols) {
    std::vector<CaseRow> rows;
    for (std::size_t i = 0; i < vols.size(); ++i) {
      CaseMetrics m;
      m.dice = vols[i].first == vols[i].second ? 1.0 : 0.95;
      m.jaccard = m.dice / (2 - m.dice);
      m.pred_volume_ml = vols[i].first;
      m.gt_volume_ml = vols[i].second;
      m.vpe = vols[i].first / vols[i].second - 1;
      rows.push_back({"c" + std::to_string(i), m});
    }
    std::ostringstream os;
    write_case_csv(os, rows);
    testutil::write_text(tmp / name, os.str());
    return (tmp / name).string();
  };
  auto r = run({"volume", table("perfect.csv", {{10, 10}, {20, 20}, {35, 35}}), "--out", "-"});
  CHECK(r.code == kOk);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["r2"] == doctest::Approx(1.0));
  CHECK(j["mean_abs_vpe"] == 0.0);
  CHECK(j["avpe_within_bound"] == true);

  r = run({"volume", table("scaled.csv", {{11, 10}, {22, 20}, {44, 40}, {5.5, 5}}), "--out", "-"});
  j = nlohmann::json::parse(r.out);
  CHECK(j["fit"]["slope"] == doctest::Approx(1.1));
  CHECK(j["fit"]["intercept"].get<double>() == doctest::Approx(0.0).epsilon(1e-9).scale(1));
  CHECK(j["r2"] == doctest::Approx(1.0));
  CHECK(j["mean_abs_vpe"] == doctest::Approx(0.1));

  r = run({"volume", table("one.csv", {{11, 10}}), "--out", "-"});
  CHECK(r.code == kBad);
  CHECK(r.err.find("at least 2 cases") != std::string::npos);
  CHECK(run({"volume", table("flat.csv", {{10, 10}, {12, 10}}), "--out", "-"}).code == kBad);
  CHECK(run({"volume", (tmp / "missing.csv").string(), "--out", "-"}).code == kIo);
}

TEST_CASE("usage errors") {
  CHECK(run({}).code == kUsage);
  CHECK(run({"frobnicate"}).code == kUsage);
  CHECK(run({"eval"}).code == kUsage);
  const auto help = run({"--help"});
  CHECK(help.code == kOk);
  CHECK(help.out.find("attn-bench") != std::string::npos);
}
