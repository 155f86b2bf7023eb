#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "vbhp/cli.hpp"
#include "vbhp/errors.hpp"
#include "vbhp/io.hpp"

using namespace vbhp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("vbhp_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vbhp");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("csv parse, sort and rescale") {
  auto seq = parse_events_csv("0.5\n0.1\n0.9\n", "mem");
  CHECK(seq.times == std::vector<double>{0.1, 0.5, 0.9});
  CHECK(seq.t_max == 0.9);

  TempDir dir;
  write_text_file(dir / "e.csv", "0.5\n0.1\n0.9\n");
  const auto scaled = load_events(dir / "e.csv", std::numbers::pi);
  REQUIRE(scaled.size() == 3);
  CHECK(std::is_sorted(scaled.times.begin(), scaled.times.end()));
  CHECK(scaled.times.front() == 0.0);
  CHECK(scaled.times.back() < std::numbers::pi);
  CHECK(scaled.times.back() > std::numbers::pi - 1e-5);
  CHECK(scaled.t_max == std::numbers::pi);
  CHECK(scaled.times[1] == doctest::Approx(std::numbers::pi / 2).epsilon(1e-5));
}

TEST_CASE("csv comments, header and empty input") {
  auto seq = parse_events_csv("# t_max=5\n# note\n1.0,\n\n2.0\n");
  CHECK(seq.times == std::vector<double>{1.0, 2.0});
  CHECK(seq.t_max == 5.0);
  const auto empty = parse_events_csv("");
  CHECK(empty.empty());
  CHECK(empty.t_max > 0.0);
  TempDir dir;
  write_text_file(dir / "empty.csv", "");
  CHECK(load_events(dir / "empty.csv").empty());
}

TEST_CASE("json ties are perturbed") {
  const auto seq = parse_events_json("[0.0, 0.0, 1.0]");
  REQUIRE(seq.size() == 3);
  CHECK(seq.times[0] == 0.0);
  CHECK(seq.times[1] == kTieIncrement);
  CHECK(seq.times[2] == 1.0);
  CHECK(seq.perturbed == 1);
  const auto obj = parse_events_json(R"({"t_max": 4, "events": [3, 1, 1, 1]})");
  REQUIRE(obj.size() == 4);
  CHECK(obj.times[0] == 1.0);
  CHECK(obj.times[1] == doctest::Approx(1.0 + kTieIncrement).epsilon(1e-15));
  CHECK(obj.times[2] == doctest::Approx(1.0 + 2 * kTieIncrement).epsilon(1e-15));
  CHECK(obj.times[3] == 3.0);
  CHECK(obj.t_max == 4.0);
  CHECK_NOTHROW(obj.validate());
}

TEST_CASE("event data errors") {
  CHECK_THROWS_AS(parse_events_csv("0.5\n-0.1\n"), DataError);
  CHECK_THROWS_AS(parse_events_json("[1, -2]"), DataError);
  try {
    parse_events_csv("0.1\n0.2\nabc\n", "f.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("f.csv:3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_events_json("{\"events\": [1, \"x\"]}"), ParseError);
  CHECK_THROWS_AS(parse_events_json("{not json"), ParseError);
  CHECK_THROWS_AS(load_events("/nonexistent/dir/e.csv"), DataError);
  CHECK_THROWS_AS(format_from_path("e.parquet"), ArgumentError);
}

TEST_CASE("events round trip through both formats") {
  std::mt19937_64 gen(21);
  TempDir dir;
  for (int rep = 0; rep < 10; ++rep) {
    auto seq = testing::random_events(gen, 1 + rep * 13, testing::uniform(gen, 0.5, 20));
    for (const char* name : {"r.csv", "r.json"}) {
      save_events(dir / name, seq);
      const auto back = load_events(dir / name);
      REQUIRE(back.size() == seq.size());
      for (std::size_t i = 0; i < seq.size(); ++i) CHECK(bit_equal(back.times[i], seq.times[i]));
      CHECK(bit_equal(back.t_max, seq.t_max));
    }
  }
}

TEST_CASE("model file round trip is bit exact") {
  std::mt19937_64 gen(8);
  TempDir dir;
  for (int rep = 0; rep < 5; ++rep) {
    const auto seq = testing::random_events(gen, 15, 3.0);
    const KernelConfig kc = KernelConfig::make(testing::uniform(gen, 0.5, 3), {testing::uniform(gen, 0.05, 1)});
    const InducingGrid grid = InducingGrid::regular(seq.domain(), 5);
    const Priors priors = Priors::default_for(seq.size(), seq.t_max);
    FitConfig fc;
    fc.max_em_iterations = 3;
    const FitResult r = fit(seq, priors, kc, grid, fc);
    auto model = make_model_file(r, kc, seq.domain(), grid, priors, 1.35, seq);
    model.m = testing::random_state(FitContext(seq, SparseGp(kc, grid), 1.35), gen).m;

    save_model(dir / "m.json", model);
    const ModelFile back = load_model(dir / "m.json");
    CHECK(bit_equal(back.kernel.gamma, model.kernel.gamma));
    CHECK(bit_equal(back.kernel.alphas[0], model.kernel.alphas[0]));
    CHECK(bit_equal(back.kernel.jitter, model.kernel.jitter));
    CHECK(bit_equal(back.k, model.k));
    CHECK(bit_equal(back.c, model.c));
    CHECK(bit_equal(*back.support, *model.support));
    CHECK(bit_equal(back.priors.c0, model.priors.c0));
    CHECK(back.m.size() == model.m.size());
    for (Eigen::Index i = 0; i < model.m.size(); ++i) CHECK(bit_equal(back.m(i), model.m(i)));
    for (Eigen::Index i = 0; i < model.s_factor.size(); ++i) {
      CHECK(bit_equal(back.s_factor.data()[i], model.s_factor.data()[i]));
    }
    for (Eigen::Index i = 0; i < model.grid.points.size(); ++i) {
      CHECK(bit_equal(back.grid.points.data()[i], model.grid.points.data()[i]));
    }
    REQUIRE(back.report.elbo_trace.size() == model.report.elbo_trace.size());
    for (std::size_t i = 0; i < model.report.elbo_trace.size(); ++i) {
      CHECK(bit_equal(back.report.elbo_trace[i], model.report.elbo_trace[i]));
    }
    CHECK(bit_equal(back.report.bound, model.report.bound));
    CHECK(serialize_model(back) == serialize_model(model));
  }
}

TEST_CASE("model file errors") {
  std::mt19937_64 gen(1);
  const auto seq = testing::random_events(gen, 8, 2.0);
  const KernelConfig kc = KernelConfig::make(1.0, {0.2});
  const InducingGrid grid = InducingGrid::regular(seq.domain(), 4);
  const Priors priors = Priors::default_for(seq.size(), seq.t_max);
  FitConfig fc;
  fc.max_em_iterations = 2;
  const auto model = make_model_file(fit(seq, priors, kc, grid, fc), kc, seq.domain(), grid, priors, 0.9, seq);
  const std::string text = serialize_model(model);

  CHECK_THROWS_AS(deserialize_model(text.substr(0, text.size() / 2)), ParseError);
  std::string wrong = text;
  const auto pos = wrong.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  wrong.replace(pos, 12, "\"version\": 99");
  CHECK_THROWS_AS(deserialize_model(wrong), IncompatibleVersionError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), DataError);
}

TEST_CASE("cli pipeline") {
  TempDir dir;
  REQUIRE(cli({"simulate", "--kernel", "sin", "--mu", "10", "--t-max", "3.14159265", "--seed", "7", "--out",
               dir / "ev.csv"}) == 0);
  REQUIRE(cli({"fit", "--events", dir / "ev.csv", "--out", dir / "model.json", "--report", dir / "trace.csv"}) == 0);
  CHECK(cli({"predict", "--model", dir / "model.json", "--points", "11", "--out", dir / "pred.csv"}) == 0);
  CHECK(cli({"evaluate", "--model", dir / "model.json", "--events", dir / "ev.csv", "--truth", "sin", "--mu-true",
             "10", "--splits", "2", "--out", dir / "eval.csv"}) == 0);
  const std::string pred = read_text_file(dir / "pred.csv");
  CHECK(pred.find("x,mode,shape,scale,q10,q90") != std::string::npos);
  const std::string eval = read_text_file(dir / "eval.csv");
  CHECK(eval.find("# l2_phi") != std::string::npos);
  CHECK(eval.find("# hll_median") != std::string::npos);

  SUBCASE("identical inputs give identical artifacts") {
    REQUIRE(cli({"simulate", "--kernel", "sin", "--mu", "10", "--t-max", "3.14159265", "--seed", "7", "--out",
                 dir / "ev2.csv"}) == 0);
    CHECK(read_text_file(dir / "ev.csv") == read_text_file(dir / "ev2.csv"));
    // The model records its source path, so refit from the same file.
    REQUIRE(cli({"fit", "--events", dir / "ev.csv", "--out", dir / "model2.json", "--report", dir / "trace2.csv"}) == 0);
    CHECK(read_text_file(dir / "model.json") == read_text_file(dir / "model2.json"));
    REQUIRE(cli({"predict", "--model", dir / "model2.json", "--points", "11", "--out", dir / "pred2.csv"}) == 0);
    CHECK(pred == read_text_file(dir / "pred2.csv"));
  }
  SUBCASE("select writes a contour table") {
    REQUIRE(cli({"select", "--events", dir / "ev.csv", "--gammas", "0.5,2", "--alphas", "0.1", "--max-iter", "5",
                 "--threads", "1", "--contour", dir / "contour.csv", "--out", dir / "best.json"}) == 0);
    const std::string contour = read_text_file(dir / "contour.csv");
    CHECK(contour.find("gamma,alpha,bound,iterations,status") != std::string::npos);
    CHECK(fs::exists(dir / "best.json"));
  }
}

TEST_CASE("cli exit codes") {
  TempDir dir;
  CHECK(cli({"predict", "--model", dir / "missing.json"}) == 2);
  CHECK(cli({"frobnicate"}) == 1);
  CHECK(cli({"simulate", "--kernel", "nope", "--out", dir / "x.csv"}) == 1);
  CHECK(cli({"fit"}) == 1);
  write_text_file(dir / "bad.csv", "0.1\nzzz\n");
  CHECK(cli({"fit", "--events", dir / "bad.csv"}) == 2);
  CHECK(cli({"--help"}) == 0);
}
