#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gpbounds/config.hpp"
#include "gpbounds/eval_cache.hpp"
#include "gpbounds/report_io.hpp"
#include "gpbounds/subprocess.hpp"

using namespace gpbounds;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("gpbounds_test_io_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

json minimal_config() {
  return json::parse(R"({
    "model": {"builtin": "sdof"},
    "variables": [{"name": "k", "lower": 1715000, "upper": 3185000, "unit": "N/m"}],
    "approach": "B",
    "af": {"kind": "ei"},
    "initial_design": {"type": "partition", "q": 3},
    "budget": 10
  })");
}

bool mentions(const ConfigError& e, const std::string& needle) {
  for (const auto& p : e.problems())
    if (p.find(needle) != std::string::npos) return true;
  return false;
}

std::vector<std::string> config_problems(const json& j) {
  try {
    parse_config(j);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

RunReport small_report() {
  IntervalBox box({0.0}, {2.0});
  box.names = {"x"};
  box.units = {"m"};
  const BlackBox f = [](const Eigen::VectorXd& b) { return std::sin(3 * b[0]); };
  const auto init = evaluate_design(f, box, map_levels(taguchi_array(3, 1), box));
  SolverOptions o;
  o.grid = LatticeGrid{51};
  StoppingPolicy p;
  p.budget = 4;
  return run_approach_a(f, box, init, AcquisitionKind::ei(), p, 7, o);
}

}  // namespace

TEST(ReportJson, RoundTripIsExact) {
  const auto rep = small_report();
  const json j = to_json(rep);
  EXPECT_EQ(j.at("format"), "gpbounds-report/1");
  const auto back = report_from_json(json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());
  EXPECT_EQ(back.lower.mean, rep.lower.mean);
  EXPECT_EQ(back.history.size(), rep.history.size());
}

TEST(ReportJson, StoredModelReproducesPosterior) {
  const auto rep = small_report();
  const auto& m = rep.models.back();
  const Surrogate s = surrogate_from_model(m, rep.box);
  const auto est = rep.upper;
  EXPECT_NEAR(s.predict(scale(rep.box, est.location)).mean, est.mean, 1e-9 * (1 + std::abs(est.mean)));
}

TEST(ReportJson, RejectsUnknownFormat) {
  json j = to_json(small_report());
  j["format"] = "something-else/9";
  EXPECT_ANY_THROW(report_from_json(j));
}

TEST(Csv, HeadersAndRowCounts) {
  const auto rep = small_report();
  std::ostringstream trace, bounds, af, err, curve;
  write_trace_csv(trace, rep);
  write_bounds_csv(bounds, rep);
  write_af_trace_csv(af, rep);
  write_error_trace_csv(err, rep, -1.0, 1.0);
  write_gp_curve_csv(curve, rep.models.back(), rep.box);
  auto first_line = [](const std::string& s) { return s.substr(0, s.find('\n')); };
  auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
  EXPECT_EQ(first_line(trace.str()),
            "iteration,side,training_size,b_hat_x,af_value,incumbent,evaluated,value,af_stop,bound_mean,theta_1,p_1");
  EXPECT_EQ(first_line(bounds.str()), "side,mean,sigma,lo,hi,observed_optimum,warning,location_x,observed_x");
  EXPECT_EQ(first_line(af.str()), "iteration,side,af_value,af_stop");
  EXPECT_EQ(first_line(err.str()), "iteration,side,bound_mean,reference,error_pct");
  EXPECT_EQ(first_line(curve.str()), "b,mean,lo,hi");
  std::size_t steps = 0;
  for (const auto& h : rep.history) steps += h.steps.size();
  EXPECT_EQ(static_cast<std::size_t>(lines(trace.str())), steps + 1);
  EXPECT_EQ(lines(bounds.str()), 3);
  EXPECT_EQ(lines(curve.str()), 302);
  EXPECT_THROW(write_error_trace_csv(err, rep, 0.0, 1.0), InvalidArgument);
}

TEST(Csv, Fmt17RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 49.866, 1e22})
    EXPECT_EQ(std::stod(fmt17(v)), v);
}

TEST(Config, MinimalParsesWithDefaults) {
  const auto cfg = parse_config(minimal_config());
  EXPECT_EQ(cfg.model.builtin, "sdof");
  EXPECT_EQ(cfg.box.dim(), 1);
  EXPECT_EQ(cfg.box.names[0], "k");
  EXPECT_EQ(cfg.policy.budget, 10);
  EXPECT_EQ(cfg.approach, "B");
  EXPECT_FALSE(cfg.surrogate.standardize_outputs);
  EXPECT_FALSE(cfg.grid.has_value());
  const auto [pts, desc] = initial_design(cfg);
  EXPECT_EQ(pts.rows(), 3);
  EXPECT_DOUBLE_EQ(pts(1, 0), 2450000.0);
}

TEST(Config, FullDocumentParses) {
  json j = minimal_config();
  j["af"] = {{"kind", "cb"}, {"chi", 3.0}, {"cb_slack", 0.0}};
  j["grid"] = {{"type", "halton"}, {"count", 512}, {"seed", 4}};
  j["gp"] = {{"standardize_outputs", true}, {"starts", 4}, {"max_iterations", 80}};
  j["reference"] = {{"lower", 27.856}, {"upper", 49.866}};
  j["baseline"] = {{"method", "vertex"}};
  j["seed"] = 11;
  j["model"]["params"] = {{"dt", 5e-4}, {"damping_model", "fixed"}};
  const auto cfg = parse_config(j);
  EXPECT_EQ(cfg.af.type, AcquisitionKind::Type::CB);
  EXPECT_EQ(cfg.af.chi, 3.0);
  EXPECT_TRUE(std::holds_alternative<LowDiscrepancyGrid>(*cfg.grid));
  EXPECT_TRUE(cfg.surrogate.standardize_outputs);
  EXPECT_EQ(cfg.surrogate.fit.starts, 4);
  EXPECT_EQ(cfg.reference->second, 49.866);
  EXPECT_EQ(cfg.model.sdof.dt, 5e-4);
  EXPECT_EQ(cfg.seed, 11u);
}

TEST(Config, ErrorsNameTheField) {
  json j = minimal_config();
  j["variables"][0]["lower"] = 4e6;
  j["af"]["kind"] = "ucb";
  j["budget"] = -1;
  j["colour"] = "red";
  j["initial_design"].erase("q");
  const auto p = config_problems(j);
  auto has = [&](const std::string& s) {
    return std::any_of(p.begin(), p.end(), [&](const auto& x) { return x.rfind(s, 0) == 0; });
  };
  EXPECT_TRUE(has("/variables/0/lower"));
  EXPECT_TRUE(has("/af/kind"));
  EXPECT_TRUE(has("/budget"));
  EXPECT_TRUE(has("/colour: unknown field"));
  EXPECT_TRUE(has("/initial_design/q: required field missing"));
  EXPECT_EQ(p.size(), 5u);
}

TEST(Config, ModelChecks) {
  json j = minimal_config();
  j["model"] = {{"builtin", "sdof"}, {"command", "x"}};
  EXPECT_FALSE(config_problems(j).empty());
  j["model"] = {{"builtin", "synthetic4d"}};
  try {
    parse_config(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e, "exactly four variables"));
  }
  j = minimal_config();
  j["model"]["params"] = {{"mass", -1.0}};
  EXPECT_FALSE(config_problems(j).empty());
  j["af"] = {{"kind", "ei"}, {"chi", 2.0}};
  EXPECT_FALSE(config_problems(j).empty());
  j = minimal_config();
  j["reference"] = {{"lower", 0.0}, {"upper", 1.0}};
  EXPECT_EQ(config_problems(j).size(), 1u);
}

TEST(Config, SyntaxErrorReportsLineAndColumn) {
  const auto path = scratch("broken.json");
  write_text_file(path.string(), "{\n  \"budget\": 3,\n  oops\n}\n");
  try {
    load_config(path.string());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("broken.json:3:"), std::string::npos) << e.what();
  }
}

TEST(Config, PointsFileIsResolvedAgainstConfigDirectory) {
  const auto dir = scratch("points_cfg");
  fs::create_directories(dir);
  write_text_file((dir / "init.csv").string(), "k\n1715000\n2000000\n3185000\n");
  json j = minimal_config();
  j["initial_design"] = {{"type", "points"}, {"file", "init.csv"}};
  write_text_file((dir / "cfg.json").string(), j.dump());
  const auto cfg = load_config((dir / "cfg.json").string());
  const auto [pts, desc] = initial_design(cfg);
  EXPECT_EQ(pts.rows(), 3);
  EXPECT_EQ(pts(1, 0), 2000000.0);
  write_text_file((dir / "init.csv").string(), "k\n1715000\nabc\n");
  EXPECT_THROW(initial_design(cfg), InvalidArgument);
  write_text_file((dir / "init.csv").string(), "k\n9999999\n");
  EXPECT_THROW(initial_design(cfg), InvalidArgument);
}

TEST(Config, ModelSourceDistinguishesParameters) {
  auto a = parse_config(minimal_config());
  auto b = a;
  b.model.sdof.dt = 5e-4;
  EXPECT_NE(model_source(a), model_source(b));
  EXPECT_EQ(model_source(a), model_source(parse_config(minimal_config())));
}

TEST(Subprocess, EchoesAValue) {
  SubprocessBlackBox bb("cat >/dev/null; echo '{\"w\": 2.5}'", std::chrono::milliseconds(5000));
  EXPECT_EQ(bb(Eigen::VectorXd::Constant(1, 1.0)), 2.5);
  EXPECT_EQ(bb.launches(), 1);
}

TEST(Subprocess, ChildSeesTheRequest) {
  // The child echoes the first coordinate back via sed.
  SubprocessBlackBox bb("sed -e 's/.*\"b\":\\[\\([^],]*\\).*/{\"w\": \\1}/'", std::chrono::milliseconds(5000));
  EXPECT_EQ(bb(Eigen::Vector2d(0.125, 9.0)), 0.125);
}

TEST(Subprocess, Timeout) {
  SubprocessBlackBox bb("sleep 5", std::chrono::milliseconds(200));
  const auto t0 = std::chrono::steady_clock::now();
  try {
    bb(Eigen::VectorXd::Zero(1));
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("timed out"), std::string::npos);
  }
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(3));
}

TEST(Subprocess, NonZeroExit) {
  SubprocessBlackBox bb("echo nope >&2; exit 3", std::chrono::milliseconds(5000));
  try {
    bb(Eigen::VectorXd::Zero(1));
    FAIL();
  } catch (const EvaluationError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("status 3"), std::string::npos);
    EXPECT_NE(m.find("nope"), std::string::npos);
  }
}

TEST(Subprocess, MalformedOrIncompleteOutput) {
  for (const char* cmd : {"echo not-json", "echo '{\"v\": 1}'", "echo '{\"w\": \"x\"}'", "echo '{\"w\": NaN}'"}) {
    SubprocessBlackBox bb(cmd, std::chrono::milliseconds(5000));
    EXPECT_THROW(bb(Eigen::VectorXd::Zero(1)), EvaluationError) << cmd;
  }
  EXPECT_THROW(SubprocessBlackBox("", std::chrono::milliseconds(1)), InvalidArgument);
}

TEST(Subprocess, ParseResponseMessages) {
  EXPECT_EQ(parse_response("{\"w\": -1e-3}\n"), -1e-3);
  try {
    parse_response("{}");
    FAIL();
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("\"w\""), std::string::npos);
  }
}

TEST(EvalCache, StoreLookupAndReplay) {
  const auto log = scratch("evals.jsonl");
  fs::remove(log);
  const IntervalBox box({0.0, 10.0}, {1.0, 20.0});
  {
    EvaluationCache c(box, "builtin:test");
    c.attach_log(log.string());
    c.store(Eigen::Vector2d(0.5, 12.0), 3.0);
    c.store(Eigen::Vector2d(0.25, 15.0), -1.0);
    EXPECT_EQ(*c.lookup(Eigen::Vector2d(0.5, 12.0)), 3.0);
    EXPECT_FALSE(c.lookup(Eigen::Vector2d(0.5, 12.001)).has_value());
  }
  {
    std::ofstream out(log, std::ios::app);
    out << "{\"id\": \"x\", \"b\": [0.1, 11]\n";  // truncated line
    out << R"({"id":"y","b":[0.9,19],"w":7,"source":"builtin:other","t":0})" << '\n';
    out << R"({"id":"z","b":[0.9],"w":7,"source":"builtin:test","t":0})" << '\n';
  }
  EvaluationCache c(box, "builtin:test");
  EXPECT_EQ(c.replay(log.string()), 2u);
  EXPECT_EQ(c.warnings().size(), 2u);
  EXPECT_EQ(*c.lookup(Eigen::Vector2d(0.25, 15.0)), -1.0);
  EXPECT_FALSE(c.lookup(Eigen::Vector2d(0.9, 19.0)).has_value());
}

TEST(EvalCache, CachedBlackBoxCallsOncePerPoint) {
  long inner_calls = 0;
  const BlackBox f = [&](const Eigen::VectorXd& b) {
    ++inner_calls;
    return b[0] * 2;
  };
  auto cache = std::make_shared<EvaluationCache>(IntervalBox({0.0}, {1.0}), "t");
  CachedBlackBox bb(f, cache);
  EXPECT_EQ(bb(Eigen::VectorXd::Constant(1, 0.3)), 0.6);
  EXPECT_EQ(bb(Eigen::VectorXd::Constant(1, 0.3)), 0.6);
  EXPECT_EQ(inner_calls, 1);
  EXPECT_EQ(bb.calls(), 1);
  EXPECT_EQ(bb.hits(), 1);
  const BlackBox nan = [](const Eigen::VectorXd&) { return std::nan(""); };
  CachedBlackBox bad(nan, cache);
  EXPECT_THROW(bad(Eigen::VectorXd::Constant(1, 0.9)), EvaluationError);
  EXPECT_EQ(cache->size(), 1u);
}

TEST(EvalCache, ResumedRunMakesNoNewCalls) {
  const auto log = scratch("resume.jsonl");
  fs::remove(log);
  const IntervalBox box({0.0}, {2.0});
  long calls = 0;
  const BlackBox f = [&](const Eigen::VectorXd& b) {
    ++calls;
    return std::sin(3 * b[0]);
  };
  SolverOptions o;
  o.grid = LatticeGrid{41};
  StoppingPolicy p;
  p.budget = 5;
  auto run = [&](bool resume) {
    auto cache = std::make_shared<EvaluationCache>(box, "sin3");
    if (resume) cache->replay(log.string());
    cache->attach_log(log.string());
    CachedBlackBox bb(f, cache);
    const auto init = evaluate_design(bb, box, map_levels(taguchi_array(3, 1), box));
    return to_json(run_approach_b(bb, box, init, AcquisitionKind::ei(), p, 3, o)).dump();
  };
  const auto first = run(false);
  const long fresh = calls;
  EXPECT_GT(fresh, 3);
  const auto second = run(true);
  EXPECT_EQ(calls, fresh);
  EXPECT_EQ(first, second);
}
