#include <doctest.h>

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccgm/tables.hpp"
#include "cli.hpp"
#include "support.hpp"

using namespace ccgm;
using json = nlohmann::ordered_json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string bundled_text() { return emit_string(testing::bundled()); }

}  // namespace

TEST_CASE("measure reports the reference marginal odds-ratio") {
  const auto r = run({"measure", "--pair", "L,V"});
  CHECK(r.code == cli::kOk);
  CHECK(r.out.find("odds-ratio     9.8") != std::string::npos);
  const auto j = json::parse(run({"--format", "json", "measure", "--pair", "L,V"}).out);
  CHECK(std::abs(j["marginal"]["odds_ratio"].get<double>() - 9.8) <= 0.05);
}

TEST_CASE("fit-logit reproduces the reference model with an AE term") {
  const auto r = run({"--format", "json", "fit-logit", "--formula", "L : V*C*R + A*E"});
  REQUIRE(r.code == cli::kOk);
  const auto j = json::parse(r.out);
  CHECK(j["df"] == 21);
  CHECK(std::abs(j["deviance"].get<double>() - 21.4) <= 0.1);
  bool found = false;
  for (const auto& t : j["terms"]) {
    if (t["term"] == "VCR") {
      found = true;
      CHECK(std::abs(t["coeff"].get<double>() - -3.39) <= 0.02);
    }
  }
  CHECK(found);
}

TEST_CASE("select on the case slice gives the case graph") {
  const auto j = json::parse(run({"--format", "json", "select", "--slice", "L=1", "--alpha", "0.2"}).out);
  CHECK(j["edges"] == json({"V-C", "V-R", "C-R", "C-A"}));
}

TEST_CASE("exit codes follow the 0/1/2 contract") {
  CHECK(run({}).code == cli::kUsageError);
  CHECK(run({"no-such-command"}).code == cli::kUsageError);
  CHECK(run({"measure"}).code == cli::kUsageError);
  CHECK(run({"measure", "--pair", "L"}).code == cli::kUsageError);
  CHECK(run({"--format", "xml", "ingest"}).code == cli::kUsageError);
  CHECK(run({"--tol", "-1", "ingest"}).code == cli::kUsageError);
  CHECK(run({"--max-iter", "0", "ingest"}).code == cli::kUsageError);
  CHECK(run({"select", "--alpha", "1.5"}).code == cli::kUsageError);
  CHECK(run({"fit-logit", "--formula", "L : V*"}).code == cli::kUsageError);
  CHECK(run({"fit-loglinear", "--generators", "VC", "--model", "x.json"}).code == cli::kUsageError);

  const auto unknown = run({"measure", "--pair", "L,Z"});
  CHECK(unknown.code == cli::kDataError);
  CHECK(unknown.err.find("unknown variable") != std::string::npos);
  CHECK(run({"--input", "/nonexistent.csv", "ingest"}).code == cli::kDataError);
  CHECK(run({"--input", "-", "ingest"}, "A,B,count\n0,5,1\n").code == cli::kDataError);
  CHECK(run({"measure", "--pair", "L,V", "--where", "L=1"}).code == cli::kDataError);
  CHECK(run({"--help"}).code == cli::kOk);
}

TEST_CASE("stdin input and canonical re-emission") {
  const auto r = run({"--input", "-", "ingest"}, "A,B,count\n1,1,4\n0,0,2\n");
  CHECK(r.code == cli::kOk);
  CHECK(r.out == "A,B,count\n0,0,2\n0,1,0\n1,0,0\n1,1,4\n");
  CHECK(run({"ingest"}).out == bundled_text());
}

TEST_CASE("resampling is reproducible for a fixed seed") {
  const auto a = run({"--seed", "5", "ingest", "--resample", "200"});
  const auto b = run({"--seed", "5", "ingest", "--resample", "200"});
  const auto c = run({"--seed", "6", "ingest", "--resample", "200"});
  CHECK(a.code == cli::kOk);
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  CHECK(ingest_string(a.out).total() == 200.0);
}

TEST_CASE("reproduce passes on the bundled data and fails on a corrupted copy") {
  const auto ok = run({"reproduce"});
  CHECK(ok.code == cli::kOk);
  CHECK(ok.out.find("FAIL") == std::string::npos);

  auto text = bundled_text();
  const auto pos = text.find("\n0,0,0,0,0,0,21\n");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 16, "\n0,0,0,0,0,0,40\n");
  const auto bad = run({"--input", "-", "reproduce"}, text);
  CHECK(bad.code != cli::kOk);
  CHECK(bad.out.find("FAIL") != std::string::npos);

  const auto j = json::parse(run({"--format", "json", "reproduce"}).out);
  CHECK(j["pass"] == true);
  CHECK(j["checks"].is_array());
  CHECK(j["checks"].size() > 100);
  for (const auto& c : j["checks"]) {
    CHECK(c.contains("observed"));
    CHECK(c.contains("expected"));
    CHECK(c.contains("pass"));
  }
}

TEST_CASE("output is byte-stable across runs") {
  const std::vector<std::vector<std::string>> commands{
      {"--format", "json", "smooth", "--model", testing::data_path("models/fig4.json"), "--odds-ratios", "V", "--given", "C,R"},
      {"--format", "json", "select", "--slice", "L=0"},
      {"--format", "json", "graph-check", "--graph", testing::data_path("graphs/fig3.json"), "--implied", "2"},
      {"fit-logit", "--formula", "L : V*C*R+C*A+A*E+E*R"},
      {"--format", "json", "reproduce"},
  };
  for (const auto& args : commands) {
    const auto a = run(args), b = run(args);
    CHECK(a.code == cli::kOk);
    CHECK(a.out == b.out);
  }
}

TEST_CASE("every command in the registry runs, and every library operation is reachable") {
  const std::map<std::string, std::vector<std::string>> invocations{
      {"ingest", {"ingest"}},
      {"marginal", {"marginal", "--keep", "L,V", "--given", "C=0"}},
      {"measure", {"measure", "--pair", "L,V", "--given", "C,R", "--mixture", "A"}},
      {"fit-loglinear", {"fit-loglinear", "--closed-form"}},
      {"fit-logit", {"fit-logit", "--formula", "L : V*C*R + A", "--odds-ratios", "V", "--given", "C,R,A"}},
      {"smooth", {"smooth", "--case", "VCR", "--control", "VC,R", "--odds-ratios", "V", "--given", "C,R"}},
      {"select", {"select", "--slice", "L=1"}},
      {"graph-check", {"graph-check", "--graph", testing::data_path("graphs/fig4b.json"), "--separates", "V|AE|CR",
                       "--implied", "1", "--drop", "A,E"}},
      {"collapse", {"collapse", "--pair", "E,A", "--over", "R", "--where", "L=0"}},
      {"decompose", {"decompose", "--where", "L=1", "--step", "E|A|VCR", "--step", "E|R|VC@VCRE"}},
      {"interaction", {"interaction"}},
      {"mixing", {"mixing", "--pair", "V,A", "--given", "R,C"}},
      {"reproduce", {"reproduce"}},
  };
  std::set<std::string> reached;
  for (const auto& c : cli::command_registry()) {
    CAPTURE(c.name);
    REQUIRE(invocations.count(c.name) == 1);
    const auto r = run(invocations.at(c.name));
    CHECK(r.code == cli::kOk);
    CHECK_FALSE(r.out.empty());
    reached.insert(c.operations.begin(), c.operations.end());
  }
  CHECK(invocations.size() == cli::command_registry().size());

  // Every operation declared in the public headers.
  const std::vector<std::string> operations{
      "tables.ingest", "tables.emit", "tables.marginalize", "tables.condition", "tables.cell",
      "measures.odds_ratio", "measures.log_or_se", "measures.relative_risk", "measures.dependence_sign",
      "measures.pairwise_report", "measures.rr_mixture_weights", "measures.stratified_measures",
      "graphs.find_collision_vs", "graphs.is_markov_equivalent_to_concentration", "graphs.separates",
      "graphs.implied_independencies", "graphs.marginalize_graph", "graphs.cliques",
      "loglinear.fit_ipf", "loglinear.fit_closed_form_casecontrol", "loglinear.deviance_decomposition",
      "loglinear.forward_select", "logit.parse_formula", "logit.fit_logit", "logit.interaction_from_odds_ratios",
      "logit.fitted_odds_ratios", "smoothing.smooth", "smoothing.smoothed_odds_ratios",
      "smoothing.check_or_collapsibility", "smoothing.check_rr_collapsibility", "smoothing.mixing_artifact_demo"};
  for (const auto& op : operations) {
    CAPTURE(op);
    CHECK(reached.count(op) == 1);
  }
}

TEST_CASE("rr collapse and graph marginalization through the command line") {
  const auto rr = run({"collapse", "--pair", "L,V", "--over", "A,E", "--given", "C,R", "--rr"});
  CHECK(rr.code == cli::kOk);
  const auto g = json::parse(run({"--format", "json", "graph-check", "--graph", testing::data_path("graphs/fig4b.json"),
                                  "--drop", "A,E"})
                                 .out);
  CHECK(g["marginal_edges"] == json({"V-C"}));
  CHECK(g["collision_vs"].empty());
  const auto a = json::parse(run({"--format", "json", "graph-check", "--graph", testing::data_path("graphs/fig4a.json"),
                                  "--drop", "A,E"})
                                 .out);
  CHECK(a["marginal_edges"] == json({"V-C", "V-R", "C-R"}));
}
