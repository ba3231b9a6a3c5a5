#include <doctest.h>

#include <sstream>

#include "smurf/config.hpp"
#include "smurf/errors.hpp"
#include "smurf/table.hpp"

using namespace smurf;
using nlohmann::json;

namespace {

Table csv(const std::string& text) {
  std::istringstream in(text);
  return Table::read_csv(in, "toy.csv");
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

json toy_config() {
  return json::parse(R"({
    "family": "gaussian",
    "response": "y",
    "predictors": [
      {"name": "x", "type": "numeric", "penalty": "lasso"},
      {"name": "grade", "levels": ["low", "mid", "high"], "reference": "low", "penalty": "flasso"},
      {"name": "zone", "penalty": "gflasso", "graph": {"type": "complete"}}
    ]
  })");
}

}  // namespace

TEST_CASE("csv reader handles quotes, CRLF and blank lines") {
  const auto t = csv("\xEF\xBB\xBF" "a,b\r\n1,\"x,y\"\r\n\r\n2,\"say \"\"hi\"\"\"\n");
  REQUIRE(t.rows() == 2);
  CHECK(t.header() == std::vector<std::string>{"a", "b"});
  CHECK(t.column("b")[0] == "x,y");
  CHECK(t.column("b")[1] == "say \"hi\"");
  CHECK(t.line_of(1) == 4);
  CHECK(t.numeric("a")[1] == 2.0);

  std::ostringstream out;
  t.write_csv(out);
  std::istringstream back(out.str());
  const auto u = Table::read_csv(back);
  CHECK(u.column("b") == t.column("b"));
}

TEST_CASE("malformed csv errors name the line") {
  CHECK(error_of([] { csv("a,b\n1,2\n3\n"); }).find("toy.csv:3") != std::string::npos);
  CHECK(error_of([] { csv("a,b\n1,\"open\n"); }).find("toy.csv:2") != std::string::npos);
  CHECK(error_of([] { csv("a,a\n1,2\n"); }).find("duplicate column") != std::string::npos);
  CHECK(error_of([] { csv(""); }).find("no header") != std::string::npos);
  const auto t = csv("a\n1\n2x\n");
  CHECK(error_of([&] { t.numeric("a"); }).find("toy.csv:3") != std::string::npos);
  CHECK(error_of([&] { t.column("b"); }).find("missing column 'b'") != std::string::npos);
}

TEST_CASE("numbers parse strictly and format round-trip") {
  double v = 0.0;
  CHECK(parse_number("1e-3", v));
  CHECK(v == 0.001);
  CHECK_FALSE(parse_number("1.0abc", v));
  CHECK_FALSE(parse_number("", v));
  CHECK_FALSE(parse_number("nan", v));
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0}) {
    CHECK(parse_number(format_number(x), v));
    CHECK(v == x);
  }
}

TEST_CASE("config parses and builds a validated spec") {
  const auto cfg = parse_config(toy_config());
  const auto t = csv("y,x,grade,zone\n1.0,0.5,low,b\n2.0,-1,high,a\n0.5,2,mid,c\n1.5,0,mid,a\n");
  const auto spec = build_spec(t, cfg);
  CHECK(spec.n() == 4);
  REQUIRE(spec.blocks().size() == 4);
  // zone has no reference, levels sorted from the data
  const auto& zone = spec.blocks()[3];
  CHECK(zone.level_labels == std::vector<std::string>{"a", "b", "c"});
  CHECK_FALSE(zone.reference_level.has_value());
  CHECK(zone.graph->kind() == Graph::Kind::Complete);
  const auto& grade = spec.blocks()[2];
  CHECK(grade.reference_level == 0);
  CHECK(grade.column_count == 2);
  // row 2 is grade=high, the second dummy column
  CHECK(spec.design().values(1, grade.first_column + 1) == 1.0);
  CHECK(spec.design().values(1, grade.first_column) == 0.0);

  const auto again = parse_config(to_json(cfg));
  CHECK(to_json(again) == to_json(cfg));
}

TEST_CASE("numeric factor levels sort numerically and match by value") {
  json doc = toy_config();
  doc["predictors"] = json::array({{{"name", "age"}, {"penalty", "flasso"}}});
  const auto cfg = parse_config(doc);
  const auto spec = build_spec(csv("y,age\n1,10\n2,9\n3,100\n4,9\n"), cfg);
  CHECK(spec.blocks()[1].level_labels == std::vector<std::string>{"9", "10", "100"});
  // two spellings of one value are ambiguous without declared levels
  CHECK(error_of([&] { build_spec(csv("y,age\n1,10\n2,9\n3,9.0\n"), cfg); }).find("same level") !=
        std::string::npos);

  doc["predictors"][0]["levels"] = json::array({"9", "10", "100"});
  const auto spec2 = build_spec(csv("y,age\n1,10.0\n2,9\n3,100\n4,1e2\n"), parse_config(doc));
  CHECK(spec2.X().col(2).sum() == 2.0);
}

TEST_CASE("config rejects unknown keys and bad combinations") {
  auto with = [](const std::function<void(json&)>& edit) {
    json doc = toy_config();
    edit(doc);
    return error_of([&] { parse_config(doc); });
  };
  CHECK(with([](json& d) { d["famly"] = "x"; }).find("unknown key 'famly'") != std::string::npos);
  CHECK(with([](json& d) { d["predictors"][0]["colour"] = 1; }).find("unknown key") != std::string::npos);
  CHECK(with([](json& d) { d["solver"] = {{"eps", 1e-8}, {"tol", 1}}; }).find("unknown key 'tol'") !=
        std::string::npos);
  CHECK(with([](json& d) { d["tuning"] = {{"folds", 1}}; }).find("folds") != std::string::npos);
  CHECK(with([](json& d) { d["predictors"][0]["penalty"] = "flasso"; }).find("factor") != std::string::npos);
  CHECK(with([](json& d) { d["predictors"][2]["graph"] = "grid"; }).find("needs parameters") != std::string::npos);
  CHECK(with([](json& d) { d["predictors"][1]["graph"] = "complete"; }).find("chain") != std::string::npos);
  CHECK(with([](json& d) { d["predictors"][1]["penalty"] = "none"; }).find("penalty") != std::string::npos);
  CHECK(with([](json& d) { d["family"] = "gamma"; }) != "");
  CHECK(with([](json& d) { d.erase("response"); }).find("response") != std::string::npos);
}

TEST_CASE("data errors name the offending line") {
  const auto cfg = parse_config(toy_config());
  CHECK(error_of([&] { build_spec(csv("y,x,grade,zone\n1,0,low,a\n1,0,top,a\n"), cfg); }).find("toy.csv:3") !=
        std::string::npos);
  CHECK(error_of([&] { build_spec(csv("y,x,grade,zone\n1,oops,low,a\n"), cfg); }).find("toy.csv:2") !=
        std::string::npos);
  CHECK(error_of([&] { build_spec(csv("y,grade,zone\n1,low,a\n"), cfg); }).find("missing column 'x'") !=
        std::string::npos);
  json doc = toy_config();
  doc["predictors"][1]["reference"] = "none";
  CHECK(error_of([&] { build_spec(csv("y,x,grade,zone\n1,0,low,a\n"), parse_config(doc)); })
            .find("reference") != std::string::npos);
}

TEST_CASE("grid and edge-list graphs") {
  json doc = toy_config();
  doc["predictors"][2]["graph"] = {{"type", "grid"}, {"rows", 1}, {"cols", 3}};
  const auto t = csv("y,x,grade,zone\n1,0,low,a\n2,1,mid,b\n3,2,high,c\n");
  const auto spec = build_spec(t, parse_config(doc));
  CHECK(spec.blocks()[3].graph->edges().size() == 2);

  doc["predictors"][2]["graph"] = {{"type", "grid"}, {"rows", 2}, {"cols", 2}};
  CHECK(error_of([&] { build_spec(t, parse_config(doc)); }).find("grid 2x2") != std::string::npos);

  doc["predictors"][2]["graph"] = {{"type", "edges"}, {"path", "no_such_edges.txt"}};
  CHECK(error_of([&] { build_spec(t, parse_config(doc, "/nonexistent")); }).find("edge list") !=
        std::string::npos);
}
