#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mcw/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = mcw::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("mcw_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string model_file(const std::string& name, const json& body) {
  const fs::path p = scratch() / (name + ".json");
  std::ofstream(p) << body.dump();
  return p.string();
}

std::string cw(double J, double h) {
  return model_file("cw_" + std::to_string(J) + "_" + std::to_string(h),
                    {{"K", 1}, {"J", {{J}}}, {"h", {h}}, {"alpha", {1.0}}, {"prior", {{"type", "ising"}}}});
}

std::string free2() {
  return model_file("free2", {{"K", 2},
                              {"J", {{0, 0}, {0, 0}}},
                              {"h", {0, 0}},
                              {"alpha", {0.5, 0.5}},
                              {"prior", {{"type", "ising"}}}});
}

// Validator for the JSON Schema keywords used by the shipped report schema.
class SchemaCheck {
 public:
  explicit SchemaCheck(json root) : root_(std::move(root)) {}

  bool valid(const json& v) { return check(root_, v, "$"); }
  const std::string& error() const { return error_; }

 private:
  bool fail(const std::string& where, const std::string& what) {
    error_ = where + ": " + what;
    return false;
  }

  static bool has_type(const std::string& t, const json& v) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    return false;
  }

  bool check(const json& s, const json& v, const std::string& at) {
    if (s.contains("$ref")) {
      const std::string ref = s["$ref"];
      return check(root_.at(json::json_pointer(ref.substr(1))), v, at);
    }
    if (s.contains("type") && !has_type(s["type"], v)) return fail(at, "expected " + s["type"].get<std::string>());
    if (s.contains("const") && s["const"] != v) return fail(at, "const mismatch");
    if (s.contains("enum")) {
      bool found = false;
      for (const auto& e : s["enum"]) found = found || e == v;
      if (!found) return fail(at, "not in enum");
    }
    if (s.contains("minimum") && v.is_number() && v.get<double>() < s["minimum"].get<double>())
      return fail(at, "below minimum");
    if (s.contains("oneOf")) {
      int hits = 0;
      for (const auto& sub : s["oneOf"]) {
        SchemaCheck inner(root_);
        hits += inner.check(sub, v, at);
      }
      if (hits != 1) return fail(at, "oneOf matched " + std::to_string(hits));
    }
    if (v.is_object()) {
      for (const auto& r : s.value("required", json::array()))
        if (!v.contains(r.get<std::string>())) return fail(at, "missing " + r.get<std::string>());
      const json props = s.value("properties", json::object());
      for (const auto& [k, sub] : v.items()) {
        if (props.contains(k)) {
          if (!check(props[k], sub, at + "." + k)) return false;
        } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
          return fail(at, "unexpected key " + k);
        }
      }
    }
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) return fail(at, "too few items");
      if (s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i)
          if (!check(s["items"], v[i], at + "[" + std::to_string(i) + "]")) return false;
    }
    return true;
  }

  json root_;
  std::string error_;
};

json load_schema() {
  std::ifstream in(fs::path(MCW_SOURCE_DIR) / "schema" / "report.schema.json");
  return json::parse(in);
}

}  // namespace

TEST_CASE("pressure on the free model") {
  const auto r = run({"--model", free2(), "pressure"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["value_prior"].get<double>() == 0.0);
  CHECK(j["value_counting"].get<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("landscape on the two-phase model") {
  const auto r = run({"--model", cw(1.5, 0.0), "landscape", "--emit", (scratch() / "pts.csv").string()});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["count"] == 3);
  CHECK(j["maxima_count"] == 2);
  std::ifstream csv(scratch() / "pts.csv");
  std::string header, line;
  std::getline(csv, header);
  CHECK(header == "x_1,f,kind,min_hess_eig");
  int rows = 0;
  while (std::getline(csv, line)) rows += !line.empty();
  CHECK(rows == 3);
}

TEST_CASE("verify with exact laws prints a decreasing covariance error") {
  const auto r = run({"--model", cw(0.5, 0.2), "verify", "--N", "200,400,800", "--source", "exact"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "N,mean_err_1,cov_rel_err,mgf_err,status");
  std::vector<double> cov;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    REQUIRE(cells.size() == 5);
    cov.push_back(std::stod(cells[2]));
  }
  REQUIRE(cov.size() == 3);
  CHECK(cov[1] < cov[0]);
  CHECK(cov[2] < cov[1]);
}

TEST_CASE("exact, clt and sample subcommands") {
  {
    const auto r = run({"--model", cw(0.5, 0.2), "exact", "--N", "50", "--emit", (scratch() / "law.csv").string()});
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j.contains("log_Z"));
    std::ifstream csv(scratch() / "law.csv");
    std::string header, line;
    std::getline(csv, header);
    CHECK(header == "x_1,probability");
    double total = 0;
    while (std::getline(csv, line))
      if (!line.empty()) total += std::stod(line.substr(line.find(',') + 1));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  {
    const auto r = run({"--model", cw(1.5, 0.0), "clt", "--box", "-1:0)", "--box", "(0:1"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["params"].size() == 2);
    CHECK(run({"--model", cw(1.5, 0.0), "clt"}).code == 1);
  }
  {
    const std::string csv = (scratch() / "samples.csv").string();
    const auto r = run({"--model", cw(0.5, 0.2), "sample", "--N", "100", "--chains", "2", "--sweeps", "1000",
                        "--seed", "4", "--emit", csv});
    REQUIRE(r.code == 0);
    std::ifstream in(csv);
    std::string header, line;
    std::getline(in, header);
    CHECK(header == "m_1");
    int rows = 0;
    while (std::getline(in, line)) rows += !line.empty();
    CHECK(rows == 2000);
  }
}

TEST_CASE("exit codes and diagnostics") {
  auto r = run({"--model", (scratch() / "missing.json").string(), "pressure"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error kind=validation", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  r = run({"--model", cw(0.5, 0.2), "frobnicate"});
  CHECK(r.code == 1);
  r = run({"--model", cw(0.5, 0.2), "exact", "--N", "50", "--bogus"});
  CHECK(r.code == 1);
  r = run({"--model", cw(0.5, 0.2), "exact", "--N", "400", "--budget", "10"});
  CHECK(r.code == 1);

  const std::string bad = model_file("asym", {{"K", 2},
                                              {"J", {{0, 1}, {0.5, 0}}},
                                              {"h", {0, 0}},
                                              {"alpha", {0.5, 0.5}},
                                              {"prior", {{"type", "ising"}}}});
  CHECK(run({"--model", bad, "pressure"}).code == 1);

  // Critical point: no nondegenerate maximizer to expand around.
  r = run({"--model", cw(1.0, 0.0), "clt"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error kind=numerical", 0) == 0);

  // The installed binary reports the same codes.
  const std::string cmd = std::string(MCW_CLI_PATH) + " --model " + cw(1.0, 0.0) + " clt >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 2);
}

TEST_CASE("deterministic runs are byte-identical") {
  for (const std::vector<std::string> tail :
       {std::vector<std::string>{"report", "--N", "60,120"},
        std::vector<std::string>{"sample", "--N", "80", "--chains", "3", "--sweeps", "40", "--seed", "9"},
        std::vector<std::string>{"verify", "--N", "100", "--source", "sampler", "--sweeps", "200"}}) {
    std::vector<std::string> args = {"--deterministic", "--model", cw(0.5, 0.2)};
    args.insert(args.end(), tail.begin(), tail.end());
    const auto a = run(args);
    const auto b = run(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
  }
}

TEST_CASE("--out writes the JSON document") {
  const fs::path dir = scratch() / "out";
  const auto r = run({"--model", cw(0.5, 0.2), "--out", dir.string(), "landscape"});
  REQUIRE(r.code == 0);
  std::ifstream in(dir / "landscape.json");
  REQUIRE(in.good());
  CHECK(json::parse(in) == json::parse(r.out));
}

TEST_CASE("report validates against the shipped schema") {
  SchemaCheck check(load_schema());
  const std::vector<std::vector<std::string>> cases = {
      {"--model", cw(0.5, 0.2), "report", "--N", "100,200"},
      {"--model", cw(1.5, 0.0), "report", "--N", "100,200"},
      {"--model", cw(1.5, 0.0), "report", "--N", "100,200", "--box", "-1:0)", "--box", "(0:1"},
      {"--model", free2(), "report", "--N", "40"},
  };
  for (const auto& args : cases) {
    const auto r = run(args);
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK_MESSAGE(check.valid(j), check.error());
    CHECK(j["format"] == "mcw-report");
  }
  json broken = json::parse(run(cases[0]).out);
  broken.erase("landscape");
  CHECK_FALSE(check.valid(broken));
  broken = json::parse(run(cases[0]).out);
  broken["landscape"]["points"][0]["kind"] = "ridge";
  CHECK_FALSE(check.valid(broken));
}
