#include <doctest.h>

#include <spillover/report.hpp>

#include <fstream>
#include <sstream>

using namespace spillover;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json fixture() { return nlohmann::json::parse(slurp(std::string(GOLDEN_DIR) + "/regression_report.json")); }

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("regression table matches the golden layout") {
    const auto t = report::regression_table(fixture());
    CHECK(t.text == slurp(std::string(GOLDEN_DIR) + "/table2.txt"));
  }

  TEST_CASE("regression table csv is long format") {
    const auto t = report::regression_table(fixture());
    const auto table = csv::parse(t.csv);
    CHECK(table.header() == std::vector<std::string>{"section", "variable", "model", "column", "estimate", "p_value", "stars"});
    bool found = false;
    for (std::size_t r = 0; r < table.size(); ++r) {
      if (table.at(r, "variable") == "nc" && table.at(r, "column") == "indirect") {
        found = true;
        CHECK(table.at(r, "estimate") == "-0.3");
        CHECK(table.at(r, "stars") == "*");
      }
    }
    CHECK(found);
  }

  TEST_CASE("OLS-only report omits the effects columns") {
    auto j = fixture();
    j["slx"] = nullptr;
    const auto t = report::regression_table(j);
    CHECK(t.text.find("Direct effect") == std::string::npos);
    CHECK(t.text.find("SLX Model") == std::string::npos);
    CHECK(t.text.find("-0.123***") != std::string::npos);
  }

  TEST_CASE("strict stars change the note") {
    auto j = fixture();
    j["significance"] = "strict";
    CHECK(report::regression_table(j).text.find("0.1%, 1%, and 5%") != std::string::npos);
  }

  TEST_CASE("number formatting and alignment") {
    CHECK(report::fixed3(-0.0004) == "0.000");
    CHECK(report::fixed3(1.23456) == "1.235");
    CHECK(report::abbreviation("sdp") == "SDP");
    CHECK(report::long_name("nc") == "Number of claims");
    CHECK(report::align({{"a", "1"}, {"bb", "22"}}) == "a    1\nbb  22\n");
  }

  TEST_CASE("missing artifacts are reported") {
    CHECK_THROWS_AS(report::emit_report("/nonexistent/artifacts"), InvalidArgument);
  }
}
